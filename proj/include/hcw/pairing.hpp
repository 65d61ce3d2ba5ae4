#pragma once

// Transmitter/receiver pairing from a back-to-back QBER matrix.

#include <hcw/error.hpp>

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hcw::keymgmt
{

/// Rows are transmitters, columns receivers; a missing entry is NaN.
struct PairingMatrix
{
    std::vector<std::string> transmitters;
    std::vector<std::string> receivers;
    Eigen::MatrixXd qber;

    /// Table with header `transmitter,<R...>`; cells may carry '%'.
    static PairingMatrix
    parse(std::string_view text, std::string source);
    static PairingMatrix
    load(const std::filesystem::path& path);
};

enum class Objective
{
    min_sum,
    min_max
};

Objective
objective_from_string(std::string_view text);

struct Assignment
{
    std::vector<std::pair<std::string, std::string>> pairs; // transmitter order
    std::vector<int> columns;                               // receiver index per row
    double total = 0.0;
    double worst = 0.0;
};

/// Optimal bijection. Among optimal assignments the one whose receiver
/// sequence (in transmitter order) is lexicographically smallest wins.
/// Throws ShapeError for non-square matrices or missing entries.
Assignment
best_pairing(const PairingMatrix& matrix, Objective objective = Objective::min_sum);

/// Same, on a bare cost matrix.
std::vector<int>
best_assignment(const Eigen::MatrixXd& cost, Objective objective);

struct Violation
{
    std::string transmitter;
    std::string receiver;
    double qber = 0.0;
};

struct SymmetryReport
{
    bool pass = true;
    std::vector<Violation> violations;
};

/// Passes iff every present entry is strictly below `threshold`.
SymmetryReport
symmetry_check(const PairingMatrix& matrix, double threshold);

} // namespace hcw::keymgmt
