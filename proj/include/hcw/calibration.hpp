#pragma once

// One-shot least-squares calibration of the unpublished detector parameters
// against the measured intercity observables, and the versioned fixture that
// stores the result.

#include <hcw/photonics.hpp>

#include <Eigen/Core>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hcw::photonics
{

/// One measured link used as a fit target (field-mode observables).
struct CalibrationTarget
{
    std::string link;
    double loss_db = 0.0;
    int apd_count = 1;
    double rate_bps = 0.0;
    std::optional<double> qber_signal;
    std::optional<double> qber_decoy;
};

struct CalibrationProblem
{
    SourceConfig source;
    SecurityParams security;
    FieldNoise field_noise;
    double e_det = 0.01; // lab misalignment, held fixed
    std::vector<CalibrationTarget> targets;
    double eta_det_start = 0.05;
    double y0_dark_start = 4.0e-6;
};

/// The two intercity links with their published rates and Hefei-Chaohu QBERs.
CalibrationProblem
intercity_problem();

struct CalibrationResult
{
    double eta_det = 0.0;
    double y0_dark = 0.0;
    Eigen::VectorXd residuals; // relative errors, target order, rate before QBERs
    int iterations = 0;

    double
    cost() const
    {
        return 0.5 * residuals.squaredNorm();
    }
};

/// Relative residuals of a candidate (eta_det, y0_dark) against every target.
Eigen::VectorXd
calibration_residuals(const CalibrationProblem& problem, double eta_det, double y0_dark);

/// Levenberg-Marquardt fit in log-parameter space.
CalibrationResult
fit_detector(const CalibrationProblem& problem);

struct DetectorClass
{
    double eta_det = 0.0;
    double y0_dark = 0.0;
    double e_det = 0.01;
};

struct CalibrationFixture
{
    static constexpr int schema_version = 1;

    std::string version;
    std::map<std::string, DetectorClass> classes;
    std::vector<CalibrationTarget> targets;
    std::vector<double> residuals;

    const DetectorClass&
    detector_class(const std::string& name) const;
};

CalibrationFixture
make_fixture(const CalibrationProblem& problem,
             const CalibrationResult& result,
             std::string version,
             std::string class_name = "standard");

CalibrationFixture
load_calibration(const std::filesystem::path& path);
CalibrationFixture
parse_calibration(const std::string& text, const std::string& source);
std::string
dump_calibration(const CalibrationFixture& fixture);

} // namespace hcw::photonics
