#include <hcw/io.hpp>
#include <hcw/pairing.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace hcw::keymgmt
{

PairingMatrix
PairingMatrix::parse(std::string_view text, std::string source)
{
    const auto table = io::parse_csv(text, std::move(source));
    if (table.header.empty())
    {
        throw ConfigError(table.source, 0, "empty pairing matrix");
    }
    PairingMatrix m;
    m.receivers.assign(table.header.begin() + 1, table.header.end());
    m.qber.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(m.receivers.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r)
    {
        const auto& row = table.rows[r];
        m.transmitters.push_back(row.cells[0]);
        for (std::size_t c = 1; c < row.cells.size(); ++c)
        {
            double v = std::numeric_limits<double>::quiet_NaN();
            if (!row.cells[c].empty())
            {
                v = io::parse_number(row.cells[c], table.source, row.line);
                if (!(v >= 0.0 && v <= 0.5))
                {
                    throw ConfigError(table.source, row.line, "QBER entry outside [0, 0.5]");
                }
            }
            m.qber(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) = v;
        }
    }
    return m;
}

PairingMatrix
PairingMatrix::load(const std::filesystem::path& path)
{
    return parse(io::read_text(path), path.string());
}

Objective
objective_from_string(std::string_view text)
{
    if (text == "min_sum")
    {
        return Objective::min_sum;
    }
    if (text == "min_max")
    {
        return Objective::min_max;
    }
    throw ParameterError("objective must be min_sum or min_max, got '" + std::string(text) + "'");
}

namespace
{

constexpr double tie_tolerance = 1e-9;

/// Minimum-cost perfect assignment (Hungarian method, potentials form).
/// Returns the optimal cost; `col_of_row` receives the assignment.
double
hungarian(const Eigen::MatrixXd& a, std::vector<int>& col_of_row)
{
    const int n = static_cast<int>(a.rows());
    col_of_row.assign(static_cast<std::size_t>(n), -1);
    if (n == 0)
    {
        return 0.0;
    }
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i)
    {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do
        {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j)
            {
                if (used[j])
                {
                    continue;
                }
                const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j])
                {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta)
                {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j)
            {
                if (used[j])
                {
                    u[p[j]] += delta;
                    v[j] -= delta;
                }
                else
                {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do
        {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    for (int j = 1; j <= n; ++j)
    {
        col_of_row[static_cast<std::size_t>(p[j] - 1)] = j - 1;
    }
    for (int i = 0; i < n; ++i)
    {
        total += a(i, col_of_row[static_cast<std::size_t>(i)]);
    }
    return total;
}

Eigen::MatrixXd
minor(const Eigen::MatrixXd& a, const std::vector<int>& rows, const std::vector<int>& cols)
{
    Eigen::MatrixXd m(rows.size(), cols.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
    {
        for (std::size_t c = 0; c < cols.size(); ++c)
        {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = a(rows[r], cols[c]);
        }
    }
    return m;
}

/// Whether rows `rows` can be matched into `cols` using allowed cells only.
bool
perfect_matching(const std::vector<std::vector<char>>& allowed, const std::vector<int>& rows, const std::vector<int>& cols)
{
    std::vector<int> match(cols.size(), -1);
    std::vector<char> seen;
    const std::function<bool(std::size_t)> augment = [&](std::size_t r) {
        for (std::size_t c = 0; c < cols.size(); ++c)
        {
            if (!allowed[rows[r]][cols[c]] || seen[c])
            {
                continue;
            }
            seen[c] = 1;
            if (match[c] < 0 || augment(static_cast<std::size_t>(match[c])))
            {
                match[c] = static_cast<int>(r);
                return true;
            }
        }
        return false;
    };
    for (std::size_t r = 0; r < rows.size(); ++r)
    {
        seen.assign(cols.size(), 0);
        if (!augment(r))
        {
            return false;
        }
    }
    return true;
}

std::vector<int>
lex_min_sum(const Eigen::MatrixXd& a)
{
    const int n = static_cast<int>(a.rows());
    std::vector<int> scratch;
    const double best = hungarian(a, scratch);
    const double tol = tie_tolerance * std::max(1.0, std::abs(best));

    std::vector<int> result(static_cast<std::size_t>(n), -1);
    std::vector<int> free_cols(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j)
    {
        free_cols[static_cast<std::size_t>(j)] = j;
    }
    double fixed = 0.0;
    for (int i = 0; i < n; ++i)
    {
        std::vector<int> rest_rows;
        for (int r = i + 1; r < n; ++r)
        {
            rest_rows.push_back(r);
        }
        for (std::size_t k = 0; k < free_cols.size(); ++k)
        {
            const int j = free_cols[k];
            auto rest_cols = free_cols;
            rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(k));
            const double rest = hungarian(minor(a, rest_rows, rest_cols), scratch);
            if (fixed + a(i, j) + rest <= best + tol)
            {
                result[static_cast<std::size_t>(i)] = j;
                fixed += a(i, j);
                free_cols = std::move(rest_cols);
                break;
            }
        }
    }
    return result;
}

std::vector<int>
lex_min_max(const Eigen::MatrixXd& a)
{
    const int n = static_cast<int>(a.rows());
    std::vector<double> levels(a.data(), a.data() + a.size());
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

    std::vector<int> all(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j)
    {
        all[static_cast<std::size_t>(j)] = j;
    }
    const auto allowed_at = [&](double level) {
        std::vector<std::vector<char>> ok(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n)));
        for (int i = 0; i < n; ++i)
        {
            for (int j = 0; j < n; ++j)
            {
                ok[i][j] = a(i, j) <= level;
            }
        }
        return ok;
    };

    // Smallest level admitting a perfect matching.
    std::size_t lo = 0;
    std::size_t hi = levels.size() - 1;
    while (lo < hi)
    {
        const auto mid = (lo + hi) / 2;
        if (perfect_matching(allowed_at(levels[mid]), all, all))
        {
            hi = mid;
        }
        else
        {
            lo = mid + 1;
        }
    }
    const auto ok = allowed_at(levels[lo]);

    std::vector<int> result(static_cast<std::size_t>(n), -1);
    std::vector<int> free_cols = all;
    for (int i = 0; i < n; ++i)
    {
        std::vector<int> rest_rows;
        for (int r = i + 1; r < n; ++r)
        {
            rest_rows.push_back(r);
        }
        for (std::size_t k = 0; k < free_cols.size(); ++k)
        {
            const int j = free_cols[k];
            if (!ok[i][j])
            {
                continue;
            }
            auto rest_cols = free_cols;
            rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(k));
            if (perfect_matching(ok, rest_rows, rest_cols))
            {
                result[static_cast<std::size_t>(i)] = j;
                free_cols = std::move(rest_cols);
                break;
            }
        }
    }
    return result;
}

} // namespace

std::vector<int>
best_assignment(const Eigen::MatrixXd& cost, Objective objective)
{
    if (cost.rows() != cost.cols())
    {
        throw ShapeError("pairing needs a square matrix, got " + std::to_string(cost.rows()) + "x"
                         + std::to_string(cost.cols()));
    }
    if (!cost.allFinite())
    {
        throw ShapeError("pairing matrix has missing entries");
    }
    if (cost.rows() == 0)
    {
        return {};
    }
    return objective == Objective::min_sum ? lex_min_sum(cost) : lex_min_max(cost);
}

Assignment
best_pairing(const PairingMatrix& matrix, Objective objective)
{
    if (static_cast<Eigen::Index>(matrix.transmitters.size()) != matrix.qber.rows()
        || static_cast<Eigen::Index>(matrix.receivers.size()) != matrix.qber.cols())
    {
        throw ShapeError("pairing labels do not match the matrix size");
    }
    Assignment out;
    out.columns = best_assignment(matrix.qber, objective);
    for (std::size_t i = 0; i < out.columns.size(); ++i)
    {
        const int j = out.columns[i];
        const double v = matrix.qber(static_cast<Eigen::Index>(i), j);
        out.pairs.emplace_back(matrix.transmitters[i], matrix.receivers[static_cast<std::size_t>(j)]);
        out.total += v;
        out.worst = std::max(out.worst, v);
    }
    return out;
}

SymmetryReport
symmetry_check(const PairingMatrix& matrix, double threshold)
{
    if (!(threshold > 0.0 && threshold < 0.5))
    {
        throw DomainError("symmetry threshold must lie in (0, 0.5)");
    }
    SymmetryReport report;
    for (Eigen::Index i = 0; i < matrix.qber.rows(); ++i)
    {
        for (Eigen::Index j = 0; j < matrix.qber.cols(); ++j)
        {
            const double v = matrix.qber(i, j);
            if (!std::isnan(v) && !(v < threshold))
            {
                report.violations.push_back(
                    {matrix.transmitters[static_cast<std::size_t>(i)], matrix.receivers[static_cast<std::size_t>(j)], v});
            }
        }
    }
    report.pass = report.violations.empty();
    return report;
}

} // namespace hcw::keymgmt
