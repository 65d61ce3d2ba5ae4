#include <hcw/calibration.hpp>
#include <hcw/io.hpp>

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <cmath>
#include <sstream>

namespace hcw::photonics
{

CalibrationProblem
intercity_problem()
{
    CalibrationProblem p;
    CalibrationTarget hefei_chaohu;
    hefei_chaohu.link = "Hefei-Chaohu";
    hefei_chaohu.loss_db = -18.4;
    hefei_chaohu.apd_count = 2;
    hefei_chaohu.rate_bps = 770.0;
    hefei_chaohu.qber_signal = 0.0116;
    hefei_chaohu.qber_decoy = 0.0526;

    CalibrationTarget chaohu_wuhu;
    chaohu_wuhu.link = "Chaohu-Wuhu";
    chaohu_wuhu.loss_db = -14.1;
    chaohu_wuhu.apd_count = 1;
    chaohu_wuhu.rate_bps = 800.0;

    p.targets = {hefei_chaohu, chaohu_wuhu};
    return p;
}

Eigen::VectorXd
calibration_residuals(const CalibrationProblem& problem, double eta_det, double y0_dark)
{
    std::vector<double> out;
    for (const auto& t : problem.targets)
    {
        DetectorConfig det;
        det.eta_det = eta_det;
        det.y0_dark = y0_dark;
        det.e_det = problem.e_det;
        det.apd_count = t.apd_count;
        det = in_mode(det, Mode::field, problem.field_noise);

        const auto report = evaluate_link(t.loss_db, problem.source, det, problem.security);
        out.push_back(report.rate_bps / t.rate_bps - 1.0);
        if (t.qber_signal)
        {
            out.push_back(report.budget.e_mu / *t.qber_signal - 1.0);
        }
        if (t.qber_decoy)
        {
            out.push_back(report.budget.e_nu / *t.qber_decoy - 1.0);
        }
    }
    return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

namespace
{

struct LogResidual
{
    using Scalar = double;
    enum
    {
        InputsAtCompileTime = Eigen::Dynamic,
        ValuesAtCompileTime = Eigen::Dynamic
    };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const CalibrationProblem* problem;
    int n_values;

    int
    inputs() const
    {
        return 2;
    }
    int
    values() const
    {
        return n_values;
    }

    int
    operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const
    {
        const double eta = std::exp(x(0));
        const double y0 = std::exp(x(1));
        if (!(eta > 0.0 && eta <= 1.0))
        {
            fvec.setConstant(1e3);
            return 0;
        }
        fvec = calibration_residuals(*problem, eta, y0);
        return 0;
    }
};

} // namespace

CalibrationResult
fit_detector(const CalibrationProblem& problem)
{
    const auto probe = calibration_residuals(problem, problem.eta_det_start, problem.y0_dark_start);
    if (probe.size() < 2)
    {
        throw ParameterError("calibration needs at least two observables");
    }

    LogResidual f{&problem, static_cast<int>(probe.size())};
    Eigen::NumericalDiff<LogResidual> diff(f);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<LogResidual>> lm(diff);
    lm.parameters.xtol = 1e-12;
    lm.parameters.ftol = 1e-14;
    lm.parameters.maxfev = 2000;

    Eigen::VectorXd x(2);
    x << std::log(problem.eta_det_start), std::log(problem.y0_dark_start);
    lm.minimize(x);

    CalibrationResult r;
    r.eta_det = std::exp(x(0));
    r.y0_dark = std::exp(x(1));
    r.residuals = calibration_residuals(problem, r.eta_det, r.y0_dark);
    r.iterations = static_cast<int>(lm.iter);
    return r;
}

const DetectorClass&
CalibrationFixture::detector_class(const std::string& name) const
{
    const auto it = classes.find(name);
    if (it == classes.end())
    {
        throw ConfigError("calibration fixture has no detector class '" + name + "'");
    }
    return it->second;
}

CalibrationFixture
make_fixture(const CalibrationProblem& problem,
             const CalibrationResult& result,
             std::string version,
             std::string class_name)
{
    CalibrationFixture fx;
    fx.version = std::move(version);
    fx.classes[class_name] = DetectorClass{result.eta_det, result.y0_dark, problem.e_det};
    fx.targets = problem.targets;
    fx.residuals.assign(result.residuals.data(), result.residuals.data() + result.residuals.size());
    return fx;
}

CalibrationFixture
parse_calibration(const std::string& text, const std::string& source)
{
    const auto doc = io::Document::parse(text, source);
    const auto& root = doc.root();
    const auto schema = doc.integer(root, "schema_version");
    if (schema != CalibrationFixture::schema_version)
    {
        doc.fail(root["schema_version"], "unsupported calibration schema_version " + std::to_string(schema));
    }
    CalibrationFixture fx;
    fx.version = doc.string(root, "version");
    const auto classes = doc.required(root, "detector_classes");
    if (!classes.IsMap() || classes.size() == 0)
    {
        doc.fail(classes, "detector_classes must be a non-empty mapping");
    }
    for (const auto& kv : classes)
    {
        DetectorClass c;
        c.eta_det = doc.number(kv.second, "eta_det");
        c.y0_dark = doc.number(kv.second, "y0_dark");
        c.e_det = doc.number_or(kv.second, "e_det", 0.01);
        if (!(c.eta_det > 0.0 && c.eta_det <= 1.0) || c.y0_dark < 0.0)
        {
            doc.fail(kv.second, "detector class out of range");
        }
        fx.classes[doc.as_string(kv.first)] = c;
    }
    if (const auto targets = root["targets"])
    {
        for (const auto& t : targets)
        {
            CalibrationTarget ct;
            ct.link = doc.string(t, "link");
            ct.loss_db = doc.number(t, "loss_db");
            ct.apd_count = static_cast<int>(doc.integer(t, "apd_count"));
            ct.rate_bps = doc.number(t, "rate_bps");
            if (t["qber_signal"])
            {
                ct.qber_signal = doc.number(t, "qber_signal");
            }
            if (t["qber_decoy"])
            {
                ct.qber_decoy = doc.number(t, "qber_decoy");
            }
            fx.targets.push_back(ct);
        }
    }
    if (const auto res = root["residuals"])
    {
        for (const auto& v : res)
        {
            fx.residuals.push_back(doc.as_number(v));
        }
    }
    return fx;
}

CalibrationFixture
load_calibration(const std::filesystem::path& path)
{
    return parse_calibration(io::read_text(path), path.string());
}

std::string
dump_calibration(const CalibrationFixture& fixture)
{
    YAML::Emitter out;
    out.SetDoublePrecision(12);
    out << YAML::BeginMap;
    out << YAML::Key << "schema_version" << YAML::Value << CalibrationFixture::schema_version;
    out << YAML::Key << "version" << YAML::Value << fixture.version;
    out << YAML::Key << "detector_classes" << YAML::Value << YAML::BeginMap;
    for (const auto& [name, c] : fixture.classes)
    {
        out << YAML::Key << name << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "eta_det" << YAML::Value << c.eta_det;
        out << YAML::Key << "y0_dark" << YAML::Value << c.y0_dark;
        out << YAML::Key << "e_det" << YAML::Value << c.e_det;
        out << YAML::EndMap;
    }
    out << YAML::EndMap;
    out << YAML::Key << "targets" << YAML::Value << YAML::BeginSeq;
    for (const auto& t : fixture.targets)
    {
        out << YAML::BeginMap;
        out << YAML::Key << "link" << YAML::Value << t.link;
        out << YAML::Key << "loss_db" << YAML::Value << t.loss_db;
        out << YAML::Key << "apd_count" << YAML::Value << t.apd_count;
        out << YAML::Key << "rate_bps" << YAML::Value << t.rate_bps;
        if (t.qber_signal)
        {
            out << YAML::Key << "qber_signal" << YAML::Value << *t.qber_signal;
        }
        if (t.qber_decoy)
        {
            out << YAML::Key << "qber_decoy" << YAML::Value << *t.qber_decoy;
        }
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "residuals" << YAML::Value << YAML::Flow << fixture.residuals;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

} // namespace hcw::photonics
