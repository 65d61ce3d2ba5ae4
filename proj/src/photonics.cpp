#include <hcw/photonics.hpp>

namespace hcw::photonics
{

std::string_view
to_string(Environment env)
{
    switch (env)
    {
    case Environment::intercity:
        return "intercity";
    case Environment::metro:
        return "metro";
    case Environment::patch:
        return "patch";
    }
    return "metro";
}

Environment
environment_from_string(std::string_view text)
{
    if (text == "intercity")
    {
        return Environment::intercity;
    }
    if (text == "metro")
    {
        return Environment::metro;
    }
    if (text == "patch")
    {
        return Environment::patch;
    }
    throw ParameterError("unknown fiber environment '" + std::string(text) + "'");
}

double
loss_coefficient(Environment env)
{
    // OTDR averages: clean backbone fibre vs spliced metro plant.
    return env == Environment::intercity ? 0.21 : 0.46;
}

std::string_view
to_string(Mode mode)
{
    return mode == Mode::lab ? "lab" : "field";
}

Mode
mode_from_string(std::string_view text)
{
    if (text == "lab")
    {
        return Mode::lab;
    }
    if (text == "field")
    {
        return Mode::field;
    }
    throw ParameterError("unknown mode '" + std::string(text) + "' (expected lab|field)");
}

void
SourceConfig::validate() const
{
    if (!(nu_decoy > 0.0 && nu_decoy < mu_signal && mu_signal < 1.0))
    {
        throw ParameterError("source: need 0 < nu_decoy < mu_signal < 1");
    }
    if (mix.signal <= 0 || mix.decoy <= 0 || mix.vacuum <= 0)
    {
        throw ParameterError("source: pulse mix entries must be positive");
    }
    if (!(pulse_rate_hz > 0.0))
    {
        throw ParameterError("source: pulse rate must be positive");
    }
}

void
DetectorConfig::validate() const
{
    if (!(eta_det > 0.0 && eta_det <= 1.0))
    {
        throw ParameterError("detector: eta_det must lie in (0, 1]");
    }
    if (y0_dark < 0.0 || y_background < 0.0)
    {
        throw ParameterError("detector: yields must be non-negative");
    }
    if (!(e_det >= 0.0 && e_det < 0.5))
    {
        throw ParameterError("detector: e_det must lie in [0, 0.5)");
    }
    if (apd_count != 1 && apd_count != 2)
    {
        throw ParameterError("detector: apd_count must be 1 or 2");
    }
}

void
SecurityParams::validate() const
{
    if (!(f_ec >= 1.0))
    {
        throw ParameterError("security: f_ec must be >= 1");
    }
    if (!(q > 0.0 && q <= 1.0))
    {
        throw ParameterError("security: sifting factor must lie in (0, 1]");
    }
}

DetectorConfig
in_mode(DetectorConfig detector, Mode mode, const FieldNoise& noise)
{
    if (mode == Mode::field)
    {
        detector.y_background += noise.background_yield;
        detector.e_det += noise.misalignment_increment;
    }
    return detector;
}

double
overall_efficiency(double loss_db, const DetectorConfig& detector)
{
    return transmittance(loss_db) * detector.eta_det * detector.duty_factor();
}

LinkBudget<double>
link_budget(double loss_db, const SourceConfig& source, const DetectorConfig& detector)
{
    const double eta = overall_efficiency(loss_db, detector);
    const double y0 = detector.vacuum_yield();
    LinkBudget<double> b;
    b.y0 = y0;
    b.q_mu = expected_gain(source.mu_signal, eta, y0);
    b.q_nu = expected_gain(source.nu_decoy, eta, y0);
    b.e_mu = expected_qber(source.mu_signal, eta, y0, detector.e_det, detector.e0);
    b.e_nu = expected_qber(source.nu_decoy, eta, y0, detector.e_det, detector.e0);
    return b;
}

namespace
{

double
rate_with_bounds(const LinkBudget<double>& budget,
                 const DecoyBounds<double>& bounds,
                 const SourceConfig& source,
                 const SecurityParams& security)
{
    if (budget.e_mu >= security.qber_abort_threshold)
    {
        return 0.0;
    }
    const double mu = source.mu_signal;
    const double q1 = bounds.y1_lower * mu * std::exp(-mu);
    const double e1 = std::min(bounds.e1_upper, 0.5);
    const double per_pulse = -budget.q_mu * security.f_ec * binary_entropy(budget.e_mu)
                             + q1 * (1.0 - binary_entropy(e1));
    return source.pulse_rate_hz * source.mix.signal_fraction() * security.q
           * std::max(0.0, per_pulse);
}

} // namespace

double
key_rate_from_budget(const LinkBudget<double>& budget,
                     const SourceConfig& source,
                     const SecurityParams& security,
                     double e0)
{
    if (budget.e_mu >= security.qber_abort_threshold)
    {
        return 0.0;
    }
    const auto bounds = decoy_bounds(budget, source.mu_signal, source.nu_decoy, e0);
    return rate_with_bounds(budget, bounds, source, security);
}

LinkReport
evaluate_link(double loss_db,
              const SourceConfig& source,
              const DetectorConfig& detector,
              const SecurityParams& security)
{
    source.validate();
    detector.validate();
    security.validate();

    LinkReport r;
    r.eta = overall_efficiency(loss_db, detector);
    r.budget = link_budget(loss_db, source, detector);
    r.bounds = decoy_bounds(r.budget, source.mu_signal, source.nu_decoy, detector.e0);
    r.rate_bps = rate_with_bounds(r.budget, r.bounds, source, security);
    return r;
}

FiberChannel
channel_from_length(std::string id, double length_km, Environment env)
{
    if (length_km < 0.0)
    {
        throw DomainError("channel_from_length: negative length");
    }
    FiberChannel ch;
    ch.id = std::move(id);
    ch.length_km = length_km;
    ch.environment = env;
    ch.loss_db = length_km == 0.0 ? 0.0 : -loss_coefficient(env) * length_km;
    return ch;
}

double
secure_key_rate(const FiberChannel& channel,
                const SourceConfig& source,
                const DetectorConfig& detector,
                const SecurityParams& security)
{
    return evaluate_link(channel.loss_db, source, detector, security).rate_bps;
}

} // namespace hcw::photonics
