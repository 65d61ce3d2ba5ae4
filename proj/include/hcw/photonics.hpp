#pragma once

// Link physics for one decoy-state BB84 link: dB/linear conversion, asymptotic
// weak-coherent gains and error rates, vacuum + weak-decoy single-photon
// bounds and the resulting secure key rate.
//
// The formula layer is templated on the scalar type so it can be evaluated
// in extended precision; the configuration structs are plain doubles.

#include <hcw/error.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

namespace hcw::photonics
{

enum class Environment
{
    intercity,
    metro,
    patch
};

std::string_view
to_string(Environment env);
Environment
environment_from_string(std::string_view text);

/// Average attenuation per kilometre (dB/km, positive) for an environment class.
double
loss_coefficient(Environment env);

struct FiberChannel
{
    std::string id;
    double length_km = 0.0;
    double loss_db = 0.0; // non-positive
    Environment environment = Environment::metro;
};

/// Signal:decoy:vacuum pulse ratio.
struct PulseMix
{
    int signal = 14;
    int decoy = 1;
    int vacuum = 1;

    int
    total() const
    {
        return signal + decoy + vacuum;
    }
    double
    signal_fraction() const
    {
        return static_cast<double>(signal) / total();
    }
    double
    decoy_fraction() const
    {
        return static_cast<double>(decoy) / total();
    }
    double
    vacuum_fraction() const
    {
        return static_cast<double>(vacuum) / total();
    }
};

struct SourceConfig
{
    double pulse_rate_hz = 2.0e7;
    double mu_signal = 0.65;
    double nu_decoy = 0.1;
    PulseMix mix;
    double quantum_wavelength_nm = 1550.92;
    double sync_wavelength_nm = 1549.32;
    double pulse_width_ps = 600.0;

    /// Throws ParameterError unless 0 < nu < mu < 1 and the mix is positive.
    void
    validate() const;
};

struct DetectorConfig
{
    double eta_det = 0.1;
    double y0_dark = 4.0e-6;
    double y_background = 0.0;
    double e_det = 0.01;
    double e0 = 0.5;
    int apd_count = 1;

    /// Fraction of gates that can register a click: one APD only sees half
    /// of the phase-decoding outcomes.
    double
    duty_factor() const
    {
        return apd_count == 2 ? 1.0 : 0.5;
    }

    /// Y0: probability of a click per gate with no signal photon.
    double
    vacuum_yield() const
    {
        return y0_dark + y_background;
    }

    void
    validate() const;
};

struct SecurityParams
{
    double q = 0.5; // sifting factor
    double f_ec = 1.16;
    double qber_abort_threshold = 0.11;

    void
    validate() const;
};

enum class Mode
{
    lab,
    field
};

std::string_view
to_string(Mode mode);
Mode
mode_from_string(std::string_view text);

/// Extra noise present in the deployed network but not in the lab: leakage
/// photons from parallel fibres and vibration-induced misalignment.
struct FieldNoise
{
    double background_yield = 1.0e-6;
    double misalignment_increment = 1.0e-3;
};

/// Detector as seen in the given operating mode.
DetectorConfig
in_mode(DetectorConfig detector, Mode mode, const FieldNoise& noise = {});

template <typename Scalar = double>
struct LinkBudget
{
    Scalar q_mu{};
    Scalar q_nu{};
    Scalar e_mu{};
    Scalar e_nu{};
    Scalar y0{};
};

template <typename Scalar = double>
struct DecoyBounds
{
    Scalar y1_lower{};
    Scalar e1_upper{};
    bool clamped = false; // an intermediate bound went out of range
};

template <typename Scalar>
Scalar
transmittance(Scalar loss_db)
{
    if (!(loss_db <= Scalar(0)))
    {
        throw DomainError("transmittance: loss must be non-positive, got "
                          + std::to_string(static_cast<double>(loss_db)) + " dB");
    }
    using std::pow;
    return pow(Scalar(10), loss_db / Scalar(10));
}

/// Q = Y0 + 1 - exp(-eta mu)
template <typename Scalar>
Scalar
expected_gain(Scalar mu, Scalar eta, Scalar y0)
{
    using std::expm1;
    return y0 - expm1(-eta * mu);
}

/// E = (e0 Y0 + e_det (1 - exp(-eta mu))) / Q
template <typename Scalar>
Scalar
expected_qber(Scalar mu, Scalar eta, Scalar y0, Scalar e_det, Scalar e0 = Scalar(0.5))
{
    using std::expm1;
    const Scalar gain = expected_gain(mu, eta, y0);
    if (!(gain > Scalar(0)))
    {
        throw UndefinedQberError("expected_qber: zero gain (no clicks)");
    }
    return (e0 * y0 - e_det * expm1(-eta * mu)) / gain;
}

template <typename Scalar>
Scalar
binary_entropy(Scalar p)
{
    if (!(p >= Scalar(0) && p <= Scalar(1)))
    {
        throw DomainError("binary_entropy: p outside [0, 1]");
    }
    if (p == Scalar(0) || p == Scalar(1))
    {
        return Scalar(0);
    }
    using std::log2;
    return -p * log2(p) - (Scalar(1) - p) * log2(Scalar(1) - p);
}

/// Vacuum + weak-decoy bounds on the single-photon yield and error rate.
template <typename Scalar>
DecoyBounds<Scalar>
decoy_bounds(const LinkBudget<Scalar>& budget, Scalar mu, Scalar nu, Scalar e0 = Scalar(0.5))
{
    if (!(nu > Scalar(0) && mu > nu))
    {
        throw ParameterError("decoy_bounds: need 0 < nu < mu");
    }
    if (budget.q_mu < Scalar(0) || budget.q_nu < Scalar(0) || budget.y0 < Scalar(0)
        || budget.e_mu < Scalar(0) || budget.e_nu < Scalar(0))
    {
        throw ParameterError("decoy_bounds: negative gain, yield or error rate");
    }

    using std::exp;
    DecoyBounds<Scalar> out;
    const Scalar mu2 = mu * mu;
    const Scalar nu2 = nu * nu;
    Scalar y1 = (mu / (mu * nu - nu2))
                * (budget.q_nu * exp(nu) - budget.q_mu * exp(mu) * nu2 / mu2
                   - (mu2 - nu2) / mu2 * budget.y0);
    if (y1 <= Scalar(0))
    {
        out.clamped = true;
        out.y1_lower = Scalar(0);
        out.e1_upper = Scalar(1);
        return out;
    }
    if (y1 > Scalar(1))
    {
        out.clamped = true;
        y1 = Scalar(1);
    }
    out.y1_lower = y1;

    Scalar e1 = (budget.e_nu * budget.q_nu * exp(nu) - e0 * budget.y0) / (y1 * nu);
    if (e1 < Scalar(0) || e1 > Scalar(1))
    {
        out.clamped = true;
        e1 = std::clamp(e1, Scalar(0), Scalar(1));
    }
    out.e1_upper = e1;
    return out;
}

/// Click probability per gate for a signal photon reaching the receiver:
/// channel transmittance x detector efficiency x APD duty factor.
double
overall_efficiency(double loss_db, const DetectorConfig& detector);

/// Asymptotic gains and error rates of the signal and decoy intensities.
LinkBudget<double>
link_budget(double loss_db, const SourceConfig& source, const DetectorConfig& detector);

/// Secure bits per second given observed (or expected) gains and error rates.
double
key_rate_from_budget(const LinkBudget<double>& budget,
                     const SourceConfig& source,
                     const SecurityParams& security,
                     double e0 = 0.5);

struct LinkReport
{
    double eta = 0.0;
    LinkBudget<double> budget;
    DecoyBounds<double> bounds;
    double rate_bps = 0.0;
};

LinkReport
evaluate_link(double loss_db,
              const SourceConfig& source,
              const DetectorConfig& detector,
              const SecurityParams& security);

FiberChannel
channel_from_length(std::string id, double length_km, Environment env);

double
secure_key_rate(const FiberChannel& channel,
                const SourceConfig& source,
                const DetectorConfig& detector,
                const SecurityParams& security);

} // namespace hcw::photonics
