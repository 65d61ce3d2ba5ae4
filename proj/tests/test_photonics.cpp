// Link model against values frozen from tests/oracles/photonics_oracle.py
// (40-digit evaluation), plus decoy-bound properties.

#include <hcw/calibration.hpp>
#include <hcw/catalog.hpp>
#include <hcw/photonics.hpp>

#include <doctest.h>

#include <random>

using namespace hcw;
using namespace hcw::photonics;

namespace
{

DetectorConfig
oracle_detector()
{
    DetectorConfig d;
    d.eta_det = 0.1;
    d.y0_dark = 5e-6;
    d.e_det = 0.01;
    d.apd_count = 2;
    return d;
}

} // namespace

TEST_CASE("transmittance and loss conversions")
{
    CHECK(transmittance(-18.4) == doctest::Approx(0.0144543977074593).epsilon(1e-14));
    CHECK(transmittance(0.0) == 1.0);
    CHECK_THROWS_AS(transmittance(0.5), DomainError);

    CHECK(channel_from_length("HC", 85.1, Environment::intercity).loss_db == doctest::Approx(-17.871).epsilon(1e-12));
    CHECK(channel_from_length("CW", 69.7, Environment::intercity).loss_db == doctest::Approx(-14.637).epsilon(1e-12));
    CHECK(channel_from_length("x", 0.0, Environment::metro).loss_db == 0.0);
    CHECK_THROWS_AS(channel_from_length("x", -1.0, Environment::metro), DomainError);
}

TEST_CASE("gain, qber and entropy")
{
    CHECK(expected_gain(0.65, 1e-3, 5e-6) == doctest::Approx(0.000654788795763397).epsilon(1e-13));
    CHECK(expected_qber(0.65, 1e-3, 5e-6, 0.01) == doctest::Approx(0.0137416645120563).epsilon(1e-13));
    CHECK(binary_entropy(0.11) == doctest::Approx(0.499915958164528).epsilon(1e-14));
    CHECK(binary_entropy(0.0) == 0.0);
    CHECK(binary_entropy(0.5) == doctest::Approx(1.0));
    CHECK_THROWS_AS(binary_entropy(1.5), DomainError);
    CHECK_THROWS_AS(expected_qber(0.65, 0.0, 0.0, 0.01), UndefinedQberError);

    // Dark-count-only link: QBER tends to e0.
    CHECK(expected_qber(0.65, 0.0, 1e-6, 0.01) == doctest::Approx(0.5));
}

TEST_CASE("long double evaluation agrees with double")
{
    const long double g = expected_gain<long double>(0.65L, 1e-3L, 5e-6L);
    CHECK(static_cast<double>(g) == doctest::Approx(0.000654788795763397).epsilon(1e-15));
}

TEST_CASE("key rate example")
{
    const SourceConfig src;
    const SecurityParams sec;
    const auto r = evaluate_link(-18.4, src, oracle_detector(), sec);
    CHECK(r.eta == doctest::Approx(0.00144543977074593).epsilon(1e-13));
    CHECK(r.budget.q_mu == doctest::Approx(0.000944094625370456).epsilon(1e-12));
    CHECK(r.budget.q_nu == doctest::Approx(0.000149533531097246).epsilon(1e-12));
    CHECK(r.budget.e_mu == doctest::Approx(0.0125950788556164).epsilon(1e-12));
    CHECK(r.budget.e_nu == doctest::Approx(0.0263842850631722).epsilon(1e-12));
    CHECK(r.bounds.y1_lower == doctest::Approx(0.00138952107402431).epsilon(1e-10));
    CHECK(r.bounds.e1_upper == doctest::Approx(0.0133878491123277).epsilon(1e-10));
    CHECK(r.rate_bps == doctest::Approx(2768.0933837923).epsilon(1e-9));
    CHECK_FALSE(r.bounds.clamped);
}

TEST_CASE("single APD halves the usable gates")
{
    auto d = oracle_detector();
    const double two = overall_efficiency(-10.0, d);
    d.apd_count = 1;
    CHECK(overall_efficiency(-10.0, d) == doctest::Approx(0.5 * two));
}

TEST_CASE("abort threshold and parameter validation")
{
    SourceConfig src;
    SecurityParams sec;
    auto d = oracle_detector();
    d.e_det = 0.2;
    CHECK(evaluate_link(-5.0, src, d, sec).rate_bps == 0.0);

    src.nu_decoy = 0.7;
    CHECK_THROWS_AS(evaluate_link(-5.0, src, oracle_detector(), sec), ParameterError);
    src = SourceConfig{};
    sec.f_ec = 0.9;
    CHECK_THROWS_AS(evaluate_link(-5.0, src, oracle_detector(), sec), ParameterError);
    sec = SecurityParams{};
    d = oracle_detector();
    d.apd_count = 3;
    CHECK_THROWS_AS(evaluate_link(-5.0, src, d, sec), ParameterError);

    LinkBudget<double> bad;
    bad.q_mu = -1.0;
    CHECK_THROWS_AS(decoy_bounds(bad, 0.65, 0.1), ParameterError);
    CHECK_THROWS_AS(decoy_bounds(LinkBudget<double>{}, 0.1, 0.65), ParameterError);
}

TEST_CASE("field mode adds background yield and misalignment")
{
    const auto lab = oracle_detector();
    const auto field = in_mode(lab, Mode::field);
    CHECK(field.vacuum_yield() == doctest::Approx(lab.vacuum_yield() + 1e-6));
    CHECK(field.e_det == doctest::Approx(lab.e_det + 1e-3));
    CHECK(in_mode(lab, Mode::lab).vacuum_yield() == lab.vacuum_yield());
    CHECK(mode_from_string("lab") == Mode::lab);
    CHECK_THROWS_AS(mode_from_string("space"), ParameterError);
}

TEST_CASE("decoy bounds are sound for the ideal weak-coherent model")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> loss(-35.0, -1.0);
    std::uniform_real_distribution<double> eta_det(0.02, 0.2);
    std::uniform_real_distribution<double> logy0(-7.0, -4.0);
    std::uniform_real_distribution<double> edet(0.0, 0.05);
    std::uniform_real_distribution<double> mu(0.3, 0.9);
    std::uniform_real_distribution<double> nu_frac(0.05, 0.5);
    for (int i = 0; i < 1000; ++i)
    {
        SourceConfig src;
        src.mu_signal = mu(rng);
        src.nu_decoy = src.mu_signal * nu_frac(rng);
        DetectorConfig d;
        d.eta_det = eta_det(rng);
        d.y0_dark = std::pow(10.0, logy0(rng));
        d.e_det = edet(rng);
        d.apd_count = 2;
        const double l = loss(rng);
        const auto b = link_budget(l, src, d);
        const auto bounds = decoy_bounds(b, src.mu_signal, src.nu_decoy);
        const double eta = overall_efficiency(l, d);
        const double y0 = d.vacuum_yield();
        const double y1 = y0 + eta;
        const double e1 = (0.5 * y0 + d.e_det * eta) / y1;
        // Both common single-photon yield forms; the second is the smaller.
        CHECK(bounds.y1_lower <= y1 * (1.0 + 1e-9));
        CHECK(bounds.y1_lower <= (y0 + eta - y0 * eta) * (1.0 + 1e-9));
        CHECK(bounds.e1_upper >= e1 * (1.0 - 1e-9));
    }
}

TEST_CASE("key rate is monotone in loss, vacuum yield and misalignment")
{
    const SourceConfig src;
    const SecurityParams sec;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 300; ++i)
    {
        DetectorConfig d;
        d.eta_det = 0.03 + 0.1 * u(rng);
        d.y0_dark = 1e-6 + 1e-5 * u(rng);
        d.e_det = 0.03 * u(rng);
        const double l = -30.0 * u(rng);
        const double base = evaluate_link(l, src, d, sec).rate_bps;
        CHECK(evaluate_link(l - 0.5, src, d, sec).rate_bps <= base * (1.0 + 1e-12));
        auto noisier = d;
        noisier.y0_dark *= 1.5;
        CHECK(evaluate_link(l, src, noisier, sec).rate_bps <= base * (1.0 + 1e-12));
        auto tilted = d;
        tilted.e_det += 0.005;
        CHECK(evaluate_link(l, src, tilted, sec).rate_bps <= base * (1.0 + 1e-12));
    }
}

TEST_CASE("fiber catalog")
{
    const auto cat = FiberCatalog::load(HCW_DATA_DIR "/fiber_links.csv");
    CHECK(cat.entries().size() == 8);
    CHECK(cat.at("Hefei-Chaohu").channel.loss_db == -18.4);
    CHECK(cat.at("Hefei-Chaohu").channel.environment == Environment::intercity);
    CHECK(cat.at("WHB-Qasky").endpoint_b == "Qasky");
    CHECK(cat.find("nope") == nullptr);

    CHECK_THROWS_AS(FiberCatalog::parse("id,endpoint_a,endpoint_b,length_km,loss_db,environment\n"
                                        "x,A,B,1.0,+2.0,metro\n",
                                        "t.csv"),
                    ConfigError);
    try
    {
        FiberCatalog::parse("id,endpoint_a,endpoint_b,length_km,loss_db,environment\n"
                            "x,A,B,1.0,-1.0,metro\n"
                            "y,A,B,abc,-1.0,metro\n",
                            "t.csv");
        FAIL("expected ConfigError");
    }
    catch (const ConfigError& e)
    {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("calibration fixture round trip")
{
    const auto fixture = load_calibration(HCW_DATA_DIR "/calibration.yaml");
    const auto& std_class = fixture.detector_class("standard");
    CHECK(std_class.eta_det > 0.0);
    CHECK(std_class.y0_dark > 0.0);
    CHECK_THROWS(fixture.detector_class("exotic"));

    const auto again = parse_calibration(dump_calibration(fixture), "again");
    CHECK(again.detector_class("standard").eta_det == doctest::Approx(std_class.eta_det).epsilon(1e-10));
    CHECK(again.version == fixture.version);
}

TEST_CASE("calibration reproduces the stored fit")
{
    const auto problem = intercity_problem();
    const auto fit = fit_detector(problem);
    const auto fixture = load_calibration(HCW_DATA_DIR "/calibration.yaml");
    CHECK(fit.eta_det == doctest::Approx(fixture.detector_class("standard").eta_det).epsilon(1e-6));
    CHECK(fit.y0_dark == doctest::Approx(fixture.detector_class("standard").y0_dark).epsilon(1e-6));
    // The fit is a stationary point: nudging either parameter does not help.
    const double c0 = 0.5 * calibration_residuals(problem, fit.eta_det, fit.y0_dark).squaredNorm();
    for (const double f : {0.98, 1.02})
    {
        CHECK(0.5 * calibration_residuals(problem, fit.eta_det * f, fit.y0_dark).squaredNorm() >= c0);
        CHECK(0.5 * calibration_residuals(problem, fit.eta_det, fit.y0_dark * f).squaredNorm() >= c0);
    }
}
