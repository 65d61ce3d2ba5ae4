#include <hcw/simkit.hpp>

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hcw;
using namespace hcw::simkit;

namespace
{

const Scenario&
bundled()
{
    static const auto sc = load_scenario(HCW_DATA_DIR "/hcw_scenario.yaml");
    return sc;
}

/// The bundled scenario cut to `hours` with no events or sessions.
Scenario
quiet(double hours)
{
    auto sc = bundled();
    sc.duration_s = hours * 3600.0;
    sc.events.clear();
    sc.sessions.clear();
    return sc;
}

/// Keep only the listed domains.
void
only_domains(Scenario& sc, const std::set<std::string>& keep)
{
    std::erase_if(sc.network.domains, [&](const auto& d) { return !keep.count(d.id); });
}

std::vector<Sample>
samples_of(const Timeline& tl, const std::string& link)
{
    std::vector<Sample> out;
    for (const auto& s : tl.samples)
    {
        if (s.link == link)
        {
            out.push_back(s);
        }
    }
    return out;
}

double
mean_rate(const std::vector<Sample>& v, double from, double to)
{
    double sum = 0.0;
    int n = 0;
    for (const auto& s : v)
    {
        if (s.t > from && s.t <= to)
        {
            sum += s.rate_bps;
            ++n;
        }
    }
    return n > 0 ? sum / n : 0.0;
}

std::string
slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path
scratch(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("hcw_simkit_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string
timeline_csv(const Timeline& tl, const std::filesystem::path& dir, const std::string& name)
{
    const auto p = dir / name;
    write_timeline_csv(tl, p);
    return slurp(p);
}

} // namespace

TEST_CASE("bundled scenario loads")
{
    const auto& sc = bundled();
    CHECK(sc.name == "hefei-chaohu-wuhu");
    CHECK(sc.duration_s == doctest::Approx(5093.9 * 3600.0));
    CHECK(sc.sample_interval_s == 300.0);
    CHECK(sc.mode == photonics::Mode::field);
    REQUIRE(sc.events.size() == 5);
    int cuts = 0;
    for (const auto& e : sc.events)
    {
        cuts += e.kind == EventKind::fiber_cut && e.target == "WHB-Qasky";
    }
    CHECK(cuts == 3);
    CHECK(sc.events[1].kind == EventKind::power_outage);
    CHECK(sc.events[1].duration_s == 8.0 * 3600.0);
    CHECK(sc.events[3].kind == EventKind::temp_excursion);
    CHECK(sc.events[3].dark_multiplier == 2.0);
    REQUIRE(sc.sessions.size() == 3);
    CHECK(sc.sessions[0].mode == apps::OtpMode::preloaded);
    CHECK(sc.sessions[0].reload_every == std::optional<double>(86400.0));
    CHECK(sc.sessions[2].kind == SessionKind::vpn);
    CHECK_NOTHROW(sc.validate());
}

TEST_CASE("scenario loader diagnostics")
{
    const auto dir = scratch("load");
    const auto net = std::filesystem::absolute(HCW_DATA_DIR "/hcw_network.yaml").string();
    const auto write = [&](const std::string& body) {
        std::ofstream(dir / "s.yaml") << "schema_version: 1\nnetwork: " << net << "\nduration: 2h\n" << body;
        return dir / "s.yaml";
    };

    CHECK_NOTHROW(load_scenario(write("")));
    try
    {
        load_scenario(write("events:\n"
                            "  - {at: 1h, kind: fiber_cut, link: WHB-Qasky, repair_after: 1h}\n"
                            "  - {at: 2h, kind: fiber_cut, link: Nowhere, repair_after: 1h}\n"));
        FAIL("expected EventError");
    }
    catch (const EventError& e)
    {
        const std::string what = e.what();
        CHECK(what.find("s.yaml:6") != std::string::npos);
        CHECK(what.find("Nowhere") != std::string::npos);
    }
    CHECK_THROWS_AS(load_scenario(write("events:\n  - {at: 1h, kind: temp_excursion, detector: T1, "
                                        "dark_multiplier: 2}\n")),
                    EventError);
    CHECK_THROWS_AS(load_scenario(write("events:\n  - {at: 1h, kind: power_outage, node: Mars, "
                                        "restore_after: 1h}\n")),
                    EventError);
    CHECK_THROWS_AS(load_scenario(write("events:\n  - {at: 3h, kind: fiber_cut, link: WHB-Qasky, repair_after: 1h}\n"
                                        "  - {at: 1h, kind: fiber_cut, link: WHB-Qasky, repair_after: 1h}\n")),
                    EventError);
    try
    {
        load_scenario(write("events:\n  - {at: 1h, kind: earthquake}\n"));
        FAIL("expected ConfigError");
    }
    catch (const ConfigError& e)
    {
        CHECK(e.line() == 5);
    }
    CHECK_THROWS_AS(load_scenario(write("mode: orbit\n")), ConfigError);
    CHECK_THROWS_AS(load_scenario(write("sessions:\n  - {id: s, kind: otp, mode: preloaded, route: [WTPT, CHB], "
                                        "data_rate_bps: 64, card_bits: 100, reload_every: 0s}\n")),
                    ConfigError);
    CHECK_THROWS_AS(load_scenario(write("sessions:\n  - {id: s, kind: vpn, route: [WTPT, Mars]}\n")), ConfigError);
    CHECK_THROWS_AS(load_scenario(dir / "missing.yaml"), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("same seed gives the same timeline")
{
    const auto dir = scratch("det");
    auto sc = bundled();
    sc.duration_s = 30.0 * 3600.0;
    const auto a = run(sc);
    const auto b = run(sc);
    CHECK(timeline_csv(a, dir, "a.csv") == timeline_csv(b, dir, "b.csv"));
    CHECK(a.pools_json == b.pools_json);
    sc.seed += 1;
    CHECK(timeline_csv(run(sc), dir, "c.csv") != timeline_csv(a, dir, "a.csv"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("power outage zeroes the link for its window and it recovers")
{
    auto sc = quiet(52.0);
    only_domains(sc, {"Intercity"});
    const double start = 24.0 * 3600.0;
    const double end = start + 8.0 * 3600.0;
    EventSpec outage;
    outage.at = start;
    outage.kind = EventKind::power_outage;
    outage.target = "WTPT";
    outage.duration_s = end - start;
    sc.events.push_back(outage);

    const auto tl = run(sc);
    const auto hc = samples_of(tl, "Intercity/T5->R5");
    const auto cw = samples_of(tl, "Intercity/T6->R6");
    REQUIRE_FALSE(hc.empty());
    for (const auto& s : hc)
    {
        const bool inside = s.t > start && s.t <= end;
        CHECK_MESSAGE((s.rate_bps == 0.0) == inside, "t=" << s.t);
    }
    for (const auto& s : cw)
    {
        CHECK(s.rate_bps > 0.0); // CHB->TR does not touch WTPT
    }
    const double before = mean_rate(hc, 0.0, start);
    const double after = mean_rate(hc, end + 300.0, end + 20.0 * 3600.0);
    CHECK(after == doctest::Approx(before).epsilon(0.10));
}

TEST_CASE("three cuts stall the Qasky pool in three windows")
{
    auto sc = quiet(60.0);
    only_domains(sc, {"Wuhu"});
    sc.pin("B");
    const std::vector<std::pair<double, double>> cuts{{5.0, 3.0}, {20.0, 6.0}, {40.0, 2.0}};
    for (const auto& [at, repair] : cuts)
    {
        EventSpec e;
        e.at = at * 3600.0;
        e.kind = EventKind::fiber_cut;
        e.target = "WHB-Qasky";
        e.duration_s = repair * 3600.0;
        sc.events.push_back(e);
    }
    const auto s = samples_of(run(sc), "Wuhu/T8->R7");
    REQUIRE(s.size() > 100);
    std::vector<std::pair<double, double>> stalls;
    for (std::size_t i = 1; i < s.size(); ++i)
    {
        if (s[i].pool_bits == s[i - 1].pool_bits)
        {
            if (!stalls.empty() && stalls.back().second == s[i - 1].t)
            {
                stalls.back().second = s[i].t;
            }
            else
            {
                stalls.emplace_back(s[i - 1].t, s[i].t);
            }
        }
    }
    REQUIRE(stalls.size() == 3);
    for (std::size_t k = 0; k < 3; ++k)
    {
        CHECK(stalls[k].first == cuts[k].first * 3600.0);
        CHECK(stalls[k].second == (cuts[k].first + cuts[k].second) * 3600.0);
    }
}

TEST_CASE("temperature excursion doubles the dark counts and they stay doubled")
{
    auto sc = quiet(12.0);
    only_domains(sc, {"Hefei"});
    sc.pin("I");
    sc.mode = photonics::Mode::lab;
    sc.statistical = false;
    EventSpec e;
    e.at = 4.0 * 3600.0;
    e.kind = EventKind::temp_excursion;
    e.target = "R3";
    e.dark_multiplier = 2.0;
    e.duration_s = 2.0 * 3600.0;
    sc.events.push_back(e);
    const auto s = samples_of(run(sc), "Hefei/T1->R3");
    const auto at = [&](double h) {
        for (const auto& x : s)
        {
            if (x.t == h * 3600.0)
            {
                return x;
            }
        }
        FAIL("no sample at " << h << " h");
        return Sample{};
    };
    const auto before = at(3.0);
    CHECK(at(5.0).rate_bps == 0.0);
    const auto after = at(8.0);
    CHECK(after.vacuum_yield == doctest::Approx(2.0 * before.vacuum_yield));
    CHECK(after.qber_signal > before.qber_signal);
    CHECK(after.rate_bps < before.rate_bps);
    CHECK(after.rate_bps > 0.9 * before.rate_bps);
}

TEST_CASE("lab QBER fluctuates less than field QBER")
{
    auto field = quiet(72.0);
    auto lab = field;
    lab.mode = photonics::Mode::lab;
    const auto f = link_stats(run(field));
    const auto l = link_stats(run(lab));
    REQUIRE(f.size() == l.size());
    for (const auto& [link, stats] : f)
    {
        CHECK_MESSAGE(l.at(link).qber_signal_stddev < stats.qber_signal_stddev, link);
    }

    const auto deltas = compare_modes(lab, field);
    REQUIRE_FALSE(deltas.empty());
    for (const auto& d : deltas)
    {
        CHECK(d.qber_delta() > 0.0);
        CHECK(d.rate_drop() > 0.0);
    }
    for (const auto& d : compare_modes(lab, lab))
    {
        CHECK(d.qber_delta() == 0.0);
        CHECK(d.rate_drop() == 0.0);
    }
}

TEST_CASE("zero-amplitude loss drift is a null event")
{
    const auto dir = scratch("drift");
    auto sc = quiet(24.0);
    const auto plain = timeline_csv(run(sc), dir, "a.csv");
    EventSpec e;
    e.at = 3600.0;
    e.kind = EventKind::loss_drift;
    e.target = "Hefei-Chaohu";
    e.amplitude_db = 0.0;
    sc.events.push_back(e);
    CHECK(timeline_csv(run(sc), dir, "b.csv") == plain);
    sc.events.back().amplitude_db = 1.0;
    CHECK(timeline_csv(run(sc), dir, "c.csv") != plain);
    std::filesystem::remove_all(dir);
}

TEST_CASE("pinning a state holds the domain there")
{
    auto sc = quiet(6.0);
    sc.pin("III");
    std::vector<std::pair<double, std::string>> hefei;
    for (const auto& tr : run(sc).transitions)
    {
        if (tr.domain == "Hefei")
        {
            hefei.emplace_back(tr.t, tr.state);
        }
    }
    CHECK(hefei == std::vector<std::pair<double, std::string>>{{0.0, "III"}});
    CHECK_THROWS_AS(sc.pin("IV"), UnknownStateError);
}

TEST_CASE("control halt defers transitions until it lifts")
{
    auto sc = quiet(3.0);
    only_domains(sc, {"Hefei"});
    EventSpec halt;
    halt.at = 1500.0;
    halt.kind = EventKind::control_halt;
    halt.target = "KLQI";
    halt.duration_s = 1200.0;
    sc.events.push_back(halt);
    const auto tl = run(sc);
    std::vector<std::pair<double, std::string>> got;
    for (const auto& tr : tl.transitions)
    {
        got.emplace_back(tr.t, tr.state);
    }
    REQUIRE(got.size() >= 3);
    CHECK(got[0] == std::pair<double, std::string>{0.0, "I"});
    CHECK(got[1] == std::pair<double, std::string>{2700.0, "II"});
    CHECK(got[2] == std::pair<double, std::string>{3600.0, "III"});
}

TEST_CASE("relay throughput follows the slowest hop")
{
    auto sc = quiet(6.0);
    only_domains(sc, {"Intercity"});
    SessionSpec vpn;
    vpn.id = "vpn";
    vpn.kind = SessionKind::vpn;
    vpn.route = {"WTPT", "CHB", "TR"};
    vpn.refresh_hz = 100.0;
    sc.sessions.push_back(vpn);
    const auto tl = run(sc);

    double delivered = 0.0;
    for (const auto& r : tl.sessions)
    {
        delivered += static_cast<double>(r.delivered_bits);
    }
    const double measured = delivered / sc.duration_s;
    const double hc = mean_rate(samples_of(tl, "Intercity/T5->R5"), 0.0, sc.duration_s);
    const double cw = mean_rate(samples_of(tl, "Intercity/T6->R6"), 0.0, sc.duration_s);
    CHECK(measured == doctest::Approx(keymgmt::relay_throughput({hc, cw})).epsilon(0.05));
    CHECK(apps::vpn_refresh_rate(measured) == 2);
}

TEST_CASE("state summary and pool consistency over a full cycle")
{
    const auto sc = quiet(3.0);
    const auto tl = run(sc);
    const auto rows = summarize_by_state(tl);
    CHECK(rows.size() == 14);
    for (const auto& r : rows)
    {
        CHECK(r.samples > 0);
        CHECK(r.mean_rate_bps > 0.0);
    }

    std::map<keymgmt::NodePair, std::uint64_t> deposited;
    for (const auto& s : tl.samples)
    {
        const auto slash = s.link.find('/');
        const auto arrow = s.link.find("->");
        const netctl::LinkKey key{s.link.substr(slash + 1, arrow - slash - 1), s.link.substr(arrow + 2)};
        const auto pair = sc.network.node_pair(key);
        deposited[keymgmt::NodePair(pair.first, pair.second)] += s.bits;
    }
    REQUIRE(deposited.size() == tl.pools.size());
    for (const auto& [pair, c] : tl.pools)
    {
        CHECK(c.produced == deposited.at(pair));
    }
}

TEST_CASE("timeline csv round trip")
{
    const auto dir = scratch("csv");
    const auto tl = run(quiet(2.0));
    write_timeline_csv(tl, dir / "timeline.csv");
    write_transitions_csv(tl, dir / "transitions.csv");
    const auto back = read_timeline_csv(dir / "timeline.csv");
    REQUIRE(back.samples.size() == tl.samples.size());
    for (std::size_t i = 0; i < tl.samples.size(); ++i)
    {
        CHECK(back.samples[i].t == tl.samples[i].t);
        CHECK(back.samples[i].link == tl.samples[i].link);
        CHECK(back.samples[i].qber_signal == doctest::Approx(tl.samples[i].qber_signal).epsilon(1e-9));
        CHECK(back.samples[i].rate_bps == doctest::Approx(tl.samples[i].rate_bps).epsilon(1e-9));
        CHECK(back.samples[i].pool_bits == tl.samples[i].pool_bits);
    }
    const auto trs = read_transitions_csv(dir / "transitions.csv");
    REQUIRE(trs.size() == tl.transitions.size());
    CHECK(trs.front().state == tl.transitions.front().state);

    std::ofstream(dir / "bad.csv") << timeline_header << "\n300,x,0.1,0.1,1e-6,abc,5\n";
    try
    {
        read_timeline_csv(dir / "bad.csv");
        FAIL("expected ConfigError");
    }
    catch (const ConfigError& e)
    {
        CHECK(e.line() == 2);
    }
    std::filesystem::remove_all(dir);
}
