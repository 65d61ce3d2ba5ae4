#include <hcw/netctl.hpp>

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace hcw;
using namespace hcw::netctl;

namespace
{

const Network&
net()
{
    static const auto n = load_network(HCW_DATA_DIR "/hcw_network.yaml");
    return n;
}

std::set<LinkKey>
producing_at(const Controller& ctl, double t)
{
    std::set<LinkKey> out;
    for (const auto& [key, link] : ctl.active())
    {
        if (link.ready_at <= t)
        {
            out.insert(key);
        }
    }
    return out;
}

} // namespace

TEST_CASE("bundled network loads and validates")
{
    CHECK(net().nodes.size() == 9);
    CHECK(net().devices.size() == 15);
    std::set<std::string> cases;
    for (const auto& [id, d] : net().devices)
    {
        cases.insert(d.unit);
    }
    CHECK(cases.size() == 13);
    CHECK(net().domains.size() == 3);
    CHECK_NOTHROW(net().validate());
    CHECK(net().device("R5").apd_count == 2);
    CHECK(net().device("R6").apd_count == 1);
    CHECK(net().detector_for({"T6", "R6"}).duty_factor() == 0.5);
    CHECK(net().detector_for({"T1", "R3"}).e_det == doctest::Approx(0.0070));
    CHECK(net().detector_for({"T5", "R5"}).e_det == doctest::Approx(0.01));
    CHECK(net().node_pair({"T4", "R1"}) == std::pair<std::string, std::string>{"KLQI", "WC"});
}

TEST_CASE("every shipped state resolves to its expected links")
{
    for (const auto& d : net().domains)
    {
        for (const auto& s : d.states)
        {
            CHECK(resolve_state(d, s) == s.expected_links);
        }
    }
}

TEST_CASE("coverage")
{
    using P = std::pair<std::string, std::string>;
    const auto all = coverage(net(), {"I", "II", "III"});
    const std::set<P> expected{{"KLQI", "NC"},   {"NC", "WC"},     {"WC", "KLQI"},   {"WTPT", "NC"},
                               {"WC", "WTPT"},   {"KLQI", "WTPT"}, {"WTPT", "KLQI"}, {"WC", "NC"}};
    CHECK(all == expected);
    std::set<P> unordered;
    for (const auto& [a, b] : all)
    {
        unordered.emplace(std::min(a, b), std::max(a, b));
    }
    CHECK(unordered.size() == 6);
    CHECK(coverage(net(), {"I"}).size() == 3);
    CHECK(coverage(net(), {}).empty());
    CHECK_THROWS_AS(coverage(net(), {"IV"}), UnknownStateError);
}

TEST_CASE("Wuhu states are exclusive")
{
    const auto& wuhu = net().domain("Wuhu");
    for (const auto& s : wuhu.states)
    {
        const auto links = resolve_state(wuhu, s);
        CHECK(links.size() == 1);
        CHECK(links.count({"T7", "R7"}) + links.count({"T8", "R7"}) == 1);
    }
}

TEST_CASE("schedules")
{
    CHECK(schedule(SwitchPolicy::pin("III"), 3600.0) == std::vector<ScheduledState>{{0.0, "III"}});
    CHECK(schedule(SwitchPolicy::automatic(1800.0, {"I", "II", "III"}), 5400.0)
          == std::vector<ScheduledState>{{0.0, "I"}, {1800.0, "II"}, {3600.0, "III"}});
    const auto wrap = schedule(SwitchPolicy::automatic(1800.0, {"A", "B"}), 7200.0);
    REQUIRE(wrap.size() == 4);
    CHECK(wrap[2] == ScheduledState{3600.0, "A"});

    const auto& hefei = net().domain("Hefei");
    CHECK_THROWS_AS(SwitchPolicy::pin("IV").validate(hefei.states), UnknownStateError);
    CHECK_THROWS_AS(SwitchPolicy::automatic(0.0, {"I"}).validate(hefei.states), ParameterError);
    CHECK_THROWS_AS(SwitchPolicy::automatic(60.0, {}).validate(hefei.states), ParameterError);
    try
    {
        hefei.state("IV");
        FAIL("expected UnknownStateError");
    }
    catch (const UnknownStateError& e)
    {
        const std::string what = e.what();
        CHECK(what.find("I, II, III") != std::string::npos);
    }
}

TEST_CASE("apply_state: establishment delays and seamless switching")
{
    Controller ctl(net());
    const auto first = ctl.apply_state("I", 0.0);
    CHECK(first.added.size() == 4);
    CHECK(producing_at(ctl, 59.0).empty());
    CHECK(producing_at(ctl, 60.0).size() == 4);
    ctl.refresh_cache(60.0);

    // Re-applying the current state changes nothing.
    const auto again = ctl.apply_state("I", 100.0);
    CHECK(again.added.empty());
    CHECK(again.kept.size() == 4);
    CHECK(producing_at(ctl, 100.0).size() == 4);

    const auto two = ctl.apply_state("II", 1800.0);
    CHECK(two.kept == std::vector<LinkKey>{{"T3", "R4"}});
    CHECK(two.removed.size() == 3);
    // T3->R4 never stops.
    CHECK(producing_at(ctl, 1800.0) == std::set<LinkKey>{{"T3", "R4"}});
    CHECK(ctl.active().at({"T3", "R4"}).ready_at == 60.0);
    CHECK(ctl.current_state("Hefei") == std::optional<std::string>("II"));
    CHECK_FALSE(ctl.current_state("Nowhere").has_value());
}

TEST_CASE("calibration cache gives fast re-establishment")
{
    Controller ctl(net());
    ctl.apply_state("III", 0.0);
    ctl.refresh_cache(60.0);
    ctl.apply_state("I", 1800.0);
    ctl.refresh_cache(1900.0);
    const auto change = ctl.apply_state("III", 3600.0);
    CHECK(change.added.size() == 3);
    for (const auto& key : change.added)
    {
        const auto& link = ctl.active().at(key);
        CHECK(link.cache_hit);
        CHECK(link.ready_at == 3600.0 + net().timing.t_fast_s);
    }
    CHECK(producing_at(ctl, 3602.0).size() == 4);
}

TEST_CASE("self-loops refresh the transceiver's cache entries")
{
    CalibrationCache cache(100.0);
    cache.store({"T1", "R3"}, 0.0);
    CHECK(cache.hit({"T1", "R3"}, 50.0));
    CHECK_FALSE(cache.hit({"T1", "R3"}, 150.0));
    cache.refresh_devices({"T1", "R1"}, 120.0);
    CHECK(cache.hit({"T1", "R3"}, 150.0));
    CHECK_FALSE(cache.hit({"T2", "R3"}, 0.0));
    CHECK(cache.size() == 1);

    CalibrationCache forever;
    forever.store({"A", "B"}, 0.0);
    CHECK(forever.hit({"A", "B"}, 1e12));
}

TEST_CASE("reestablish after an outage")
{
    Controller ctl(net());
    ctl.apply_state("HCW", 0.0);
    ctl.refresh_cache(60.0);
    ctl.reestablish({{"T5", "R5"}}, 1000.0);
    CHECK(ctl.active().at({"T5", "R5"}).ready_at == 1000.0 + net().timing.t_fast_s);
    CHECK(ctl.active().at({"T6", "R6"}).ready_at == 60.0);
}

TEST_CASE("network loader diagnostics")
{
    const auto dir = std::filesystem::temp_directory_path() / "hcw_netctl_test";
    std::filesystem::create_directories(dir);
    for (const auto* f : {"fiber_links.csv", "calibration.yaml", "symmetry_matrix.csv", "wuhu_fabric.yaml"})
    {
        std::filesystem::copy_file(std::filesystem::path(HCW_DATA_DIR) / f, dir / f,
                                   std::filesystem::copy_options::overwrite_existing);
    }
    const auto write = [&](const std::string& body) {
        std::ofstream(dir / "net.yaml") << "schema_version: 1\ncatalog: fiber_links.csv\n"
                                           "calibration: calibration.yaml\n"
                                        << body;
        return dir / "net.yaml";
    };
    const std::string devices = "nodes: [WHB, Qasky, TR]\n"
                                "devices:\n"
                                "  - {id: T7, node: WHB, unit: TX-WHB}\n"
                                "  - {id: T8, node: Qasky, unit: TX-Qasky}\n"
                                "  - {id: R7, node: TR, unit: RX-TR}\n";
    const std::string domain = "domains:\n"
                               "  - id: Wuhu\n"
                               "    fabric: wuhu_fabric.yaml\n"
                               "    states:\n"
                               "      - {id: A, settings: {sw: a}, expected_links: [T7->R7]}\n";

    CHECK_NOTHROW(load_network(write(devices + domain + "    policy: {mode: preemptive, pin: A}\n")));
    CHECK_THROWS_AS(load_network(write(devices + domain + "    policy: {mode: preemptive, pin: Z}\n")), Error);

    try
    {
        load_network(write(devices
                           + "domains:\n"
                             "  - id: Wuhu\n"
                             "    fabric: wuhu_fabric.yaml\n"
                             "    states:\n"
                             "      - {id: A, settings: {sw: a}, expected_links: [T8->R7]}\n"
                             "    policy: {mode: preemptive, pin: A}\n"));
        FAIL("expected a mismatch error");
    }
    catch (const Error& e)
    {
        CHECK(std::string(e.what()).find("T7->R7") != std::string::npos);
    }

    try
    {
        load_network(write("nodes: [WHB]\ndevices:\n  - {id: T7, node: Mars}\n"));
        FAIL("expected ConfigError");
    }
    catch (const ConfigError& e)
    {
        CHECK(e.line() == 6);
    }
    std::filesystem::remove_all(dir);
}
