// hcw: run campaigns, pair devices, pin network states and rebuild reports.

#include <hcw/calibration.hpp>
#include <hcw/io.hpp>
#include <hcw/pairing.hpp>
#include <hcw/simkit.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace hcw;

namespace
{

#ifndef HCW_DATA_DIR
#define HCW_DATA_DIR "data"
#endif

const char* default_state_file = "hcw_state.yaml";

std::string
default_scenario()
{
    return (fs::path(HCW_DATA_DIR) / "hcw_scenario.yaml").string();
}

void
require_file(const std::string& path, const char* what)
{
    if (!fs::is_regular_file(path))
    {
        throw ConfigError(path, 0, std::string(what) + " not found");
    }
}

/// Pin stored by `hcw state`; empty when automatic or absent.
std::optional<std::string>
read_state_file(const fs::path& path)
{
    if (!fs::exists(path))
    {
        return std::nullopt;
    }
    const auto doc = io::Document::load(path);
    const auto mode = doc.string(doc.root(), "mode");
    if (mode == "preemptive")
    {
        return doc.string(doc.root(), "pin");
    }
    if (mode != "automatic")
    {
        doc.fail(doc.root()["mode"], "mode must be preemptive or automatic");
    }
    return std::nullopt;
}

std::string
kbps(double bps)
{
    return fmt::format("{:.2f}", bps / 1000.0);
}

std::string
summary_table(const simkit::Timeline& tl, const netctl::Network& net)
{
    std::string out = fmt::format("{:<10} {:<6} {:<16} {:<10} {:>10} {:>8}\n", "domain", "state", "QKD link",
                                  "devices", "rate kbps", "QBER %");
    for (const auto& row : simkit::summarize_by_state(tl))
    {
        const auto arrow = row.link.find("->");
        const auto tx = row.link.substr(0, arrow);
        const auto rx = row.link.substr(arrow + 2);
        const auto& a = net.device(tx).node;
        const auto& b = net.device(rx).node;
        if (a == b)
        {
            continue;
        }
        out += fmt::format("{:<10} {:<6} {:<16} {:<10} {:>10} {:>8.2f}\n", row.domain, row.state, a + "->" + b,
                           row.link, kbps(row.mean_rate_bps), 100.0 * row.mean_qber_signal);
    }
    return out;
}

int
cmd_run(const std::string& scenario_path,
        std::optional<std::uint64_t> seed,
        const std::string& out_dir,
        const std::string& pin,
        const std::string& state_file,
        bool json)
{
    require_file(scenario_path, "scenario file");
    auto sc = simkit::load_scenario(scenario_path);
    if (seed)
    {
        sc.seed = *seed;
    }
    std::optional<std::string> pinned;
    if (!pin.empty())
    {
        pinned = pin;
    }
    else if (!state_file.empty())
    {
        pinned = read_state_file(state_file);
    }
    if (pinned)
    {
        sc.pin(*pinned);
    }

    const auto tl = simkit::run(sc);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    simkit::write_timeline_csv(tl, dir / "timeline.csv");
    simkit::write_transitions_csv(tl, dir / "transitions.csv");
    simkit::write_events_csv(tl, dir / "events.csv");
    simkit::write_sessions_csv(tl, dir / "sessions.csv");
    if (json)
    {
        simkit::write_timeline_json(tl, dir / "timeline.json");
    }
    {
        std::ofstream pools(dir / "pools.json", std::ios::binary);
        pools << tl.pools_json;
    }
    const auto summary = summary_table(tl, sc.network);
    {
        std::ofstream s(dir / "summary.txt", std::ios::binary);
        s << summary;
    }
    std::cout << fmt::format("scenario {} seed {}: {} samples, {} transitions, {} events -> {}\n", sc.name, sc.seed,
                             tl.samples.size(), tl.transitions.size(), tl.events.size(), dir.string());
    std::cout << summary;
    return 0;
}

int
cmd_pair(const std::string& matrix_path, const std::string& objective, double threshold)
{
    require_file(matrix_path, "matrix file");
    const auto m = keymgmt::PairingMatrix::load(matrix_path);
    const auto a = keymgmt::best_pairing(m, keymgmt::objective_from_string(objective));
    std::cout << "objective " << objective << "\n";
    for (const auto& [t, r] : a.pairs)
    {
        std::cout << t << " -> " << r << "\n";
    }
    std::cout << fmt::format("total {:.2f}%\nworst {:.2f}%\n", 100.0 * a.total, 100.0 * a.worst);
    const auto sym = keymgmt::symmetry_check(m, threshold);
    std::cout << fmt::format("symmetry below {:.2f}%: {}\n", 100.0 * threshold, sym.pass ? "pass" : "fail");
    for (const auto& v : sym.violations)
    {
        std::cout << fmt::format("  {} {} {:.2f}%\n", v.transmitter, v.receiver, 100.0 * v.qber);
    }
    return 0;
}

int
cmd_state(const std::string& pin, bool automatic, const std::string& scenario_path, const std::string& file)
{
    if (pin.empty() == !automatic)
    {
        throw ParameterError("state needs exactly one of --pin ID or --auto");
    }
    std::ofstream out;
    if (automatic)
    {
        out.open(file, std::ios::binary);
        out << "mode: automatic\n";
        std::cout << "automatic switching restored (" << file << ")\n";
        return 0;
    }
    require_file(scenario_path, "scenario file");
    const auto sc = simkit::load_scenario(scenario_path);
    const auto& domain = sc.network.domain_of_state(pin);
    out.open(file, std::ios::binary);
    out << "mode: preemptive\npin: " << pin << "\n";
    std::cout << "domain " << domain.id << " pinned to state " << pin << " (" << file << ")\n";
    return 0;
}

int
cmd_report(const std::string& timeline_path)
{
    require_file(timeline_path, "timeline file");
    auto tl = simkit::read_timeline_csv(timeline_path);
    const auto tr_path = fs::path(timeline_path).parent_path() / "transitions.csv";
    require_file(tr_path.string(), "transitions file");
    tl.transitions = simkit::read_transitions_csv(tr_path);

    std::cout << fmt::format("{:<10} {:<6} {:<10} {:>8} {:>10} {:>8}\n", "domain", "state", "devices", "samples",
                             "rate kbps", "QBER %");
    for (const auto& row : simkit::summarize_by_state(tl))
    {
        std::cout << fmt::format("{:<10} {:<6} {:<10} {:>8} {:>10} {:>8.2f}\n", row.domain, row.state, row.link,
                                 row.samples, kbps(row.mean_rate_bps), 100.0 * row.mean_qber_signal);
    }
    return 0;
}

int
cmd_calibrate(const std::string& out, const std::string& version)
{
    const auto problem = photonics::intercity_problem();
    const auto fit = photonics::fit_detector(problem);
    const auto fixture = photonics::make_fixture(problem, fit, version);
    std::cout << fmt::format("eta_det {:.6g}\ny0_dark {:.6g}\ncost {:.6g}\n", fit.eta_det, fit.y0_dark, fit.cost());
    for (Eigen::Index i = 0; i < fit.residuals.size(); ++i)
    {
        std::cout << fmt::format("residual[{}] {:+.4f}\n", i, fit.residuals(i));
    }
    if (!out.empty())
    {
        std::ofstream f(out, std::ios::binary);
        if (!f)
        {
            throw ConfigError(out, 0, "cannot open for writing");
        }
        f << photonics::dump_calibration(fixture);
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

} // namespace

int
main(int argc, char** argv)
{
    CLI::App app{"Hefei-Chaohu-Wuhu QKD network simulator"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run a scenario and write the timeline");
    std::string scenario = default_scenario();
    std::optional<std::uint64_t> seed;
    std::string out_dir = "hcw_out";
    std::string run_pin;
    std::string state_file;
    bool json = false;
    run->add_option("--scenario", scenario, "scenario file")->required();
    run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--pin", run_pin, "pin the owning domain to a state");
    run->add_option("--state", state_file, "state file written by `hcw state`");
    run->add_flag("--json", json, "also write timeline.json");

    auto* pair = app.add_subcommand("pair", "best transmitter/receiver pairing");
    std::string matrix;
    std::string objective = "min_sum";
    double threshold = 0.012;
    pair->add_option("--matrix", matrix, "QBER matrix table")->required();
    pair->add_option("--objective", objective, "min_sum or min_max");
    pair->add_option("--threshold", threshold, "symmetry threshold (fraction)");

    auto* state = app.add_subcommand("state", "pin a network state or restore automatic switching");
    std::string pin;
    bool automatic = false;
    std::string state_scenario = default_scenario();
    std::string file = default_state_file;
    state->add_option("--pin", pin, "state id");
    state->add_flag("--auto", automatic, "automatic switching");
    state->add_option("--scenario", state_scenario, "scenario whose network defines the states");
    state->add_option("--file", file, "state file to write");

    auto* report = app.add_subcommand("report", "rebuild the per-state summary from an exported timeline");
    std::string timeline;
    report->add_option("--timeline", timeline, "timeline.csv")->required();

    auto* calibrate = app.add_subcommand("calibrate", "fit detector parameters to the intercity observables");
    std::string cal_out;
    std::string cal_version = "1";
    calibrate->add_option("--out", cal_out, "fixture to write");
    calibrate->add_option("--version", cal_version, "fixture version label");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        if (e.get_exit_code() == 0)
        {
            return app.exit(e);
        }
        std::cerr << "error[usage]: " << e.what() << "\n";
        return 2;
    }

    try
    {
        if (*run)
        {
            if (state_file.empty() && fs::exists(default_state_file))
            {
                state_file = default_state_file;
            }
            return cmd_run(scenario, seed, out_dir, run_pin, state_file, json);
        }
        if (*pair)
        {
            return cmd_pair(matrix, objective, threshold);
        }
        if (*state)
        {
            return cmd_state(pin, automatic, state_scenario, file);
        }
        if (*report)
        {
            return cmd_report(timeline);
        }
        if (*calibrate)
        {
            return cmd_calibrate(cal_out, cal_version);
        }
    }
    catch (const Error& e)
    {
        std::cerr << "error[" << e.kind() << "]: " << e.what() << "\n";
        return 1;
    }
    catch (const YAML::Exception& e)
    {
        std::cerr << "error[config]: " << e.what() << "\n";
        return 1;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
