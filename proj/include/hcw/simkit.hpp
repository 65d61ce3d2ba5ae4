#pragma once

// Deterministic discrete-event campaign: switch schedules, environment
// events, sampled link production feeding key pools, key-consuming
// sessions, and the recorded timeline.

#include <hcw/apps.hpp>
#include <hcw/keymgmt.hpp>
#include <hcw/netctl.hpp>
#include <hcw/photonics.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace hcw::simkit
{

enum class EventKind
{
    fiber_cut,
    power_outage,
    temp_excursion,
    loss_drift,
    control_halt
};

std::string_view
to_string(EventKind kind);

struct EventSpec
{
    double at = 0.0;
    EventKind kind = EventKind::fiber_cut;
    std::string target;        // fibre id, node or detector device
    double duration_s = 0.0;   // repair/restore/resume; downtime for temp_excursion (may be 0)
    double dark_multiplier = 1.0;
    std::optional<double> setpoint_c;
    double amplitude_db = 0.0;
    double period_s = 86400.0;
};

enum class SessionKind
{
    otp,
    vpn
};

struct SessionSpec
{
    std::string id;
    SessionKind kind = SessionKind::otp;
    std::vector<std::string> route;
    apps::OtpMode mode = apps::OtpMode::realtime;
    double data_rate_bps = 0.0;     // otp
    std::uint64_t card_bits = 0;    // otp preloaded
    double load_at = 0.0;           // otp preloaded
    std::optional<double> reload_every; // otp preloaded: top the card up periodically
    double refresh_hz = 1.0;        // vpn
    double start = 0.0;
    std::optional<double> stop;
};

/// Field-mode loss wander per fibre class (peak dB, sinusoid period).
struct DriftConfig
{
    double metro_db = 0.3;
    double intercity_db = 0.5;
    double period_s = 86400.0;
};

struct Scenario
{
    std::string name;
    netctl::Network network;
    double duration_s = 0.0;
    double sample_interval_s = 300.0;
    std::uint64_t seed = 0;
    photonics::Mode mode = photonics::Mode::field;
    bool statistical = true;
    photonics::FieldNoise field_noise;
    DriftConfig drift;
    std::vector<EventSpec> events;
    std::vector<SessionSpec> sessions;

    /// Force the domain owning `state_id` into preemptive mode.
    void
    pin(const std::string& state_id);
    /// Throws EventError / ParameterError / ConfigError.
    void
    validate() const;
};

Scenario
load_scenario(const std::filesystem::path& path);

struct Sample
{
    double t = 0.0;
    std::string link; // "<domain>/<T>-><R>"
    double qber_signal = 0.0;
    double qber_decoy = 0.0;
    double vacuum_yield = 0.0;
    double rate_bps = 0.0; // deposited bits / sample interval
    std::uint64_t pool_bits = 0;
    std::uint64_t bits = 0;
    double producing_s = 0.0;
};

struct TransitionRecord
{
    double t = 0.0;
    std::string domain;
    std::string state;
    std::size_t added = 0;
    std::size_t kept = 0;
    std::size_t removed = 0;
};

struct EventRecord
{
    double t = 0.0;
    std::string kind;
    std::string target;
    std::string phase; // start | end | note
    std::string detail;
};

struct SessionRecord
{
    double t = 0.0;
    std::string session;
    std::uint64_t requested_bits = 0;
    std::uint64_t delivered_bits = 0;
    std::string status; // ok | starved | idle
};

struct Timeline
{
    std::vector<Sample> samples;
    std::vector<TransitionRecord> transitions;
    std::vector<EventRecord> events;
    std::vector<SessionRecord> sessions;
    std::map<keymgmt::NodePair, keymgmt::PoolCounters> pools;
    std::string pools_json;
};

/// Mutable environment seen by the engine: down nodes/devices, cut fibres,
/// halted domains, dark-count multipliers and active loss drifts.
class EnvironmentState
{
public:
    void
    begin(const EventSpec& event);
    void
    end(const EventSpec& event);

    bool
    node_down(const std::string& node) const;
    bool
    device_down(const std::string& device) const;
    bool
    fiber_cut(const std::string& fiber) const;
    double
    dark_multiplier(const std::string& device) const;
    /// Extra loss from loss_drift events on any of `fibers` at time t.
    double
    drift_db(const std::set<std::string>& fibers, double t) const;

private:
    std::map<std::string, int> m_nodes;
    std::map<std::string, int> m_devices;
    std::map<std::string, int> m_fibers;
    std::map<std::string, double> m_dark;
    std::vector<EventSpec> m_drifts;
};

Timeline
run(const Scenario& scenario);

/// Delimited exports.
void
write_timeline_csv(const Timeline& timeline, const std::filesystem::path& path);
void
write_transitions_csv(const Timeline& timeline, const std::filesystem::path& path);
void
write_events_csv(const Timeline& timeline, const std::filesystem::path& path);
void
write_sessions_csv(const Timeline& timeline, const std::filesystem::path& path);
void
write_timeline_json(const Timeline& timeline, const std::filesystem::path& path);

inline constexpr const char* timeline_header = "t_s,link,qber_signal,qber_decoy,vacuum_yield,rate_bps,pool_bits";

Timeline
read_timeline_csv(const std::filesystem::path& path);
std::vector<TransitionRecord>
read_transitions_csv(const std::filesystem::path& path);

struct LinkStats
{
    std::string link;
    std::size_t samples = 0;
    std::size_t producing = 0;
    double mean_qber_signal = 0.0; // over producing samples
    double mean_qber_decoy = 0.0;
    double mean_rate_bps = 0.0;    // over producing samples
    double qber_signal_stddev = 0.0;
};

std::map<std::string, LinkStats>
link_stats(const Timeline& timeline);

/// Mean production per (domain, state, link), attributing each sample to
/// the state its domain was in when the sample interval began. Rows follow
/// the order states first appear in the transitions, links sorted.
struct StateRow
{
    std::string domain;
    std::string state;
    std::string link; // "T->R"
    std::size_t samples = 0;
    std::size_t producing = 0;
    double mean_rate_bps = 0.0;
    double mean_qber_signal = 0.0;
};

std::vector<StateRow>
summarize_by_state(const Timeline& timeline);

struct ModeDelta
{
    std::string link;
    double qber_signal_lab = 0.0;
    double qber_signal_field = 0.0;
    double rate_lab = 0.0;
    double rate_field = 0.0;

    double
    qber_delta() const
    {
        return qber_signal_field - qber_signal_lab;
    }
    double
    rate_drop() const
    {
        return rate_lab > 0.0 ? 1.0 - rate_field / rate_lab : 0.0;
    }
};

/// Runs both scenarios (which must differ only in mode) and reports mean
/// signal-QBER and rate deltas per link.
std::vector<ModeDelta>
compare_modes(const Scenario& lab, const Scenario& field);

} // namespace hcw::simkit
