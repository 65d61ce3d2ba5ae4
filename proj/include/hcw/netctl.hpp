#pragma once

// Network definition (nodes, devices, switching domains), the seamless
// switching policy and the controller that turns state changes into
// active links with establishment delays.

#include <hcw/calibration.hpp>
#include <hcw/catalog.hpp>
#include <hcw/fabric.hpp>
#include <hcw/photonics.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace hcw::netctl
{

/// (transmitter, receiver) device ids.
using LinkKey = std::pair<std::string, std::string>;

std::string
link_label(const LinkKey& key); // "T1->R3"

struct Device
{
    std::string id;
    std::string node;
    std::string unit;                         // transceiver id, empty for stand-alone devices
    int apd_count = 1;                        // receivers only
    double mu_signal = 0.65;                  // transmitters only
    std::string detector_class = "standard";  // receivers only
};

struct NetworkState
{
    std::string id;
    fabric::ComponentStates settings;
    std::set<LinkKey> expected_links;
};

enum class PolicyMode
{
    preemptive,
    automatic
};

struct SwitchPolicy
{
    PolicyMode mode = PolicyMode::automatic;
    std::string pinned;              // preemptive
    double dwell_s = 1800.0;         // automatic
    std::vector<std::string> cycle;  // automatic

    /// Throws UnknownStateError / ParameterError.
    void
    validate(const std::vector<NetworkState>& states) const;

    static SwitchPolicy
    pin(std::string state_id)
    {
        SwitchPolicy p;
        p.mode = PolicyMode::preemptive;
        p.pinned = std::move(state_id);
        return p;
    }
    static SwitchPolicy
    automatic(double dwell_s, std::vector<std::string> cycle)
    {
        SwitchPolicy p;
        p.dwell_s = dwell_s;
        p.cycle = std::move(cycle);
        return p;
    }
};

struct ScheduledState
{
    double t = 0.0;
    std::string state;

    bool
    operator==(const ScheduledState&) const = default;
};

/// Transitions at or after 0 and strictly before `horizon_s`.
std::vector<ScheduledState>
schedule(const SwitchPolicy& policy, double horizon_s);

/// A set of devices sharing one optical fabric and switched together.
struct Domain
{
    std::string id;
    fabric::OpticalFabric fabric;
    std::vector<NetworkState> states;
    SwitchPolicy policy;

    const NetworkState&
    state(const std::string& id) const; // UnknownStateError listing known ids
    bool
    has_state(const std::string& id) const;
};

struct Timing
{
    double t_fast_s = 2.0;
    double t_calibrate_s = 60.0;
    std::optional<double> cache_max_age_s; // entries never expire when empty
};

class Network
{
public:
    std::vector<std::string> nodes;
    std::map<std::string, Device> devices;
    std::vector<Domain> domains;
    photonics::FiberCatalog catalog;
    photonics::CalibrationFixture calibration;
    /// Back-to-back device QBER used as e_det for listed pairs.
    std::map<LinkKey, double> misalignment;
    Timing timing;
    photonics::SourceConfig source;
    photonics::SecurityParams security;

    const Device&
    device(const std::string& id) const;
    const Domain&
    domain(const std::string& id) const;
    /// Domain defining `state_id`; UnknownStateError listing every state otherwise.
    const Domain&
    domain_of_state(const std::string& state_id) const;

    /// Lab-mode source and detector for one directed device link.
    photonics::SourceConfig
    source_for(const LinkKey& link) const;
    photonics::DetectorConfig
    detector_for(const LinkKey& link) const;

    /// Node pair (sorted) whose pool a device link feeds.
    std::pair<std::string, std::string>
    node_pair(const LinkKey& link) const;

    /// Checks every state against its fabric; throws on mismatch.
    void
    validate() const;
};

Network
load_network(const std::filesystem::path& path);

/// Links resolved for a state, as (transmitter, receiver) pairs.
std::set<LinkKey>
resolve_state(const Domain& domain, const NetworkState& state);

/// Directed node links over a set of states, excluding same-node loops.
std::set<std::pair<std::string, std::string>>
coverage(const Network& network, const std::vector<std::string>& state_ids);

class CalibrationCache
{
public:
    explicit CalibrationCache(std::optional<double> max_age_s = std::nullopt)
        : m_max_age(max_age_s)
    {
    }

    bool
    hit(const LinkKey& link, double now) const;
    void
    store(const LinkKey& link, double now);
    /// Refresh every existing entry that involves one of `devices`.
    void
    refresh_devices(const std::set<std::string>& devices, double now);
    std::size_t
    size() const
    {
        return m_entries.size();
    }

private:
    std::optional<double> m_max_age;
    std::map<LinkKey, double> m_entries;
};

struct ActiveLink
{
    LinkKey key;
    std::string domain;
    std::string state;
    double loss_db = 0.0;
    bool self_loop = false;
    std::set<std::string> fibers;
    double ready_at = 0.0;
    bool cache_hit = false;
};

struct StateChange
{
    std::string domain;
    std::string state;
    double at = 0.0;
    std::vector<LinkKey> added;
    std::vector<LinkKey> kept;
    std::vector<LinkKey> removed;
};

/// Single-owner network state machine.
class Controller
{
public:
    explicit Controller(const Network& network);

    /// Switch the domain owning `state_id`. Links present before and after
    /// keep their ready time; new links become ready after t_fast on a cache
    /// hit and t_calibrate otherwise.
    StateChange
    apply_state(const std::string& state_id, double at);

    /// Restart establishment for `links` (after an outage or repair).
    void
    reestablish(const std::vector<LinkKey>& links, double at);

    /// Record calibrations completed by `now`: ready links store their
    /// entry; self-loops refresh entries of their unit's devices.
    void
    refresh_cache(double now);

    const std::map<LinkKey, ActiveLink>&
    active() const
    {
        return m_active;
    }
    std::optional<std::string>
    current_state(const std::string& domain) const;
    const CalibrationCache&
    cache() const
    {
        return m_cache;
    }

private:
    double
    delay_for(const LinkKey& link, double at, bool& hit) const;

    const Network* m_network;
    CalibrationCache m_cache;
    std::map<LinkKey, ActiveLink> m_active;
    std::map<std::string, std::string> m_current;
};

} // namespace hcw::netctl
