#include <hcw/io.hpp>
#include <hcw/simkit.hpp>

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <queue>
#include <random>

namespace hcw::simkit
{

std::string_view
to_string(EventKind kind)
{
    switch (kind)
    {
    case EventKind::fiber_cut:
        return "fiber_cut";
    case EventKind::power_outage:
        return "power_outage";
    case EventKind::temp_excursion:
        return "temp_excursion";
    case EventKind::loss_drift:
        return "loss_drift";
    case EventKind::control_halt:
        return "control_halt";
    }
    return "?";
}

namespace
{

std::optional<EventKind>
event_kind_from_string(std::string_view s)
{
    for (auto k : {EventKind::fiber_cut, EventKind::power_outage, EventKind::temp_excursion, EventKind::loss_drift,
                   EventKind::control_halt})
    {
        if (to_string(k) == s)
        {
            return k;
        }
    }
    return std::nullopt;
}

std::seed_seq
make_seed(std::uint64_t seed, std::string_view label)
{
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    for (const unsigned char c : label)
    {
        words.push_back(c);
    }
    return std::seed_seq(words.begin(), words.end());
}

std::string
sample_label(const netctl::ActiveLink& link)
{
    return link.domain + "/" + netctl::link_label(link.key);
}

bool
is_receiver(const netctl::Network& net, const std::string& device)
{
    for (const auto& d : net.domains)
    {
        if (const auto* t = d.fabric.find_terminal(device))
        {
            return t->role == fabric::TerminalRole::receiver;
        }
    }
    return false;
}

} // namespace

void
Scenario::pin(const std::string& state_id)
{
    const auto& owner = network.domain_of_state(state_id);
    for (auto& d : network.domains)
    {
        if (d.id == owner.id)
        {
            d.policy = netctl::SwitchPolicy::pin(state_id);
        }
    }
}

void
Scenario::validate() const
{
    if (!(duration_s > 0.0))
    {
        throw ParameterError("scenario duration must be positive");
    }
    if (!(sample_interval_s > 0.0))
    {
        throw ParameterError("sample interval must be positive");
    }
    const auto& net = network;
    double last = 0.0;
    for (const auto& e : events)
    {
        const auto what = std::string(to_string(e.kind)) + " at " + fmt::format("{}", e.at) + " s";
        if (e.at < last)
        {
            throw EventError(what + ": events must be sorted by time");
        }
        last = e.at;
        switch (e.kind)
        {
        case EventKind::fiber_cut:
        case EventKind::loss_drift:
            if (net.catalog.find(e.target) == nullptr)
            {
                throw EventError(what + ": unknown fiber link '" + e.target + "'");
            }
            break;
        case EventKind::power_outage:
        case EventKind::control_halt:
            if (std::find(net.nodes.begin(), net.nodes.end(), e.target) == net.nodes.end())
            {
                throw EventError(what + ": unknown node '" + e.target + "'");
            }
            break;
        case EventKind::temp_excursion:
            if (!net.devices.count(e.target) || !is_receiver(net, e.target))
            {
                throw EventError(what + ": '" + e.target + "' is not a detector (receiver device)");
            }
            if (!(e.dark_multiplier > 0.0))
            {
                throw EventError(what + ": dark multiplier must be positive");
            }
            break;
        }
        const bool needs_duration = e.kind == EventKind::fiber_cut || e.kind == EventKind::power_outage
                                    || e.kind == EventKind::control_halt;
        if (needs_duration && !(e.duration_s > 0.0))
        {
            throw EventError(what + ": repair/restore/resume time must be positive");
        }
        if (e.duration_s < 0.0)
        {
            throw EventError(what + ": negative duration");
        }
        if (e.kind == EventKind::loss_drift && (!(e.period_s > 0.0) || e.amplitude_db < 0.0))
        {
            throw EventError(what + ": drift needs amplitude >= 0 and period > 0");
        }
    }
    std::set<std::string> ids;
    for (const auto& s : sessions)
    {
        if (!ids.insert(s.id).second)
        {
            throw ParameterError("duplicate session id '" + s.id + "'");
        }
        if (s.route.size() < 2)
        {
            throw ParameterError("session " + s.id + ": route needs at least two nodes");
        }
        for (const auto& n : s.route)
        {
            if (std::find(net.nodes.begin(), net.nodes.end(), n) == net.nodes.end())
            {
                throw ParameterError("session " + s.id + ": unknown node '" + n + "'");
            }
        }
    }
}

namespace
{

EventSpec
parse_event(const io::Document& doc, const YAML::Node& node)
{
    EventSpec e;
    e.at = doc.duration(node, "at");
    const auto kind_text = doc.string(node, "kind");
    const auto kind = event_kind_from_string(kind_text);
    if (!kind)
    {
        doc.fail(node["kind"], "unknown event kind '" + kind_text + "'");
    }
    e.kind = *kind;
    switch (e.kind)
    {
    case EventKind::fiber_cut:
        e.target = doc.string(node, "link");
        e.duration_s = doc.duration(node, "repair_after");
        break;
    case EventKind::power_outage:
        e.target = doc.string(node, "node");
        e.duration_s = doc.duration(node, "restore_after");
        break;
    case EventKind::control_halt:
        e.target = doc.string(node, "node");
        e.duration_s = doc.duration(node, "resume_after");
        break;
    case EventKind::temp_excursion:
        e.target = doc.string(node, "detector");
        e.dark_multiplier = doc.number(node, "dark_multiplier");
        if (node["setpoint_c"])
        {
            e.setpoint_c = doc.number(node, "setpoint_c");
        }
        e.duration_s = doc.duration_or(node, "downtime", 0.0);
        break;
    case EventKind::loss_drift:
        e.target = doc.string(node, "link");
        e.amplitude_db = doc.number(node, "amplitude_db");
        e.period_s = doc.duration_or(node, "period", 86400.0);
        e.duration_s = doc.duration_or(node, "lasts", 0.0);
        break;
    }
    return e;
}

SessionSpec
parse_session(const io::Document& doc, const YAML::Node& node)
{
    SessionSpec s;
    s.id = doc.string(node, "id");
    const auto kind = doc.string(node, "kind");
    if (kind == "otp")
    {
        s.kind = SessionKind::otp;
        try
        {
            s.mode = apps::otp_mode_from_string(doc.optional_string(node, "mode").value_or("realtime"));
        }
        catch (const ParameterError& e)
        {
            doc.fail(node["mode"], e.what());
        }
        s.data_rate_bps = doc.number(node, "data_rate_bps");
        if (s.mode == apps::OtpMode::preloaded)
        {
            const auto bits = doc.integer(node, "card_bits");
            if (bits <= 0)
            {
                doc.fail(node["card_bits"], "card_bits must be positive");
            }
            s.card_bits = static_cast<std::uint64_t>(bits);
            s.load_at = doc.duration_or(node, "load_at", 0.0);
            if (node["reload_every"])
            {
                s.reload_every = doc.duration(node, "reload_every");
                if (!(*s.reload_every > 0.0))
                {
                    doc.fail(node["reload_every"], "reload_every must be positive");
                }
            }
        }
    }
    else if (kind == "vpn")
    {
        s.kind = SessionKind::vpn;
        s.refresh_hz = doc.number_or(node, "refresh_hz", 1.0);
        if (!(s.refresh_hz > 0.0))
        {
            doc.fail(node["refresh_hz"], "refresh_hz must be positive");
        }
    }
    else
    {
        doc.fail(node["kind"], "session kind must be otp or vpn");
    }
    for (const auto& n : doc.required(node, "route"))
    {
        s.route.push_back(doc.as_string(n));
    }
    s.start = doc.duration_or(node, "start", 0.0);
    if (node["stop"])
    {
        s.stop = doc.duration(node, "stop");
    }
    return s;
}

} // namespace

Scenario
load_scenario(const std::filesystem::path& path)
{
    const auto doc = io::Document::load(path);
    const auto& root = doc.root();
    if (doc.integer(root, "schema_version") != 1)
    {
        doc.fail(root["schema_version"], "unsupported scenario schema_version");
    }
    Scenario sc;
    sc.name = doc.optional_string(root, "name").value_or(path.stem().string());
    sc.network = netctl::load_network(doc.resolve(doc.string(root, "network")));
    sc.duration_s = doc.duration(root, "duration");
    sc.sample_interval_s = doc.duration_or(root, "sample_interval", 300.0);
    sc.seed = static_cast<std::uint64_t>(doc.integer_or(root, "seed", 0));
    try
    {
        sc.mode = photonics::mode_from_string(doc.optional_string(root, "mode").value_or("field"));
    }
    catch (const ParameterError& e)
    {
        doc.fail(root["mode"], e.what());
    }
    sc.statistical = doc.boolean_or(root, "statistical", true);
    if (const auto n = root["field_noise"])
    {
        sc.field_noise.background_yield = doc.number_or(n, "background_yield", sc.field_noise.background_yield);
        sc.field_noise.misalignment_increment =
            doc.number_or(n, "misalignment_increment", sc.field_noise.misalignment_increment);
    }
    if (const auto d = root["drift"])
    {
        sc.drift.metro_db = doc.number_or(d, "metro_db", sc.drift.metro_db);
        sc.drift.intercity_db = doc.number_or(d, "intercity_db", sc.drift.intercity_db);
        sc.drift.period_s = doc.duration_or(d, "period", sc.drift.period_s);
        if (!(sc.drift.period_s > 0.0) || sc.drift.metro_db < 0.0 || sc.drift.intercity_db < 0.0)
        {
            doc.fail(d, "drift amplitudes must be >= 0 and the period positive");
        }
    }
    if (const auto p = root["policy"])
    {
        for (const auto& kv : p)
        {
            const auto domain_id = doc.as_string(kv.first);
            auto it = std::find_if(sc.network.domains.begin(), sc.network.domains.end(),
                                   [&](const auto& d) { return d.id == domain_id; });
            if (it == sc.network.domains.end())
            {
                doc.fail(kv.first, "unknown domain '" + domain_id + "'");
            }
            netctl::SwitchPolicy pol;
            const auto mode = doc.string(kv.second, "mode");
            if (mode == "preemptive")
            {
                pol = netctl::SwitchPolicy::pin(doc.string(kv.second, "pin"));
            }
            else if (mode == "automatic")
            {
                pol = it->policy;
                pol.mode = netctl::PolicyMode::automatic;
                pol.dwell_s = doc.duration_or(kv.second, "dwell", pol.dwell_s);
                if (const auto c = kv.second["cycle"])
                {
                    pol.cycle.clear();
                    for (const auto& s : c)
                    {
                        pol.cycle.push_back(doc.as_string(s));
                    }
                }
            }
            else
            {
                doc.fail(kv.second["mode"], "policy mode must be preemptive or automatic");
            }
            try
            {
                pol.validate(it->states);
            }
            catch (const Error& e)
            {
                doc.fail(kv.second, e.what());
            }
            it->policy = pol;
        }
    }
    if (const auto list = root["events"])
    {
        for (const auto& node : list)
        {
            sc.events.push_back(parse_event(doc, node));
            try
            {
                // Validate incrementally so the message carries the entry's line.
                Scenario probe;
                probe.network = sc.network;
                probe.duration_s = 1.0;
                probe.events = sc.events;
                probe.validate();
            }
            catch (const EventError& e)
            {
                throw EventError(doc.source() + ":" + std::to_string(io::line_of(node)) + ": " + e.what());
            }
        }
    }
    if (const auto list = root["sessions"])
    {
        for (const auto& node : list)
        {
            sc.sessions.push_back(parse_session(doc, node));
        }
    }
    try
    {
        sc.validate();
    }
    catch (const ParameterError& e)
    {
        throw ConfigError(doc.source(), 0, e.what());
    }
    return sc;
}

void
EnvironmentState::begin(const EventSpec& e)
{
    switch (e.kind)
    {
    case EventKind::fiber_cut:
        ++m_fibers[e.target];
        break;
    case EventKind::power_outage:
    case EventKind::control_halt:
        ++m_nodes[e.target];
        break;
    case EventKind::temp_excursion:
        if (e.duration_s > 0.0)
        {
            ++m_devices[e.target];
        }
        else
        {
            m_dark.try_emplace(e.target, 1.0).first->second *= e.dark_multiplier;
        }
        break;
    case EventKind::loss_drift:
        m_drifts.push_back(e);
        break;
    }
}

void
EnvironmentState::end(const EventSpec& e)
{
    const auto dec = [](std::map<std::string, int>& m, const std::string& k) {
        if (--m[k] <= 0)
        {
            m.erase(k);
        }
    };
    switch (e.kind)
    {
    case EventKind::fiber_cut:
        dec(m_fibers, e.target);
        break;
    case EventKind::power_outage:
    case EventKind::control_halt:
        dec(m_nodes, e.target);
        break;
    case EventKind::temp_excursion:
        dec(m_devices, e.target);
        m_dark.try_emplace(e.target, 1.0).first->second *= e.dark_multiplier;
        break;
    case EventKind::loss_drift:
        for (auto it = m_drifts.begin(); it != m_drifts.end(); ++it)
        {
            if (it->at == e.at && it->target == e.target && it->amplitude_db == e.amplitude_db)
            {
                m_drifts.erase(it);
                break;
            }
        }
        break;
    }
}

bool
EnvironmentState::node_down(const std::string& node) const
{
    return m_nodes.count(node) > 0;
}

bool
EnvironmentState::device_down(const std::string& device) const
{
    return m_devices.count(device) > 0;
}

bool
EnvironmentState::fiber_cut(const std::string& fiber) const
{
    return m_fibers.count(fiber) > 0;
}

double
EnvironmentState::dark_multiplier(const std::string& device) const
{
    const auto it = m_dark.find(device);
    return it == m_dark.end() ? 1.0 : it->second;
}

double
EnvironmentState::drift_db(const std::set<std::string>& fibers, double t) const
{
    double extra = 0.0;
    for (const auto& d : m_drifts)
    {
        if (fibers.count(d.target))
        {
            extra += d.amplitude_db * std::sin(2.0 * std::numbers::pi * (t - d.at) / d.period_s);
        }
    }
    return extra;
}

namespace
{

enum class Action
{
    sample = 0,
    event_end = 1,
    event_start = 2,
    transition = 3
};

struct Scheduled
{
    double t;
    Action action;
    std::size_t seq;
    std::size_t index; // event index
    std::string state; // transition target

    bool
    operator>(const Scheduled& o) const
    {
        if (t != o.t)
        {
            return t > o.t;
        }
        if (action != o.action)
        {
            return action > o.action;
        }
        return seq > o.seq;
    }
};

struct Accum
{
    netctl::ActiveLink link;
    double producing = 0.0;
};

struct SessionRuntime
{
    const SessionSpec* spec;
    std::optional<apps::OtpSession> otp;
    std::optional<apps::VpnTunnel> vpn;
    double owed = 0.0;
    bool starved = false;
    double next_load = 0.0;
};

class Engine
{
public:
    explicit Engine(const Scenario& sc)
        : m_sc(sc)
        , m_net(sc.network)
        , m_ctl(sc.network)
        , m_store(sc.seed)
    {
        std::mt19937_64 phase_rng(sc.seed ^ 0x9e3779b97f4a7c15ULL);
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        for (const auto& e : m_net.catalog.entries())
        {
            m_phase[e.channel.id] = phase(phase_rng);
        }
        for (const auto& s : sc.sessions)
        {
            SessionRuntime rt{&s, std::nullopt, std::nullopt, 0.0, false, s.load_at};
            if (s.kind == SessionKind::otp)
            {
                rt.otp.emplace(s.id, s.route, s.mode, s.data_rate_bps, s.card_bits);
            }
            else
            {
                rt.vpn.emplace(s.id, s.route);
            }
            for (std::size_t i = 0; i + 1 < s.route.size(); ++i)
            {
                m_store.pool(s.route[i], s.route[i + 1]);
            }
            m_sessions.push_back(std::move(rt));
        }
    }

    Timeline
    run()
    {
        std::size_t seq = 0;
        const auto push = [&](double t, Action a, std::size_t index, std::string state = {}) {
            if (t <= m_sc.duration_s)
            {
                m_queue.push({t, a, seq++, index, std::move(state)});
            }
        };
        for (const auto& d : m_net.domains)
        {
            for (const auto& s : netctl::schedule(d.policy, m_sc.duration_s))
            {
                push(s.t, Action::transition, 0, s.state);
            }
        }
        for (std::size_t i = 0; i < m_sc.events.size(); ++i)
        {
            const auto& e = m_sc.events[i];
            push(e.at, Action::event_start, i);
            if (e.duration_s > 0.0)
            {
                push(e.at + e.duration_s, Action::event_end, i);
            }
        }
        const auto ticks = static_cast<std::size_t>(std::floor(m_sc.duration_s / m_sc.sample_interval_s + 1e-9));
        for (std::size_t k = 1; k <= ticks; ++k)
        {
            push(static_cast<double>(k) * m_sc.sample_interval_s, Action::sample, 0);
        }

        while (!m_queue.empty())
        {
            const auto item = m_queue.top();
            m_queue.pop();
            advance(item.t);
            switch (item.action)
            {
            case Action::sample:
                sample(item.t);
                break;
            case Action::transition:
                transition(item.state, item.t);
                break;
            case Action::event_start:
                event(item.index, item.t, true);
                break;
            case Action::event_end:
                event(item.index, item.t, false);
                break;
            }
        }

        for (const auto& p : m_store.pairs())
        {
            m_out.pools[p] = m_store.find(p.a, p.b)->counters();
        }
        m_out.pools_json = m_store.snapshot_json();
        return std::move(m_out);
    }

private:
    bool
    down(const netctl::ActiveLink& link) const
    {
        for (const auto& f : link.fibers)
        {
            if (m_env.fiber_cut(f))
            {
                return true;
            }
        }
        for (const auto* dev : {&link.key.first, &link.key.second})
        {
            if (m_env.device_down(*dev) || m_env.node_down(m_net.device(*dev).node))
            {
                return true;
            }
        }
        return false;
    }

    void
    advance(double t)
    {
        if (t <= m_now)
        {
            return;
        }
        for (const auto& [key, link] : m_ctl.active())
        {
            if (link.self_loop)
            {
                continue;
            }
            auto it = m_accum.find(key);
            if (it == m_accum.end())
            {
                it = m_accum.emplace(key, Accum{link, 0.0}).first;
            }
            it->second.link = link;
            if (!down(link))
            {
                const double from = std::max(m_now, link.ready_at);
                if (t > from)
                {
                    it->second.producing += t - from;
                }
            }
        }
        m_now = t;
    }

    std::set<netctl::LinkKey>
    down_links() const
    {
        std::set<netctl::LinkKey> out;
        for (const auto& [key, link] : m_ctl.active())
        {
            if (down(link))
            {
                out.insert(key);
            }
        }
        return out;
    }

    bool
    domain_halted(const netctl::Domain& d) const
    {
        for (const auto& h : m_halted)
        {
            for (const auto& t : d.fabric.terminals())
            {
                if (m_net.device(t.device).node == h.first && h.second > 0)
                {
                    return true;
                }
            }
        }
        return false;
    }

    void
    transition(const std::string& state, double t)
    {
        const auto& domain = m_net.domain_of_state(state);
        if (domain_halted(domain))
        {
            m_pending[domain.id] = state;
            m_out.events.push_back({t, "transition_deferred", domain.id, "note", state});
            return;
        }
        m_ctl.refresh_cache(t);
        const auto change = m_ctl.apply_state(state, t);
        m_out.transitions.push_back(
            {t, change.domain, change.state, change.added.size(), change.kept.size(), change.removed.size()});
    }

    void
    event(std::size_t index, double t, bool start)
    {
        const auto& e = m_sc.events[index];
        const auto before = down_links();
        if (start)
        {
            m_env.begin(e);
        }
        else
        {
            m_env.end(e);
        }
        if (e.kind == EventKind::control_halt)
        {
            m_halted[e.target] += start ? 1 : -1;
        }

        std::string detail;
        switch (e.kind)
        {
        case EventKind::temp_excursion:
            detail = fmt::format("dark_multiplier={}", e.dark_multiplier);
            if (e.setpoint_c)
            {
                detail += fmt::format(";setpoint_c={}", *e.setpoint_c);
            }
            break;
        case EventKind::loss_drift:
            detail = fmt::format("amplitude_db={};period_s={}", e.amplitude_db, e.period_s);
            break;
        default:
            detail = fmt::format("duration_s={}", e.duration_s);
            break;
        }
        m_out.events.push_back({t, std::string(to_string(e.kind)), e.target, start ? "start" : "end", detail});

        if (!start && e.kind == EventKind::control_halt)
        {
            for (auto it = m_pending.begin(); it != m_pending.end();)
            {
                const auto& domain = m_net.domain(it->first);
                if (domain_halted(domain))
                {
                    ++it;
                    continue;
                }
                const auto state = it->second;
                it = m_pending.erase(it);
                transition(state, t);
            }
        }

        const auto after = down_links();
        std::vector<netctl::LinkKey> recovered;
        for (const auto& k : before)
        {
            if (!after.count(k))
            {
                recovered.push_back(k);
            }
        }
        m_ctl.reestablish(recovered, t);
    }

    std::mt19937_64&
    rng_for(const std::string& label)
    {
        auto it = m_rng.find(label);
        if (it == m_rng.end())
        {
            auto seq = make_seed(m_sc.seed, label);
            it = m_rng.emplace(label, std::mt19937_64(seq)).first;
        }
        return it->second;
    }

    double
    field_drift(const std::set<std::string>& fibers, double t) const
    {
        double extra = 0.0;
        for (const auto& f : fibers)
        {
            const auto* entry = m_net.catalog.find(f);
            const double amp = entry->channel.environment == photonics::Environment::intercity ? m_sc.drift.intercity_db
                                                                                              : m_sc.drift.metro_db;
            extra += amp * std::sin(2.0 * std::numbers::pi * t / m_sc.drift.period_s + m_phase.at(f));
        }
        return extra;
    }

    void
    observe(Sample& s, const netctl::ActiveLink& link, double producing, double t_mid)
    {
        auto src = m_net.source_for(link.key);
        auto det = m_net.detector_for(link.key);
        det.y0_dark *= m_env.dark_multiplier(link.key.second);
        det = photonics::in_mode(det, m_sc.mode, m_sc.field_noise);

        double loss = link.loss_db + m_env.drift_db(link.fibers, t_mid);
        if (m_sc.mode == photonics::Mode::field)
        {
            loss += field_drift(link.fibers, t_mid);
        }
        loss = std::min(loss, 0.0);

        auto budget = photonics::link_budget(loss, src, det);
        if (m_sc.statistical)
        {
            auto& rng = rng_for(s.link);
            const double pulses = src.pulse_rate_hz * producing;
            const double n_mu = pulses * src.mix.signal_fraction();
            const double n_nu = pulses * src.mix.decoy_fraction();
            const double n_0 = pulses * src.mix.vacuum_fraction();
            const auto clicks = [&](double mean) {
                return mean > 0.0 ? std::poisson_distribution<long long>(mean)(rng) : 0LL;
            };
            const auto errors = [&](long long n, double p) {
                return n > 0 ? std::binomial_distribution<long long>(n, std::clamp(p, 0.0, 1.0))(rng) : 0LL;
            };
            const auto c_mu = clicks(n_mu * budget.q_mu);
            const auto c_nu = clicks(n_nu * budget.q_nu);
            const auto c_0 = clicks(n_0 * budget.y0);
            const auto x_mu = errors(c_mu, budget.e_mu);
            const auto x_nu = errors(c_nu, budget.e_nu);

            photonics::LinkBudget<double> seen;
            seen.q_mu = static_cast<double>(c_mu) / n_mu;
            seen.q_nu = static_cast<double>(c_nu) / n_nu;
            seen.y0 = static_cast<double>(c_0) / n_0;
            seen.e_mu = c_mu > 0 ? static_cast<double>(x_mu) / static_cast<double>(c_mu) : 0.0;
            seen.e_nu = c_nu > 0 ? static_cast<double>(x_nu) / static_cast<double>(c_nu) : 0.0;
            budget = seen;
        }
        double rate = 0.0;
        if (budget.q_mu > 0.0 && budget.q_nu > 0.0)
        {
            rate = photonics::key_rate_from_budget(budget, src, m_net.security, det.e0);
        }
        s.qber_signal = budget.e_mu;
        s.qber_decoy = budget.e_nu;
        s.vacuum_yield = budget.y0;
        s.bits = static_cast<std::uint64_t>(std::floor(rate * producing));
    }

    void
    sample(double t)
    {
        const double dt = m_sc.sample_interval_s;
        m_ctl.refresh_cache(t);
        const auto first = m_out.samples.size();
        std::vector<keymgmt::KeyPool*> pools;
        for (auto& [key, acc] : m_accum)
        {
            Sample s;
            s.t = t;
            s.link = sample_label(acc.link);
            s.producing_s = acc.producing;
            if (acc.producing > 0.0)
            {
                observe(s, acc.link, acc.producing, t - 0.5 * dt);
            }
            s.rate_bps = static_cast<double>(s.bits) / dt;
            const auto pair = m_net.node_pair(key);
            auto& pool = m_store.pool(pair.first, pair.second);
            if (s.bits > 0)
            {
                pool.deposit(s.bits, m_net.device(key.first).node);
            }
            pools.push_back(&pool);
            m_out.samples.push_back(std::move(s));
        }
        m_accum.clear();

        for (auto& rt : m_sessions)
        {
            serve(rt, t);
        }
        for (std::size_t i = first; i < m_out.samples.size(); ++i)
        {
            m_out.samples[i].pool_bits = pools[i - first]->available();
        }
    }

    void
    serve(SessionRuntime& rt, double t)
    {
        const auto& s = *rt.spec;
        const double dt = m_sc.sample_interval_s;
        const double lo = std::max(t - dt, s.start);
        const double hi = s.stop ? std::min(t, *s.stop) : t;

        if (rt.otp && s.mode == apps::OtpMode::preloaded && t >= rt.next_load)
        {
            try
            {
                rt.otp->preload_debit(m_store);
                rt.next_load = s.reload_every ? rt.next_load + *s.reload_every
                                              : std::numeric_limits<double>::infinity();
                m_out.events.push_back({t, "preload", s.id, "note", fmt::format("card_bits={}", s.card_bits)});
            }
            catch (const InsufficientKeyError& e)
            {
                m_out.events.push_back({t, "preload_deferred", s.id, "note", e.what()});
            }
        }
        if (hi <= lo)
        {
            return;
        }
        const double rate = rt.otp ? s.data_rate_bps : s.refresh_hz;
        rt.owed += rate * (hi - lo);
        const auto want = static_cast<std::uint64_t>(std::floor(rt.owed));
        rt.owed -= static_cast<double>(want);

        SessionRecord rec{t, s.id, 0, 0, "ok"};
        if (rt.otp)
        {
            rec.requested_bits = want;
            if (s.mode == apps::OtpMode::preloaded && !rt.otp->loaded())
            {
                rec.status = "starved";
            }
            else
            {
                try
                {
                    rt.otp->consume(m_store, want);
                    rec.delivered_bits = want;
                }
                catch (const InsufficientKeyError& e)
                {
                    rec.status = "starved";
                    if (!rt.starved)
                    {
                        m_out.events.push_back({t, "key_exhausted", s.id, "note", e.what()});
                    }
                }
            }
        }
        else
        {
            rec.requested_bits = want * apps::vpn_key_bits;
            const auto got = rt.vpn->refresh_many(m_store, want);
            rec.delivered_bits = got * apps::vpn_key_bits;
            if (got < want)
            {
                rec.status = "starved";
                if (!rt.starved)
                {
                    m_out.events.push_back({t, "key_exhausted", s.id, "note",
                                            fmt::format("tunnel {} refreshed {} of {} keys", s.id, got, want)});
                }
            }
        }
        rt.starved = rec.status == "starved";
        m_out.sessions.push_back(std::move(rec));
    }

    const Scenario& m_sc;
    const netctl::Network& m_net;
    netctl::Controller m_ctl;
    keymgmt::KeyStore m_store;
    EnvironmentState m_env;
    std::priority_queue<Scheduled, std::vector<Scheduled>, std::greater<>> m_queue;
    std::map<netctl::LinkKey, Accum> m_accum;
    std::map<std::string, std::mt19937_64> m_rng;
    std::map<std::string, double> m_phase;
    std::map<std::string, int> m_halted;
    std::map<std::string, std::string> m_pending;
    std::vector<SessionRuntime> m_sessions;
    double m_now = 0.0;
    Timeline m_out;
};

std::ofstream
open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
        throw ConfigError(path.string(), 0, "cannot open for writing");
    }
    return out;
}

std::string
num(double v)
{
    return fmt::format("{:.10g}", v);
}

} // namespace

Timeline
run(const Scenario& scenario)
{
    scenario.validate();
    scenario.network.validate();
    Engine engine(scenario);
    return engine.run();
}

void
write_timeline_csv(const Timeline& timeline, const std::filesystem::path& path)
{
    auto out = open_out(path);
    std::string buf = std::string(timeline_header) + "\n";
    for (const auto& s : timeline.samples)
    {
        buf += fmt::format("{},{},{},{},{},{},{}\n", num(s.t), s.link, num(s.qber_signal), num(s.qber_decoy),
                           num(s.vacuum_yield), num(s.rate_bps), s.pool_bits);
    }
    out << buf;
}

void
write_transitions_csv(const Timeline& timeline, const std::filesystem::path& path)
{
    auto out = open_out(path);
    out << "t_s,domain,state,added,kept,removed\n";
    for (const auto& r : timeline.transitions)
    {
        out << fmt::format("{},{},{},{},{},{}\n", num(r.t), r.domain, r.state, r.added, r.kept, r.removed);
    }
}

namespace
{

std::string
csv_cell(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
    {
        return s;
    }
    std::string q = "\"";
    for (const char c : s)
    {
        q += c == '"' ? std::string("\"\"") : std::string(1, c);
    }
    return q + "\"";
}

} // namespace

void
write_events_csv(const Timeline& timeline, const std::filesystem::path& path)
{
    auto out = open_out(path);
    out << "t_s,kind,target,phase,detail\n";
    for (const auto& e : timeline.events)
    {
        out << fmt::format("{},{},{},{},{}\n", num(e.t), e.kind, e.target, e.phase, csv_cell(e.detail));
    }
}

void
write_sessions_csv(const Timeline& timeline, const std::filesystem::path& path)
{
    auto out = open_out(path);
    out << "t_s,session,requested_bits,delivered_bits,status\n";
    for (const auto& r : timeline.sessions)
    {
        out << fmt::format("{},{},{},{},{}\n", num(r.t), r.session, r.requested_bits, r.delivered_bits, r.status);
    }
}

void
write_timeline_json(const Timeline& timeline, const std::filesystem::path& path)
{
    nlohmann::json doc;
    doc["schema_version"] = 1;
    auto& samples = doc["samples"] = nlohmann::json::array();
    for (const auto& s : timeline.samples)
    {
        samples.push_back({{"t_s", s.t},
                           {"link", s.link},
                           {"qber_signal", s.qber_signal},
                           {"qber_decoy", s.qber_decoy},
                           {"vacuum_yield", s.vacuum_yield},
                           {"rate_bps", s.rate_bps},
                           {"pool_bits", s.pool_bits}});
    }
    auto& tr = doc["transitions"] = nlohmann::json::array();
    for (const auto& r : timeline.transitions)
    {
        tr.push_back({{"t_s", r.t}, {"domain", r.domain}, {"state", r.state}});
    }
    auto& ev = doc["events"] = nlohmann::json::array();
    for (const auto& e : timeline.events)
    {
        ev.push_back({{"t_s", e.t}, {"kind", e.kind}, {"target", e.target}, {"phase", e.phase}, {"detail", e.detail}});
    }
    doc["pools"] = nlohmann::json::parse(timeline.pools_json.empty() ? "{}" : timeline.pools_json)["pools"];
    auto out = open_out(path);
    out << doc.dump() << "\n";
}

Timeline
read_timeline_csv(const std::filesystem::path& path)
{
    const auto table = io::read_csv(path);
    const std::vector<std::string> expected{"t_s", "link", "qber_signal", "qber_decoy", "vacuum_yield", "rate_bps",
                                            "pool_bits"};
    if (table.header != expected)
    {
        throw ConfigError(table.source, 1, std::string("timeline header must be ") + timeline_header);
    }
    Timeline tl;
    for (const auto& row : table.rows)
    {
        Sample s;
        s.t = io::parse_number(row.cells[0], table.source, row.line);
        s.link = row.cells[1];
        s.qber_signal = io::parse_number(row.cells[2], table.source, row.line);
        s.qber_decoy = io::parse_number(row.cells[3], table.source, row.line);
        s.vacuum_yield = io::parse_number(row.cells[4], table.source, row.line);
        s.rate_bps = io::parse_number(row.cells[5], table.source, row.line);
        s.pool_bits = static_cast<std::uint64_t>(io::parse_number(row.cells[6], table.source, row.line));
        tl.samples.push_back(std::move(s));
    }
    return tl;
}

std::vector<TransitionRecord>
read_transitions_csv(const std::filesystem::path& path)
{
    const auto table = io::read_csv(path);
    const auto c_t = table.column("t_s");
    const auto c_d = table.column("domain");
    const auto c_s = table.column("state");
    std::vector<TransitionRecord> out;
    for (const auto& row : table.rows)
    {
        TransitionRecord r;
        r.t = io::parse_number(row.cells[c_t], table.source, row.line);
        r.domain = row.cells[c_d];
        r.state = row.cells[c_s];
        out.push_back(std::move(r));
    }
    return out;
}

std::map<std::string, LinkStats>
link_stats(const Timeline& timeline)
{
    std::map<std::string, LinkStats> out;
    std::map<std::string, double> sq;
    for (const auto& s : timeline.samples)
    {
        auto& st = out[s.link];
        st.link = s.link;
        ++st.samples;
        if (s.rate_bps > 0.0)
        {
            ++st.producing;
            st.mean_qber_signal += s.qber_signal;
            st.mean_qber_decoy += s.qber_decoy;
            st.mean_rate_bps += s.rate_bps;
            sq[s.link] += s.qber_signal * s.qber_signal;
        }
    }
    for (auto& [label, st] : out)
    {
        if (st.producing > 0)
        {
            const auto n = static_cast<double>(st.producing);
            st.mean_qber_signal /= n;
            st.mean_qber_decoy /= n;
            st.mean_rate_bps /= n;
            const double var = sq[label] / n - st.mean_qber_signal * st.mean_qber_signal;
            st.qber_signal_stddev = std::sqrt(std::max(0.0, var));
        }
    }
    return out;
}

std::vector<StateRow>
summarize_by_state(const Timeline& timeline)
{
    std::map<std::string, std::vector<const TransitionRecord*>> by_domain;
    std::vector<std::pair<std::string, std::string>> order;
    for (const auto& tr : timeline.transitions)
    {
        by_domain[tr.domain].push_back(&tr);
        const std::pair<std::string, std::string> key{tr.domain, tr.state};
        if (std::find(order.begin(), order.end(), key) == order.end())
        {
            order.push_back(key);
        }
    }

    std::map<std::pair<std::string, std::string>, std::map<std::string, StateRow>> rows;
    for (const auto& s : timeline.samples)
    {
        const auto slash = s.link.find('/');
        if (slash == std::string::npos)
        {
            throw ConfigError("timeline link '" + s.link + "' lacks a domain prefix");
        }
        const auto domain = s.link.substr(0, slash);
        const auto it = by_domain.find(domain);
        if (it == by_domain.end())
        {
            continue;
        }
        const TransitionRecord* current = nullptr;
        for (const auto* tr : it->second)
        {
            if (tr->t < s.t)
            {
                current = tr;
            }
        }
        if (current == nullptr)
        {
            continue;
        }
        auto& row = rows[{domain, current->state}][s.link.substr(slash + 1)];
        row.domain = domain;
        row.state = current->state;
        row.link = s.link.substr(slash + 1);
        ++row.samples;
        if (s.rate_bps > 0.0)
        {
            ++row.producing;
            row.mean_rate_bps += s.rate_bps;
            row.mean_qber_signal += s.qber_signal;
        }
    }

    std::vector<StateRow> out;
    for (const auto& key : order)
    {
        const auto it = rows.find(key);
        if (it == rows.end())
        {
            continue;
        }
        for (auto [link, row] : it->second)
        {
            if (row.producing > 0)
            {
                row.mean_rate_bps /= static_cast<double>(row.producing);
                row.mean_qber_signal /= static_cast<double>(row.producing);
            }
            out.push_back(std::move(row));
        }
    }
    return out;
}

std::vector<ModeDelta>
compare_modes(const Scenario& lab, const Scenario& field)
{
    const auto a = link_stats(run(lab));
    const auto b = link_stats(run(field));
    std::vector<ModeDelta> out;
    for (const auto& [label, st] : a)
    {
        const auto it = b.find(label);
        if (it == b.end())
        {
            continue;
        }
        out.push_back({label, st.mean_qber_signal, it->second.mean_qber_signal, st.mean_rate_bps,
                       it->second.mean_rate_bps});
    }
    return out;
}

} // namespace hcw::simkit
