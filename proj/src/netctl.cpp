#include <hcw/io.hpp>
#include <hcw/netctl.hpp>

#include <algorithm>
#include <cmath>

namespace hcw::netctl
{

std::string
link_label(const LinkKey& key)
{
    return key.first + "->" + key.second;
}

namespace
{

std::string
join(const std::vector<std::string>& items)
{
    std::string out;
    for (const auto& s : items)
    {
        out += (out.empty() ? "" : ", ") + s;
    }
    return out;
}

std::vector<std::string>
state_ids(const std::vector<NetworkState>& states)
{
    std::vector<std::string> ids;
    for (const auto& s : states)
    {
        ids.push_back(s.id);
    }
    return ids;
}

} // namespace

void
SwitchPolicy::validate(const std::vector<NetworkState>& states) const
{
    const auto known = [&](const std::string& id) {
        if (std::none_of(states.begin(), states.end(), [&](const auto& s) { return s.id == id; }))
        {
            throw UnknownStateError("unknown state '" + id + "'; known states: " + join(state_ids(states)));
        }
    };
    if (mode == PolicyMode::preemptive)
    {
        known(pinned);
        return;
    }
    if (!(dwell_s > 0.0))
    {
        throw ParameterError("dwell interval must be positive");
    }
    if (cycle.empty())
    {
        throw ParameterError("automatic policy needs a non-empty cycle");
    }
    for (const auto& id : cycle)
    {
        known(id);
    }
}

std::vector<ScheduledState>
schedule(const SwitchPolicy& policy, double horizon_s)
{
    std::vector<ScheduledState> out;
    if (!(horizon_s > 0.0))
    {
        return out;
    }
    if (policy.mode == PolicyMode::preemptive)
    {
        out.push_back({0.0, policy.pinned});
        return out;
    }
    if (!(policy.dwell_s > 0.0) || policy.cycle.empty())
    {
        throw ParameterError("automatic policy needs a positive dwell and a non-empty cycle");
    }
    for (std::size_t k = 0;; ++k)
    {
        const double t = static_cast<double>(k) * policy.dwell_s;
        if (t >= horizon_s)
        {
            break;
        }
        out.push_back({t, policy.cycle[k % policy.cycle.size()]});
    }
    return out;
}

const NetworkState&
Domain::state(const std::string& state_id) const
{
    for (const auto& s : states)
    {
        if (s.id == state_id)
        {
            return s;
        }
    }
    throw UnknownStateError("unknown state '" + state_id + "' in domain " + id
                            + "; known states: " + join(state_ids(states)));
}

bool
Domain::has_state(const std::string& state_id) const
{
    return std::any_of(states.begin(), states.end(), [&](const auto& s) { return s.id == state_id; });
}

const Device&
Network::device(const std::string& id) const
{
    const auto it = devices.find(id);
    if (it == devices.end())
    {
        throw ParameterError("unknown device '" + id + "'");
    }
    return it->second;
}

const Domain&
Network::domain(const std::string& id) const
{
    for (const auto& d : domains)
    {
        if (d.id == id)
        {
            return d;
        }
    }
    throw ParameterError("unknown domain '" + id + "'");
}

const Domain&
Network::domain_of_state(const std::string& state_id) const
{
    std::vector<std::string> all;
    for (const auto& d : domains)
    {
        if (d.has_state(state_id))
        {
            return d;
        }
        for (const auto& s : d.states)
        {
            all.push_back(s.id);
        }
    }
    throw UnknownStateError("unknown state '" + state_id + "'; known states: " + join(all));
}

photonics::SourceConfig
Network::source_for(const LinkKey& link) const
{
    auto s = source;
    s.mu_signal = device(link.first).mu_signal;
    return s;
}

photonics::DetectorConfig
Network::detector_for(const LinkKey& link) const
{
    const auto& rx = device(link.second);
    const auto& cls = calibration.detector_class(rx.detector_class);
    photonics::DetectorConfig d;
    d.eta_det = cls.eta_det;
    d.y0_dark = cls.y0_dark;
    d.e_det = cls.e_det;
    d.apd_count = rx.apd_count;
    if (const auto it = misalignment.find(link); it != misalignment.end())
    {
        d.e_det = it->second;
    }
    return d;
}

std::pair<std::string, std::string>
Network::node_pair(const LinkKey& link) const
{
    auto a = device(link.first).node;
    auto b = device(link.second).node;
    if (b < a)
    {
        std::swap(a, b);
    }
    return {a, b};
}

std::set<LinkKey>
resolve_state(const Domain& domain, const NetworkState& state)
{
    std::set<LinkKey> out;
    for (const auto& p : fabric::resolve_paths(domain.fabric, state.settings))
    {
        out.emplace(p.transmitter, p.receiver);
    }
    return out;
}

void
Network::validate() const
{
    for (const auto& d : domains)
    {
        for (const auto& t : d.fabric.terminals())
        {
            const auto& dev = device(t.device);
            if (dev.unit != t.unit)
            {
                throw ConfigError("device " + t.device + " has unit '" + dev.unit + "' in the network but '"
                                  + t.unit + "' in the fabric of domain " + d.id);
            }
        }
        for (const auto& s : d.fabric.segments())
        {
            if (!s.fiber.empty() && catalog.find(s.fiber) == nullptr)
            {
                throw ConfigError("domain " + d.id + " references unknown fiber '" + s.fiber + "'");
            }
        }
        for (const auto& st : d.states)
        {
            const auto got = resolve_state(d, st);
            if (got != st.expected_links)
            {
                std::vector<std::string> labels;
                for (const auto& k : got)
                {
                    labels.push_back(link_label(k));
                }
                throw ConfigError("state " + st.id + " of domain " + d.id
                                  + " resolves to {" + join(labels) + "}, not its expected links");
            }
        }
        d.policy.validate(d.states);
    }
}

std::set<std::pair<std::string, std::string>>
coverage(const Network& network, const std::vector<std::string>& ids)
{
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& id : ids)
    {
        const auto& domain = network.domain_of_state(id);
        for (const auto& link : resolve_state(domain, domain.state(id)))
        {
            const auto& a = network.device(link.first).node;
            const auto& b = network.device(link.second).node;
            if (a != b)
            {
                out.emplace(a, b);
            }
        }
    }
    return out;
}

namespace
{

LinkKey
parse_link(const io::Document& doc, const YAML::Node& node)
{
    const auto text = doc.as_string(node);
    const auto arrow = text.find("->");
    if (arrow == std::string::npos || arrow == 0 || arrow + 2 == text.size())
    {
        doc.fail(node, "link must look like T->R, got '" + text + "'");
    }
    return {text.substr(0, arrow), text.substr(arrow + 2)};
}

SwitchPolicy
parse_policy(const io::Document& doc, const YAML::Node& node)
{
    SwitchPolicy p;
    const auto mode = doc.string(node, "mode");
    if (mode == "preemptive")
    {
        p.mode = PolicyMode::preemptive;
        p.pinned = doc.string(node, "pin");
    }
    else if (mode == "automatic")
    {
        p.mode = PolicyMode::automatic;
        p.dwell_s = doc.duration_or(node, "dwell", 1800.0);
        const auto cycle = doc.required(node, "cycle");
        for (const auto& s : cycle)
        {
            p.cycle.push_back(doc.as_string(s));
        }
    }
    else
    {
        doc.fail(node["mode"], "policy mode must be preemptive or automatic");
    }
    return p;
}

std::map<LinkKey, double>
load_misalignment(const std::filesystem::path& path)
{
    const auto table = io::read_csv(path);
    std::map<LinkKey, double> out;
    for (const auto& row : table.rows)
    {
        for (std::size_t c = 1; c < table.header.size(); ++c)
        {
            const double v = io::parse_number(row.cells[c], table.source, row.line);
            if (!(v >= 0.0 && v < 0.5))
            {
                throw ConfigError(table.source, row.line, "misalignment must be in [0, 0.5)");
            }
            out[{row.cells[0], table.header[c]}] = v;
        }
    }
    return out;
}

} // namespace

Network
load_network(const std::filesystem::path& path)
{
    const auto doc = io::Document::load(path);
    const auto& root = doc.root();
    if (doc.integer(root, "schema_version") != 1)
    {
        doc.fail(root["schema_version"], "unsupported network schema_version");
    }

    Network net;
    net.catalog = photonics::FiberCatalog::load(doc.resolve(doc.string(root, "catalog")));
    net.calibration = photonics::load_calibration(doc.resolve(doc.string(root, "calibration")));
    if (const auto m = doc.optional_string(root, "misalignment"))
    {
        net.misalignment = load_misalignment(doc.resolve(*m));
    }

    if (const auto t = root["timing"])
    {
        net.timing.t_fast_s = doc.duration_or(t, "t_fast", net.timing.t_fast_s);
        net.timing.t_calibrate_s = doc.duration_or(t, "t_calibrate", net.timing.t_calibrate_s);
        if (t["cache_max_age"])
        {
            net.timing.cache_max_age_s = doc.duration(t, "cache_max_age");
        }
        if (net.timing.t_fast_s < 0.0 || net.timing.t_calibrate_s < 0.0)
        {
            doc.fail(t, "establishment delays must be non-negative");
        }
    }
    if (const auto s = root["source"])
    {
        net.source.pulse_rate_hz = doc.number_or(s, "pulse_rate_hz", net.source.pulse_rate_hz);
        net.source.mu_signal = doc.number_or(s, "mu_signal", net.source.mu_signal);
        net.source.nu_decoy = doc.number_or(s, "nu_decoy", net.source.nu_decoy);
        if (const auto mix = s["mix"])
        {
            if (!mix.IsSequence() || mix.size() != 3)
            {
                doc.fail(mix, "mix must be [signal, decoy, vacuum]");
            }
            net.source.mix = {static_cast<int>(doc.as_number(mix[0])), static_cast<int>(doc.as_number(mix[1])),
                              static_cast<int>(doc.as_number(mix[2]))};
        }
        try
        {
            net.source.validate();
        }
        catch (const ParameterError& e)
        {
            doc.fail(s, e.what());
        }
    }
    if (const auto s = root["security"])
    {
        net.security.q = doc.number_or(s, "q", net.security.q);
        net.security.f_ec = doc.number_or(s, "f_ec", net.security.f_ec);
        net.security.qber_abort_threshold = doc.number_or(s, "qber_abort_threshold", net.security.qber_abort_threshold);
        try
        {
            net.security.validate();
        }
        catch (const ParameterError& e)
        {
            doc.fail(s, e.what());
        }
    }

    for (const auto& n : doc.required(root, "nodes"))
    {
        net.nodes.push_back(doc.as_string(n));
    }
    for (const auto& node : doc.required(root, "devices"))
    {
        Device d;
        d.id = doc.string(node, "id");
        d.node = doc.string(node, "node");
        d.unit = doc.optional_string(node, "unit").value_or("");
        d.apd_count = static_cast<int>(doc.integer_or(node, "apd_count", 1));
        d.mu_signal = doc.number_or(node, "mu_signal", net.source.mu_signal);
        d.detector_class = doc.optional_string(node, "detector_class").value_or("standard");
        if (std::find(net.nodes.begin(), net.nodes.end(), d.node) == net.nodes.end())
        {
            doc.fail(node["node"], "unknown node '" + d.node + "'");
        }
        if (d.apd_count != 1 && d.apd_count != 2)
        {
            doc.fail(node["apd_count"], "apd_count must be 1 or 2");
        }
        if (!(d.mu_signal > net.source.nu_decoy && d.mu_signal < 1.0))
        {
            doc.fail(node["mu_signal"], "mu_signal must lie in (nu_decoy, 1)");
        }
        if (!net.calibration.classes.count(d.detector_class))
        {
            doc.fail(node, "unknown detector class '" + d.detector_class + "'");
        }
        if (!net.devices.emplace(d.id, d).second)
        {
            doc.fail(node, "duplicate device '" + d.id + "'");
        }
    }

    std::set<std::string> seen_states;
    for (const auto& node : doc.required(root, "domains"))
    {
        Domain d;
        d.id = doc.string(node, "id");
        d.fabric = fabric::load_fabric(doc.resolve(doc.string(node, "fabric")));
        for (const auto& t : d.fabric.terminals())
        {
            if (!net.devices.count(t.device))
            {
                doc.fail(node["fabric"], "fabric terminal '" + t.device + "' is not a network device");
            }
        }
        for (const auto& sn : doc.required(node, "states"))
        {
            NetworkState s;
            s.id = doc.string(sn, "id");
            if (!seen_states.insert(s.id).second)
            {
                doc.fail(sn, "state id '" + s.id + "' is defined twice");
            }
            if (const auto settings = sn["settings"])
            {
                for (const auto& kv : settings)
                {
                    s.settings[doc.as_string(kv.first)] = doc.as_string(kv.second);
                }
            }
            for (const auto& l : doc.required(sn, "expected_links"))
            {
                s.expected_links.insert(parse_link(doc, l));
            }
            d.states.push_back(std::move(s));
        }
        d.policy = parse_policy(doc, doc.required(node, "policy"));
        try
        {
            d.policy.validate(d.states);
        }
        catch (const Error& e)
        {
            doc.fail(node["policy"], e.what());
        }
        net.domains.push_back(std::move(d));
    }

    net.validate();
    return net;
}

bool
CalibrationCache::hit(const LinkKey& link, double now) const
{
    const auto it = m_entries.find(link);
    if (it == m_entries.end())
    {
        return false;
    }
    return !m_max_age || now - it->second <= *m_max_age;
}

void
CalibrationCache::store(const LinkKey& link, double now)
{
    auto& t = m_entries[link];
    t = std::max(t, now);
}

void
CalibrationCache::refresh_devices(const std::set<std::string>& devices, double now)
{
    for (auto& [key, t] : m_entries)
    {
        if (devices.count(key.first) || devices.count(key.second))
        {
            t = std::max(t, now);
        }
    }
}

Controller::Controller(const Network& network)
    : m_network(&network)
    , m_cache(network.timing.cache_max_age_s)
{
}

double
Controller::delay_for(const LinkKey& link, double at, bool& hit) const
{
    hit = m_cache.hit(link, at);
    return hit ? m_network->timing.t_fast_s : m_network->timing.t_calibrate_s;
}

StateChange
Controller::apply_state(const std::string& state_id, double at)
{
    const auto& domain = m_network->domain_of_state(state_id);
    const auto& state = domain.state(state_id);
    const auto paths = fabric::resolve_paths(domain.fabric, state.settings);

    StateChange change;
    change.domain = domain.id;
    change.state = state_id;
    change.at = at;

    std::set<LinkKey> next;
    for (const auto& p : paths)
    {
        next.emplace(p.transmitter, p.receiver);
    }
    for (auto it = m_active.begin(); it != m_active.end();)
    {
        if (it->second.domain == domain.id && !next.count(it->first))
        {
            change.removed.push_back(it->first);
            it = m_active.erase(it);
        }
        else
        {
            ++it;
        }
    }
    for (const auto& p : paths)
    {
        const LinkKey key{p.transmitter, p.receiver};
        const auto it = m_active.find(key);
        if (it != m_active.end())
        {
            it->second.state = state_id;
            change.kept.push_back(key);
            continue;
        }
        ActiveLink link;
        link.key = key;
        link.domain = domain.id;
        link.state = state_id;
        link.loss_db = p.total_loss_db;
        link.self_loop = p.self_loop;
        link.fibers = p.fibers(domain.fabric);
        link.ready_at = at + delay_for(key, at, link.cache_hit);
        m_active.emplace(key, std::move(link));
        change.added.push_back(key);
    }
    m_current[domain.id] = state_id;
    return change;
}

void
Controller::reestablish(const std::vector<LinkKey>& links, double at)
{
    for (const auto& key : links)
    {
        const auto it = m_active.find(key);
        if (it == m_active.end())
        {
            continue;
        }
        bool hit = false;
        it->second.ready_at = std::max(it->second.ready_at, at + delay_for(key, at, hit));
        it->second.cache_hit = hit;
    }
}

void
Controller::refresh_cache(double now)
{
    for (const auto& [key, link] : m_active)
    {
        if (link.ready_at > now)
        {
            continue;
        }
        m_cache.store(key, now);
        if (link.self_loop)
        {
            std::set<std::string> unit_devices;
            const auto& unit = m_network->device(key.first).unit;
            for (const auto& [id, dev] : m_network->devices)
            {
                if (dev.unit == unit)
                {
                    unit_devices.insert(id);
                }
            }
            m_cache.refresh_devices(unit_devices, now);
        }
    }
}

std::optional<std::string>
Controller::current_state(const std::string& domain) const
{
    const auto it = m_current.find(domain);
    if (it == m_current.end())
    {
        return std::nullopt;
    }
    return it->second;
}

} // namespace hcw::netctl
