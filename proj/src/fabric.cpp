#include <hcw/fabric.hpp>
#include <hcw/io.hpp>

#include <algorithm>
#include <cmath>

namespace hcw::fabric
{

std::string_view
to_string(ComponentKind kind)
{
    switch (kind)
    {
    case ComponentKind::circulator3:
        return "circulator3";
    case ComponentKind::switch_1x2:
        return "switch_1x2";
    case ComponentKind::switch_2x2:
        return "switch_2x2";
    case ComponentKind::switch_1xN:
        return "switch_1xN";
    case ComponentKind::splitter_1xN:
        return "splitter_1xN";
    }
    return "?";
}

namespace
{

std::optional<ComponentKind>
kind_from_string(std::string_view s)
{
    for (auto k : {ComponentKind::circulator3, ComponentKind::switch_1x2, ComponentKind::switch_2x2,
                   ComponentKind::switch_1xN, ComponentKind::splitter_1xN})
    {
        if (to_string(k) == s)
        {
            return k;
        }
    }
    return std::nullopt;
}

std::string
branch_name(int i)
{
    return std::to_string(i);
}

} // namespace

double
Component::pass_loss_db() const
{
    if (insertion_loss_db)
    {
        return *insertion_loss_db;
    }
    switch (kind)
    {
    case ComponentKind::circulator3:
        return default_circulator_loss_db;
    case ComponentKind::splitter_1xN:
        return splitter_loss(branches);
    default:
        return default_switch_loss_db;
    }
}

bool
Component::switchable() const
{
    return kind == ComponentKind::switch_1x2 || kind == ComponentKind::switch_2x2
           || kind == ComponentKind::switch_1xN;
}

std::vector<std::string>
Component::port_names() const
{
    switch (kind)
    {
    case ComponentKind::circulator3:
        return {"1", "2", "3"};
    case ComponentKind::switch_1x2:
        return {"c", "a", "b"};
    case ComponentKind::switch_2x2:
        return {"a1", "a2", "b1", "b2"};
    case ComponentKind::switch_1xN:
    case ComponentKind::splitter_1xN:
    {
        std::vector<std::string> ports{"c"};
        for (int i = 1; i <= branches; ++i)
        {
            ports.push_back(branch_name(i));
        }
        return ports;
    }
    }
    return {};
}

bool
Component::has_port(std::string_view port) const
{
    const auto ports = port_names();
    return std::find(ports.begin(), ports.end(), port) != ports.end();
}

std::vector<std::string>
Component::valid_states() const
{
    switch (kind)
    {
    case ComponentKind::switch_1x2:
        return {"a", "b"};
    case ComponentKind::switch_2x2:
        return {"cross", "bar"};
    case ComponentKind::switch_1xN:
    {
        std::vector<std::string> s;
        for (int i = 1; i <= branches; ++i)
        {
            s.push_back(branch_name(i));
        }
        return s;
    }
    default:
        return {};
    }
}

PortRef
parse_port(std::string_view text)
{
    const auto dot = text.rfind('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == text.size())
    {
        throw ParameterError("port reference must look like component.port, got '" + std::string(text) + "'");
    }
    return {std::string(text.substr(0, dot)), std::string(text.substr(dot + 1))};
}

std::set<std::string>
ResolvedPath::fibers(const OpticalFabric& fabric) const
{
    std::set<std::string> out;
    for (auto i : hops)
    {
        const auto& f = fabric.segments()[i].fiber;
        if (!f.empty())
        {
            out.insert(f);
        }
    }
    return out;
}

OpticalFabric::OpticalFabric(std::vector<Component> components,
                             std::vector<Segment> segments,
                             std::vector<Terminal> terminals)
    : m_components(std::move(components))
    , m_segments(std::move(segments))
    , m_terminals(std::move(terminals))
{
    index();
}

void
OpticalFabric::index()
{
    for (std::size_t i = 0; i < m_components.size(); ++i)
    {
        const auto& c = m_components[i];
        if (c.id.empty() || !m_component_index.emplace(c.id, i).second)
        {
            throw ParameterError("duplicate or empty component id '" + c.id + "'");
        }
        if ((c.kind == ComponentKind::switch_1xN || c.kind == ComponentKind::splitter_1xN) && c.branches < 1)
        {
            throw ParameterError("component '" + c.id + "' needs at least one branch");
        }
    }
    std::set<std::string> devices;
    for (std::size_t i = 0; i < m_terminals.size(); ++i)
    {
        const auto& t = m_terminals[i];
        if (t.device.empty() || !devices.insert(t.device).second)
        {
            throw ParameterError("duplicate or empty terminal device '" + t.device + "'");
        }
        if (m_component_index.count(t.device))
        {
            throw ParameterError("device id '" + t.device + "' collides with a component id");
        }
        m_terminal_index[t.device] = i;
    }
    const auto check_port = [&](const PortRef& p) {
        if (terminal_at(p) != nullptr)
        {
            return;
        }
        const auto* c = find_component(p.component);
        if (c == nullptr)
        {
            throw ParameterError("unknown component '" + p.component + "' in port " + p.str());
        }
        if (!c->has_port(p.port))
        {
            throw ParameterError("component '" + p.component + "' (" + std::string(to_string(c->kind))
                                 + ") has no port '" + p.port + "'");
        }
    };
    const auto claim = [&](const PortRef& p) {
        if (m_segment_index.count(p))
        {
            throw ParameterError("port " + p.str() + " is connected more than once");
        }
    };
    for (std::size_t i = 0; i < m_segments.size(); ++i)
    {
        const auto& s = m_segments[i];
        check_port(s.a);
        check_port(s.b);
        if (s.a == s.b)
        {
            throw ParameterError("segment connects port " + s.a.str() + " to itself");
        }
        if (s.loss_db > 0.0)
        {
            throw ParameterError("segment " + s.a.str() + " - " + s.b.str() + " has positive loss");
        }
        claim(s.a);
        m_segment_index[s.a] = i;
        claim(s.b);
        m_segment_index[s.b] = i;
    }
}

const Component*
OpticalFabric::find_component(std::string_view id) const
{
    const auto it = m_component_index.find(std::string(id));
    return it == m_component_index.end() ? nullptr : &m_components[it->second];
}

const Terminal*
OpticalFabric::find_terminal(std::string_view device) const
{
    const auto it = m_terminal_index.find(std::string(device));
    return it == m_terminal_index.end() ? nullptr : &m_terminals[it->second];
}

std::optional<std::size_t>
OpticalFabric::segment_at(const PortRef& port) const
{
    const auto it = m_segment_index.find(port);
    if (it == m_segment_index.end())
    {
        return std::nullopt;
    }
    return it->second;
}

const Terminal*
OpticalFabric::terminal_at(const PortRef& port) const
{
    if (port.port != "p")
    {
        return nullptr;
    }
    const auto it = m_terminal_index.find(port.component);
    return it == m_terminal_index.end() ? nullptr : &m_terminals[it->second];
}

std::vector<std::string>
OpticalFabric::switchable_ids() const
{
    std::vector<std::string> ids;
    for (const auto& c : m_components)
    {
        if (c.switchable())
        {
            ids.push_back(c.id);
        }
    }
    return ids;
}

namespace
{

/// Ports light leaves from after entering `c` at `in`. `reverse` walks the
/// propagation backwards (only circulators are direction-sensitive).
std::vector<std::string>
forward(const Component& c, const std::string& state, const std::string& in, bool reverse)
{
    switch (c.kind)
    {
    case ComponentKind::circulator3:
    {
        static const char* next[] = {"2", "3", "1"}; // from 1, 2, 3
        static const char* prev[] = {"3", "1", "2"};
        const int idx = in[0] - '1';
        return {reverse ? prev[idx] : next[idx]};
    }
    case ComponentKind::switch_1x2:
    case ComponentKind::switch_1xN:
        if (in == "c")
        {
            return {state};
        }
        if (in == state)
        {
            return {"c"};
        }
        return {};
    case ComponentKind::switch_2x2:
    {
        const bool bar = state == "bar";
        if (in == "a1")
        {
            return {bar ? "b1" : "b2"};
        }
        if (in == "a2")
        {
            return {bar ? "b2" : "b1"};
        }
        if (in == "b1")
        {
            return {bar ? "a1" : "a2"};
        }
        return {bar ? "a2" : "a1"};
    }
    case ComponentKind::splitter_1xN:
    {
        if (in != "c")
        {
            return {"c"};
        }
        std::vector<std::string> out;
        for (int i = 1; i <= c.branches; ++i)
        {
            out.push_back(branch_name(i));
        }
        return out;
    }
    }
    return {};
}

struct Endpoint
{
    const Terminal* terminal;
    ResolvedPath path;
};

class Tracer
{
public:
    Tracer(const OpticalFabric& fabric, const ComponentStates& states)
        : m_fabric(fabric)
        , m_states(states)
    {
    }

    std::vector<Endpoint>
    trace(const Terminal& from, bool reverse)
    {
        m_reverse = reverse;
        m_out.clear();
        ResolvedPath walk;
        std::set<PortRef> visited;
        cross(from.port(), walk, visited);
        return std::move(m_out);
    }

private:
    /// Leave through `exit` into the attached segment, if any.
    void
    cross(const PortRef& exit, ResolvedPath& walk, std::set<PortRef>& visited)
    {
        const auto seg = m_fabric.segment_at(exit);
        if (!seg)
        {
            return; // open port: light is lost
        }
        const auto& s = m_fabric.segments()[*seg];
        const PortRef next = s.a == exit ? s.b : s.a;
        walk.hops.push_back(*seg);
        if (const auto* term = m_fabric.terminal_at(next))
        {
            ResolvedPath done = walk;
            done.total_loss_db = 0.0;
            for (const auto i : done.hops)
            {
                done.total_loss_db += m_fabric.segments()[i].loss_db;
            }
            for (const auto& p : done.passes)
            {
                done.total_loss_db += p.loss_db;
            }
            m_out.push_back({term, std::move(done)});
        }
        else
        {
            step(next, walk, visited);
        }
        walk.hops.pop_back();
    }

    void
    step(const PortRef& entry, ResolvedPath& walk, std::set<PortRef>& visited)
    {
        if (!visited.insert(entry).second)
        {
            return; // closed loop
        }
        const auto& comp = *m_fabric.find_component(entry.component);
        static const std::string stateless;
        const auto it = m_states.find(comp.id);
        const std::string& state = comp.switchable() ? it->second : stateless;

        for (const auto& out : forward(comp, state, entry.port, m_reverse))
        {
            walk.passes.push_back({comp.id, entry.port, out, comp.pass_loss_db()});
            cross({comp.id, out}, walk, visited);
            walk.passes.pop_back();
        }
        visited.erase(entry);
    }

    const OpticalFabric& m_fabric;
    const ComponentStates& m_states;
    bool m_reverse = false;
    std::vector<Endpoint> m_out;
};

void
check_states(const OpticalFabric& fabric, const ComponentStates& states)
{
    for (const auto& [id, value] : states)
    {
        if (const auto* c = fabric.find_component(id))
        {
            const auto valid = c->valid_states();
            if (std::find(valid.begin(), valid.end(), value) == valid.end())
            {
                throw ParameterError("invalid state '" + value + "' for component '" + id + "'");
            }
            continue;
        }
        if (const auto* t = fabric.find_terminal(id))
        {
            if (value != "idle" && value != "on")
            {
                throw ParameterError("device '" + id + "' state must be idle or on");
            }
            if (t->role != TerminalRole::transmitter && value == "idle")
            {
                throw ParameterError("only transmitters can be idle ('" + id + "')");
            }
            continue;
        }
        throw ParameterError("state given for unknown component '" + id + "'");
    }
    for (const auto& id : fabric.switchable_ids())
    {
        if (!states.count(id))
        {
            throw ParameterError("no state given for switch '" + id + "'");
        }
    }
}

} // namespace

std::vector<ResolvedPath>
resolve_paths(const OpticalFabric& fabric, const ComponentStates& states)
{
    check_states(fabric, states);

    std::vector<const Terminal*> transmitters;
    std::vector<const Terminal*> receivers;
    for (const auto& t : fabric.terminals())
    {
        (t.role == TerminalRole::transmitter ? transmitters : receivers).push_back(&t);
    }
    const auto by_device = [](const Terminal* a, const Terminal* b) { return a->device < b->device; };
    std::sort(transmitters.begin(), transmitters.end(), by_device);
    std::sort(receivers.begin(), receivers.end(), by_device);

    Tracer tracer(fabric, states);
    std::vector<ResolvedPath> paths;
    std::map<std::string, std::string> receiver_owner;
    for (const auto* tx : transmitters)
    {
        const auto st = states.find(tx->device);
        if (st != states.end() && st->second == "idle")
        {
            continue;
        }
        const Terminal* reached = nullptr;
        for (auto& ep : tracer.trace(*tx, false))
        {
            if (ep.terminal->role == TerminalRole::transmitter)
            {
                throw FabricConflictError("light from " + tx->device + " reaches transmitter "
                                          + ep.terminal->device);
            }
            if (reached != nullptr && reached != ep.terminal)
            {
                throw FabricConflictError(tx->device + " reaches both " + reached->device + " and "
                                          + ep.terminal->device);
            }
            if (reached == ep.terminal)
            {
                continue; // second route to the same receiver: keep the first (lowest-loss order)
            }
            reached = ep.terminal;
            const auto [it, fresh] = receiver_owner.emplace(ep.terminal->device, tx->device);
            if (!fresh)
            {
                throw FabricConflictError("receiver " + ep.terminal->device + " sees both " + it->second
                                          + " and " + tx->device);
            }
            ep.path.transmitter = tx->device;
            ep.path.receiver = ep.terminal->device;
            ep.path.self_loop = !tx->unit.empty() && tx->unit == ep.terminal->unit;
            paths.push_back(std::move(ep.path));
        }
    }
    for (const auto* rx : receivers)
    {
        for (const auto& ep : tracer.trace(*rx, true))
        {
            if (ep.terminal->role == TerminalRole::receiver)
            {
                throw FabricConflictError("receiver " + rx->device + " is optically connected to receiver "
                                          + ep.terminal->device);
            }
        }
    }
    return paths;
}

int
rtfm_capacity(int n_wavelengths)
{
    if (n_wavelengths < 0)
    {
        throw DomainError("rtfm_capacity: negative wavelength count");
    }
    return 2 * n_wavelengths + 1;
}

int
fmos_simultaneous_limit(int n_ports)
{
    if (n_ports < 2)
    {
        throw DomainError("fmos_simultaneous_limit: need at least two ports");
    }
    return n_ports / 2;
}

double
splitter_loss(int n_branches)
{
    if (n_branches < 1)
    {
        throw DomainError("splitter_loss: need at least one branch");
    }
    return -10.0 * std::log10(static_cast<double>(n_branches));
}

OpticalFabric
parse_fabric(std::string_view text, std::string source)
{
    const auto doc = io::Document::parse(text, std::move(source));
    const auto& root = doc.root();
    if (root["schema_version"] && doc.integer(root, "schema_version") != 1)
    {
        doc.fail(root["schema_version"], "unsupported fabric schema_version");
    }

    // Validate each entry where it is written so the error carries its line.
    std::vector<Component> components;
    std::map<std::string, Component> by_id;
    if (const auto list = root["components"])
    {
        for (const auto& node : list)
        {
            Component c;
            c.id = doc.string(node, "id");
            const auto kind_text = doc.string(node, "kind");
            const auto kind = kind_from_string(kind_text);
            if (!kind)
            {
                doc.fail(node["kind"], "unknown component kind '" + kind_text + "'");
            }
            c.kind = *kind;
            if (c.kind == ComponentKind::switch_1xN || c.kind == ComponentKind::splitter_1xN)
            {
                c.branches = static_cast<int>(doc.integer(node, "ports"));
                if (c.branches < 1)
                {
                    doc.fail(node["ports"], "ports must be >= 1");
                }
            }
            if (node["insertion_loss_db"])
            {
                c.insertion_loss_db = doc.number(node, "insertion_loss_db");
                if (*c.insertion_loss_db > 0.0)
                {
                    doc.fail(node["insertion_loss_db"], "insertion loss must be <= 0 dB");
                }
            }
            if (!by_id.emplace(c.id, c).second)
            {
                doc.fail(node, "duplicate component id '" + c.id + "'");
            }
            components.push_back(c);
        }
    }

    // Terminals first: segments may attach to "<device>.p".
    std::vector<Terminal> terminals;
    std::map<std::string, YAML::Node> attach_nodes;
    if (const auto list = root["terminals"])
    {
        for (const auto& node : list)
        {
            Terminal t;
            t.device = doc.string(node, "device");
            const auto role = doc.string(node, "role");
            if (role == "transmitter")
            {
                t.role = TerminalRole::transmitter;
            }
            else if (role == "receiver")
            {
                t.role = TerminalRole::receiver;
            }
            else
            {
                doc.fail(node["role"], "role must be transmitter or receiver");
            }
            t.unit = doc.optional_string(node, "unit").value_or("");
            if (attach_nodes.count(t.device) || by_id.count(t.device))
            {
                doc.fail(node, "duplicate device id '" + t.device + "'");
            }
            attach_nodes[t.device] = YAML::Node(node);
            terminals.push_back(t);
        }
    }

    std::set<PortRef> used;
    const auto port_at = [&](const YAML::Node& parent, const char* key) {
        const auto node = doc.required(parent, key);
        PortRef p;
        try
        {
            p = parse_port(doc.as_string(node));
        }
        catch (const ParameterError& e)
        {
            doc.fail(node, e.what());
        }
        if (attach_nodes.count(p.component))
        {
            if (p.port != "p")
            {
                doc.fail(node, "device '" + p.component + "' has a single port 'p'");
            }
        }
        else
        {
            const auto it = by_id.find(p.component);
            if (it == by_id.end())
            {
                doc.fail(node, "unknown component '" + p.component + "'");
            }
            if (!it->second.has_port(p.port))
            {
                doc.fail(node, "component '" + p.component + "' has no port '" + p.port + "'");
            }
        }
        if (!used.insert(p).second)
        {
            doc.fail(node, "port " + p.str() + " is already connected");
        }
        return p;
    };

    std::vector<Segment> segments;
    for (const auto& t : terminals)
    {
        const auto& node = attach_nodes[t.device];
        if (node["attach"])
        {
            Segment s;
            s.a = t.port();
            used.insert(s.a);
            s.b = port_at(node, "attach");
            segments.push_back(s);
        }
    }
    if (const auto list = root["segments"])
    {
        for (const auto& node : list)
        {
            Segment s;
            s.a = port_at(node, "a");
            s.b = port_at(node, "b");
            s.loss_db = doc.number_or(node, "loss_db", 0.0);
            if (s.loss_db > 0.0)
            {
                doc.fail(node["loss_db"], "segment loss must be <= 0 dB");
            }
            s.fiber = doc.optional_string(node, "fiber").value_or("");
            segments.push_back(s);
        }
    }

    try
    {
        return OpticalFabric(std::move(components), std::move(segments), std::move(terminals));
    }
    catch (const ParameterError& e)
    {
        throw ConfigError(doc.source(), 0, e.what());
    }
}

OpticalFabric
load_fabric(const std::filesystem::path& path)
{
    return parse_fabric(io::read_text(path), path.string());
}

} // namespace hcw::fabric
