#pragma once

// Optical switching fabric: circulators, switches and splitters wired by
// fibre segments, with QKD device ports bound to component ports. Given the
// switch settings, `resolve_paths` traces light from every transmitter and
// reports the transmitter -> receiver paths that are physically connected.

#include <hcw/error.hpp>

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace hcw::fabric
{

enum class ComponentKind
{
    circulator3, // 1->2, 2->3, 3->1, strictly directional
    switch_1x2,  // ports c, a, b; state a|b
    switch_2x2,  // ports a1, a2, b1, b2; state cross|bar
    switch_1xN,  // ports c, 1..N; state is the selected branch
    splitter_1xN // ports c, 1..N; passive broadcast
};

std::string_view
to_string(ComponentKind kind);

inline constexpr double default_circulator_loss_db = -0.8;
inline constexpr double default_switch_loss_db = -0.6;

struct Component
{
    std::string id;
    ComponentKind kind = ComponentKind::circulator3;
    int branches = 0;                        // N for the 1xN kinds
    std::optional<double> insertion_loss_db; // per pass; kind default when empty

    /// Insertion loss for one pass through the component.
    double
    pass_loss_db() const;
    /// Whether the component needs a state to forward light.
    bool
    switchable() const;
    std::vector<std::string>
    port_names() const;
    bool
    has_port(std::string_view port) const;
    std::vector<std::string>
    valid_states() const;
};

struct PortRef
{
    std::string component;
    std::string port;

    auto
    operator<=>(const PortRef&) const = default;

    std::string
    str() const
    {
        return component + "." + port;
    }
};

/// "cir1.2" -> {cir1, 2}; the split is at the last '.'.
PortRef
parse_port(std::string_view text);

struct Segment
{
    PortRef a;
    PortRef b;
    double loss_db = 0.0;
    std::string fiber; // catalog link id, empty for patch cords
};

enum class TerminalRole
{
    transmitter,
    receiver
};

/// A QKD device's optical port, addressable as "<device>.p". Segments attach
/// to it like any component port.
struct Terminal
{
    std::string device;
    TerminalRole role = TerminalRole::transmitter;
    std::string unit; // shared by the two halves of a transceiver

    PortRef
    port() const
    {
        return {device, "p"};
    }
};

/// Component id -> state; a transmitter device id may be set to "idle" to
/// keep it dark.
using ComponentStates = std::map<std::string, std::string>;

class OpticalFabric
{
public:
    OpticalFabric() = default;
    OpticalFabric(std::vector<Component> components,
                  std::vector<Segment> segments,
                  std::vector<Terminal> terminals);

    const std::vector<Component>&
    components() const
    {
        return m_components;
    }
    const std::vector<Segment>&
    segments() const
    {
        return m_segments;
    }
    const std::vector<Terminal>&
    terminals() const
    {
        return m_terminals;
    }

    const Component*
    find_component(std::string_view id) const;
    const Terminal*
    find_terminal(std::string_view device) const;
    /// Segment index attached to a port.
    std::optional<std::size_t>
    segment_at(const PortRef& port) const;
    /// Terminal owning `port` ("<device>.p"), nullptr otherwise.
    const Terminal*
    terminal_at(const PortRef& port) const;

    std::vector<std::string>
    switchable_ids() const;

private:
    void
    index();

    std::vector<Component> m_components;
    std::vector<Segment> m_segments;
    std::vector<Terminal> m_terminals;
    std::map<std::string, std::size_t> m_component_index;
    std::map<PortRef, std::size_t> m_segment_index;
    std::map<std::string, std::size_t> m_terminal_index;
};

struct ComponentPass
{
    std::string component;
    std::string in_port;
    std::string out_port;
    double loss_db = 0.0;
};

struct ResolvedPath
{
    std::string transmitter;
    std::string receiver;
    std::vector<std::size_t> hops; // segment indices, in travel order
    std::vector<ComponentPass> passes;
    double total_loss_db = 0.0;
    bool self_loop = false; // both ends on the same unit

    /// Catalog fibres the light crosses.
    std::set<std::string>
    fibers(const OpticalFabric& fabric) const;
};

/// Active transmitter -> receiver paths, ordered by transmitter id.
/// Throws ParameterError for missing/invalid states and
/// FabricConflictError when light reaches a transmitter, a receiver can see
/// another receiver, or a device would take part in two paths.
std::vector<ResolvedPath>
resolve_paths(const OpticalFabric& fabric, const ComponentStates& states);

/// Nodes served by a wavelength-saving real-time full-mesh router with N
/// wavelengths.
int
rtfm_capacity(int n_wavelengths);

/// Largest number of node pairs a full-mesh optical switch with `n_ports`
/// ports can connect at once.
int
fmos_simultaneous_limit(int n_ports);

/// Per-branch insertion loss of a 1xN beam splitter.
double
splitter_loss(int n_branches);

OpticalFabric
parse_fabric(std::string_view text, std::string source);
OpticalFabric
load_fabric(const std::filesystem::path& path);

} // namespace hcw::fabric
