#pragma once

// Per node-pair key pools with exact produced/consumed accounting, and
// hop-by-hop trusted-repeater relay on top of them.

#include <hcw/error.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace hcw::keymgmt
{

/// One bit per element, values 0 or 1.
using Bits = std::vector<std::uint8_t>;

Bits
xor_bits(const Bits& a, const Bits& b);

/// Unordered node pair, stored sorted.
struct NodePair
{
    std::string a;
    std::string b;

    NodePair() = default;
    NodePair(std::string x, std::string y);

    auto
    operator<=>(const NodePair&) const = default;

    std::string
    str() const
    {
        return a + "-" + b;
    }
};

struct PoolCounters
{
    std::uint64_t produced = 0;
    std::uint64_t consumed = 0;
    std::uint64_t available = 0;
    std::map<std::string, std::uint64_t> produced_from; // by sending node
};

/// Ordered reservoir of secret bits. Bit i is a fixed function of
/// (seed, i), so content is reproducible and no position is handed out
/// twice. deposit/draw are atomic.
class KeyPool
{
public:
    KeyPool(NodePair pair, std::uint64_t seed);

    const NodePair&
    pair() const
    {
        return m_pair;
    }

    /// `from` names the transmitting node for the directional counters.
    void
    deposit(std::uint64_t n_bits, const std::string& from = {});
    /// Oldest unconsumed bits; InsufficientKeyError leaves the pool untouched.
    Bits
    draw(std::uint64_t n_bits);
    /// Debit like draw() without materialising the bits.
    void
    consume(std::uint64_t n_bits);

    PoolCounters
    counters() const;
    std::uint64_t
    available() const;
    /// Position of the next bit a draw would return.
    std::uint64_t
    cursor() const;

private:
    friend class KeyStore;

    Bits
    take_locked(std::uint64_t n_bits);

    NodePair m_pair;
    std::uint64_t m_seed;
    std::uint64_t m_produced = 0;
    std::uint64_t m_consumed = 0;
    std::map<std::string, std::uint64_t> m_from;
    mutable std::mutex m_mutex;
};

/// Bit i of the stream identified by `seed`.
std::uint8_t
stream_bit(std::uint64_t seed, std::uint64_t i);

struct RelayResult
{
    Bits source_key;
    Bits delivered_key;
    std::vector<Bits> hop_ciphertexts; // what crossed each hop
};

class KeyStore
{
public:
    explicit KeyStore(std::uint64_t seed = 0);

    KeyPool&
    pool(const std::string& a, const std::string& b); // created on first use
    KeyPool*
    find(const std::string& a, const std::string& b);
    const KeyPool*
    find(const std::string& a, const std::string& b) const;

    std::vector<NodePair>
    pairs() const;

    /// Generate a fresh key at route.front() and carry it to route.back(),
    /// one-time-pad encrypted under each hop pool in turn. Every hop is
    /// checked before any pool is debited. A single-hop route returns the
    /// drawn pool bits themselves.
    RelayResult
    relay_key(const std::vector<std::string>& route, std::uint64_t n_bits);
    /// Same accounting as relay_key without materialising bits.
    void
    relay_debit(const std::vector<std::string>& route, std::uint64_t n_bits);
    /// Smallest available count along a route (0 when a hop has no pool).
    std::uint64_t
    route_available(const std::vector<std::string>& route) const;

    /// Structured snapshot: one record per pool.
    std::string
    snapshot_json() const;

private:
    RelayResult
    relay(const std::vector<std::string>& route, std::uint64_t n_bits, bool materialize);

    std::uint64_t m_seed;
    std::uint64_t m_relays = 0;
    std::map<NodePair, std::unique_ptr<KeyPool>> m_pools;
    std::mutex m_relay_mutex;
};

/// Long-run relay rate of a route: the slowest hop.
double
relay_throughput(const std::vector<double>& hop_rates_bps);

} // namespace hcw::keymgmt
