#include <hcw/keymgmt.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace hcw::keymgmt
{

namespace
{

std::uint64_t
splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t
fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : s)
    {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Bits
stream_bits(std::uint64_t seed, std::uint64_t from, std::uint64_t n)
{
    Bits out(n);
    std::uint64_t word_index = ~0ULL;
    std::uint64_t word = 0;
    for (std::uint64_t k = 0; k < n; ++k)
    {
        const auto i = from + k;
        if (i / 64 != word_index)
        {
            word_index = i / 64;
            word = splitmix64(seed ^ splitmix64(word_index));
        }
        out[k] = static_cast<std::uint8_t>((word >> (i % 64)) & 1U);
    }
    return out;
}

} // namespace

std::uint8_t
stream_bit(std::uint64_t seed, std::uint64_t i)
{
    return static_cast<std::uint8_t>((splitmix64(seed ^ splitmix64(i / 64)) >> (i % 64)) & 1U);
}

Bits
xor_bits(const Bits& a, const Bits& b)
{
    if (a.size() != b.size())
    {
        throw ShapeError("xor of bit strings of different length");
    }
    Bits out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        out[i] = a[i] ^ b[i];
    }
    return out;
}

NodePair::NodePair(std::string x, std::string y)
{
    if (x == y)
    {
        throw ParameterError("a key pool needs two distinct nodes, got " + x + " twice");
    }
    if (y < x)
    {
        std::swap(x, y);
    }
    a = std::move(x);
    b = std::move(y);
}

KeyPool::KeyPool(NodePair pair, std::uint64_t seed)
    : m_pair(std::move(pair))
    , m_seed(seed)
{
}

void
KeyPool::deposit(std::uint64_t n_bits, const std::string& from)
{
    std::lock_guard lock(m_mutex);
    m_produced += n_bits;
    if (!from.empty())
    {
        m_from[from] += n_bits;
    }
}

Bits
KeyPool::take_locked(std::uint64_t n_bits)
{
    const auto avail = m_produced - m_consumed;
    if (n_bits > avail)
    {
        throw InsufficientKeyError("pool " + m_pair.str(), n_bits, avail);
    }
    auto bits = stream_bits(m_seed, m_consumed, n_bits);
    m_consumed += n_bits;
    return bits;
}

Bits
KeyPool::draw(std::uint64_t n_bits)
{
    std::lock_guard lock(m_mutex);
    return take_locked(n_bits);
}

void
KeyPool::consume(std::uint64_t n_bits)
{
    std::lock_guard lock(m_mutex);
    const auto avail = m_produced - m_consumed;
    if (n_bits > avail)
    {
        throw InsufficientKeyError("pool " + m_pair.str(), n_bits, avail);
    }
    m_consumed += n_bits;
}

PoolCounters
KeyPool::counters() const
{
    std::lock_guard lock(m_mutex);
    return {m_produced, m_consumed, m_produced - m_consumed, m_from};
}

std::uint64_t
KeyPool::available() const
{
    std::lock_guard lock(m_mutex);
    return m_produced - m_consumed;
}

std::uint64_t
KeyPool::cursor() const
{
    std::lock_guard lock(m_mutex);
    return m_consumed;
}

KeyStore::KeyStore(std::uint64_t seed)
    : m_seed(seed)
{
}

KeyPool&
KeyStore::pool(const std::string& a, const std::string& b)
{
    NodePair key(a, b);
    auto it = m_pools.find(key);
    if (it == m_pools.end())
    {
        const auto seed = splitmix64(m_seed ^ fnv1a(key.str()));
        it = m_pools.emplace(key, std::make_unique<KeyPool>(key, seed)).first;
    }
    return *it->second;
}

KeyPool*
KeyStore::find(const std::string& a, const std::string& b)
{
    if (a == b)
    {
        return nullptr;
    }
    const auto it = m_pools.find(NodePair(a, b));
    return it == m_pools.end() ? nullptr : it->second.get();
}

const KeyPool*
KeyStore::find(const std::string& a, const std::string& b) const
{
    if (a == b)
    {
        return nullptr;
    }
    const auto it = m_pools.find(NodePair(a, b));
    return it == m_pools.end() ? nullptr : it->second.get();
}

std::vector<NodePair>
KeyStore::pairs() const
{
    std::vector<NodePair> out;
    for (const auto& [k, v] : m_pools)
    {
        out.push_back(k);
    }
    return out;
}

RelayResult
KeyStore::relay_key(const std::vector<std::string>& route, std::uint64_t n_bits)
{
    return relay(route, n_bits, true);
}

void
KeyStore::relay_debit(const std::vector<std::string>& route, std::uint64_t n_bits)
{
    relay(route, n_bits, false);
}

std::uint64_t
KeyStore::route_available(const std::vector<std::string>& route) const
{
    if (route.size() < 2)
    {
        return 0;
    }
    std::uint64_t best = ~0ULL;
    for (std::size_t i = 0; i + 1 < route.size(); ++i)
    {
        const auto* p = find(route[i], route[i + 1]);
        best = std::min(best, p == nullptr ? 0 : p->available());
    }
    return best;
}

RelayResult
KeyStore::relay(const std::vector<std::string>& route, std::uint64_t n_bits, bool materialize)
{
    if (route.size() < 2)
    {
        throw ParameterError("a relay route needs at least two nodes");
    }
    std::lock_guard relay_lock(m_relay_mutex);

    std::vector<KeyPool*> hops;
    for (std::size_t i = 0; i + 1 < route.size(); ++i)
    {
        auto* p = find(route[i], route[i + 1]);
        if (p == nullptr)
        {
            throw ParameterError("no key pool for relay hop " + route[i] + "-" + route[i + 1]);
        }
        if (std::find(hops.begin(), hops.end(), p) != hops.end())
        {
            throw ParameterError("relay route uses pool " + p->pair().str() + " twice");
        }
        hops.push_back(p);
    }

    // Lock in address order so concurrent relays cannot deadlock.
    auto ordered = hops;
    std::sort(ordered.begin(), ordered.end());
    std::vector<std::unique_lock<std::mutex>> locks;
    for (auto* p : ordered)
    {
        locks.emplace_back(p->m_mutex);
    }
    for (std::size_t i = 0; i < hops.size(); ++i)
    {
        const auto avail = hops[i]->m_produced - hops[i]->m_consumed;
        if (n_bits > avail)
        {
            throw InsufficientKeyError("relay hop " + route[i] + "-" + route[i + 1], n_bits, avail);
        }
    }

    RelayResult r;
    if (!materialize)
    {
        for (auto* hop : hops)
        {
            hop->m_consumed += n_bits;
        }
        return r;
    }
    if (hops.size() == 1)
    {
        r.source_key = hops[0]->take_locked(n_bits);
        r.delivered_key = r.source_key;
        return r;
    }

    r.source_key = stream_bits(splitmix64(m_seed ^ 0x5eed0f7e1a7ULL), m_relays * 0x100000000ULL, n_bits);
    ++m_relays;
    Bits carried = r.source_key;
    for (auto* hop : hops)
    {
        const auto pad = hop->take_locked(n_bits);
        const auto cipher = xor_bits(carried, pad); // sent over the hop
        r.hop_ciphertexts.push_back(cipher);
        carried = xor_bits(cipher, pad); // recovered at the far node
    }
    r.delivered_key = std::move(carried);
    return r;
}

std::string
KeyStore::snapshot_json() const
{
    auto pools = nlohmann::json::array();
    for (const auto& [pair, pool] : m_pools)
    {
        const auto c = pool->counters();
        nlohmann::json rec;
        rec["pair"] = pair.str();
        rec["produced"] = c.produced;
        rec["consumed"] = c.consumed;
        rec["available"] = c.available;
        rec["produced_from"] = c.produced_from;
        pools.push_back(std::move(rec));
    }
    nlohmann::json doc;
    doc["schema_version"] = 1;
    doc["pools"] = std::move(pools);
    return doc.dump(2) + "\n";
}

double
relay_throughput(const std::vector<double>& hop_rates_bps)
{
    if (hop_rates_bps.empty())
    {
        throw ParameterError("relay_throughput: empty route");
    }
    for (const auto r : hop_rates_bps)
    {
        if (!(r >= 0.0))
        {
            throw DomainError("relay_throughput: negative or NaN hop rate");
        }
    }
    return *std::min_element(hop_rates_bps.begin(), hop_rates_bps.end());
}

} // namespace hcw::keymgmt
