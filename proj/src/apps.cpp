#include <hcw/apps.hpp>

#include <algorithm>
#include <cmath>

namespace hcw::apps
{

std::string_view
to_string(OtpMode mode)
{
    return mode == OtpMode::realtime ? "realtime" : "preloaded";
}

OtpMode
otp_mode_from_string(std::string_view text)
{
    if (text == "realtime")
    {
        return OtpMode::realtime;
    }
    if (text == "preloaded")
    {
        return OtpMode::preloaded;
    }
    throw ParameterError("OTP mode must be realtime or preloaded, got '" + std::string(text) + "'");
}

std::string_view
to_string(Feasibility f)
{
    return f == Feasibility::realtime ? "realtime" : "preload_required";
}

Feasibility
otp_feasible(double data_rate_bps, double key_rate_bps)
{
    if (!(data_rate_bps >= 0.0 && key_rate_bps >= 0.0))
    {
        throw DomainError("otp_feasible: rates must be non-negative");
    }
    return key_rate_bps >= data_rate_bps ? Feasibility::realtime : Feasibility::preload_required;
}

std::uint64_t
vpn_refresh_rate(double path_key_rate_bps)
{
    if (!(path_key_rate_bps >= 0.0))
    {
        throw DomainError("vpn_refresh_rate: negative rate");
    }
    return static_cast<std::uint64_t>(std::floor(path_key_rate_bps / static_cast<double>(vpn_key_bits)));
}

OtpSession::OtpSession(std::string id,
                       std::vector<std::string> route,
                       OtpMode mode,
                       double data_rate_bps,
                       std::uint64_t card_bits)
    : m_id(std::move(id))
    , m_route(std::move(route))
    , m_mode(mode)
    , m_rate(data_rate_bps)
    , m_card_bits(card_bits)
{
    if (m_route.size() < 2)
    {
        throw ParameterError("session " + m_id + ": route needs at least two nodes");
    }
    if (m_mode == OtpMode::preloaded && m_card_bits == 0)
    {
        throw ParameterError("session " + m_id + ": a preloaded card needs card_bits > 0");
    }
    if (!(m_rate >= 0.0))
    {
        throw ParameterError("session " + m_id + ": negative data rate");
    }
}

void
OtpSession::preload(keymgmt::KeyStore& store)
{
    if (m_mode != OtpMode::preloaded)
    {
        throw ParameterError("session " + m_id + " is not a preloaded session");
    }
    try
    {
        auto fresh = store.relay_key(m_route, m_card_bits).delivered_key;
        m_card.erase(m_card.begin(), m_card.begin() + static_cast<std::ptrdiff_t>(m_card_cursor));
        m_card.insert(m_card.end(), fresh.begin(), fresh.end());
        m_card_cursor = 0;
        m_loaded = true;
    }
    catch (const InsufficientKeyError& e)
    {
        throw InsufficientKeyError("session " + m_id + " preload (" + e.where() + ")", e.requested(), e.available());
    }
}

void
OtpSession::preload_debit(keymgmt::KeyStore& store)
{
    if (m_mode != OtpMode::preloaded)
    {
        throw ParameterError("session " + m_id + " is not a preloaded session");
    }
    try
    {
        store.relay_debit(m_route, m_card_bits);
        m_card_virtual += m_card_bits;
        m_loaded = true;
    }
    catch (const InsufficientKeyError& e)
    {
        throw InsufficientKeyError("session " + m_id + " preload (" + e.where() + ")", e.requested(), e.available());
    }
}

keymgmt::Bits
OtpSession::take(keymgmt::KeyStore& store, std::uint64_t n_bits, bool materialize)
{
    if (m_mode == OtpMode::preloaded)
    {
        if (n_bits > card_remaining())
        {
            throw InsufficientKeyError("session " + m_id + " card", n_bits, card_remaining());
        }
        keymgmt::Bits out;
        if (materialize)
        {
            const auto real = m_card.size() - m_card_cursor;
            if (n_bits > real)
            {
                throw InsufficientKeyError("session " + m_id + " card (materialised bits)", n_bits, real);
            }
            const auto first = m_card.begin() + static_cast<std::ptrdiff_t>(m_card_cursor);
            out.assign(first, first + static_cast<std::ptrdiff_t>(n_bits));
            m_card_cursor += n_bits;
        }
        else
        {
            const auto from_virtual = std::min(n_bits, m_card_virtual);
            m_card_virtual -= from_virtual;
            m_card_cursor += n_bits - from_virtual;
        }
        m_consumed += n_bits;
        return out;
    }
    try
    {
        keymgmt::Bits out;
        if (materialize)
        {
            out = store.relay_key(m_route, n_bits).delivered_key;
        }
        else
        {
            store.relay_debit(m_route, n_bits);
        }
        m_consumed += n_bits;
        return out;
    }
    catch (const InsufficientKeyError& e)
    {
        throw InsufficientKeyError("session " + m_id + " (" + e.where() + ")", e.requested(), e.available());
    }
}

OtpMessage
OtpSession::encrypt(keymgmt::KeyStore& store, const keymgmt::Bits& plaintext)
{
    auto key = take(store, plaintext.size(), true);
    return {keymgmt::xor_bits(plaintext, key), std::move(key)};
}

keymgmt::Bits
OtpSession::decrypt(const OtpMessage& message)
{
    return keymgmt::xor_bits(message.ciphertext, message.key);
}

void
OtpSession::consume(keymgmt::KeyStore& store, std::uint64_t n_bits)
{
    take(store, n_bits, false);
}

VpnTunnel::VpnTunnel(std::string id, std::vector<std::string> route)
    : m_id(std::move(id))
    , m_route(std::move(route))
{
    if (m_route.size() < 2)
    {
        throw ParameterError("tunnel " + m_id + ": route needs at least two nodes");
    }
}

keymgmt::Bits
VpnTunnel::refresh(keymgmt::KeyStore& store)
{
    try
    {
        auto key = store.relay_key(m_route, vpn_key_bits).delivered_key;
        ++m_refreshes;
        return key;
    }
    catch (const InsufficientKeyError& e)
    {
        throw InsufficientKeyError("tunnel " + m_id + " (" + e.where() + ")", e.requested(), e.available());
    }
}

std::uint64_t
VpnTunnel::refresh_many(keymgmt::KeyStore& store, std::uint64_t max_keys)
{
    const auto fit = std::min(max_keys, store.route_available(m_route) / vpn_key_bits);
    if (fit > 0)
    {
        store.relay_debit(m_route, fit * vpn_key_bits);
        m_refreshes += fit;
    }
    return fit;
}

} // namespace hcw::apps
