#pragma once

// Key consumers: the one-time-pad encryption medium (real-time or SD-card
// preload) and the AES-256 seed-refresh VPN gateway.

#include <hcw/keymgmt.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hcw::apps
{

enum class OtpMode
{
    realtime,
    preloaded
};

std::string_view
to_string(OtpMode mode);
OtpMode
otp_mode_from_string(std::string_view text);

enum class Feasibility
{
    realtime,
    preload_required
};

std::string_view
to_string(Feasibility f);

/// Real-time OTP works iff the key rate keeps up with the payload.
Feasibility
otp_feasible(double data_rate_bps, double key_rate_bps);

inline constexpr std::uint64_t vpn_key_bits = 256;

/// Seed keys per second a path rate can sustain.
std::uint64_t
vpn_refresh_rate(double path_key_rate_bps);

struct OtpMessage
{
    keymgmt::Bits ciphertext;
    keymgmt::Bits key; // the far end's copy of the pad
};

class OtpSession
{
public:
    /// `route` is the node path keys travel (two nodes for a direct pool).
    OtpSession(std::string id,
               std::vector<std::string> route,
               OtpMode mode,
               double data_rate_bps,
               std::uint64_t card_bits = 0);

    const std::string&
    id() const
    {
        return m_id;
    }
    OtpMode
    mode() const
    {
        return m_mode;
    }
    double
    data_rate_bps() const
    {
        return m_rate;
    }
    const std::vector<std::string>&
    route() const
    {
        return m_route;
    }

    /// Move card_bits from the pools onto the card (preloaded mode).
    void
    preload(keymgmt::KeyStore& store);
    /// Same debit without materialising the bits; such card bits can only
    /// be spent through consume().
    void
    preload_debit(keymgmt::KeyStore& store);
    bool
    loaded() const
    {
        return m_loaded;
    }
    std::uint64_t
    card_remaining() const
    {
        return m_card.size() - m_card_cursor + m_card_virtual;
    }

    OtpMessage
    encrypt(keymgmt::KeyStore& store, const keymgmt::Bits& plaintext);
    static keymgmt::Bits
    decrypt(const OtpMessage& message);

    /// Spend pad bits for an unmaterialised payload of `n_bits`.
    void
    consume(keymgmt::KeyStore& store, std::uint64_t n_bits);

    std::uint64_t
    consumed_bits() const
    {
        return m_consumed;
    }

private:
    keymgmt::Bits
    take(keymgmt::KeyStore& store, std::uint64_t n_bits, bool materialize);

    std::string m_id;
    std::vector<std::string> m_route;
    OtpMode m_mode;
    double m_rate;
    std::uint64_t m_card_bits;
    keymgmt::Bits m_card;
    std::uint64_t m_card_cursor = 0;
    std::uint64_t m_card_virtual = 0;
    bool m_loaded = false;
    std::uint64_t m_consumed = 0;
};

/// Seed-key refresh over a relay route; each refresh moves one 256-bit key.
class VpnTunnel
{
public:
    VpnTunnel(std::string id, std::vector<std::string> route);

    const std::string&
    id() const
    {
        return m_id;
    }
    const std::vector<std::string>&
    route() const
    {
        return m_route;
    }

    keymgmt::Bits
    refresh(keymgmt::KeyStore& store);
    /// Up to `max_keys` refreshes as accounting only; returns how many fit.
    std::uint64_t
    refresh_many(keymgmt::KeyStore& store, std::uint64_t max_keys);

    std::uint64_t
    refreshes() const
    {
        return m_refreshes;
    }

private:
    std::string m_id;
    std::vector<std::string> m_route;
    std::uint64_t m_refreshes = 0;
};

} // namespace hcw::apps
