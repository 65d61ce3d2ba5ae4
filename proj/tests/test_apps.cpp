#include <hcw/apps.hpp>

#include <doctest.h>

#include <random>

using namespace hcw;
using namespace hcw::apps;

namespace
{

keymgmt::Bits
random_bits(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    keymgmt::Bits out(n);
    for (auto& b : out)
    {
        b = static_cast<std::uint8_t>(rng() & 1U);
    }
    return out;
}

} // namespace

TEST_CASE("real-time OTP feasibility")
{
    CHECK(otp_feasible(64.0, 770.0) == Feasibility::realtime);
    CHECK(otp_feasible(770.0, 770.0) == Feasibility::realtime);
    CHECK(otp_feasible(64000.0, 770.0) == Feasibility::preload_required);
    CHECK(otp_feasible(1.0, 0.0) == Feasibility::preload_required);
    CHECK(to_string(Feasibility::preload_required) == "preload_required");
    CHECK_THROWS_AS(otp_feasible(-1.0, 5.0), DomainError);
}

TEST_CASE("VPN refresh cadence")
{
    CHECK(vpn_refresh_rate(std::min(770.0, 800.0)) == 3);
    CHECK(vpn_refresh_rate(255.9) == 0);
    CHECK(vpn_refresh_rate(256.0) == 1);
    CHECK(vpn_refresh_rate(0.0) == 0);
    CHECK_THROWS_AS(vpn_refresh_rate(-1.0), DomainError);
}

TEST_CASE("real-time OTP round trip over a relay")
{
    keymgmt::KeyStore store(4);
    store.pool("WTPT", "CHB").deposit(10000);
    store.pool("CHB", "TR").deposit(10000);
    OtpSession s("pstn", {"WTPT", "CHB", "TR"}, OtpMode::realtime, 64.0);
    const auto plain = random_bits(1000, 1);
    const auto msg = s.encrypt(store, plain);
    CHECK(msg.ciphertext != plain);
    CHECK(OtpSession::decrypt(msg) == plain);
    CHECK(s.consumed_bits() == 1000);
    CHECK(store.route_available({"WTPT", "CHB", "TR"}) == 9000);

    // A second message never reuses pad bits.
    const auto msg2 = s.encrypt(store, plain);
    CHECK(msg2.key != msg.key);
    CHECK(OtpSession::decrypt(msg2) == plain);
}

TEST_CASE("a fast real-time payload drains a slow pool")
{
    keymgmt::KeyStore store(2);
    const double interval = 300.0;
    store.pool("KLQI", "NC").deposit(static_cast<std::uint64_t>(770.0 * interval));
    OtpSession s("video", {"KLQI", "NC"}, OtpMode::realtime, 64000.0);
    CHECK_THROWS_AS(s.consume(store, static_cast<std::uint64_t>(64000.0 * interval)), InsufficientKeyError);
    CHECK(store.pool("KLQI", "NC").available() == 231000);
    CHECK(s.consumed_bits() == 0);
}

TEST_CASE("preloaded card")
{
    keymgmt::KeyStore store(9);
    store.pool("A", "B").deposit(5000);
    OtpSession s("card", {"A", "B"}, OtpMode::preloaded, 64.0, 2000);
    CHECK_FALSE(s.loaded());
    CHECK_THROWS_AS(s.consume(store, 1), InsufficientKeyError);
    s.preload(store);
    CHECK(s.loaded());
    CHECK(s.card_remaining() == 2000);
    CHECK(store.pool("A", "B").available() == 3000);

    const auto plain = random_bits(1500, 3);
    const auto msg = s.encrypt(store, plain);
    CHECK(OtpSession::decrypt(msg) == plain);
    CHECK(s.card_remaining() == 500);
    CHECK_THROWS_AS(s.encrypt(store, plain), InsufficientKeyError);
    CHECK(s.card_remaining() == 500);

    // Reloading keeps the unused tail.
    s.preload(store);
    CHECK(s.card_remaining() == 2500);
    CHECK_THROWS_AS(s.preload(store), InsufficientKeyError);
    CHECK(s.card_remaining() == 2500);
}

TEST_CASE("accounting-only card load")
{
    keymgmt::KeyStore store(9);
    store.pool("A", "B").deposit(5000);
    OtpSession s("card", {"A", "B"}, OtpMode::preloaded, 64.0, 2000);
    s.preload_debit(store);
    CHECK(s.loaded());
    CHECK(store.pool("A", "B").available() == 3000);
    CHECK(s.card_remaining() == 2000);
    CHECK_THROWS_AS(s.encrypt(store, random_bits(10, 1)), InsufficientKeyError);
    s.consume(store, 1500);
    CHECK(s.card_remaining() == 500);
    CHECK_THROWS_AS(s.consume(store, 501), InsufficientKeyError);
    CHECK(s.consumed_bits() == 1500);
}

TEST_CASE("session validation")
{
    keymgmt::KeyStore store(1);
    CHECK_THROWS_AS(OtpSession("x", {"A"}, OtpMode::realtime, 1.0), ParameterError);
    CHECK_THROWS_AS(OtpSession("x", {"A", "B"}, OtpMode::preloaded, 1.0, 0), ParameterError);
    CHECK_THROWS_AS(OtpSession("x", {"A", "B"}, OtpMode::realtime, -1.0), ParameterError);
    OtpSession rt("x", {"A", "B"}, OtpMode::realtime, 1.0);
    CHECK_THROWS_AS(rt.preload(store), ParameterError);
    CHECK(otp_mode_from_string("preloaded") == OtpMode::preloaded);
    CHECK_THROWS_AS(otp_mode_from_string("postal"), ParameterError);
    CHECK_THROWS_AS(VpnTunnel("v", {"A"}), ParameterError);
}

TEST_CASE("VPN tunnel refreshes")
{
    keymgmt::KeyStore store(6);
    store.pool("WTPT", "CHB").deposit(770);
    store.pool("CHB", "TR").deposit(800);
    VpnTunnel t("vpn", {"WTPT", "CHB", "TR"});
    CHECK(t.refresh(store).size() == vpn_key_bits);
    CHECK(t.refresh_many(store, 10) == 2);
    CHECK(t.refreshes() == 3);
    CHECK(store.route_available({"WTPT", "CHB", "TR"}) == 770 - 3 * 256);
    try
    {
        t.refresh(store);
        FAIL("expected InsufficientKeyError");
    }
    catch (const InsufficientKeyError& e)
    {
        CHECK(std::string(e.where()).find("tunnel vpn") == 0);
    }
    CHECK(t.refresh_many(store, 5) == 0);
}
