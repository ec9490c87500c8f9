#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "llmgate/access_control.hpp"
#include "support/oracles.hpp"

using namespace llmgate;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& stem)
        : path("/tmp/llmgate_test_" + stem + "_" + random_hex(6)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("issue then authenticate round trip") {
    AccessController access;
    access.upsert_principal("alice", "Alice", {"chat"});
    auto [key_id, secret] = access.issue_key("alice");
    auto principal = access.authenticate(secret, 0);
    CHECK(principal.principal_id == "alice");
    CHECK(principal.roles.count("chat") == 1);
}

TEST_CASE("the three auth failure causes share one external message") {
    AccessController access;
    access.upsert_principal("bob", "Bob", {"chat"});
    auto [key_id, secret] = access.issue_key("bob");
    auto [key2, secret2] = access.issue_key("bob");

    std::string unknown_msg;
    std::string revoked_msg;
    std::string suspended_msg;

    try {
        access.authenticate("sk-wrong", 0);
        FAIL("expected AuthError");
    } catch (const AuthError& e) {
        unknown_msg = e.what();
        CHECK(e.cause() == AuthFailureCause::unknown_key);
    }
    access.revoke_key(key_id);
    try {
        access.authenticate(secret, 0);
        FAIL("expected AuthError");
    } catch (const AuthError& e) {
        revoked_msg = e.what();
        CHECK(e.cause() == AuthFailureCause::revoked_key);
    }
    access.set_principal_status("bob", PrincipalStatus::suspended);
    try {
        access.authenticate(secret2, 0);
        FAIL("expected AuthError");
    } catch (const AuthError& e) {
        suspended_msg = e.what();
        CHECK(e.cause() == AuthFailureCause::suspended_principal);
    }
    CHECK(unknown_msg == revoked_msg);
    CHECK(revoked_msg == suspended_msg);
}

TEST_CASE("revocation is idempotent and unknown ids are reported") {
    AccessController access;
    access.upsert_principal("carol", "", {});
    auto [key_id, secret] = access.issue_key("carol");
    access.revoke_key(key_id);
    CHECK_NOTHROW(access.revoke_key(key_id));
    CHECK_THROWS_AS(access.revoke_key("k999"), UnknownKey);
}

TEST_CASE("authorize is deny-by-default over role grants") {
    AccessController access;
    Principal chat_only{"u1", "u1", {"chat"}, PrincipalStatus::active};
    Principal mixed{"u2", "u2", {"chat", "audit_read"}, PrincipalStatus::active};
    Principal no_roles{"u3", "u3", {}, PrincipalStatus::active};
    CHECK_FALSE(access.authorize(chat_only, "policy_admin"));
    CHECK(access.authorize(mixed, "audit_read"));
    CHECK_FALSE(access.authorize(no_roles, "chat"));
    CHECK_FALSE(access.authorize(no_roles, "key_admin"));
    Principal admin{"u4", "u4", {"admin"}, PrincipalStatus::active};
    for (const std::string& action : {"chat", "policy_admin", "audit_read", "key_admin"})
        CHECK(access.authorize(admin, action));
}

TEST_CASE("unknown action names are rejected at role definition time") {
    CHECK_THROWS_AS(make_role("weird", {"chat", "launch_missiles"}), Error);
    CHECK_NOTHROW(make_role("ok", {"chat", "audit_read"}));
    AccessController access;
    CHECK_THROWS_AS(access.upsert_principal("x", "x", {"no-such-role"}), Error);
}

TEST_CASE("token bucket: burst of six at t=0 under capacity five") {
    RateLimiter limiter;
    RateLimitPolicy policy{5, 1.0, RateScope::per_principal};
    for (int i = 0; i < 5; ++i) {
        auto d = limiter.check_rate("p", policy, 0);
        CHECK(d.allowed);
    }
    auto denied = limiter.check_rate("p", policy, 0);
    CHECK_FALSE(denied.allowed);
    CHECK(denied.retry_after_ms == 1'000);

    // Two seconds later the bucket has refilled two tokens.
    CHECK(limiter.check_rate("p", policy, 2'000).allowed);
    CHECK(limiter.check_rate("p", policy, 2'000).allowed);
    auto denied2 = limiter.check_rate("p", policy, 2'000);
    CHECK_FALSE(denied2.allowed);
    CHECK(denied2.retry_after_ms == 1'000);
}

TEST_CASE("token bucket: half-refilled bucket reports the remaining wait") {
    RateLimiter limiter;
    RateLimitPolicy policy{1, 0.5, RateScope::per_principal};
    CHECK(limiter.check_rate("p", policy, 0).allowed);
    auto denied = limiter.check_rate("p", policy, 1'000);
    CHECK_FALSE(denied.allowed);
    CHECK(denied.retry_after_ms == 1'000);  // (1 - 0.5) / 0.5 s
}

TEST_CASE("buckets are independent per principal and shared when global") {
    RateLimiter limiter;
    RateLimitPolicy per{1, 0.001, RateScope::per_principal};
    CHECK(limiter.check_rate("a", per, 0).allowed);
    CHECK(limiter.check_rate("b", per, 0).allowed);
    CHECK_FALSE(limiter.check_rate("a", per, 0).allowed);

    RateLimitPolicy global{1, 0.001, RateScope::global};
    CHECK(limiter.check_rate("a", global, 0).allowed);
    CHECK_FALSE(limiter.check_rate("b", global, 0).allowed);
}

TEST_CASE("rate limiter matches the discrete-event oracle over random traffic") {
    std::mt19937 rng(1234);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<int> cap(1, 50);
        std::uniform_real_distribution<double> refill(0.1, 50.0);
        RateLimitPolicy policy{static_cast<double>(cap(rng)), refill(rng),
                               RateScope::per_principal};
        RateLimiter limiter;
        oracles::BucketSim sim(policy.capacity, policy.refill_per_sec);
        Millis now = 0;
        std::uniform_int_distribution<Millis> gap(0, 700);
        for (int i = 0; i < 60; ++i) {
            now += gap(rng);
            auto got = limiter.check_rate("p", policy, now);
            auto want = sim.arrive(now);
            REQUIRE(got.allowed == want.allowed);
            REQUIRE(got.retry_after_ms == want.retry_after_ms);
        }
    }
}

TEST_CASE("bucket conservation: allows in a window never exceed capacity plus refill") {
    std::mt19937 rng(77);
    RateLimitPolicy policy{10, 2.0, RateScope::per_principal};
    RateLimiter limiter;
    Millis now = 0;
    int allows = 0;
    std::uniform_int_distribution<Millis> gap(0, 300);
    const Millis horizon = 10'000;
    while (now <= horizon) {
        if (limiter.check_rate("p", policy, now).allowed) ++allows;
        now += gap(rng) + 1;
    }
    const double bound = policy.capacity + policy.refill_per_sec * (horizon / 1'000.0) + 1;
    CHECK(allows <= static_cast<int>(bound));
}

TEST_CASE("admit consumes from all policies or none") {
    RateLimiter limiter;
    std::vector<RateLimitPolicy> policies = {{2, 0.001, RateScope::per_principal},
                                             {1, 0.001, RateScope::global}};
    CHECK(limiter.admit("a", policies, 0).allowed);
    // Global bucket is empty; per-principal must not be drained by the denial.
    auto denied = limiter.admit("a", policies, 0);
    CHECK_FALSE(denied.allowed);
    CHECK(denied.retry_after_ms > 0);
    std::vector<RateLimitPolicy> only_per = {policies[0]};
    CHECK(limiter.admit("a", only_per, 0).allowed);        // second per-principal token
    CHECK_FALSE(limiter.admit("a", only_per, 0).allowed);  // now drained
}

TEST_CASE("key store persists and replays, never storing plaintext secrets") {
    TempFile store("keys");
    std::string secret;
    std::string key_id;
    {
        AccessController access(store.path);
        access.define_role(make_role("operator", {"chat", "audit_read"}));
        access.upsert_principal("dave", "Dave", {"operator"});
        auto issued = access.issue_key("dave");
        key_id = issued.first;
        secret = issued.second;
        CHECK(access.authenticate(secret, 0).principal_id == "dave");
    }
    {
        AccessController reloaded(store.path);
        auto principal = reloaded.authenticate(secret, 0);
        CHECK(principal.principal_id == "dave");
        CHECK(reloaded.authorize(principal, "audit_read"));
        reloaded.revoke_key(key_id);
    }
    {
        AccessController reloaded(store.path);
        CHECK_THROWS_AS(reloaded.authenticate(secret, 0), AuthError);
        // Sequence continues after replay instead of reusing ids.
        auto issued = reloaded.issue_key("dave");
        CHECK(issued.first != key_id);
    }
    const std::string contents = slurp(store.path);
    CHECK(contents.find(secret) == std::string::npos);
    CHECK(contents.find("\"kind\":\"key\"") != std::string::npos);
}
