#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "llmgate/common.hpp"

namespace llmgate {

enum class AuthFailureCause { unknown_key, revoked_key, suspended_principal };

inline std::string auth_failure_cause_str(AuthFailureCause c) {
    switch (c) {
        case AuthFailureCause::unknown_key: return "unknown_key";
        case AuthFailureCause::revoked_key: return "revoked_key";
        case AuthFailureCause::suspended_principal: return "suspended_principal";
    }
    throw Error("invalid AuthFailureCause");
}

// The external message is byte-identical for every cause so callers cannot
// probe which keys exist; the cause is recorded only in audit events.
class AuthError : public Error {
public:
    static constexpr const char* kExternalMessage = "invalid API key";
    explicit AuthError(AuthFailureCause cause) : Error(kExternalMessage), cause_(cause) {}
    AuthFailureCause cause() const { return cause_; }

private:
    AuthFailureCause cause_;
};

class UnknownKey : public Error {
public:
    using Error::Error;
};

inline const std::set<std::string>& known_actions() {
    static const std::set<std::string> actions = {"chat", "policy_admin", "audit_read",
                                                  "key_admin"};
    return actions;
}

struct Role {
    std::string name;
    std::set<std::string> permissions;
};

inline Role make_role(std::string name, std::set<std::string> permissions) {
    for (const std::string& p : permissions)
        if (!known_actions().count(p)) throw Error("unknown action name: " + p);
    return Role{std::move(name), std::move(permissions)};
}

enum class PrincipalStatus { active, suspended };

struct Principal {
    std::string principal_id;
    std::string display_name;
    std::set<std::string> roles;
    PrincipalStatus status = PrincipalStatus::active;
};

struct ApiKey {
    std::string key_id;
    std::string salt;
    std::string key_hash;  // sha256(salt + secret); the secret itself is never stored
    std::string principal_id;
    Millis created_at = 0;
    std::optional<Millis> revoked_at;
};

enum class RateScope { per_principal, global };

struct RateLimitPolicy {
    double capacity = 60;
    double refill_per_sec = 1.0;
    RateScope scope = RateScope::per_principal;
};

struct RateDecision {
    bool allowed = false;
    Millis retry_after_ms = 0;
};

/// Token buckets keyed by (policy, scope subject). Buckets start full;
/// a denied check refills but does not consume. Timestamps are injected and
/// must be monotone per bucket.
class RateLimiter {
public:
    RateDecision check_rate(const std::string& principal_id, const RateLimitPolicy& policy,
                            Millis now) {
        std::lock_guard lock(mutex_);
        Bucket& b = bucket_for(principal_id, policy);
        refill(b, policy, now);
        return take(b, policy);
    }

    /// All-or-nothing admission across a policy set: consumes one token from
    /// every bucket, or from none, reporting the longest retry hint.
    RateDecision admit(const std::string& principal_id,
                       const std::vector<RateLimitPolicy>& policies, Millis now) {
        std::lock_guard lock(mutex_);
        std::vector<Bucket*> buckets;
        buckets.reserve(policies.size());
        for (const RateLimitPolicy& p : policies) {
            Bucket& b = bucket_for(principal_id, p);
            refill(b, p, now);
            buckets.push_back(&b);
        }
        Millis worst_retry = 0;
        for (std::size_t i = 0; i < policies.size(); ++i) {
            if (buckets[i]->level < 1.0)
                worst_retry = std::max(worst_retry, retry_after(*buckets[i], policies[i]));
        }
        if (worst_retry > 0) return {false, worst_retry};
        for (Bucket* b : buckets) b->level -= 1.0;
        return {true, 0};
    }

private:
    struct Bucket {
        double level = 0.0;
        Millis last = 0;
        bool initialized = false;
    };

    using Key = std::tuple<double, double, int, std::string>;

    Bucket& bucket_for(const std::string& principal_id, const RateLimitPolicy& p) {
        std::string subject = p.scope == RateScope::global ? std::string() : principal_id;
        Key key{p.capacity, p.refill_per_sec, static_cast<int>(p.scope), subject};
        Bucket& b = buckets_[key];
        if (!b.initialized) {
            b.level = p.capacity;
            b.initialized = true;
        }
        return b;
    }

    static void refill(Bucket& b, const RateLimitPolicy& p, Millis now) {
        if (now > b.last) {
            const double elapsed_s = static_cast<double>(now - b.last) / 1000.0;
            b.level = std::min(p.capacity, b.level + elapsed_s * p.refill_per_sec);
        }
        b.last = std::max(b.last, now);
    }

    static Millis retry_after(const Bucket& b, const RateLimitPolicy& p) {
        return static_cast<Millis>(
            std::ceil((1.0 - b.level) / p.refill_per_sec * 1000.0));
    }

    static RateDecision take(Bucket& b, const RateLimitPolicy& p) {
        if (b.level >= 1.0) {
            b.level -= 1.0;
            return {true, 0};
        }
        return {false, retry_after(b, p)};
    }

    std::mutex mutex_;
    std::map<Key, Bucket> buckets_;
};

/// Principals, roles and API keys, optionally persisted as an append-only
/// line-delimited record file (schema field "v"). Secrets are returned once
/// at issuance and only their salted hash is kept.
class AccessController {
public:
    explicit AccessController(std::string store_path = "", Clock clock = system_clock())
        : store_path_(std::move(store_path)), clock_(std::move(clock)) {
        for (const auto& [name, perms] :
             std::initializer_list<std::pair<const char*, std::set<std::string>>>{
                 {"chat", {"chat"}},
                 {"policy_admin", {"policy_admin"}},
                 {"audit_read", {"audit_read"}},
                 {"key_admin", {"key_admin"}},
                 {"admin", {"chat", "policy_admin", "audit_read", "key_admin"}}}) {
            roles_[name] = Role{name, perms};
        }
        if (!store_path_.empty()) replay();
    }

    void define_role(const Role& role) {
        Role checked = make_role(role.name, role.permissions);
        std::lock_guard lock(mutex_);
        roles_[checked.name] = checked;
        persist({{"v", 1},
                 {"kind", "role"},
                 {"name", checked.name},
                 {"permissions", checked.permissions}});
    }

    Principal upsert_principal(const std::string& principal_id,
                               const std::string& display_name,
                               const std::set<std::string>& roles) {
        std::lock_guard lock(mutex_);
        for (const std::string& r : roles)
            if (!roles_.count(r)) throw Error("unknown role: " + r);
        Principal& p = principals_[principal_id];
        p.principal_id = principal_id;
        p.display_name = display_name.empty() ? principal_id : display_name;
        p.roles = roles;
        persist({{"v", 1},
                 {"kind", "principal"},
                 {"principal_id", p.principal_id},
                 {"display_name", p.display_name},
                 {"roles", p.roles},
                 {"status", p.status == PrincipalStatus::active ? "active" : "suspended"}});
        return p;
    }

    void set_principal_status(const std::string& principal_id, PrincipalStatus status) {
        std::lock_guard lock(mutex_);
        auto it = principals_.find(principal_id);
        if (it == principals_.end()) throw Error("unknown principal: " + principal_id);
        it->second.status = status;
        persist({{"v", 1},
                 {"kind", "principal"},
                 {"principal_id", it->second.principal_id},
                 {"display_name", it->second.display_name},
                 {"roles", it->second.roles},
                 {"status", status == PrincipalStatus::active ? "active" : "suspended"}});
    }

    std::optional<Principal> find_principal(const std::string& principal_id) const {
        std::lock_guard lock(mutex_);
        auto it = principals_.find(principal_id);
        if (it == principals_.end()) return std::nullopt;
        return it->second;
    }

    /// Returns (key_id, plaintext secret). The secret is shown exactly once.
    std::pair<std::string, std::string> issue_key(const std::string& principal_id) {
        std::lock_guard lock(mutex_);
        if (!principals_.count(principal_id))
            throw Error("unknown principal: " + principal_id);
        ApiKey key;
        key.key_id = "k" + std::to_string(++key_seq_);
        key.salt = random_hex(8);
        std::string secret = "sk-" + random_hex(24);
        key.key_hash = sha256_hex(key.salt + secret);
        key.principal_id = principal_id;
        key.created_at = clock_();
        keys_[key.key_id] = key;
        persist({{"v", 1},
                 {"kind", "key"},
                 {"key_id", key.key_id},
                 {"salt", key.salt},
                 {"key_hash", key.key_hash},
                 {"principal_id", key.principal_id},
                 {"created_at", key.created_at}});
        return {key.key_id, secret};
    }

    /// Idempotent; throws UnknownKey only for ids that never existed.
    void revoke_key(const std::string& key_id) {
        std::lock_guard lock(mutex_);
        auto it = keys_.find(key_id);
        if (it == keys_.end()) throw UnknownKey("unknown key id: " + key_id);
        if (it->second.revoked_at) return;
        it->second.revoked_at = clock_();
        persist({{"v", 1},
                 {"kind", "revoke"},
                 {"key_id", key_id},
                 {"revoked_at", *it->second.revoked_at}});
    }

    Principal authenticate(const std::string& presented_secret, Millis /*now*/) const {
        std::lock_guard lock(mutex_);
        const ApiKey* matched = nullptr;
        for (const auto& [id, key] : keys_) {
            if (sha256_hex(key.salt + presented_secret) == key.key_hash) {
                matched = &key;
                break;
            }
        }
        if (matched == nullptr) throw AuthError(AuthFailureCause::unknown_key);
        if (matched->revoked_at) throw AuthError(AuthFailureCause::revoked_key);
        auto pit = principals_.find(matched->principal_id);
        if (pit == principals_.end() || pit->second.status == PrincipalStatus::suspended)
            throw AuthError(AuthFailureCause::suspended_principal);
        return pit->second;
    }

    /// Deny-by-default: true iff any of the principal's roles grants the action.
    bool authorize(const Principal& principal, const std::string& action) const {
        std::lock_guard lock(mutex_);
        for (const std::string& role_name : principal.roles) {
            auto it = roles_.find(role_name);
            if (it != roles_.end() && it->second.permissions.count(action)) return true;
        }
        return false;
    }

    bool has_role(const std::string& name) const {
        std::lock_guard lock(mutex_);
        return roles_.count(name) > 0;
    }

    std::size_t key_count() const {
        std::lock_guard lock(mutex_);
        return keys_.size();
    }

private:
    void persist(const nlohmann::json& record) {
        if (store_path_.empty()) return;
        std::ofstream out(store_path_, std::ios::app);
        if (!out) throw Error("key store: cannot open " + store_path_);
        out << record.dump() << "\n";
        out.flush();
        if (!out) throw Error("key store: write failed for " + store_path_);
    }

    void replay() {
        std::ifstream in(store_path_);
        if (!in) return;  // first run
        std::string line;
        std::uint64_t max_seq = 0;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            nlohmann::json rec = nlohmann::json::parse(line);
            const std::string kind = rec.at("kind").get<std::string>();
            if (kind == "role") {
                Role r{rec.at("name").get<std::string>(),
                       rec.at("permissions").get<std::set<std::string>>()};
                roles_[r.name] = r;
            } else if (kind == "principal") {
                Principal p;
                p.principal_id = rec.at("principal_id").get<std::string>();
                p.display_name = rec.at("display_name").get<std::string>();
                p.roles = rec.at("roles").get<std::set<std::string>>();
                p.status = rec.at("status").get<std::string>() == "suspended"
                               ? PrincipalStatus::suspended
                               : PrincipalStatus::active;
                principals_[p.principal_id] = p;
            } else if (kind == "key") {
                ApiKey k;
                k.key_id = rec.at("key_id").get<std::string>();
                k.salt = rec.at("salt").get<std::string>();
                k.key_hash = rec.at("key_hash").get<std::string>();
                k.principal_id = rec.at("principal_id").get<std::string>();
                k.created_at = rec.at("created_at").get<Millis>();
                if (k.key_id.size() > 1)
                    max_seq = std::max<std::uint64_t>(max_seq,
                                                      std::stoull(k.key_id.substr(1)));
                keys_[k.key_id] = k;
            } else if (kind == "revoke") {
                auto it = keys_.find(rec.at("key_id").get<std::string>());
                if (it != keys_.end()) it->second.revoked_at = rec.at("revoked_at").get<Millis>();
            } else {
                throw Error("key store: unknown record kind '" + kind + "'");
            }
        }
        key_seq_ = max_seq;
    }

    std::string store_path_;
    Clock clock_;
    mutable std::mutex mutex_;
    std::map<std::string, Role> roles_;
    std::map<std::string, Principal> principals_;
    std::map<std::string, ApiKey> keys_;
    std::uint64_t key_seq_ = 0;
};

}  // namespace llmgate
