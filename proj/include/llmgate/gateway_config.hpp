#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "llmgate/access_control.hpp"
#include "llmgate/agent_pipeline.hpp"
#include "llmgate/audit.hpp"
#include "llmgate/guardrails.hpp"
#include "llmgate/model_backend.hpp"

namespace llmgate {

class ConfigError : public Error {
public:
    using Error::Error;
};

// Minimal strict table/section config format: [section] tables, [[name]]
// array-of-table entries, and key = value pairs where a value is a quoted
// string, integer, float, boolean, or a single-line array of quoted strings.
// '#' starts a comment. Unknown keys, duplicate keys and malformed lines are
// load errors naming the offending line.
namespace cfgfmt {

struct Value {
    enum class Kind { string, integer, floating, boolean, string_array };
    Kind kind = Kind::string;
    std::string s;
    std::int64_t i = 0;
    double d = 0.0;
    bool b = false;
    std::vector<std::string> arr;
    int line = 0;
};

struct Table {
    std::string name;
    int line = 0;
    std::map<std::string, Value> entries;
};

struct Document {
    Table root;
    std::map<std::string, Table> sections;
    std::vector<std::pair<std::string, Table>> arrays;  // in file order
};

inline std::string parse_quoted(const std::string& raw, std::size_t& i, int line) {
    if (raw[i] != '"') throw ConfigError("line " + std::to_string(line) + ": expected '\"'");
    ++i;
    std::string out;
    while (i < raw.size()) {
        char c = raw[i++];
        if (c == '"') return out;
        if (c == '\\') {
            if (i >= raw.size())
                throw ConfigError("line " + std::to_string(line) + ": dangling escape");
            char e = raw[i++];
            switch (e) {
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                default:
                    throw ConfigError("line " + std::to_string(line) +
                                      ": unsupported escape '\\" + std::string(1, e) + "'");
            }
        } else {
            out.push_back(c);
        }
    }
    throw ConfigError("line " + std::to_string(line) + ": unterminated string");
}

inline Value parse_value(const std::string& raw, int line) {
    Value v;
    v.line = line;
    std::string t = trim(raw);
    if (t.empty()) throw ConfigError("line " + std::to_string(line) + ": missing value");
    if (t.front() == '"') {
        std::size_t i = 0;
        v.kind = Value::Kind::string;
        v.s = parse_quoted(t, i, line);
        if (!trim(t.substr(i)).empty())
            throw ConfigError("line " + std::to_string(line) + ": trailing characters");
        return v;
    }
    if (t.front() == '[') {
        v.kind = Value::Kind::string_array;
        std::size_t i = 1;
        bool expect_value = true;
        while (i < t.size()) {
            while (i < t.size() && std::isspace(static_cast<unsigned char>(t[i]))) ++i;
            if (i < t.size() && t[i] == ']') {
                ++i;
                if (!trim(t.substr(i)).empty())
                    throw ConfigError("line " + std::to_string(line) + ": trailing characters");
                return v;
            }
            if (!expect_value)
                throw ConfigError("line " + std::to_string(line) + ": expected ',' or ']'");
            v.arr.push_back(parse_quoted(t, i, line));
            while (i < t.size() && std::isspace(static_cast<unsigned char>(t[i]))) ++i;
            if (i < t.size() && t[i] == ',') {
                ++i;
                expect_value = true;
            } else {
                expect_value = false;
            }
        }
        throw ConfigError("line " + std::to_string(line) + ": unterminated array");
    }
    if (t == "true" || t == "false") {
        v.kind = Value::Kind::boolean;
        v.b = t == "true";
        return v;
    }
    bool numeric = true;
    bool has_dot = false;
    for (std::size_t i = 0; i < t.size(); ++i) {
        char c = t[i];
        if (c == '-' && i == 0) continue;
        if (c == '.') {
            has_dot = true;
            continue;
        }
        if (!std::isdigit(static_cast<unsigned char>(c))) numeric = false;
    }
    if (!numeric)
        throw ConfigError("line " + std::to_string(line) + ": unrecognized value '" + t + "'");
    if (has_dot) {
        v.kind = Value::Kind::floating;
        v.d = std::stod(t);
    } else {
        v.kind = Value::Kind::integer;
        v.i = std::stoll(t);
    }
    return v;
}

inline bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

inline Document parse(const std::string& text) {
    Document doc;
    Table* current = &doc.root;
    int line_no = 0;
    for (const std::string& raw_line : split_lines(text)) {
        ++line_no;
        std::string line = raw_line;
        // Strip comments outside of strings.
        bool in_str = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
            if (line[i] == '#' && !in_str) {
                line = line.substr(0, i);
                break;
            }
        }
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            bool is_array = t.size() > 1 && t[1] == '[';
            std::string close = is_array ? "]]" : "]";
            if (t.size() < 2 + close.size() ||
                t.substr(t.size() - close.size()) != close)
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            std::string name = trim(t.substr(is_array ? 2 : 1,
                                             t.size() - 2 * (is_array ? 2 : 1)));
            if (!valid_key(name))
                throw ConfigError("line " + std::to_string(line_no) + ": bad section name '" +
                                  name + "'");
            if (is_array) {
                doc.arrays.emplace_back(name, Table{name, line_no, {}});
                current = &doc.arrays.back().second;
            } else {
                if (doc.sections.count(name))
                    throw ConfigError("line " + std::to_string(line_no) + ": section [" +
                                      name + "] defined twice");
                doc.sections[name] = Table{name, line_no, {}};
                current = &doc.sections[name];
            }
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        if (!valid_key(key))
            throw ConfigError("line " + std::to_string(line_no) + ": bad key '" + key + "'");
        if (current->entries.count(key))
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key +
                              "'");
        current->entries[key] = parse_value(t.substr(eq + 1), line_no);
    }
    return doc;
}

// Typed take_* helpers consume entries; whatever remains afterwards is an
// unknown key and fails the load.

inline std::optional<Value> take(Table& t, const std::string& key) {
    auto it = t.entries.find(key);
    if (it == t.entries.end()) return std::nullopt;
    Value v = it->second;
    t.entries.erase(it);
    return v;
}

inline std::string take_string(Table& t, const std::string& key, const std::string& def) {
    auto v = take(t, key);
    if (!v) return def;
    if (v->kind != Value::Kind::string)
        throw ConfigError("line " + std::to_string(v->line) + ": key '" + key +
                          "' must be a string");
    return v->s;
}

inline std::string require_string(Table& t, const std::string& key) {
    auto v = take(t, key);
    if (!v)
        throw ConfigError("line " + std::to_string(t.line) + ": [" + t.name +
                          "] is missing required key '" + key + "'");
    if (v->kind != Value::Kind::string)
        throw ConfigError("line " + std::to_string(v->line) + ": key '" + key +
                          "' must be a string");
    return v->s;
}

inline std::int64_t take_int(Table& t, const std::string& key, std::int64_t def) {
    auto v = take(t, key);
    if (!v) return def;
    if (v->kind != Value::Kind::integer)
        throw ConfigError("line " + std::to_string(v->line) + ": key '" + key +
                          "' must be an integer");
    return v->i;
}

inline double take_number(Table& t, const std::string& key, double def) {
    auto v = take(t, key);
    if (!v) return def;
    if (v->kind == Value::Kind::integer) return static_cast<double>(v->i);
    if (v->kind == Value::Kind::floating) return v->d;
    throw ConfigError("line " + std::to_string(v->line) + ": key '" + key +
                      "' must be a number");
}

inline bool take_bool(Table& t, const std::string& key, bool def) {
    auto v = take(t, key);
    if (!v) return def;
    if (v->kind != Value::Kind::boolean)
        throw ConfigError("line " + std::to_string(v->line) + ": key '" + key +
                          "' must be true or false");
    return v->b;
}

inline std::vector<std::string> take_array(Table& t, const std::string& key,
                                           std::vector<std::string> def) {
    auto v = take(t, key);
    if (!v) return def;
    if (v->kind != Value::Kind::string_array)
        throw ConfigError("line " + std::to_string(v->line) + ": key '" + key +
                          "' must be an array of strings");
    return v->arr;
}

inline void ensure_empty(const Table& t, const std::string& where) {
    if (t.entries.empty()) return;
    const auto& [key, value] = *t.entries.begin();
    throw ConfigError("line " + std::to_string(value.line) + ": unknown key '" + key +
                      "' in " + where);
}

}  // namespace cfgfmt

struct ScriptedRuleConfig {
    std::string backend;
    std::string pattern;
    PatternKind kind = PatternKind::substring;
    std::string response;
    ScriptedFailure failure = ScriptedFailure::none;
    Millis delay_ms = 0;
    int position = -1;
};

struct BackendConfig {
    BackendDescriptor descriptor;
    std::string default_response;
};

struct PipelineSettings {
    std::string security_backend;
    std::string business_backend;
    int max_output_retries = 3;
    std::size_t retrieval_k = 2;
    Millis validation_timeout_ms = 2'000;
    Millis generation_timeout_ms = 8'000;
    EncodingProfile encoding_profile = EncodingProfile::html;
};

struct GatewayConfig {
    std::string listen_host = "127.0.0.1";
    int listen_port = 8080;
    int max_concurrent = 64;

    std::string audit_path;
    std::string alert_webhook;
    std::int64_t alert_tick_secs = 5;

    std::string key_store_path;
    std::string bootstrap_principal;

    PipelineSettings pipeline;
    SanitizationLimits sanitization;
    std::vector<RateLimitPolicy> rate_limits;
    std::vector<BackendConfig> backends;
    std::vector<ScriptedRuleConfig> scripted_rules;
    std::vector<DetectorRule> detector_rules;
    std::vector<AlertRule> alert_rules;
    std::vector<Role> extra_roles;

    std::string fingerprint;
};

namespace detail_config {

inline nlohmann::json canonical_json(const GatewayConfig& c) {
    nlohmann::json j;
    j["server"] = {{"listen_host", c.listen_host},
                   {"listen_port", c.listen_port},
                   {"max_concurrent", c.max_concurrent}};
    j["audit"] = {{"path", c.audit_path},
                  {"alert_webhook", c.alert_webhook},
                  {"alert_tick_secs", c.alert_tick_secs}};
    j["keys"] = {{"store_path", c.key_store_path},
                 {"bootstrap_principal", c.bootstrap_principal}};
    j["pipeline"] = {{"security_backend", c.pipeline.security_backend},
                     {"business_backend", c.pipeline.business_backend},
                     {"max_output_retries", c.pipeline.max_output_retries},
                     {"retrieval_k", c.pipeline.retrieval_k},
                     {"validation_timeout_ms", c.pipeline.validation_timeout_ms},
                     {"generation_timeout_ms", c.pipeline.generation_timeout_ms},
                     {"encoding_profile", encoding_profile_str(c.pipeline.encoding_profile)}};
    j["sanitization"] = {{"max_chars", c.sanitization.max_chars},
                         {"max_repeated_token_run", c.sanitization.max_repeated_token_run},
                         {"strip_control_chars", c.sanitization.strip_control_chars}};
    j["rate_limits"] = nlohmann::json::array();
    for (const auto& r : c.rate_limits)
        j["rate_limits"].push_back({{"capacity", r.capacity},
                                    {"refill_per_sec", r.refill_per_sec},
                                    {"scope", r.scope == RateScope::global ? "global"
                                                                           : "per_principal"}});
    j["backends"] = nlohmann::json::array();
    for (const auto& b : c.backends)
        j["backends"].push_back(
            {{"name", b.descriptor.name},
             {"kind", b.descriptor.kind == BackendKind::scripted ? "scripted" : "remote"},
             {"endpoint", b.descriptor.endpoint},
             {"model_id", b.descriptor.model_id},
             {"pinned_fingerprint", b.descriptor.pinned_fingerprint},
             {"max_context_tokens", b.descriptor.max_context_tokens},
             {"api_key", b.descriptor.api_key},
             {"default_response", b.default_response},
             {"response_text_path", b.descriptor.wire.response_text_path},
             {"response_fingerprint_path", b.descriptor.wire.response_fingerprint_path}});
    j["scripted_rules"] = nlohmann::json::array();
    for (const auto& r : c.scripted_rules)
        j["scripted_rules"].push_back(
            {{"backend", r.backend},
             {"pattern", r.pattern},
             {"kind", r.kind == PatternKind::regex ? "regex" : "substring"},
             {"response", r.response},
             {"failure", r.failure == ScriptedFailure::none        ? ""
                         : r.failure == ScriptedFailure::timeout   ? "timeout"
                                                                   : "transport"},
             {"delay_ms", r.delay_ms},
             {"position", r.position}});
    j["detector_rules"] = nlohmann::json::array();
    for (const auto& r : c.detector_rules)
        j["detector_rules"].push_back(
            {{"name", r.name},
             {"pattern", r.pattern},
             {"risk", risk_id_str(r.risk_id)},
             {"severity", r.severity == DetectorSeverity::block ? "block" : "advise"},
             {"post_check", r.post_check == PostCheck::luhn ? "luhn" : "none"}});
    j["alert_rules"] = nlohmann::json::array();
    for (const auto& r : c.alert_rules)
        j["alert_rules"].push_back(
            {{"rule_id", r.rule_id},
             {"category", r.category ? audit_category_str(*r.category) : ""},
             {"risk", r.risk ? risk_id_str(*r.risk) : ""},
             {"threshold", r.threshold},
             {"window_secs", r.window_secs}});
    j["roles"] = nlohmann::json::array();
    for (const auto& r : c.extra_roles)
        j["roles"].push_back({{"name", r.name}, {"permissions", r.permissions}});
    return j;
}

}  // namespace detail_config

/// Stable hash of the canonicalized effective configuration. Logged at
/// startup and reported by the health endpoint so unauthorized alterations
/// are visible.
inline std::string config_fingerprint(const GatewayConfig& cfg) {
    return sha256_hex(detail_config::canonical_json(cfg).dump());
}

/// Parses and schema-validates a config document. Any unknown key, type
/// mismatch, dangling backend reference or out-of-range value is a
/// ConfigError naming the offending key and line; the service refuses to
/// start on any of them.
inline GatewayConfig parse_config(const std::string& text) {
    cfgfmt::Document doc = cfgfmt::parse(text);
    GatewayConfig cfg;

    cfgfmt::ensure_empty(doc.root, "the top level (keys must live in a section)");

    auto section = [&](const char* name) -> cfgfmt::Table {
        auto it = doc.sections.find(name);
        if (it == doc.sections.end()) return cfgfmt::Table{name, 0, {}};
        cfgfmt::Table t = it->second;
        doc.sections.erase(it);
        return t;
    };

    {
        cfgfmt::Table t = section("server");
        std::string addr = cfgfmt::take_string(t, "listen_address", "127.0.0.1:8080");
        auto colon = addr.rfind(':');
        if (colon == std::string::npos || colon + 1 >= addr.size())
            throw ConfigError("listen_address must be host:port, got '" + addr + "'");
        cfg.listen_host = addr.substr(0, colon);
        try {
            cfg.listen_port = std::stoi(addr.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("listen_address has a bad port: '" + addr + "'");
        }
        cfg.max_concurrent = static_cast<int>(cfgfmt::take_int(t, "max_concurrent", 64));
        if (cfg.max_concurrent < 1) throw ConfigError("max_concurrent must be >= 1");
        cfgfmt::ensure_empty(t, "[server]");
    }
    {
        cfgfmt::Table t = section("audit");
        cfg.audit_path = cfgfmt::take_string(t, "path", "");
        cfg.alert_webhook = cfgfmt::take_string(t, "alert_webhook", "");
        cfg.alert_tick_secs = cfgfmt::take_int(t, "alert_tick_secs", 5);
        if (cfg.alert_tick_secs < 1) throw ConfigError("alert_tick_secs must be >= 1");
        cfgfmt::ensure_empty(t, "[audit]");
    }
    {
        cfgfmt::Table t = section("keys");
        cfg.key_store_path = cfgfmt::take_string(t, "store_path", "");
        cfg.bootstrap_principal = cfgfmt::take_string(t, "bootstrap_principal", "");
        cfgfmt::ensure_empty(t, "[keys]");
    }
    {
        auto it = doc.sections.find("pipeline");
        if (it == doc.sections.end()) throw ConfigError("missing required section [pipeline]");
        cfgfmt::Table t = it->second;
        doc.sections.erase(it);
        cfg.pipeline.security_backend = cfgfmt::require_string(t, "security_backend");
        cfg.pipeline.business_backend = cfgfmt::require_string(t, "business_backend");
        cfg.pipeline.max_output_retries =
            static_cast<int>(cfgfmt::take_int(t, "max_output_retries", 3));
        if (cfg.pipeline.max_output_retries < 0 ||
            cfg.pipeline.max_output_retries > kMaxOutputRetriesCap)
            throw ConfigError("max_output_retries must be in [0, " +
                              std::to_string(kMaxOutputRetriesCap) + "]");
        const auto k = cfgfmt::take_int(t, "retrieval_k", 2);
        if (k < 1) throw ConfigError("retrieval_k must be >= 1");
        cfg.pipeline.retrieval_k = static_cast<std::size_t>(k);
        cfg.pipeline.validation_timeout_ms = cfgfmt::take_int(t, "validation_timeout_ms", 2'000);
        cfg.pipeline.generation_timeout_ms = cfgfmt::take_int(t, "generation_timeout_ms", 8'000);
        if (cfg.pipeline.validation_timeout_ms < 1 || cfg.pipeline.generation_timeout_ms < 1)
            throw ConfigError("timeouts must be positive");
        try {
            cfg.pipeline.encoding_profile =
                parse_encoding_profile(cfgfmt::take_string(t, "encoding_profile", "html"));
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
        cfgfmt::ensure_empty(t, "[pipeline]");
    }
    {
        cfgfmt::Table t = section("sanitization");
        const auto max_chars = cfgfmt::take_int(t, "max_chars", 10'000);
        const auto max_run = cfgfmt::take_int(t, "max_repeated_token_run", 200);
        if (max_chars < 1 || max_run < 1)
            throw ConfigError("sanitization limits must be >= 1");
        cfg.sanitization.max_chars = static_cast<std::size_t>(max_chars);
        cfg.sanitization.max_repeated_token_run = static_cast<std::size_t>(max_run);
        cfg.sanitization.strip_control_chars =
            cfgfmt::take_bool(t, "strip_control_chars", true);
        cfgfmt::ensure_empty(t, "[sanitization]");
    }
    if (!doc.sections.empty()) {
        const auto& [name, table] = *doc.sections.begin();
        throw ConfigError("line " + std::to_string(table.line) + ": unknown section [" +
                          name + "]");
    }

    bool saw_detectors = false;
    bool saw_rate_limits = false;
    for (auto& [name, table_const] : doc.arrays) {
        cfgfmt::Table t = table_const;
        if (name == "backends") {
            BackendConfig b;
            b.descriptor.name = cfgfmt::require_string(t, "name");
            const std::string kind = cfgfmt::require_string(t, "kind");
            if (kind == "scripted") {
                b.descriptor.kind = BackendKind::scripted;
            } else if (kind == "remote") {
                b.descriptor.kind = BackendKind::remote;
            } else {
                throw ConfigError("line " + std::to_string(t.line) +
                                  ": backend kind must be scripted or remote, got '" + kind +
                                  "'");
            }
            b.descriptor.endpoint = cfgfmt::take_string(t, "endpoint", "");
            b.descriptor.model_id = cfgfmt::take_string(t, "model_id", "");
            b.descriptor.pinned_fingerprint = cfgfmt::take_string(t, "pinned_fingerprint", "");
            b.descriptor.max_context_tokens = cfgfmt::take_int(t, "max_context_tokens", 0);
            b.descriptor.api_key = cfgfmt::take_string(t, "api_key", "");
            b.descriptor.wire.model_field =
                cfgfmt::take_string(t, "model_field", b.descriptor.wire.model_field);
            b.descriptor.wire.messages_field =
                cfgfmt::take_string(t, "messages_field", b.descriptor.wire.messages_field);
            b.descriptor.wire.role_field =
                cfgfmt::take_string(t, "role_field", b.descriptor.wire.role_field);
            b.descriptor.wire.content_field =
                cfgfmt::take_string(t, "content_field", b.descriptor.wire.content_field);
            b.descriptor.wire.seed_field =
                cfgfmt::take_string(t, "seed_field", b.descriptor.wire.seed_field);
            b.descriptor.wire.temperature_field = cfgfmt::take_string(
                t, "temperature_field", b.descriptor.wire.temperature_field);
            b.descriptor.wire.max_tokens_field =
                cfgfmt::take_string(t, "max_tokens_field", b.descriptor.wire.max_tokens_field);
            b.descriptor.wire.response_text_path = cfgfmt::take_string(
                t, "response_text_path", b.descriptor.wire.response_text_path);
            b.descriptor.wire.response_fingerprint_path = cfgfmt::take_string(
                t, "response_fingerprint_path", b.descriptor.wire.response_fingerprint_path);
            b.default_response = cfgfmt::take_string(t, "default_response", "");
            if (b.descriptor.kind == BackendKind::remote &&
                (b.descriptor.endpoint.empty() || b.descriptor.model_id.empty()))
                throw ConfigError("line " + std::to_string(t.line) + ": remote backend '" +
                                  b.descriptor.name + "' requires endpoint and model_id");
            cfgfmt::ensure_empty(t, "[[backends]]");
            cfg.backends.push_back(std::move(b));
        } else if (name == "scripted_rules") {
            ScriptedRuleConfig r;
            r.backend = cfgfmt::require_string(t, "backend");
            r.pattern = cfgfmt::require_string(t, "pattern");
            const std::string kind = cfgfmt::take_string(t, "kind", "substring");
            if (kind == "regex") {
                r.kind = PatternKind::regex;
            } else if (kind == "substring") {
                r.kind = PatternKind::substring;
            } else {
                throw ConfigError("line " + std::to_string(t.line) +
                                  ": rule kind must be substring or regex");
            }
            r.response = cfgfmt::take_string(t, "response", "");
            const std::string failure = cfgfmt::take_string(t, "failure", "");
            if (failure == "timeout") {
                r.failure = ScriptedFailure::timeout;
            } else if (failure == "transport") {
                r.failure = ScriptedFailure::transport;
            } else if (!failure.empty()) {
                throw ConfigError("line " + std::to_string(t.line) +
                                  ": failure must be timeout or transport");
            }
            r.delay_ms = cfgfmt::take_int(t, "delay_ms", 0);
            r.position = static_cast<int>(cfgfmt::take_int(t, "position", -1));
            cfgfmt::ensure_empty(t, "[[scripted_rules]]");
            cfg.scripted_rules.push_back(std::move(r));
        } else if (name == "detector_rules") {
            saw_detectors = true;
            DetectorRule r;
            r.name = cfgfmt::require_string(t, "name");
            r.pattern = cfgfmt::require_string(t, "pattern");
            try {
                r.risk_id = parse_risk_id(cfgfmt::require_string(t, "risk"));
            } catch (const Error& e) {
                throw ConfigError("line " + std::to_string(t.line) + ": " + e.what());
            }
            const std::string sev = cfgfmt::take_string(t, "severity", "advise");
            if (sev == "block") {
                r.severity = DetectorSeverity::block;
            } else if (sev == "advise") {
                r.severity = DetectorSeverity::advise;
            } else {
                throw ConfigError("line " + std::to_string(t.line) +
                                  ": severity must be advise or block");
            }
            const std::string pc = cfgfmt::take_string(t, "post_check", "none");
            if (pc == "luhn") {
                r.post_check = PostCheck::luhn;
            } else if (pc != "none") {
                throw ConfigError("line " + std::to_string(t.line) +
                                  ": post_check must be none or luhn");
            }
            cfgfmt::ensure_empty(t, "[[detector_rules]]");
            cfg.detector_rules.push_back(std::move(r));
        } else if (name == "alert_rules") {
            AlertRule r;
            r.rule_id = cfgfmt::take_string(
                t, "rule_id", "rule" + std::to_string(cfg.alert_rules.size() + 1));
            const std::string cat = cfgfmt::take_string(t, "category", "");
            if (!cat.empty()) {
                try {
                    r.category = parse_audit_category(cat);
                } catch (const Error& e) {
                    throw ConfigError("line " + std::to_string(t.line) + ": " + e.what());
                }
            }
            const std::string risk = cfgfmt::take_string(t, "risk", "");
            if (!risk.empty()) {
                try {
                    r.risk = parse_risk_id(risk);
                } catch (const Error& e) {
                    throw ConfigError("line " + std::to_string(t.line) + ": " + e.what());
                }
            }
            const auto threshold = cfgfmt::take_int(t, "threshold", 3);
            const auto window = cfgfmt::take_int(t, "window_secs", 60);
            if (threshold < 1) throw ConfigError("alert threshold must be >= 1");
            if (window < 1) throw ConfigError("window_secs must be >= 1");
            r.threshold = static_cast<std::size_t>(threshold);
            r.window_secs = window;
            cfgfmt::ensure_empty(t, "[[alert_rules]]");
            cfg.alert_rules.push_back(std::move(r));
        } else if (name == "rate_limits") {
            saw_rate_limits = true;
            RateLimitPolicy p;
            p.capacity = cfgfmt::take_number(t, "capacity", 60);
            p.refill_per_sec = cfgfmt::take_number(t, "refill_per_sec", 1.0);
            if (p.capacity < 1 || p.refill_per_sec <= 0)
                throw ConfigError("rate limit capacity must be >= 1 and refill positive");
            const std::string scope = cfgfmt::take_string(t, "scope", "per_principal");
            if (scope == "global") {
                p.scope = RateScope::global;
            } else if (scope == "per_principal") {
                p.scope = RateScope::per_principal;
            } else {
                throw ConfigError("line " + std::to_string(t.line) +
                                  ": scope must be per_principal or global");
            }
            cfgfmt::ensure_empty(t, "[[rate_limits]]");
            cfg.rate_limits.push_back(p);
        } else if (name == "roles") {
            const std::string role_name = cfgfmt::require_string(t, "name");
            auto perms = cfgfmt::take_array(t, "permissions", {});
            cfgfmt::ensure_empty(t, "[[roles]]");
            try {
                cfg.extra_roles.push_back(make_role(
                    role_name, std::set<std::string>(perms.begin(), perms.end())));
            } catch (const Error& e) {
                throw ConfigError("line " + std::to_string(t.line) + ": " + e.what());
            }
        } else {
            throw ConfigError("line " + std::to_string(t.line) + ": unknown section [[" +
                              name + "]]");
        }
    }

    if (!saw_detectors) cfg.detector_rules = default_detector_rules();
    if (!saw_rate_limits) cfg.rate_limits.push_back(RateLimitPolicy{});

    // Cross references.
    auto backend_exists = [&](const std::string& n) {
        for (const auto& b : cfg.backends)
            if (b.descriptor.name == n) return true;
        return false;
    };
    auto backend_kind = [&](const std::string& n) {
        for (const auto& b : cfg.backends)
            if (b.descriptor.name == n) return b.descriptor.kind;
        return BackendKind::scripted;
    };
    for (const std::string& ref :
         {cfg.pipeline.security_backend, cfg.pipeline.business_backend})
        if (!backend_exists(ref))
            throw ConfigError("unknown backend profile '" + ref + "'");
    for (const auto& r : cfg.scripted_rules) {
        if (!backend_exists(r.backend))
            throw ConfigError("scripted rule references unknown backend '" + r.backend + "'");
        if (backend_kind(r.backend) != BackendKind::scripted)
            throw ConfigError("scripted rule references non-scripted backend '" + r.backend +
                              "'");
    }
    for (std::size_t i = 0; i < cfg.backends.size(); ++i)
        for (std::size_t k = i + 1; k < cfg.backends.size(); ++k)
            if (cfg.backends[i].descriptor.name == cfg.backends[k].descriptor.name)
                throw ConfigError("backend profile '" + cfg.backends[i].descriptor.name +
                                  "' defined twice");

    // Detector patterns must compile at load time.
    try {
        compile_rules(cfg.detector_rules);
    } catch (const InvalidPattern& e) {
        throw ConfigError(e.what());
    }

    cfg.fingerprint = config_fingerprint(cfg);
    return cfg;
}

inline GatewayConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace llmgate
