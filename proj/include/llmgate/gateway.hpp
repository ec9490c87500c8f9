#pragma once

#include <atomic>
#include <condition_variable>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "llmgate/access_control.hpp"
#include "llmgate/agent_pipeline.hpp"
#include "llmgate/audit.hpp"
#include "llmgate/gateway_config.hpp"
#include "llmgate/guardrails.hpp"
#include "llmgate/model_backend.hpp"
#include "llmgate/policy_store.hpp"

namespace llmgate {

/// The HTTP service: request admission (authenticate, authorize, rate,
/// sanitize, detector scan) in a fixed order ahead of the agent pipeline,
/// plus admin endpoints and health. Model output is never evaluated or
/// executed here; delivered text is encoded bytes only.
class Gateway {
public:
    explicit Gateway(GatewayConfig cfg, Clock clock = system_clock())
        : cfg_(std::move(cfg)),
          clock_(std::move(clock)),
          access_(cfg_.key_store_path, clock_),
          policies_(clock_),
          audit_(cfg_.audit_path, clock_),
          alerts_(cfg_.alert_rules),
          incidents_(&audit_, clock_),
          detectors_(compile_rules(cfg_.detector_rules)) {
        for (const Role& r : cfg_.extra_roles) access_.define_role(r);
        build_backends();
        bootstrap_keys();
        snapshot_ = policies_.snapshot();
        pipeline_cfg_.max_output_retries = cfg_.pipeline.max_output_retries;
        pipeline_cfg_.retrieval_k = cfg_.pipeline.retrieval_k;
        pipeline_cfg_.validation_timeout_ms = cfg_.pipeline.validation_timeout_ms;
        pipeline_cfg_.generation_timeout_ms = cfg_.pipeline.generation_timeout_ms;
        pipeline_cfg_.encoding_profile = cfg_.pipeline.encoding_profile;
        pipeline_cfg_.security_backend = backend(cfg_.pipeline.security_backend);
        pipeline_cfg_.business_backend = backend(cfg_.pipeline.business_backend);
        pipeline_cfg_.clock = clock_;
        pipeline_cfg_.output_detectors = &detectors_;
        install_routes();
    }

    ~Gateway() { stop(); }

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    /// Binds and serves on a background thread. Returns once the listener
    /// is accepting connections.
    void start() {
        if (running_) return;
        if (cfg_.listen_port == 0) {
            port_ = server_.bind_to_any_port(cfg_.listen_host);
            if (port_ < 0) throw Error("gateway: failed to bind " + cfg_.listen_host);
        } else {
            if (!server_.bind_to_port(cfg_.listen_host, cfg_.listen_port))
                throw Error("gateway: failed to bind " + cfg_.listen_host + ":" +
                            std::to_string(cfg_.listen_port));
            port_ = cfg_.listen_port;
        }
        running_ = true;
        serve_thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();

        AuditEvent e;
        e.category = AuditCategory::config;
        e.severity = AuditSeverity::info;
        e.payload_digest = cfg_.fingerprint;
        e.redacted_excerpt = "startup, config fingerprint " + cfg_.fingerprint.substr(0, 16);
        audit_.record(std::move(e));

        if (cfg_.alert_tick_secs > 0) {
            ticker_thread_ = std::thread([this] { ticker_loop(); });
        }
    }

    void stop() {
        if (!running_) return;
        {
            std::lock_guard lock(ticker_mutex_);
            running_ = false;
        }
        ticker_cv_.notify_all();
        server_.stop();
        if (serve_thread_.joinable()) serve_thread_.join();
        if (ticker_thread_.joinable()) ticker_thread_.join();
        try {
            AuditEvent e;
            e.category = AuditCategory::admin;
            e.severity = AuditSeverity::info;
            e.payload_digest = sha256_hex("shutdown");
            e.redacted_excerpt = "shutdown";
            audit_.record(std::move(e));
        } catch (const StorageError&) {
            // nothing left to refuse at shutdown
        }
    }

    int port() const { return port_; }
    std::string base_url() const {
        return "http://" + cfg_.listen_host + ":" + std::to_string(port_);
    }

    const GatewayConfig& config() const { return cfg_; }
    AccessController& access() { return access_; }
    PolicyStore& policies() { return policies_; }
    AuditLog& audit_log() { return audit_; }
    IncidentManager& incidents() { return incidents_; }

    BackendPtr backend(const std::string& name) const {
        for (const auto& [n, b] : backends_)
            if (n == name) return b;
        throw Error("unknown backend profile '" + name + "'");
    }

    /// Credentials issued on first start when the key store was empty.
    const std::optional<std::pair<std::string, std::string>>& bootstrap_key() const {
        return bootstrap_key_;
    }

    void refresh_snapshot() {
        std::lock_guard lock(snapshot_mutex_);
        snapshot_ = policies_.snapshot();
    }

    SnapshotPtr current_snapshot() const {
        std::lock_guard lock(snapshot_mutex_);
        return snapshot_;
    }

    /// On-demand alert pass: fires rules, posts the webhook, opens incidents.
    /// Serialized against the periodic ticker.
    std::vector<FiredAlert> evaluate_alerts_now() {
        std::lock_guard lock(alert_mutex_);
        auto fired = alerts_.evaluate_alerts(audit_, clock_());
        for (const FiredAlert& a : fired) {
            std::cerr << "[llmgate] alert " << a.rule_id << " fired, count=" << a.count
                      << "\n";
            incidents_.open_incident(a);
            post_webhook(a);
        }
        return fired;
    }

private:
    void build_backends() {
        for (const BackendConfig& b : cfg_.backends)
            backends_.emplace_back(b.descriptor.name, make_backend(b.descriptor,
                                                                   b.default_response));
        for (const ScriptedRuleConfig& r : cfg_.scripted_rules) {
            auto* scripted = dynamic_cast<ScriptedBackend*>(backend(r.backend).get());
            if (scripted == nullptr) throw ConfigError("backend '" + r.backend +
                                                       "' is not scripted");
            if (r.failure != ScriptedFailure::none) {
                scripted->register_failure(r.pattern, r.failure, r.position, r.kind);
            } else {
                scripted->register_rule(r.pattern, r.response, r.position, r.kind,
                                        r.delay_ms);
            }
        }
    }

    void bootstrap_keys() {
        if (cfg_.bootstrap_principal.empty() || access_.key_count() > 0) return;
        access_.upsert_principal(cfg_.bootstrap_principal, cfg_.bootstrap_principal,
                                 {"admin"});
        bootstrap_key_ = access_.issue_key(cfg_.bootstrap_principal);
        AuditEvent e;
        e.category = AuditCategory::admin;
        e.severity = AuditSeverity::info;
        e.principal_id = cfg_.bootstrap_principal;
        e.payload_digest = sha256_hex(bootstrap_key_->first);
        e.redacted_excerpt = "bootstrap key " + bootstrap_key_->first + " issued";
        audit_.record(std::move(e));
    }

    // ---- shared handler helpers ----

    struct InflightGuard {
        std::atomic<int>& counter;
        explicit InflightGuard(std::atomic<int>& c) : counter(c) { counter.fetch_add(1); }
        ~InflightGuard() { counter.fetch_sub(1); }
    };

    static void json_reply(httplib::Response& res, int status, const nlohmann::json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    void audit_simple(AuditCategory cat, AuditSeverity sev, const std::string& trace_id,
                      const std::string& principal, const std::string& digest_source,
                      const std::string& excerpt, std::set<RiskId> risks = {}) {
        AuditEvent e;
        e.category = cat;
        e.severity = sev;
        e.trace_id = trace_id;
        e.principal_id = principal;
        e.payload_digest = sha256_hex(digest_source);
        e.redacted_excerpt = excerpt;
        e.risk_tags = std::move(risks);
        audit_.record(std::move(e));
    }

    // Authenticates and authorizes; on failure writes the response and
    // returns nullopt. The 401 body is identical for every failure cause.
    std::optional<Principal> admit_principal(const httplib::Request& req,
                                             httplib::Response& res,
                                             const std::string& trace_id,
                                             const std::string& action) {
        const std::string secret = req.get_header_value("X-Api-Key");
        if (secret.empty()) {
            audit_simple(AuditCategory::auth, AuditSeverity::warn, trace_id, "", "",
                         "auth failed: missing_key");
            json_reply(res, 401, {{"error", AuthError::kExternalMessage},
                                  {"trace_id", trace_id}});
            return std::nullopt;
        }
        Principal principal;
        try {
            principal = access_.authenticate(secret, clock_());
        } catch (const AuthError& e) {
            audit_simple(AuditCategory::auth, AuditSeverity::warn, trace_id, "", "",
                         "auth failed: " + auth_failure_cause_str(e.cause()));
            json_reply(res, 401, {{"error", AuthError::kExternalMessage},
                                  {"trace_id", trace_id}});
            return std::nullopt;
        }
        if (!access_.authorize(principal, action)) {
            audit_simple(AuditCategory::auth, AuditSeverity::warn, trace_id,
                         principal.principal_id, "",
                         "authorization denied: " + action);
            json_reply(res, 403, {{"error", "permission denied: " + action},
                                  {"trace_id", trace_id}});
            return std::nullopt;
        }
        audit_simple(AuditCategory::auth, AuditSeverity::info, trace_id,
                     principal.principal_id, "", "authenticated, action " + action);
        return principal;
    }

    void install_routes() {
        server_.set_payload_max_length(cfg_.sanitization.max_chars * 4 + 65536);

        server_.Get("/v1/healthz", [this](const httplib::Request&, httplib::Response& res) {
            // Health is unauthenticated and exempt from audit.
            json_reply(res, 200,
                       {{"status", "ok"},
                        {"config_fingerprint", cfg_.fingerprint},
                        {"policy_snapshot_id", current_snapshot()->snapshot_id()}});
        });

        server_.Post("/v1/chat", [this](const httplib::Request& req, httplib::Response& res) {
            handle_chat(req, res);
        });

        server_.Post("/v1/admin/policies",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         handle_policy_upload(req, res);
                     });
        server_.Get("/v1/admin/policies",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        handle_policy_list(req, res);
                    });
        server_.Get("/v1/admin/audit",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        handle_audit_query(req, res);
                    });
        server_.Post("/v1/admin/keys",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         handle_key_issue(req, res);
                     });
        server_.Delete("/v1/admin/keys/:key_id",
                       [this](const httplib::Request& req, httplib::Response& res) {
                           handle_key_revoke(req, res);
                       });
    }

    void handle_chat(const httplib::Request& req, httplib::Response& res) {
        const std::string trace_id = "t" + random_hex(8);
        try {
            if (inflight_.load() >= cfg_.max_concurrent) {
                audit_simple(AuditCategory::rate, AuditSeverity::warn, trace_id, "", "",
                             "concurrency cap reached", {RiskId::LLM04});
                res.set_header("Retry-After", "1");
                json_reply(res, 429, {{"error", "too many concurrent requests"},
                                      {"trace_id", trace_id}});
                return;
            }
            InflightGuard guard(inflight_);

            auto principal = admit_principal(req, res, trace_id, "chat");
            if (!principal) return;

            auto rate = rate_limiter_.admit(principal->principal_id, cfg_.rate_limits,
                                            clock_());
            if (!rate.allowed) {
                audit_simple(AuditCategory::rate, AuditSeverity::warn, trace_id,
                             principal->principal_id, "",
                             "rate limited, retry_after_ms=" +
                                 std::to_string(rate.retry_after_ms),
                             {RiskId::LLM04});
                audit_simple(AuditCategory::delivery, AuditSeverity::warn, trace_id,
                             principal->principal_id, "", "refused: rate limited");
                res.set_header("Retry-After",
                               std::to_string((rate.retry_after_ms + 999) / 1000));
                json_reply(res, 429,
                           {{"error", "rate limit exceeded"},
                            {"retry_after_ms", rate.retry_after_ms},
                            {"trace_id", trace_id}});
                return;
            }

            nlohmann::json body;
            try {
                body = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception&) {
                json_reply(res, 400, {{"error", "malformed JSON body"},
                                      {"trace_id", trace_id}});
                return;
            }
            if (!body.contains("message") || !body["message"].is_string()) {
                json_reply(res, 400, {{"error", "body must be {\"message\": string}"},
                                      {"trace_id", trace_id}});
                return;
            }
            const std::string raw_message = body["message"].get<std::string>();
            if (trim(raw_message).empty()) {
                json_reply(res, 400, {{"error", "message must be non-empty"},
                                      {"trace_id", trace_id}});
                return;
            }

            std::string message;
            try {
                message = sanitize_input(raw_message, cfg_.sanitization);
            } catch (const OversizeInput& e) {
                audit_simple(AuditCategory::input_verdict, AuditSeverity::warn, trace_id,
                             principal->principal_id, raw_message,
                             "input rejected: oversize " + std::to_string(e.actual) + ">" +
                                 std::to_string(e.limit),
                             {RiskId::LLM04});
                audit_simple(AuditCategory::delivery, AuditSeverity::warn, trace_id,
                             principal->principal_id, "", "refused: oversize input");
                json_reply(res, 413, {{"error", e.what()}, {"trace_id", trace_id}});
                return;
            } catch (const FloodPattern& e) {
                audit_simple(AuditCategory::input_verdict, AuditSeverity::warn, trace_id,
                             principal->principal_id, raw_message,
                             "input rejected: flood pattern run=" +
                                 std::to_string(e.run_length),
                             {RiskId::LLM04});
                audit_simple(AuditCategory::delivery, AuditSeverity::warn, trace_id,
                             principal->principal_id, "", "refused: flood pattern");
                json_reply(res, 422, {{"error", e.what()}, {"trace_id", trace_id}});
                return;
            }

            auto findings = scan(message, detectors_);
            for (const Finding& f : findings) {
                if (f.severity != DetectorSeverity::block) continue;
                audit_simple(AuditCategory::input_verdict, AuditSeverity::warn, trace_id,
                             principal->principal_id, message,
                             "input blocked by detector " + f.rule_name + ": " +
                                 f.redacted_excerpt,
                             {f.risk_id});
                audit_simple(AuditCategory::delivery, AuditSeverity::warn, trace_id,
                             principal->principal_id, "",
                             "refused: detector " + f.rule_name);
                json_reply(res, 422,
                           {{"error", "input blocked by policy detector"},
                            {"rule", f.rule_name},
                            {"risk", risk_id_str(f.risk_id)},
                            {"trace_id", trace_id}});
                return;
            }

            UserPrompt prompt;
            prompt.text = message;
            prompt.principal_id = principal->principal_id;
            prompt.received_at = clock_();
            prompt.trace_id = trace_id;

            SnapshotPtr snap = current_snapshot();
            Commander commander(pipeline_cfg_, snap, snap, &audit_);
            auto [outcome, trace] = commander.run_pipeline(prompt, findings);

            nlohmann::json reply;
            reply["status"] = outcome_kind_str(outcome.kind);
            reply["attempts"] = outcome.attempts;
            reply["trace_id"] = trace_id;
            if (outcome.kind == OutcomeKind::answered) {
                reply["answer"] = *outcome.answer;
            } else {
                nlohmann::json violations = nlohmann::json::array();
                for (const Violation& v : outcome.violations)
                    violations.push_back({{"doc", v.doc_id},
                                          {"article", v.article_no},
                                          {"excerpt", v.excerpt}});
                if (violations.empty())
                    violations.push_back(
                        {{"doc", ""}, {"article", 0}, {"excerpt", outcome.rationale}});
                reply["violations"] = violations;
            }
            json_reply(res, 200, reply);
        } catch (const StorageError& e) {
            // Never answer unaudited.
            json_reply(res, 503, {{"error", "audit storage unavailable"},
                                  {"trace_id", trace_id}});
        } catch (const std::exception& e) {
            json_reply(res, 500, {{"error", e.what()}, {"trace_id", trace_id}});
        }
    }

    void handle_policy_upload(const httplib::Request& req, httplib::Response& res) {
        const std::string trace_id = "t" + random_hex(8);
        try {
            auto principal = admit_principal(req, res, trace_id, "policy_admin");
            if (!principal) return;
            nlohmann::json body;
            try {
                body = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception&) {
                json_reply(res, 400, {{"error", "malformed JSON body"},
                                      {"trace_id", trace_id}});
                return;
            }
            if (!body.contains("title") || !body["title"].is_string() ||
                !body.contains("text") || !body["text"].is_string()) {
                json_reply(res, 400,
                           {{"error", "body must be {\"title\": string, \"text\": string}"},
                            {"trace_id", trace_id}});
                return;
            }
            std::string doc_id;
            try {
                doc_id = policies_.ingest_document(body["title"].get<std::string>(),
                                                   body["text"].get<std::string>());
            } catch (const Error& e) {
                json_reply(res, 400, {{"error", e.what()}, {"trace_id", trace_id}});
                return;
            }
            refresh_snapshot();
            SnapshotPtr snap = current_snapshot();
            int version = 0;
            std::size_t article_count = 0;
            for (const auto& d : snap->documents()) {
                if (d->doc_id == doc_id) {
                    version = d->version;
                    article_count = d->articles.size();
                }
            }
            audit_simple(AuditCategory::config, AuditSeverity::info, trace_id,
                         principal->principal_id, doc_id,
                         "policy '" + doc_id + "' v" + std::to_string(version) +
                             " ingested, snapshot " + snap->snapshot_id());
            json_reply(res, 200,
                       {{"doc_id", doc_id},
                        {"version", version},
                        {"articles", article_count},
                        {"snapshot_id", snap->snapshot_id()},
                        {"trace_id", trace_id}});
        } catch (const StorageError&) {
            json_reply(res, 503, {{"error", "audit storage unavailable"},
                                  {"trace_id", trace_id}});
        } catch (const std::exception& e) {
            json_reply(res, 500, {{"error", e.what()}, {"trace_id", trace_id}});
        }
    }

    void handle_policy_list(const httplib::Request& req, httplib::Response& res) {
        const std::string trace_id = "t" + random_hex(8);
        try {
            auto principal = admit_principal(req, res, trace_id, "policy_admin");
            if (!principal) return;
            SnapshotPtr snap = current_snapshot();
            nlohmann::json docs = nlohmann::json::array();
            for (const auto& d : snap->documents())
                docs.push_back({{"doc_id", d->doc_id},
                                {"title", d->title},
                                {"version", d->version},
                                {"articles", d->articles.size()}});
            json_reply(res, 200, {{"snapshot_id", snap->snapshot_id()},
                                  {"documents", docs},
                                  {"trace_id", trace_id}});
        } catch (const StorageError&) {
            json_reply(res, 503, {{"error", "audit storage unavailable"},
                                  {"trace_id", trace_id}});
        }
    }

    void handle_audit_query(const httplib::Request& req, httplib::Response& res) {
        const std::string trace_id = "t" + random_hex(8);
        try {
            auto principal = admit_principal(req, res, trace_id, "audit_read");
            if (!principal) return;
            AuditFilter filter;
            try {
                if (req.has_param("category"))
                    filter.category = parse_audit_category(req.get_param_value("category"));
                if (req.has_param("risk"))
                    filter.risk = parse_risk_id(req.get_param_value("risk"));
                if (req.has_param("from"))
                    filter.from = std::stoll(req.get_param_value("from"));
                if (req.has_param("to")) filter.to = std::stoll(req.get_param_value("to"));
                if (req.has_param("limit"))
                    filter.limit = std::stoul(req.get_param_value("limit"));
            } catch (const std::exception& e) {
                json_reply(res, 400, {{"error", e.what()}, {"trace_id", trace_id}});
                return;
            }
            nlohmann::json events = nlohmann::json::array();
            for (const AuditEvent& e : audit_.query(filter))
                events.push_back(audit_event_to_json(e));
            json_reply(res, 200, {{"events", events}, {"trace_id", trace_id}});
        } catch (const StorageError&) {
            json_reply(res, 503, {{"error", "audit storage unavailable"},
                                  {"trace_id", trace_id}});
        }
    }

    void handle_key_issue(const httplib::Request& req, httplib::Response& res) {
        const std::string trace_id = "t" + random_hex(8);
        try {
            auto principal = admit_principal(req, res, trace_id, "key_admin");
            if (!principal) return;
            nlohmann::json body;
            try {
                body = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception&) {
                json_reply(res, 400, {{"error", "malformed JSON body"},
                                      {"trace_id", trace_id}});
                return;
            }
            if (!body.contains("principal") || !body["principal"].is_string()) {
                json_reply(res, 400, {{"error", "body must name a principal"},
                                      {"trace_id", trace_id}});
                return;
            }
            const std::string who = body["principal"].get<std::string>();
            std::set<std::string> roles;
            if (body.contains("roles"))
                for (const auto& r : body["roles"]) roles.insert(r.get<std::string>());
            try {
                access_.upsert_principal(who, who, roles);
                auto [key_id, secret] = access_.issue_key(who);
                audit_simple(AuditCategory::admin, AuditSeverity::info, trace_id,
                             principal->principal_id, key_id,
                             "key " + key_id + " issued for " + who);
                json_reply(res, 200, {{"key_id", key_id},
                                      {"secret", secret},
                                      {"principal_id", who},
                                      {"trace_id", trace_id}});
            } catch (const Error& e) {
                json_reply(res, 400, {{"error", e.what()}, {"trace_id", trace_id}});
            }
        } catch (const StorageError&) {
            json_reply(res, 503, {{"error", "audit storage unavailable"},
                                  {"trace_id", trace_id}});
        }
    }

    void handle_key_revoke(const httplib::Request& req, httplib::Response& res) {
        const std::string trace_id = "t" + random_hex(8);
        try {
            auto principal = admit_principal(req, res, trace_id, "key_admin");
            if (!principal) return;
            const std::string key_id = req.path_params.at("key_id");
            try {
                access_.revoke_key(key_id);
            } catch (const UnknownKey& e) {
                json_reply(res, 404, {{"error", e.what()}, {"trace_id", trace_id}});
                return;
            }
            audit_simple(AuditCategory::admin, AuditSeverity::info, trace_id,
                         principal->principal_id, key_id, "key " + key_id + " revoked");
            json_reply(res, 200, {{"revoked", key_id}, {"trace_id", trace_id}});
        } catch (const StorageError&) {
            json_reply(res, 503, {{"error", "audit storage unavailable"},
                                  {"trace_id", trace_id}});
        }
    }

    void post_webhook(const FiredAlert& alert) {
        if (cfg_.alert_webhook.empty()) return;
        try {
            auto slash = cfg_.alert_webhook.find('/', 7);
            std::string base = slash == std::string::npos ? cfg_.alert_webhook
                                                          : cfg_.alert_webhook.substr(0, slash);
            std::string path = slash == std::string::npos ? "/"
                                                          : cfg_.alert_webhook.substr(slash);
            httplib::Client cli(base);
            cli.set_connection_timeout(2, 0);
            cli.set_read_timeout(2, 0);
            cli.Post(path, fired_alert_to_json(alert).dump(), "application/json");
        } catch (const std::exception& e) {
            std::cerr << "[llmgate] alert webhook failed: " << e.what() << "\n";
        }
    }

    void ticker_loop() {
        std::unique_lock lock(ticker_mutex_);
        while (running_) {
            ticker_cv_.wait_for(lock, std::chrono::seconds(cfg_.alert_tick_secs),
                                [this] { return !running_; });
            if (!running_) break;
            lock.unlock();
            try {
                evaluate_alerts_now();
            } catch (const std::exception& e) {
                std::cerr << "[llmgate] alert evaluation failed: " << e.what() << "\n";
            }
            lock.lock();
        }
    }

    GatewayConfig cfg_;
    Clock clock_;
    AccessController access_;
    PolicyStore policies_;
    AuditLog audit_;
    AlertEngine alerts_;
    IncidentManager incidents_;
    std::vector<CompiledDetector> detectors_;
    RateLimiter rate_limiter_;
    std::vector<std::pair<std::string, BackendPtr>> backends_;
    PipelineConfig pipeline_cfg_;
    std::optional<std::pair<std::string, std::string>> bootstrap_key_;

    mutable std::mutex snapshot_mutex_;
    SnapshotPtr snapshot_;

    httplib::Server server_;
    std::thread serve_thread_;
    std::thread ticker_thread_;
    std::atomic<bool> running_{false};
    std::atomic<int> inflight_{0};
    int port_ = 0;

    std::mutex ticker_mutex_;
    std::condition_variable ticker_cv_;
    std::mutex alert_mutex_;
};

}  // namespace llmgate
