#pragma once

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "llmgate/common.hpp"
#include "llmgate/risk.hpp"

namespace llmgate {

class StorageError : public Error {
public:
    using Error::Error;
};

enum class AuditCategory {
    auth,
    rate,
    input_verdict,
    output_verdict,
    generation,
    delivery,
    config,
    admin,
};

inline std::string audit_category_str(AuditCategory c) {
    switch (c) {
        case AuditCategory::auth: return "auth";
        case AuditCategory::rate: return "rate";
        case AuditCategory::input_verdict: return "input_verdict";
        case AuditCategory::output_verdict: return "output_verdict";
        case AuditCategory::generation: return "generation";
        case AuditCategory::delivery: return "delivery";
        case AuditCategory::config: return "config";
        case AuditCategory::admin: return "admin";
    }
    throw Error("invalid AuditCategory");
}

inline AuditCategory parse_audit_category(std::string_view s) {
    for (auto c : {AuditCategory::auth, AuditCategory::rate, AuditCategory::input_verdict,
                   AuditCategory::output_verdict, AuditCategory::generation,
                   AuditCategory::delivery, AuditCategory::config, AuditCategory::admin})
        if (audit_category_str(c) == s) return c;
    throw Error("unknown audit category: " + std::string(s));
}

enum class AuditSeverity { info, warn, critical };

inline std::string audit_severity_str(AuditSeverity s) {
    switch (s) {
        case AuditSeverity::info: return "info";
        case AuditSeverity::warn: return "warn";
        case AuditSeverity::critical: return "critical";
    }
    throw Error("invalid AuditSeverity");
}

/// Risk-tagged, redacted record of one decision. Raw user or model text is
/// never stored; only a digest plus a short redacted excerpt.
struct AuditEvent {
    std::uint64_t event_id = 0;  // assigned by the log, strictly increasing
    Millis at = -1;  // stamped by the log when negative
    std::string trace_id;
    std::string principal_id;
    AuditCategory category = AuditCategory::admin;
    std::set<RiskId> risk_tags;
    AuditSeverity severity = AuditSeverity::info;
    std::string payload_digest;
    std::string redacted_excerpt;  // capped at 64 chars on record
};

struct AuditFilter {
    std::optional<AuditCategory> category;
    std::optional<RiskId> risk;
    std::optional<Millis> from;  // inclusive
    std::optional<Millis> to;    // inclusive
    std::optional<std::string> principal_id;
    std::size_t limit = 1000;
};

class AuditSink {
public:
    virtual ~AuditSink() = default;
    virtual std::uint64_t record(AuditEvent event) = 0;
    virtual std::vector<AuditEvent> query(const AuditFilter& filter) const = 0;
};

inline nlohmann::json audit_event_to_json(const AuditEvent& e) {
    std::vector<std::string> tags;
    for (RiskId r : e.risk_tags) tags.push_back(risk_id_str(r));
    return {{"v", 1},
            {"event_id", e.event_id},
            {"at", e.at},
            {"trace_id", e.trace_id},
            {"principal_id", e.principal_id},
            {"category", audit_category_str(e.category)},
            {"risk_tags", tags},
            {"severity", audit_severity_str(e.severity)},
            {"payload_digest", e.payload_digest},
            {"redacted_excerpt", e.redacted_excerpt}};
}

inline AuditEvent audit_event_from_json(const nlohmann::json& j) {
    AuditEvent e;
    e.event_id = j.at("event_id").get<std::uint64_t>();
    e.at = j.at("at").get<Millis>();
    e.trace_id = j.at("trace_id").get<std::string>();
    e.principal_id = j.at("principal_id").get<std::string>();
    e.category = parse_audit_category(j.at("category").get<std::string>());
    for (const auto& t : j.at("risk_tags")) e.risk_tags.insert(parse_risk_id(t.get<std::string>()));
    const std::string sev = j.at("severity").get<std::string>();
    e.severity = sev == "critical" ? AuditSeverity::critical
                 : sev == "warn"   ? AuditSeverity::warn
                                   : AuditSeverity::info;
    e.payload_digest = j.at("payload_digest").get<std::string>();
    e.redacted_excerpt = j.at("redacted_excerpt").get<std::string>();
    return e;
}

/// Append-only event log: a single serialized appender assigns strictly
/// increasing ids and flushes each line before returning (the pipeline never
/// releases a response that is not yet on disk). With an empty path the log
/// is memory-only, for tests.
class AuditLog : public AuditSink {
public:
    explicit AuditLog(std::string path = "", Clock clock = system_clock())
        : path_(std::move(path)), clock_(std::move(clock)) {
        if (!path_.empty()) load_existing();
    }

    std::uint64_t record(AuditEvent event) override {
        std::lock_guard lock(mutex_);
        event.event_id = next_id_++;
        if (event.at < 0) event.at = clock_();
        if (event.redacted_excerpt.size() > 64)
            event.redacted_excerpt.resize(64);
        if (!path_.empty()) {
            std::ofstream out(path_, std::ios::app);
            if (!out) throw StorageError("audit log: cannot open " + path_);
            out << audit_event_to_json(event).dump() << "\n";
            out.flush();
            if (!out) throw StorageError("audit log: write failed for " + path_);
        }
        events_.push_back(std::move(event));
        return events_.back().event_id;
    }

    std::vector<AuditEvent> query(const AuditFilter& filter) const override {
        std::lock_guard lock(mutex_);
        std::vector<AuditEvent> out;
        for (const AuditEvent& e : events_) {
            if (filter.category && e.category != *filter.category) continue;
            if (filter.risk && !e.risk_tags.count(*filter.risk)) continue;
            if (filter.from && e.at < *filter.from) continue;
            if (filter.to && e.at > *filter.to) continue;
            if (filter.principal_id && e.principal_id != *filter.principal_id) continue;
            out.push_back(e);
            if (out.size() >= filter.limit) break;
        }
        return out;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return events_.size();
    }

private:
    void load_existing() {
        std::ifstream in(path_);
        if (!in) return;
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            events_.push_back(audit_event_from_json(nlohmann::json::parse(line)));
            next_id_ = std::max(next_id_, events_.back().event_id + 1);
        }
    }

    std::string path_;
    Clock clock_;
    mutable std::mutex mutex_;
    std::vector<AuditEvent> events_;  // ascending event_id
    std::uint64_t next_id_ = 1;
};

struct AlertRule {
    std::string rule_id;
    std::optional<AuditCategory> category;
    std::optional<RiskId> risk;
    std::size_t threshold = 3;
    std::int64_t window_secs = 60;
};

struct FiredAlert {
    std::string rule_id;
    Millis at = 0;
    std::size_t count = 0;
    std::vector<std::uint64_t> event_ids;
    std::optional<RiskId> dominant_risk;
};

inline nlohmann::json fired_alert_to_json(const FiredAlert& a) {
    return {{"rule_id", a.rule_id},
            {"at", a.at},
            {"count", a.count},
            {"event_ids", a.event_ids},
            {"dominant_risk", a.dominant_risk ? risk_id_str(*a.dominant_risk) : ""}};
}

/// Sliding-window threshold rules over the event log. A rule fires when the
/// count of matching events with at in (now - window, now] reaches its
/// threshold, and does not refire for the identical event set.
class AlertEngine {
public:
    explicit AlertEngine(std::vector<AlertRule> rules) : rules_(std::move(rules)) {}

    std::vector<FiredAlert> evaluate_alerts(const AuditSink& log, Millis now) {
        std::vector<FiredAlert> fired;
        for (const AlertRule& rule : rules_) {
            AuditFilter f;
            f.category = rule.category;
            f.risk = rule.risk;
            f.limit = std::numeric_limits<std::size_t>::max();
            std::vector<std::uint64_t> ids;
            std::map<RiskId, std::size_t> risk_counts;
            for (const AuditEvent& e : log.query(f)) {
                if (e.at <= now - rule.window_secs * 1000 || e.at > now) continue;
                ids.push_back(e.event_id);
                for (RiskId r : e.risk_tags) risk_counts[r] += 1;
            }
            if (ids.size() < rule.threshold) continue;
            std::string set_key;
            for (auto id : ids) set_key += std::to_string(id) + ",";
            auto it = last_fired_.find(rule.rule_id);
            if (it != last_fired_.end() && it->second == set_key) continue;
            last_fired_[rule.rule_id] = set_key;
            FiredAlert a;
            a.rule_id = rule.rule_id;
            a.at = now;
            a.count = ids.size();
            a.event_ids = std::move(ids);
            std::size_t best = 0;
            for (const auto& [risk, n] : risk_counts) {
                if (n > best) {
                    best = n;
                    a.dominant_risk = risk;
                }
            }
            if (!a.dominant_risk && rule.risk) a.dominant_risk = rule.risk;
            fired.push_back(std::move(a));
        }
        return fired;
    }

    const std::vector<AlertRule>& rules() const { return rules_; }

private:
    std::vector<AlertRule> rules_;
    std::map<std::string, std::string> last_fired_;  // rule_id -> event id set key
};

enum class IncidentStatus { open, acknowledged, closed };

struct Incident {
    std::string incident_id;
    Millis opened_at = 0;
    FiredAlert triggering_alert;
    std::vector<std::uint64_t> events;
    std::vector<std::string> action_plan;
    IncidentStatus status = IncidentStatus::open;
};

/// Per-risk response checklists handed to operators when an alert opens an
/// incident.
inline std::vector<std::string> action_plan_for(std::optional<RiskId> risk) {
    if (!risk) {
        return {"Review the triggering events in the audit trail",
                "Identify the affected principals and rate-limit or suspend them",
                "Document findings and close the incident"};
    }
    switch (*risk) {
        case RiskId::LLM01:
            return {"Suspend or revoke the offending principal's API keys",
                    "Snapshot the active policy version for the investigation",
                    "Review the rejected prompts in the audit trail",
                    "Tighten prompt-injection detector rules"};
        case RiskId::LLM02:
            return {"Verify output encoding is enabled for the delivery channel",
                    "Review recent delivered answers via their digests",
                    "Add detector rules for the offending output shape"};
        case RiskId::LLM04:
            return {"Lower rate-limit capacity for the offending principal",
                    "Reduce max input size and repeated-token limits",
                    "Consider a temporary global rate limit"};
        case RiskId::LLM05:
            return {"Verify the backend descriptor pins against the advertised fingerprint",
                    "Re-check the config fingerprint against the approved baseline",
                    "Freeze backend profile changes until cleared"};
        case RiskId::LLM06:
            return {"Review output-verdict rejections for the window",
                    "Confirm no raw text was persisted outside digests",
                    "Rotate any credentials referenced by the findings",
                    "Tighten sensitive-data detector rules"};
        case RiskId::LLM08:
            return {"Confirm the gateway executes no model output",
                    "Review business-agent prompt scope",
                    "Restrict the principal's permitted actions"};
        case RiskId::LLM09:
            return {"Flag answers for human review before reuse",
                    "Review output-validation rejection rates",
                    "Lower the regeneration retry budget if abused"};
        default:
            return {"Review the triggering events in the audit trail",
                    "Identify the affected principals and rate-limit or suspend them",
                    "Document findings and close the incident"};
    }
}

/// Incident lifecycle: open -> acknowledged -> closed, acknowledgement
/// idempotent, closing an unacknowledged incident allowed. Transitions are
/// recorded as admin events when a sink is attached.
class IncidentManager {
public:
    explicit IncidentManager(AuditSink* sink = nullptr, Clock clock = system_clock())
        : sink_(sink), clock_(std::move(clock)) {}

    Incident open_incident(const FiredAlert& alert) {
        std::lock_guard lock(mutex_);
        Incident inc;
        inc.incident_id = "inc" + std::to_string(++seq_);
        inc.opened_at = clock_();
        inc.triggering_alert = alert;
        inc.events = alert.event_ids;
        inc.action_plan = action_plan_for(alert.dominant_risk);
        inc.status = IncidentStatus::open;
        incidents_[inc.incident_id] = inc;
        record_transition(inc, "opened");
        return inc;
    }

    Incident acknowledge(const std::string& incident_id) {
        std::lock_guard lock(mutex_);
        Incident& inc = get(incident_id);
        if (inc.status == IncidentStatus::closed)
            throw Error("incident " + incident_id + " is closed");
        if (inc.status != IncidentStatus::acknowledged) {
            inc.status = IncidentStatus::acknowledged;
            record_transition(inc, "acknowledged");
        }
        return inc;
    }

    Incident close(const std::string& incident_id) {
        std::lock_guard lock(mutex_);
        Incident& inc = get(incident_id);
        if (inc.status != IncidentStatus::closed) {
            inc.status = IncidentStatus::closed;
            record_transition(inc, "closed");
        }
        return inc;
    }

    std::optional<Incident> find(const std::string& incident_id) const {
        std::lock_guard lock(mutex_);
        auto it = incidents_.find(incident_id);
        if (it == incidents_.end()) return std::nullopt;
        return it->second;
    }

private:
    Incident& get(const std::string& incident_id) {
        auto it = incidents_.find(incident_id);
        if (it == incidents_.end()) throw Error("unknown incident: " + incident_id);
        return it->second;
    }

    void record_transition(const Incident& inc, const std::string& what) {
        if (sink_ == nullptr) return;
        AuditEvent e;
        e.category = AuditCategory::admin;
        e.severity = AuditSeverity::warn;
        if (inc.triggering_alert.dominant_risk)
            e.risk_tags.insert(*inc.triggering_alert.dominant_risk);
        e.payload_digest = sha256_hex(inc.incident_id);
        e.redacted_excerpt = "incident " + inc.incident_id + " " + what;
        sink_->record(std::move(e));
    }

    AuditSink* sink_;
    Clock clock_;
    mutable std::mutex mutex_;
    std::map<std::string, Incident> incidents_;
    std::uint64_t seq_ = 0;
};

}  // namespace llmgate
