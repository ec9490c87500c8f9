#pragma once

#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "llmgate/audit.hpp"
#include "llmgate/common.hpp"
#include "llmgate/guardrails.hpp"
#include "llmgate/model_backend.hpp"
#include "llmgate/policy_store.hpp"

namespace llmgate {

class GenerationError : public Error {
public:
    using Error::Error;
};

struct UserPrompt {
    std::string text;  // already passed sanitize_input
    std::string principal_id;
    Millis received_at = 0;
    std::string trace_id;
};

enum class Decision { approved, rejected };

struct Violation {
    std::string doc_id;    // empty until resolved against retrieved context
    int article_no = 0;
    std::string excerpt;   // article text excerpt, filled on resolution
};

/// The security agent's decision, parsed from the fixed verdict sentence
/// format. Unparseable text is itself a rejected verdict, never an error.
struct Verdict {
    Decision decision = Decision::rejected;
    std::vector<Violation> violations;
    std::string rationale;
    std::string raw_text;
    bool ambiguous_reference = false;
};

inline constexpr const char* kUnparseableVerdict = "unparseable verdict";

/// Total function over arbitrary model text. Case-insensitive scan for
/// "<subject> is approved" / "<subject> is rejected" where the subject is
/// one of request/response/answer/output/message; a rejection must cite at
/// least one "article <N>" or it degrades to an unparseable (still rejected)
/// verdict. The earliest matching phrase wins when both appear.
inline Verdict parse_verdict(const std::string& text) {
    Verdict v;
    v.raw_text = text;
    const std::string lower = to_lower(text);

    static const std::vector<std::string> subjects = {"request", "response", "answer",
                                                      "output", "message"};
    auto earliest = [&](const std::string& verb) {
        std::size_t best = std::string::npos;
        for (const std::string& s : subjects) {
            std::size_t p = lower.find(s + " is " + verb);
            if (p != std::string::npos && p < best) best = p;
        }
        return best;
    };
    const std::size_t approved_pos = earliest("approved");
    const std::size_t rejected_pos = earliest("rejected");

    if (rejected_pos == std::string::npos && approved_pos == std::string::npos) {
        v.decision = Decision::rejected;
        v.rationale = kUnparseableVerdict;
        return v;
    }
    if (approved_pos < rejected_pos) {
        v.decision = Decision::approved;
        return v;
    }

    static const std::regex article_ref(R"(article\s*#?\s*(\d+))", std::regex::icase);
    std::set<int> seen;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), article_ref);
         it != std::sregex_iterator(); ++it) {
        int no = 0;
        try {
            no = std::stoi((*it)[1].str());
        } catch (const std::exception&) {
            continue;
        }
        if (seen.insert(no).second) v.violations.push_back(Violation{"", no, ""});
    }
    v.decision = Decision::rejected;
    if (v.violations.empty()) {
        v.rationale = kUnparseableVerdict;
    } else {
        std::string cited;
        for (const Violation& viol : v.violations) {
            if (!cited.empty()) cited += ", ";
            cited += std::to_string(viol.article_no);
        }
        v.rationale = "violates article " + cited;
    }
    return v;
}

/// Resolves bare article numbers against the retrieved context, in rank
/// order. When articles from different documents share a number, the
/// highest-ranked document wins and the verdict is flagged ambiguous.
inline void resolve_violations(Verdict& verdict,
                               const std::vector<RetrievalResult>& retrieved) {
    for (Violation& v : verdict.violations) {
        if (!v.doc_id.empty()) continue;
        std::set<std::string> candidate_docs;
        for (const RetrievalResult& r : retrieved) {
            if (r.article.article_no != v.article_no) continue;
            candidate_docs.insert(r.article.doc_id);
            if (v.doc_id.empty()) {
                v.doc_id = r.article.doc_id;
                v.excerpt = r.article.text.size() > 160 ? r.article.text.substr(0, 157) + "..."
                                                        : r.article.text;
            }
        }
        if (candidate_docs.size() > 1) verdict.ambiguous_reference = true;
    }
}

enum class AgentRole { user, commander, security, business };

inline std::string agent_role_str(AgentRole a) {
    switch (a) {
        case AgentRole::user: return "user";
        case AgentRole::commander: return "commander";
        case AgentRole::security: return "security";
        case AgentRole::business: return "business";
    }
    throw Error("invalid AgentRole");
}

struct StepRecord {
    int step_no = 0;  // 1..9; 6-8 repeat as a group per retry
    AgentRole agent = AgentRole::commander;
    std::string summary;
    std::string input_digest;
    std::string output_digest;
    Millis at = 0;
};

enum class OutcomeKind { answered, refused_input, refused_output };

inline std::string outcome_kind_str(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::answered: return "answered";
        case OutcomeKind::refused_input: return "rejected_input";
        case OutcomeKind::refused_output: return "rejected_output";
    }
    throw Error("invalid OutcomeKind");
}

struct PipelineTrace {
    std::string trace_id;
    std::vector<StepRecord> steps;
    std::string outcome_kind;
};

struct PipelineOutcome {
    OutcomeKind kind = OutcomeKind::refused_input;
    std::optional<std::string> answer;  // encoded; present iff answered
    std::vector<Violation> violations;
    std::string rationale;
    int attempts = 0;  // business-agent generations performed
};

inline constexpr int kMaxOutputRetriesCap = 10;

struct PipelineConfig {
    int max_output_retries = 3;  // hard-capped at kMaxOutputRetriesCap
    std::size_t retrieval_k = 2;
    BackendPtr security_backend;
    BackendPtr business_backend;
    Millis validation_timeout_ms = 2'000;
    Millis generation_timeout_ms = 8'000;
    EncodingProfile encoding_profile = EncodingProfile::html;
    Millis fixed_overhead_ms = 500;
    Clock clock = system_clock();
    // When set, every candidate answer is scanned: advise findings become
    // hints for output validation, block findings veto delivery outright.
    const std::vector<CompiledDetector>* output_detectors = nullptr;
};

inline void validate_pipeline_config(const PipelineConfig& cfg) {
    if (cfg.max_output_retries < 0 || cfg.max_output_retries > kMaxOutputRetriesCap)
        throw Error("max_output_retries must be in [0, " +
                    std::to_string(kMaxOutputRetriesCap) + "]");
    if (cfg.retrieval_k < 1) throw Error("retrieval_k must be >= 1");
    if (!cfg.security_backend || !cfg.business_backend)
        throw Error("pipeline requires security and business backends");
}

namespace detail {

inline std::string format_policy_context(const std::vector<RetrievalResult>& retrieved) {
    if (retrieved.empty()) return "(no applicable policy articles)";
    std::string out;
    for (const RetrievalResult& r : retrieved) {
        if (!out.empty()) out += "\n";
        out += "Article " + std::to_string(r.article.article_no) + ": " + r.article.text;
    }
    return out;
}

inline std::string format_detector_hints(const std::vector<Finding>& findings) {
    std::string out;
    for (const Finding& f : findings) {
        if (f.severity != DetectorSeverity::advise) continue;
        if (out.empty()) out = "\nAutomated detectors flagged the request:";
        out += "\n- rule " + f.rule_name + " (" + risk_id_str(f.risk_id) + ") matched \"" +
               f.redacted_excerpt + "\"";
    }
    return out;
}

// Drops lowest-scored articles until the rendered prompt fits the backend's
// context budget. The user text and the verdict-format instructions are
// never truncated; if they alone exceed the budget the backend fails closed.
inline std::string render_within_budget(const PromptTemplate& tmpl,
                                        std::map<std::string, std::string> vars,
                                        std::vector<RetrievalResult>& retrieved,
                                        const std::string& hints,
                                        const BackendDescriptor& backend) {
    while (true) {
        vars["policy_context"] = format_policy_context(retrieved) + hints;
        std::string rendered = render_prompt(tmpl, vars);
        if (backend.max_context_tokens <= 0 ||
            approx_tokens(rendered) <= backend.max_context_tokens || retrieved.empty())
            return rendered;
        retrieved.pop_back();
    }
}

inline Verdict fail_closed(const std::string& rationale, const std::string& raw) {
    Verdict v;
    v.decision = Decision::rejected;
    v.rationale = rationale;
    v.raw_text = raw;
    return v;
}

}  // namespace detail

/// Input validation: retrieves the policy context for the prompt, renders
/// the security-input prompt, asks the security backend, and parses the
/// verdict. Any backend failure maps to a fail-closed rejection naming the
/// failure; a guard that fails open is no guard.
inline Verdict validate_input(const UserPrompt& prompt, const PolicySnapshot& snapshot,
                              const PipelineConfig& cfg,
                              const std::vector<Finding>& detector_hints = {}) {
    auto retrieved = snapshot.empty()
                         ? std::vector<RetrievalResult>{}
                         : snapshot.retrieve(prompt.text, cfg.retrieval_k);
    std::map<std::string, std::string> vars{{"user_request", prompt.text}};
    const std::string hints = detail::format_detector_hints(detector_hints);
    std::string rendered;
    try {
        rendered = detail::render_within_budget(security_input_template(), vars, retrieved,
                                                hints, cfg.security_backend->descriptor());
        ModelRequest req;
        req.user_message = rendered;
        req.temperature = 0.0;
        req.max_tokens = 256;
        ModelResponse resp = cfg.security_backend->complete(req, cfg.validation_timeout_ms);
        Verdict v = parse_verdict(resp.text);
        resolve_violations(v, retrieved);
        return v;
    } catch (const TimeoutError&) {
        return detail::fail_closed("validator timeout", rendered);
    } catch (const TransportError& e) {
        return detail::fail_closed(std::string("validator transport error: ") + e.what(), "");
    } catch (const TokenLimitError&) {
        return detail::fail_closed("validator token limit", "");
    } catch (const ConfigMismatch& e) {
        return detail::fail_closed(std::string("validator config mismatch: ") + e.what(), "");
    } catch (const StorageError&) {
        throw;  // audited elsewhere; never mask storage faults
    } catch (const Error& e) {
        return detail::fail_closed(std::string("validator failure: ") + e.what(), "");
    }
}

/// Output validation: same mechanics against the candidate answer, using
/// the security-output prompt. The original request is included as context
/// so request-relative violations stay assessable.
inline Verdict validate_output(const std::string& answer, const PolicySnapshot& snapshot,
                               const PipelineConfig& cfg,
                               const std::string& original_request = "",
                               const std::vector<Finding>& detector_hints = {}) {
    if (answer.empty()) return detail::fail_closed("empty candidate answer", "");
    auto retrieved = snapshot.empty() ? std::vector<RetrievalResult>{}
                                      : snapshot.retrieve(answer, cfg.retrieval_k);
    std::map<std::string, std::string> vars{
        {"user_request", original_request.empty() ? "(not recorded)" : original_request},
        {"candidate_response", answer}};
    const std::string hints = detail::format_detector_hints(detector_hints);
    try {
        std::string rendered = detail::render_within_budget(
            security_output_template(), vars, retrieved, hints,
            cfg.security_backend->descriptor());
        ModelRequest req;
        req.user_message = rendered;
        req.temperature = 0.0;
        req.max_tokens = 256;
        ModelResponse resp = cfg.security_backend->complete(req, cfg.validation_timeout_ms);
        Verdict v = parse_verdict(resp.text);
        resolve_violations(v, retrieved);
        return v;
    } catch (const TimeoutError&) {
        return detail::fail_closed("validator timeout", "");
    } catch (const TransportError& e) {
        return detail::fail_closed(std::string("validator transport error: ") + e.what(), "");
    } catch (const TokenLimitError&) {
        return detail::fail_closed("validator token limit", "");
    } catch (const ConfigMismatch& e) {
        return detail::fail_closed(std::string("validator config mismatch: ") + e.what(), "");
    } catch (const StorageError&) {
        throw;
    } catch (const Error& e) {
        return detail::fail_closed(std::string("validator failure: ") + e.what(), "");
    }
}

/// Business answer generation with organization context; when a previous
/// draft was rejected, the cited violations are included with an instruction
/// to avoid them. Backend failures surface as GenerationError.
inline std::string generate_answer(const UserPrompt& prompt,
                                   const PolicySnapshot& business_snapshot,
                                   const std::vector<Violation>& prior_violations,
                                   const PipelineConfig& cfg) {
    std::string context = "(no relevant documents)";
    if (!business_snapshot.empty()) {
        auto retrieved = business_snapshot.retrieve(prompt.text, cfg.retrieval_k);
        context.clear();
        for (const RetrievalResult& r : retrieved) {
            if (!context.empty()) context += "\n\n";
            context += r.article.text;
        }
    }
    std::string violations_section;
    if (!prior_violations.empty()) {
        violations_section =
            "A previous draft of your answer was rejected by the security agent because "
            "it violates these policy articles:\n";
        for (const Violation& v : prior_violations) {
            violations_section += "- article " + std::to_string(v.article_no);
            if (!v.doc_id.empty()) violations_section += " (" + v.doc_id + ")";
            if (!v.excerpt.empty()) violations_section += ": " + v.excerpt;
            violations_section += "\n";
        }
        violations_section +=
            "Generate a different answer while taking these violations into account.\n\n";
    }
    try {
        std::string rendered = render_prompt(business_answer_template(),
                                             {{"business_context", context},
                                              {"violations_section", violations_section},
                                              {"user_request", prompt.text}});
        ModelRequest req;
        req.user_message = rendered;
        req.temperature = 0.0;
        req.max_tokens = 1024;
        ModelResponse resp = cfg.business_backend->complete(req, cfg.generation_timeout_ms);
        return resp.text;
    } catch (const StorageError&) {
        throw;
    } catch (const Error& e) {
        throw GenerationError(e.what());
    }
}

/// Commander-orchestrated workflow: input validation, answer generation,
/// output validation, and a bounded regeneration loop. The commander is a
/// fixed state machine, not a model call. No failure escapes as an
/// exception except StorageError from the audit sink — a response is never
/// released unaudited.
class Commander {
public:
    Commander(PipelineConfig cfg, SnapshotPtr security_snapshot,
              SnapshotPtr business_snapshot, AuditSink* audit = nullptr)
        : cfg_(std::move(cfg)),
          security_snapshot_(std::move(security_snapshot)),
          business_snapshot_(std::move(business_snapshot)),
          audit_(audit) {
        validate_pipeline_config(cfg_);
        if (!security_snapshot_ || !business_snapshot_)
            throw Error("pipeline requires policy snapshots");
    }

    std::pair<PipelineOutcome, PipelineTrace> run_pipeline(
        const UserPrompt& prompt, const std::vector<Finding>& detector_hints = {}) const {
        PipelineTrace trace;
        trace.trace_id = prompt.trace_id;
        const Millis deadline = cfg_.clock() + budget_ms();

        add_step(trace, 1, AgentRole::user, "user prompt received", "",
                 sha256_hex(prompt.text));
        add_step(trace, 2, AgentRole::commander,
                 "dispatched to security agent for input validation",
                 sha256_hex(prompt.text), "");

        Verdict input_verdict =
            past(deadline) ? detail::fail_closed("pipeline deadline exceeded", "")
                           : validate_input(prompt, *security_snapshot_, cfg_, detector_hints);
        add_step(trace, 3, AgentRole::security, verdict_summary("input", input_verdict),
                 sha256_hex(prompt.text), sha256_hex(input_verdict.raw_text));

        if (input_verdict.decision == Decision::rejected) {
            PipelineOutcome out;
            out.kind = OutcomeKind::refused_input;
            out.violations = input_verdict.violations;
            out.rationale = input_verdict.rationale;
            out.attempts = 0;
            return finish(prompt, trace, std::move(out));
        }

        int attempts = 0;
        std::string answer;
        std::string failure;
        std::vector<Violation> prior_violations;
        Verdict output_verdict;

        // Steps 4-5: first generation. Later generations run inside step 8.
        if (!next_generation(prompt, trace, 4, prior_violations, deadline, attempts, answer,
                             failure)) {
            PipelineOutcome out;
            out.kind = OutcomeKind::refused_output;
            out.rationale = failure;
            out.attempts = attempts;
            return finish(prompt, trace, std::move(out));
        }
        add_step(trace, 5, AgentRole::business, "answer returned to commander",
                 sha256_hex(answer), "");

        while (true) {
            std::vector<Finding> answer_findings;
            if (cfg_.output_detectors != nullptr)
                answer_findings = scan(answer, *cfg_.output_detectors);

            add_step(trace, 6, AgentRole::commander,
                     "dispatched to security agent for output validation (attempt " +
                         std::to_string(attempts) + ")",
                     sha256_hex(answer), "");
            output_verdict = past(deadline)
                                 ? detail::fail_closed("pipeline deadline exceeded", "")
                                 : validate_output(answer, *security_snapshot_, cfg_,
                                                   prompt.text, answer_findings);
            add_step(trace, 7, AgentRole::security, verdict_summary("output", output_verdict),
                     sha256_hex(answer), sha256_hex(output_verdict.raw_text));

            if (output_verdict.decision == Decision::approved) {
                // Block-severity findings veto delivery even past an
                // approving validator.
                const Finding* veto = nullptr;
                for (const Finding& f : answer_findings)
                    if (f.severity == DetectorSeverity::block) veto = &f;
                if (veto != nullptr) {
                    add_step(trace, 8, AgentRole::commander,
                             "delivery blocked by detector " + veto->rule_name + " (" +
                                 risk_id_str(veto->risk_id) + "); request refused",
                             sha256_hex(answer), "");
                    PipelineOutcome out;
                    out.kind = OutcomeKind::refused_output;
                    out.rationale = "delivery blocked by detector " + veto->rule_name;
                    out.attempts = attempts;
                    return finish(prompt, trace, std::move(out));
                }
                const std::string encoded = encode_output(answer, cfg_.encoding_profile);
                add_step(trace, 9, AgentRole::commander, "final response delivered",
                         sha256_hex(answer), sha256_hex(encoded));
                PipelineOutcome out;
                out.kind = OutcomeKind::answered;
                out.answer = encoded;
                out.attempts = attempts;
                return finish(prompt, trace, std::move(out));
            }

            prior_violations = output_verdict.violations;
            if (attempts > cfg_.max_output_retries) {
                add_step(trace, 8, AgentRole::commander,
                         "output rejected; retries exhausted; request refused",
                         sha256_hex(output_verdict.raw_text), "");
                PipelineOutcome out;
                out.kind = OutcomeKind::refused_output;
                out.violations = output_verdict.violations;
                out.rationale = output_verdict.rationale;
                out.attempts = attempts;
                return finish(prompt, trace, std::move(out));
            }
            if (!next_generation(prompt, trace, 8, prior_violations, deadline, attempts,
                                 answer, failure)) {
                PipelineOutcome out;
                out.kind = OutcomeKind::refused_output;
                out.rationale = failure;
                out.attempts = attempts;
                return finish(prompt, trace, std::move(out));
            }
        }
    }

    Millis budget_ms() const {
        return cfg_.validation_timeout_ms +
               static_cast<Millis>(1 + cfg_.max_output_retries) *
                   (cfg_.generation_timeout_ms + cfg_.validation_timeout_ms) +
               cfg_.fixed_overhead_ms;
    }

    const PipelineConfig& config() const { return cfg_; }

private:
    bool past(Millis deadline) const { return cfg_.clock() > deadline; }

    void add_step(PipelineTrace& trace, int step_no, AgentRole agent, std::string summary,
                  std::string in_digest, std::string out_digest) const {
        StepRecord rec;
        rec.step_no = step_no;
        rec.agent = agent;
        rec.summary = std::move(summary);
        rec.input_digest = std::move(in_digest);
        rec.output_digest = std::move(out_digest);
        rec.at = cfg_.clock();
        trace.steps.push_back(std::move(rec));
    }

    // Runs one business generation, recording it as the given step. Returns
    // false on failure with the reason in failure_out.
    bool next_generation(const UserPrompt& prompt, PipelineTrace& trace, int step_no,
                         const std::vector<Violation>& prior, Millis deadline,
                         int& attempts, std::string& answer,
                         std::string& failure_out) const {
        const std::string label =
            step_no == 4 ? "answer generated (attempt 1)"
                         : "output rejected; regeneration requested (attempt " +
                               std::to_string(attempts + 1) + ")";
        if (past(deadline)) {
            failure_out = "pipeline deadline exceeded";
            add_step(trace, step_no, AgentRole::commander, label + "; " + failure_out,
                     sha256_hex(prompt.text), "");
            return false;
        }
        try {
            ++attempts;
            answer = generate_answer(prompt, *business_snapshot_, prior, cfg_);
        } catch (const GenerationError& e) {
            failure_out = std::string("generation failed: ") + e.what();
            add_step(trace, step_no, AgentRole::business, label + "; " + failure_out,
                     sha256_hex(prompt.text), "");
            return false;
        }
        if (answer.empty()) {
            failure_out = "generation produced an empty answer";
            add_step(trace, step_no, AgentRole::business, label + "; " + failure_out,
                     sha256_hex(prompt.text), "");
            return false;
        }
        add_step(trace, step_no, step_no == 4 ? AgentRole::business : AgentRole::commander,
                 label, sha256_hex(prompt.text), sha256_hex(answer));
        return true;
    }

    static std::string verdict_summary(const std::string& point, const Verdict& v) {
        if (v.decision == Decision::approved) return point + " approved";
        std::string s = point + " rejected";
        if (!v.violations.empty()) {
            s += ": article";
            for (const Violation& viol : v.violations) {
                s += " " + std::to_string(viol.article_no);
                if (!viol.doc_id.empty()) s += " (" + viol.doc_id + ")";
            }
        } else {
            s += ": " + v.rationale;
        }
        if (v.ambiguous_reference) s += " [ambiguous article reference]";
        return s;
    }

    // Publishes the trace to the audit sink before the outcome is released.
    // Raw text never reaches the log: digests plus short summaries only.
    std::pair<PipelineOutcome, PipelineTrace> finish(const UserPrompt& prompt,
                                                     PipelineTrace& trace,
                                                     PipelineOutcome outcome) const {
        trace.outcome_kind = outcome_kind_str(outcome.kind);
        if (audit_ != nullptr) publish(prompt, trace, outcome);
        return {std::move(outcome), std::move(trace)};
    }

    void publish(const UserPrompt& prompt, const PipelineTrace& trace,
                 const PipelineOutcome& outcome) const {
        auto base = [&](AuditCategory cat) {
            AuditEvent e;
            e.trace_id = prompt.trace_id;
            e.principal_id = prompt.principal_id;
            e.category = cat;
            return e;
        };
        for (const StepRecord& step : trace.steps) {
            if (step.step_no == 3) {
                AuditEvent e = base(AuditCategory::input_verdict);
                e.payload_digest = sha256_hex(prompt.text);
                e.redacted_excerpt = step.summary;
                const bool rejected = step.summary.find("rejected") != std::string::npos;
                e.severity = rejected ? AuditSeverity::warn : AuditSeverity::info;
                if (rejected) e.risk_tags.insert(RiskId::LLM01);
                audit_->record(std::move(e));
            } else if ((step.step_no == 4 && step.agent == AgentRole::business) ||
                       (step.step_no == 8 &&
                        step.summary.find("regeneration requested") != std::string::npos)) {
                AuditEvent e = base(AuditCategory::generation);
                e.payload_digest = step.output_digest;
                e.redacted_excerpt = step.summary.substr(0, 64);
                audit_->record(std::move(e));
            } else if (step.step_no == 7) {
                AuditEvent e = base(AuditCategory::output_verdict);
                e.payload_digest = step.input_digest;
                e.redacted_excerpt = step.summary;
                const bool rejected = step.summary.find("rejected") != std::string::npos;
                e.severity = rejected ? AuditSeverity::warn : AuditSeverity::info;
                if (rejected) e.risk_tags.insert(RiskId::LLM06);
                audit_->record(std::move(e));
            } else if (step.step_no == 8 &&
                       step.summary.find("delivery blocked by detector") !=
                           std::string::npos) {
                AuditEvent e = base(AuditCategory::output_verdict);
                e.payload_digest = step.input_digest;
                e.redacted_excerpt = step.summary;
                e.severity = AuditSeverity::warn;
                e.risk_tags.insert(RiskId::LLM06);
                audit_->record(std::move(e));
            }
        }
        AuditEvent e = base(AuditCategory::delivery);
        e.severity = outcome.kind == OutcomeKind::answered ? AuditSeverity::info
                                                           : AuditSeverity::warn;
        e.payload_digest = sha256_hex(outcome.answer.value_or(""));
        e.redacted_excerpt = trace.outcome_kind + ", attempts=" + std::to_string(outcome.attempts);
        audit_->record(std::move(e));
    }

    PipelineConfig cfg_;
    SnapshotPtr security_snapshot_;
    SnapshotPtr business_snapshot_;
    AuditSink* audit_;
};

/// One-shot convenience wrapper over Commander.
inline std::pair<PipelineOutcome, PipelineTrace> run_pipeline(
    const UserPrompt& prompt, const PipelineConfig& cfg, SnapshotPtr security_snapshot,
    SnapshotPtr business_snapshot, AuditSink* audit = nullptr,
    const std::vector<Finding>& detector_hints = {}) {
    Commander commander(cfg, std::move(security_snapshot), std::move(business_snapshot),
                        audit);
    return commander.run_pipeline(prompt, detector_hints);
}

}  // namespace llmgate
