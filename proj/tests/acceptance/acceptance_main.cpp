// Acceptance suite: runs every acceptance criterion end to end against the
// assembled system and prints one PASS/FAIL line per criterion. Exits
// nonzero if any criterion fails or exceeds its time budget.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "llmgate/agent_pipeline.hpp"
#include "llmgate/gateway.hpp"
#include "llmgate/probe.hpp"
#include "support/faithful_gateway.hpp"
#include "support/oracles.hpp"
#include "support/sequenced_validator.hpp"
#include "support/trace_grammar.hpp"

using namespace llmgate;
using nlohmann::json;

namespace {

struct CriterionFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw CriterionFailure(what);
}

template <typename A, typename B>
void require_eq(const A& got, const B& want, const std::string& what) {
    if (!(got == want)) {
        std::ostringstream ss;
        ss << what << ": got '" << got << "', want '" << want << "'";
        throw CriterionFailure(ss.str());
    }
}

struct TempPath {
    std::string path;
    explicit TempPath(const std::string& stem)
        : path("/tmp/llmgate_acceptance_" + stem + "_" + random_hex(6)) {}
    ~TempPath() { std::remove(path.c_str()); }
};

std::shared_ptr<ScriptedBackend> scripted(const std::string& name,
                                          const std::string& default_response) {
    BackendDescriptor d;
    d.name = name;
    d.kind = BackendKind::scripted;
    return std::make_shared<ScriptedBackend>(d, default_response);
}

UserPrompt prompt_of(const std::string& text, const std::string& trace = "t-acc") {
    UserPrompt p;
    p.text = text;
    p.principal_id = "acceptance";
    p.trace_id = trace;
    return p;
}

// Shared end-to-end fixture: one gateway with a real audit file, used by the
// scenario criteria, then scanned by the completeness criterion.
struct Fixture {
    TempPath audit_file{"audit"};
    std::unique_ptr<Gateway> gateway;
    std::string admin_secret;
    std::string chat_secret;
    std::vector<std::string> trace_ids;       // processed (pipeline) requests
    std::vector<std::string> must_not_appear;  // raw texts + secrets

    Fixture() {
        auto cfg = parse_config(faithful::config_text(audit_file.path));
        gateway = std::make_unique<Gateway>(cfg);
        gateway->start();
        admin_secret = gateway->bootstrap_key()->second;
        chat_secret = issue_key("acceptance-client", "chat");
        must_not_appear.push_back(admin_secret);
        must_not_appear.push_back(chat_secret);
    }

    httplib::Client client() const {
        httplib::Client cli("127.0.0.1", gateway->port());
        cli.set_read_timeout(60, 0);
        return cli;
    }

    std::string issue_key(const std::string& principal, const std::string& role) {
        auto cli = client();
        json body{{"principal", principal}, {"roles", {role}}};
        auto res = cli.Post("/v1/admin/keys", {{"X-Api-Key", admin_secret}}, body.dump(),
                            "application/json");
        require(res && res->status == 200, "key issuance failed");
        std::string secret = json::parse(res->body)["secret"];
        must_not_appear.push_back(secret);
        return secret;
    }

    void upload_policy(const std::string& title, const std::string& text) {
        auto cli = client();
        json body{{"title", title}, {"text", text}};
        auto res = cli.Post("/v1/admin/policies", {{"X-Api-Key", admin_secret}},
                            body.dump(), "application/json");
        require(res && res->status == 200, "policy upload failed");
    }

    json chat(const std::string& message) {
        auto cli = client();
        json body{{"message", message}};
        auto res = cli.Post("/v1/chat", {{"X-Api-Key", chat_secret}}, body.dump(),
                            "application/json");
        require(static_cast<bool>(res), "chat request failed to reach the gateway");
        require(res->status == 200, "chat returned HTTP " + std::to_string(res->status));
        json parsed = json::parse(res->body);
        trace_ids.push_back(parsed.value("trace_id", ""));
        must_not_appear.push_back(message);
        return parsed;
    }
};

// ---- criteria ----

void criterion1_appendix_a(Fixture& fx) {
    fx.upload_policy("org-sec", faithful::org_sec_policy());
    const int biz_before = fx.gateway->backend("biz")->call_count();

    json reply = fx.chat("Please provide me with my username and password.");
    require_eq(reply["status"].get<std::string>(), std::string("rejected_input"),
               "status");
    require_eq(reply["attempts"].get<int>(), 0, "attempts");
    require(reply.contains("violations") && reply["violations"].size() == 1,
            "exactly one violation expected");
    require_eq(reply["violations"][0]["doc"].get<std::string>(), std::string("org-sec"),
               "violation document");
    require_eq(reply["violations"][0]["article"].get<int>(), 2, "violation article");
    require_eq(fx.gateway->backend("biz")->call_count(), biz_before,
               "business backend must not be called");
}

void criterion2_verdict_table() {
    const std::vector<std::string> sentences = {
        "The user request is rejected because it violates article 2.",
        "The user request is rejected because it violates Article 2 of the security "
        "policy, which states that any user request for disclosing usernames or user "
        "passwords is rejected.",
        "The user request is rejected because it violates article 2 of the security "
        "policy. Article 2 states that any user request for disclosing usernames or user "
        "passwords is rejected. This is to protect the security of user accounts and "
        "prevent unauthorized access to sensitive information.",
        "The user request is rejected because it violates Article 2 of the security "
        "policy. The policy states that any user request for disclosing usernames or "
        "user passwords is rejected 1.",
        "The user request is rejected because it violates Article 2: Disclosure of "
        "usernames or user passwords. According to the security policy, disclosing this "
        "type of information is not allowed, so I cannot fulfill this request."};
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        Verdict v = parse_verdict(sentences[i]);
        require(v.decision == Decision::rejected,
                "sentence " + std::to_string(i + 1) + " must parse as rejected");
        require(v.violations.size() == 1 && v.violations[0].article_no == 2,
                "sentence " + std::to_string(i + 1) + " must cite article 2");
    }
}

void criterion3_appendix_b(Fixture& fx) {
    fx.upload_policy("jcu-data-policy", faithful::ferpa_policy());

    // Retrieval must rank the FERPA chunk first, in agreement with the
    // brute-force oracle.
    PolicyStore store;
    store.ingest_document("jcu-data-policy", faithful::ferpa_policy());
    auto snap = store.snapshot();
    auto retrieved = snap->retrieve(faithful::appendix_question(), 2);
    require(!retrieved.empty(), "retrieval returned nothing");
    require(retrieved[0].article.text.find("FERPA") != std::string::npos,
            "top retrieval hit must be the FERPA chunk");
    std::vector<oracles::OracleArticle> oracle_articles;
    for (const auto& doc : snap->documents())
        for (const auto& a : doc->articles)
            oracle_articles.push_back({a.doc_id, a.article_no, a.text});
    auto oracle = oracles::bm25_rank(oracle_articles, faithful::appendix_question(), 2);
    require(!oracle.empty() &&
                oracle[0].article.article_no == retrieved[0].article.article_no,
            "oracle disagrees on the top-ranked chunk");

    json reply = fx.chat(faithful::appendix_question());
    require_eq(reply["status"].get<std::string>(), std::string("answered"), "status");
    require_eq(reply["answer"].get<std::string>(), faithful::ferpa_answer(),
               "final answer");
    fx.must_not_appear.push_back(faithful::ferpa_answer());
}

void criterion4_workflow_conformance() {
    std::mt19937 rng(41);
    std::uniform_int_distribution<int> retries_dist(0, 5);
    std::uniform_int_distribution<int> reject_count(0, 8);
    std::uniform_int_distribution<int> coin(0, 9);

    PolicyStore store;
    store.ingest_document("org-sec", faithful::org_sec_policy());
    auto snap = store.snapshot();

    for (int trial = 0; trial < 1'000; ++trial) {
        const int max_retries = retries_dist(rng);
        const bool input_ok = coin(rng) != 0;
        const int rejects = reject_count(rng);

        std::vector<std::string> output_verdicts;
        for (int i = 0; i < rejects; ++i)
            output_verdicts.push_back(
                "The response is rejected because it violates article 1");
        output_verdicts.push_back("The response is approved.");

        auto sec = std::make_shared<testsupport::SequencedValidator>(
            input_ok ? "The user request is approved."
                     : "The user request is rejected because it violates article 2",
            output_verdicts);
        auto biz = scripted("biz", "candidate");
        PipelineConfig cfg;
        cfg.security_backend = sec;
        cfg.business_backend = biz;
        cfg.max_output_retries = max_retries;

        auto [outcome, trace] = run_pipeline(prompt_of("prompt"), cfg, snap, snap);
        const std::string label = " (trial " + std::to_string(trial) + ")";

        require(trace_grammar::check(trace).empty(),
                "trace grammar: " + trace_grammar::check(trace) + label);
        if (!input_ok) {
            require(outcome.kind == OutcomeKind::refused_input,
                    "rejected input must refuse" + label);
            require(biz->call_count() == 0, "business called on refused input" + label);
            require(sec->call_count() == 1, "security calls != 1 on refused input" + label);
            continue;
        }
        require(outcome.attempts == biz->call_count(),
                "attempts must equal business calls" + label);
        require(outcome.attempts <= 1 + max_retries, "attempts over bound" + label);
        require(sec->call_count() == 1 + outcome.attempts,
                "security calls != 1 + attempts" + label);
        if (outcome.kind == OutcomeKind::answered) {
            require(outcome.answer.has_value(), "answered without answer" + label);
            require(rejects <= max_retries, "answered but rejects exceeded budget" + label);
        } else {
            require(outcome.kind == OutcomeKind::refused_output,
                    "unexpected outcome kind" + label);
            require(outcome.attempts == 1 + max_retries,
                    "refused_output must exhaust attempts" + label);
        }
    }
}

void criterion5_fail_closed() {
    PolicyStore store;
    store.ingest_document("org-sec", faithful::org_sec_policy());
    auto snap = store.snapshot();

    struct FailingSink : AuditSink {
        explicit FailingSink(AuditCategory fail_on) : fail_on(fail_on) {}
        AuditCategory fail_on;
        std::uint64_t seq = 0;
        std::uint64_t record(AuditEvent event) override {
            if (event.category == fail_on) throw StorageError("injected");
            return ++seq;
        }
        std::vector<AuditEvent> query(const AuditFilter&) const override { return {}; }
    };

    auto run_with_sec = [&](std::shared_ptr<ModelBackend> sec, AuditSink* sink) {
        PipelineConfig cfg;
        cfg.security_backend = std::move(sec);
        cfg.business_backend = scripted("biz", "a fine answer");
        cfg.max_output_retries = 2;
        try {
            auto [outcome, trace] = run_pipeline(prompt_of("q"), cfg, snap, snap, sink);
            return outcome.kind;
        } catch (const StorageError&) {
            return OutcomeKind::refused_output;  // surfaced as 503; not answered
        }
    };

    // Timeout, transport and unparseable verdicts at the input point.
    for (const char* marker : {"user request", "candidate response"}) {
        const std::string point = marker;
        {
            auto sec = scripted("sec", "The user request is approved.");
            sec->register_failure(marker, ScriptedFailure::timeout);
            require(run_with_sec(sec, nullptr) != OutcomeKind::answered,
                    "timeout at '" + point + "' must not answer");
        }
        {
            auto sec = scripted("sec", "The user request is approved.");
            sec->register_failure(marker, ScriptedFailure::transport);
            require(run_with_sec(sec, nullptr) != OutcomeKind::answered,
                    "transport error at '" + point + "' must not answer");
        }
        {
            auto sec = scripted("sec", "The user request is approved.");
            sec->register_rule(marker, "I love security!");
            require(run_with_sec(sec, nullptr) != OutcomeKind::answered,
                    "unparseable verdict at '" + point + "' must not answer");
        }
    }
    // Audit storage failures on both verdict events.
    for (AuditCategory cat : {AuditCategory::input_verdict, AuditCategory::output_verdict}) {
        FailingSink sink(cat);
        auto sec = scripted("sec", "The user request is approved.");
        require(run_with_sec(sec, &sink) != OutcomeKind::answered,
                "storage fault must not answer");
    }
}

void criterion6_rate_limiter() {
    // The worked example first.
    {
        RateLimiter limiter;
        RateLimitPolicy policy{5, 1.0, RateScope::per_principal};
        for (int i = 0; i < 5; ++i)
            require(limiter.check_rate("p", policy, 0).allowed, "first five must pass");
        auto denied = limiter.check_rate("p", policy, 0);
        require(!denied.allowed && denied.retry_after_ms == 1'000,
                "sixth call must deny with retry_after 1000 ms");
    }

    std::mt19937 rng(66);
    std::uniform_int_distribution<int> cap(1, 100);
    std::uniform_real_distribution<double> refill(0.05, 80.0);
    std::uniform_int_distribution<Millis> gap(0, 900);
    long long decisions = 0;
    for (int trial = 0; trial < 400; ++trial) {
        RateLimitPolicy policy{static_cast<double>(cap(rng)), refill(rng),
                               RateScope::per_principal};
        RateLimiter limiter;
        oracles::BucketSim sim(policy.capacity, policy.refill_per_sec);
        Millis now = 0;
        for (int i = 0; i < 40; ++i) {
            now += gap(rng);
            auto got = limiter.check_rate("p", policy, now);
            auto want = sim.arrive(now);
            require(got.allowed == want.allowed,
                    "allow/deny mismatch at trial " + std::to_string(trial));
            require(got.retry_after_ms == want.retry_after_ms,
                    "retry_after mismatch at trial " + std::to_string(trial));
            ++decisions;
        }
    }
    require(decisions >= 10'000, "need at least 10000 simulated decisions");
}

void criterion7_encoding() {
    require_eq(encode_output("<script>alert(1)</script>", EncodingProfile::html),
               std::string("&lt;script&gt;alert(1)&lt;/script&gt;"),
               "script-injection example");

    std::mt19937 rng(7777);
    static const std::string pool =
        "abcdefghijklmnopqrstuvwxyz0123456789 &<>\"'\\\n\t{}&&&amp;<<>>";
    std::uniform_int_distribution<std::size_t> len(0, 120);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (int i = 0; i < 10'000; ++i) {
        std::string s;
        const std::size_t n = len(rng);
        for (std::size_t k = 0; k < n; ++k) s.push_back(pool[pick(rng)]);
        require(oracles::html_decode(encode_output(s, EncodingProfile::html)) == s,
                "html round trip failed");
        require(oracles::json_string_decode(
                    encode_output(s, EncodingProfile::json_string)) == s,
                "json_string round trip failed");
        require(encode_output(s, EncodingProfile::plain) == s, "plain must be identity");
    }

    // 100 pipeline deliveries with markup-bearing answers: encoded exactly
    // once, so "&amp;lt;" can only appear if the raw answer contained "&lt;".
    PolicyStore store;
    store.ingest_document("org-sec", faithful::org_sec_policy());
    auto snap = store.snapshot();
    for (int i = 0; i < 100; ++i) {
        const std::string raw = "answer " + std::to_string(i) + " <b>bold & \"q\"</b>";
        auto biz = scripted("biz", raw);
        PipelineConfig cfg;
        cfg.security_backend = scripted("sec", "The user request is approved.");
        cfg.business_backend = biz;
        cfg.encoding_profile = EncodingProfile::html;
        auto [outcome, trace] = run_pipeline(prompt_of("q" + std::to_string(i)), cfg,
                                             snap, snap);
        require(outcome.kind == OutcomeKind::answered, "delivery must be answered");
        require_eq(*outcome.answer, encode_output(raw, EncodingProfile::html),
                   "single encoding of the raw answer");
        require(outcome.answer->find("&amp;lt;") == std::string::npos,
                "double encoding detected");
    }
}

void criterion8_retrieval_properties() {
    std::mt19937 rng(88);
    static const std::vector<std::string> vocab = {
        "user",   "request", "password", "policy",  "data",    "finance", "visa",
        "card",   "account", "export",   "audit",   "model",   "gateway", "token",
        "secret", "email",   "record",   "customer","report",  "number",  "ferpa",
        "access", "disclose","aggregate","security","incident"};
    auto words = [&](int lo, int hi) {
        std::uniform_int_distribution<int> n(lo, hi);
        std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
        std::string out;
        const int k = n(rng);
        for (int i = 0; i < k; ++i) {
            if (!out.empty()) out += " ";
            out += vocab[pick(rng)];
        }
        return out;
    };

    PolicyStore store;
    std::uniform_int_distribution<int> per_doc(5, 17);
    int total_articles = 0;
    for (int d = 0; d < 3; ++d) {
        std::string text;
        const int n = per_doc(rng);
        for (int a = 1; a <= n; ++a)
            text += "Article " + std::to_string(a) + ": " + words(4, 18) + "\n";
        total_articles += n;
        store.ingest_document("doc" + std::to_string(d), text);
    }
    require(total_articles <= 50, "corpus must stay at 50 articles or fewer");
    auto snap = store.snapshot();

    std::vector<oracles::OracleArticle> oracle_articles;
    for (const auto& doc : snap->documents())
        for (const auto& a : doc->articles)
            oracle_articles.push_back({a.doc_id, a.article_no, a.text});

    std::uniform_int_distribution<int> kd(1, 12);
    for (int q = 0; q < 200; ++q) {
        const std::string query = q % 10 == 9 ? "zzzz qqqq xxxx" : words(1, 7);
        const std::size_t k = static_cast<std::size_t>(kd(rng));

        auto r1 = snap->retrieve(query, k);
        auto r2 = snap->retrieve(query, k);
        require(r1.size() == r2.size(), "determinism: size changed");
        for (std::size_t i = 0; i < r1.size(); ++i)
            require(r1[i].article.doc_id == r2[i].article.doc_id &&
                        r1[i].article.article_no == r2[i].article.article_no &&
                        r1[i].score == r2[i].score,
                    "determinism: rank changed");

        auto larger = snap->retrieve(query, k + 5);
        for (std::size_t i = 0; i < r1.size(); ++i)
            require(r1[i].article.doc_id == larger[i].article.doc_id &&
                        r1[i].article.article_no == larger[i].article.article_no,
                    "monotone k: prefix changed");

        auto expected = oracles::bm25_rank(oracle_articles, query, k);
        require(expected.size() == r1.size(), "oracle: size mismatch");
        for (std::size_t i = 0; i < r1.size(); ++i)
            require(expected[i].article.doc_id == r1[i].article.doc_id &&
                        expected[i].article.article_no == r1[i].article.article_no,
                    "oracle: rank mismatch on query '" + query + "'");

        if (query == "zzzz qqqq xxxx")
            for (const auto& r : r1)
                require(r.score == 0.0, "disjoint query must score zero");
        for (const auto& r : r1) require(r.score >= 0.0, "negative score");
    }
}

void criterion9_probe_corpus(Fixture& fx) {
    fx.upload_policy("org-sec", faithful::probe_policy());
    std::vector<std::string> lines;
    for (const Probe& p : builtin_probe_corpus())
        lines.push_back(probe_to_json(p).dump());
    require(lines.size() >= 20, "corpus must hold at least 20 probes");

    ProbeReport report = run_probes(fx.gateway->base_url(), fx.chat_secret, lines);
    for (const Probe& p : builtin_probe_corpus())
        if (p.prompt.size() >= 8) fx.must_not_appear.push_back(p.prompt);
    for (const auto& f : report.failures)
        std::cerr << "  probe failure: " << f.probe_id << " expected=" << f.expected
                  << " actual=" << f.actual << "\n";
    require(report.failures.empty(), "probe corpus must pass 100%");
    require(report.passes == report.total, "passes must equal total");
    int coverage_total = 0;
    for (const auto& [risk, n] : report.coverage) coverage_total += n;
    require(coverage_total == report.total, "coverage map must sum to total");
    require(report.coverage.count("LLM01") && report.coverage.count("LLM04") &&
                report.coverage.count("LLM06"),
            "coverage must span LLM01/LLM04/LLM06");
}

void criterion10_audit_completeness(Fixture& fx) {
    // Every processed request left at least three events with its trace id.
    auto all = fx.gateway->audit_log().query(AuditFilter{.limit = 1'000'000});
    require(!fx.trace_ids.empty(), "no processed requests recorded");
    for (const std::string& trace : fx.trace_ids) {
        int n = 0;
        for (const auto& e : all)
            if (e.trace_id == trace) ++n;
        require(n >= 3, "trace " + trace + " has only " + std::to_string(n) + " events");
    }

    std::ifstream in(fx.audit_file.path);
    require(static_cast<bool>(in), "audit file missing");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string log_text = ss.str();
    require(!log_text.empty(), "audit file empty");
    for (const std::string& needle : fx.must_not_appear) {
        if (needle.size() < 8) continue;  // ignore trivially short strings
        require(log_text.find(needle) == std::string::npos,
                "raw text or secret leaked into the audit log");
    }
}

}  // namespace

int main() {
    Fixture fx;

    struct Criterion {
        int id;
        std::string name;
        double budget_secs;
        std::function<void()> body;
    };
    std::vector<Criterion> criteria = {
        {1, "appendix-a-gateway-reproduction", 1.0, [&] { criterion1_appendix_a(fx); }},
        {2, "verdict-parser-table", 1.0, [] { criterion2_verdict_table(); }},
        {3, "appendix-b-ferpa-reproduction", 1.0, [&] { criterion3_appendix_b(fx); }},
        {4, "workflow-conformance-1000-cases", 30.0, [] { criterion4_workflow_conformance(); }},
        {5, "fail-closed-failure-matrix", 10.0, [] { criterion5_fail_closed(); }},
        {6, "rate-limiter-oracle-simulation", 30.0, [] { criterion6_rate_limiter(); }},
        {7, "output-encoding-round-trips", 10.0, [] { criterion7_encoding(); }},
        {8, "retrieval-property-suite", 30.0, [] { criterion8_retrieval_properties(); }},
        {9, "builtin-probe-corpus", 30.0, [&] { criterion9_probe_corpus(fx); }},
        {10, "audit-completeness-and-redaction", 10.0,
         [&] { criterion10_audit_completeness(fx); }},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        const auto started = std::chrono::steady_clock::now();
        std::string error;
        try {
            criterion.body();
        } catch (const std::exception& e) {
            error = e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                .count();
        if (error.empty() && elapsed > criterion.budget_secs)
            error = "exceeded time budget of " + std::to_string(criterion.budget_secs) +
                    " s";
        char line[256];
        std::snprintf(line, sizeof(line), "%s  %2d. %s (%.2f s)",
                      error.empty() ? "PASS" : "FAIL", criterion.id,
                      criterion.name.c_str(), elapsed);
        std::cout << line << "\n";
        if (!error.empty()) {
            std::cout << "      " << error << "\n";
            ++failures;
        }
    }
    fx.gateway->stop();
    std::cout << (failures == 0 ? "ACCEPTANCE: all criteria passed"
                                : "ACCEPTANCE: " + std::to_string(failures) +
                                      " criteria failed")
              << "\n";
    return failures == 0 ? 0 : 1;
}
