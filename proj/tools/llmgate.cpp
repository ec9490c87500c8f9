// llmgate: run the gateway, manage policies and keys, tail audit events,
// and execute the red-team probe corpus against a running gateway.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "llmgate/gateway.hpp"
#include "llmgate/gateway_config.hpp"
#include "llmgate/probe.hpp"

namespace {

// Exit codes: 0 success, 1 config/assertion failure, 2 connectivity,
// 3 permission/validation rejected by the server.
constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kConnectivityError = 2;
constexpr int kPermissionError = 3;

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop = true; }

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v == nullptr ? fallback : std::string(v);
}

struct AdminClient {
    std::string endpoint;
    std::string api_key;

    httplib::Client make() const {
        auto slash = endpoint.find('/', 7);
        std::string base = slash == std::string::npos ? endpoint : endpoint.substr(0, slash);
        httplib::Client cli(base);
        cli.set_connection_timeout(5, 0);
        cli.set_read_timeout(30, 0);
        return cli;
    }

    httplib::Headers headers() const { return {{"X-Api-Key", api_key}}; }
};

// Prints the server error and maps the transport outcome to an exit code.
int check(const httplib::Result& res) {
    if (!res) {
        std::cerr << "error: cannot reach gateway (" << httplib::to_string(res.error())
                  << ")\n";
        return kConnectivityError;
    }
    if (res->status >= 200 && res->status < 300) return kOk;
    std::string message = res->body;
    try {
        message = nlohmann::json::parse(res->body).value("error", res->body);
    } catch (const std::exception&) {
    }
    std::cerr << "error: HTTP " << res->status << ": " << message << "\n";
    if (res->status >= 400 && res->status < 500) return kPermissionError;
    return kConfigError;
}

int cmd_serve(const std::string& config_path) {
    llmgate::GatewayConfig cfg;
    try {
        cfg = llmgate::load_config(config_path);
    } catch (const llmgate::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    }
    try {
        llmgate::Gateway gateway(cfg);
        gateway.start();
        if (gateway.bootstrap_key()) {
            const auto& [key_id, secret] = *gateway.bootstrap_key();
            std::cout << "bootstrap_key_id=" << key_id << " bootstrap_secret=" << secret
                      << "\n";
        }
        std::cout << "listening=" << gateway.base_url()
                  << " config_fingerprint=" << cfg.fingerprint << "\n";
        std::cout.flush();
        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        gateway.stop();
        return kOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
}

int cmd_policy_add(const AdminClient& admin, const std::string& file,
                   std::string title) {
    std::ifstream in(file);
    if (!in) {
        std::cerr << "error: cannot read " << file << "\n";
        return kConfigError;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (title.empty()) {
        title = file;
        auto slash = title.find_last_of('/');
        if (slash != std::string::npos) title = title.substr(slash + 1);
        auto dot = title.find_last_of('.');
        if (dot != std::string::npos && dot > 0) title = title.substr(0, dot);
    }
    auto cli = admin.make();
    nlohmann::json body{{"title", title}, {"text", ss.str()}};
    auto res = cli.Post("/v1/admin/policies", admin.headers(), body.dump(),
                        "application/json");
    int code = check(res);
    if (code != kOk) return code;
    auto parsed = nlohmann::json::parse(res->body);
    std::cout << "doc_id=" << parsed.value("doc_id", "") << " version="
              << parsed.value("version", 0) << " articles=" << parsed.value("articles", 0)
              << " snapshot_id=" << parsed.value("snapshot_id", "") << "\n";
    return kOk;
}

int cmd_policy_list(const AdminClient& admin) {
    auto cli = admin.make();
    auto res = cli.Get("/v1/admin/policies", admin.headers());
    int code = check(res);
    if (code != kOk) return code;
    auto parsed = nlohmann::json::parse(res->body);
    std::cout << "snapshot_id=" << parsed.value("snapshot_id", "") << "\n";
    for (const auto& d : parsed["documents"])
        std::cout << "doc_id=" << d.value("doc_id", "") << " version=" << d.value("version", 0)
                  << " articles=" << d.value("articles", 0) << "\n";
    return kOk;
}

int cmd_key_issue(const AdminClient& admin, const std::string& principal,
                  const std::string& roles_csv) {
    std::vector<std::string> roles;
    std::string cur;
    for (char c : roles_csv) {
        if (c == ',') {
            if (!cur.empty()) roles.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) roles.push_back(cur);
    auto cli = admin.make();
    nlohmann::json body{{"principal", principal}, {"roles", roles}};
    auto res = cli.Post("/v1/admin/keys", admin.headers(), body.dump(), "application/json");
    int code = check(res);
    if (code != kOk) return code;
    auto parsed = nlohmann::json::parse(res->body);
    std::cout << "key_id=" << parsed.value("key_id", "") << " secret="
              << parsed.value("secret", "") << " principal=" << parsed.value("principal_id", "")
              << "\n";
    return kOk;
}

int cmd_key_revoke(const AdminClient& admin, const std::string& key_id) {
    auto cli = admin.make();
    auto res = cli.Delete("/v1/admin/keys/" + key_id, admin.headers());
    int code = check(res);
    if (code != kOk) return code;
    std::cout << "revoked=" << key_id << "\n";
    return kOk;
}

int cmd_audit_tail(const AdminClient& admin, bool follow, const std::string& risk,
                   const std::string& category, int limit) {
    std::set<std::uint64_t> seen;
    llmgate::Millis last_at = 0;
    while (true) {
        auto cli = admin.make();
        std::string path = "/v1/admin/audit?limit=" + std::to_string(limit);
        if (!risk.empty()) path += "&risk=" + risk;
        if (!category.empty()) path += "&category=" + category;
        if (last_at > 0) path += "&from=" + std::to_string(last_at);
        auto res = cli.Get(path, admin.headers());
        int code = check(res);
        if (code != kOk) return code;
        auto parsed = nlohmann::json::parse(res->body);
        for (const auto& e : parsed["events"]) {
            auto id = e.value("event_id", std::uint64_t{0});
            if (seen.count(id)) continue;
            seen.insert(id);
            last_at = std::max<llmgate::Millis>(last_at, e.value("at", llmgate::Millis{0}));
            std::cout << e.dump() << "\n";
        }
        std::cout.flush();
        if (!follow) return kOk;
        if (g_stop) return kOk;
        std::this_thread::sleep_for(std::chrono::milliseconds(500));
    }
}

int cmd_probe_corpus(const std::string& out_path) {
    const std::string jsonl = llmgate::probes_to_jsonl(llmgate::builtin_probe_corpus());
    if (out_path.empty() || out_path == "-") {
        std::cout << jsonl;
        return kOk;
    }
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "error: cannot write " << out_path << "\n";
        return kConfigError;
    }
    out << jsonl;
    std::cout << "wrote " << out_path << "\n";
    return kOk;
}

int cmd_probe_run(const std::string& endpoint, const std::string& api_key,
                  const std::string& corpus_path, bool builtin,
                  const std::string& report_path, int parallel) {
    std::vector<std::string> lines;
    if (builtin) {
        for (const llmgate::Probe& p : llmgate::builtin_probe_corpus())
            lines.push_back(llmgate::probe_to_json(p).dump());
    } else {
        std::ifstream in(corpus_path);
        if (!in) {
            std::cerr << "error: cannot read corpus " << corpus_path << "\n";
            return kConfigError;
        }
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
    }

    {
        // Preflight so an unreachable gateway is a connectivity error, not
        // a wall of failed probes.
        auto slash = endpoint.find('/', 7);
        std::string base = slash == std::string::npos ? endpoint : endpoint.substr(0, slash);
        httplib::Client cli(base);
        cli.set_connection_timeout(3, 0);
        auto res = cli.Get("/v1/healthz");
        if (!res) {
            std::cerr << "error: cannot reach gateway at " << endpoint << "\n";
            return kConnectivityError;
        }
    }

    llmgate::ProbeReport report = llmgate::run_probes(
        endpoint, api_key, lines, static_cast<std::size_t>(std::max(1, parallel)));
    nlohmann::json report_json = llmgate::probe_report_to_json(report);
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) {
            std::cerr << "error: cannot write report " << report_path << "\n";
            return kConfigError;
        }
        out << report_json.dump(2) << "\n";
    }
    std::cout << "total=" << report.total << " passes=" << report.passes
              << " failures=" << report.failures.size() << "\n";
    for (const auto& f : report.failures)
        std::cout << "FAIL " << f.probe_id << " expected=" << f.expected
                  << " actual=" << f.actual << " trace_id=" << f.trace_id << "\n";
    return report.failures.empty() ? kOk : kConfigError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"llmgate: policy-enforcing security gateway for LLM applications"};
    app.require_subcommand(1);

    std::string endpoint = env_or("GATEWAY_ENDPOINT", "http://127.0.0.1:8080");
    std::string admin_key = env_or("GATEWAY_ADMIN_KEY", "");

    auto* serve = app.add_subcommand("serve", "run the gateway until SIGINT");
    std::string config_path = env_or("GATEWAY_CONFIG", "");
    serve->add_option("--config", config_path, "config file path (or GATEWAY_CONFIG)");

    auto* policy = app.add_subcommand("policy", "manage policy documents");
    auto* policy_add = policy->add_subcommand("add", "upload a policy document");
    std::string policy_file;
    std::string policy_title;
    policy_add->add_option("file", policy_file, "policy text file")->required();
    policy_add->add_option("--title", policy_title, "document title (default: file stem)");
    auto* policy_list = policy->add_subcommand("list", "list policy documents");

    auto* key = app.add_subcommand("key", "manage API keys");
    auto* key_issue = key->add_subcommand("issue", "issue a key for a principal");
    std::string principal;
    std::string roles_csv = "chat";
    key_issue->add_option("--principal", principal, "principal id")->required();
    key_issue->add_option("--roles", roles_csv, "comma-separated role names");
    auto* key_revoke = key->add_subcommand("revoke", "revoke a key");
    std::string revoke_id;
    key_revoke->add_option("key_id", revoke_id, "key id")->required();

    auto* audit = app.add_subcommand("audit", "audit log access");
    auto* audit_tail = audit->add_subcommand("tail", "print audit events");
    bool follow = false;
    std::string tail_risk;
    std::string tail_category;
    int tail_limit = 200;
    audit_tail->add_flag("--follow", follow, "keep polling for new events");
    audit_tail->add_option("--risk", tail_risk, "filter by risk id (LLM01..LLM10)");
    audit_tail->add_option("--category", tail_category, "filter by category");
    audit_tail->add_option("--limit", tail_limit, "max events per poll");

    auto* probe = app.add_subcommand("probe", "red-team probe corpus");
    auto* probe_corpus = probe->add_subcommand("corpus", "emit the built-in corpus");
    std::string corpus_out;
    probe_corpus->add_option("--out", corpus_out, "output file (default: stdout)");
    auto* probe_run = probe->add_subcommand("run", "run probes against a gateway");
    std::string run_corpus;
    bool run_builtin = false;
    std::string report_path;
    int run_parallel = 1;
    std::string chat_key = env_or("GATEWAY_API_KEY", "");
    probe_run->add_option("--corpus", run_corpus, "corpus file (one probe per line)");
    probe_run->add_flag("--builtin", run_builtin, "use the built-in corpus");
    probe_run->add_option("--report", report_path, "report output file");
    probe_run->add_option("--parallel", run_parallel,
                          "worker count (keep below the gateway rate limit)");
    probe_run->add_option("--api-key", chat_key, "chat API key (or GATEWAY_API_KEY)");

    for (CLI::App* sub : {policy_add, policy_list, key_issue, key_revoke, audit_tail,
                          static_cast<CLI::App*>(probe_run)}) {
        sub->add_option("--endpoint", endpoint, "gateway base URL");
        sub->add_option("--admin-key", admin_key, "admin API key (or GATEWAY_ADMIN_KEY)");
    }

    CLI11_PARSE(app, argc, argv);

    std::signal(SIGINT, handle_signal);
    AdminClient admin{endpoint, admin_key};

    try {
        if (serve->parsed()) {
            if (config_path.empty()) {
                std::cerr << "config error: --config or GATEWAY_CONFIG required\n";
                return kConfigError;
            }
            return cmd_serve(config_path);
        }
        if (policy_add->parsed()) return cmd_policy_add(admin, policy_file, policy_title);
        if (policy_list->parsed()) return cmd_policy_list(admin);
        if (key_issue->parsed()) return cmd_key_issue(admin, principal, roles_csv);
        if (key_revoke->parsed()) return cmd_key_revoke(admin, revoke_id);
        if (audit_tail->parsed())
            return cmd_audit_tail(admin, follow, tail_risk, tail_category, tail_limit);
        if (probe_corpus->parsed()) return cmd_probe_corpus(corpus_out);
        if (probe_run->parsed()) {
            if (!run_builtin && run_corpus.empty()) {
                std::cerr << "config error: --corpus FILE or --builtin required\n";
                return kConfigError;
            }
            return cmd_probe_run(endpoint, chat_key, run_corpus, run_builtin, report_path,
                                 run_parallel);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kConfigError;
}
