#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "llmgate/common.hpp"

namespace llmgate {

class TimeoutError : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    using Error::Error;
};

class TokenLimitError : public Error {
public:
    using Error::Error;
};

class ConfigMismatch : public Error {
public:
    using Error::Error;
};

class MissingVariable : public Error {
public:
    explicit MissingVariable(const std::string& name)
        : Error("unresolved placeholder: " + name), name(name) {}
    std::string name;
};

struct ModelRequest {
    std::string system;
    std::string user_message;  // non-empty
    double temperature = 0.0;
    int max_tokens = 1024;
    std::optional<std::int64_t> seed;
};

struct ModelResponse {
    std::string text;  // present even when empty; absence is a transport error
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    Millis latency_ms = 0;
};

enum class BackendKind { scripted, remote };

// Request/response field names for the remote chat-completion wire format,
// overridable per backend profile.
struct RemoteWireFormat {
    std::string model_field = "model";
    std::string messages_field = "messages";
    std::string role_field = "role";
    std::string content_field = "content";
    std::string temperature_field = "temperature";
    std::string max_tokens_field = "max_tokens";
    std::string seed_field = "seed";
    std::string response_text_path = "choices.0.message.content";
    std::string response_fingerprint_path = "system_fingerprint";
};

struct BackendDescriptor {
    std::string name;
    BackendKind kind = BackendKind::scripted;
    std::string endpoint;   // required for remote
    std::string model_id;   // required for remote
    std::string pinned_fingerprint;  // empty = unpinned
    std::int64_t max_context_tokens = 0;  // 0 = unlimited
    std::string api_key;  // optional bearer token for remote calls
    RemoteWireFormat wire;
};

inline void validate_descriptor(const BackendDescriptor& d) {
    if (d.kind == BackendKind::remote && (d.endpoint.empty() || d.model_id.empty()))
        throw Error("backend '" + d.name + "': remote kind requires endpoint and model_id");
}

struct PromptTemplate {
    std::string name;
    std::string body;  // placeholders: {{name}}
};

/// Replaces each {{name}} with its value in a single left-to-right pass;
/// values are inserted verbatim and never rescanned. Throws MissingVariable
/// for the first placeholder absent from vars.
inline std::string render_prompt(const PromptTemplate& tmpl,
                                 const std::map<std::string, std::string>& vars) {
    const std::string& body = tmpl.body;
    std::string out;
    out.reserve(body.size());
    std::size_t i = 0;
    while (i < body.size()) {
        std::size_t open = body.find("{{", i);
        if (open == std::string::npos) {
            out.append(body, i, std::string::npos);
            break;
        }
        std::size_t close = body.find("}}", open + 2);
        if (close == std::string::npos) {
            out.append(body, i, std::string::npos);
            break;
        }
        std::string name = body.substr(open + 2, close - open - 2);
        bool well_formed = !name.empty();
        for (char c : name)
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') well_formed = false;
        if (!well_formed) {
            // Not a placeholder; emit "{{" literally and keep scanning.
            out.append(body, i, open + 2 - i);
            i = open + 2;
            continue;
        }
        auto it = vars.find(name);
        if (it == vars.end()) throw MissingVariable(name);
        out.append(body, i, open - i);
        out.append(it->second);
        i = close + 2;
    }
    return out;
}

/// Uniform completion interface. complete() never blocks past the timeout
/// plus a bounded grace interval, and enforces the descriptor's context
/// budget before dispatch.
class ModelBackend {
public:
    explicit ModelBackend(BackendDescriptor descriptor)
        : descriptor_(std::move(descriptor)) {
        validate_descriptor(descriptor_);
    }
    virtual ~ModelBackend() = default;

    ModelResponse complete(const ModelRequest& request, Millis timeout_ms) {
        if (request.user_message.empty())
            throw Error("complete: user_message must be non-empty");
        if (timeout_ms < 1) throw Error("complete: timeout_ms must be positive");
        calls_.fetch_add(1, std::memory_order_relaxed);
        if (descriptor_.max_context_tokens > 0) {
            const auto prompt_tokens =
                approx_tokens(request.system) + approx_tokens(request.user_message);
            if (prompt_tokens > descriptor_.max_context_tokens)
                throw TokenLimitError("prompt of ~" + std::to_string(prompt_tokens) +
                                      " tokens exceeds context budget " +
                                      std::to_string(descriptor_.max_context_tokens));
        }
        return do_complete(request, timeout_ms);
    }

    const BackendDescriptor& descriptor() const { return descriptor_; }
    int call_count() const { return calls_.load(std::memory_order_relaxed); }
    void reset_call_count() { calls_.store(0, std::memory_order_relaxed); }

protected:
    virtual ModelResponse do_complete(const ModelRequest& request, Millis timeout_ms) = 0;

private:
    BackendDescriptor descriptor_;
    std::atomic<int> calls_{0};
};

using BackendPtr = std::shared_ptr<ModelBackend>;

enum class PatternKind { substring, regex };

enum class ScriptedFailure { none, timeout, transport };

/// Deterministic rule-driven backend: rules are evaluated in order against
/// the request's user message, first match wins, no match returns the
/// configured default text. Rules can also simulate latency and failures,
/// which is how validator faults are injected in tests.
class ScriptedBackend : public ModelBackend {
public:
    explicit ScriptedBackend(BackendDescriptor descriptor,
                             std::string default_response = "")
        : ModelBackend(std::move(descriptor)),
          default_response_(std::move(default_response)) {}

    int register_rule(const std::string& pattern, const std::string& response_text,
                      int position = -1, PatternKind kind = PatternKind::substring,
                      Millis delay_ms = 0) {
        return add_rule(pattern, kind, response_text, ScriptedFailure::none, delay_ms,
                        position);
    }

    int register_failure(const std::string& pattern, ScriptedFailure failure,
                         int position = -1, PatternKind kind = PatternKind::substring) {
        return add_rule(pattern, kind, "", failure, 0, position);
    }

    void set_default_response(std::string text) {
        std::lock_guard lock(mutex_);
        default_response_ = std::move(text);
    }

protected:
    ModelResponse do_complete(const ModelRequest& request, Millis timeout_ms) override {
        std::lock_guard lock(mutex_);
        const std::string haystack = to_lower(request.user_message);
        for (const Rule& r : rules_) {
            if (!matches(r, request.user_message, haystack)) continue;
            if (r.failure == ScriptedFailure::timeout)
                throw TimeoutError("scripted timeout after " + std::to_string(timeout_ms) +
                                   " ms");
            if (r.failure == ScriptedFailure::transport)
                throw TransportError("scripted transport failure");
            if (r.delay_ms > timeout_ms)
                throw TimeoutError("scripted completion exceeded " +
                                   std::to_string(timeout_ms) + " ms");
            return make_response(request, r.response, r.delay_ms);
        }
        return make_response(request, default_response_, 0);
    }

private:
    struct Rule {
        int id;
        PatternKind kind;
        std::string pattern;        // lowercase for substring kind
        std::regex compiled;        // regex kind only
        std::string response;
        ScriptedFailure failure;
        Millis delay_ms;
    };

    int add_rule(const std::string& pattern, PatternKind kind, const std::string& response,
                 ScriptedFailure failure, Millis delay_ms, int position) {
        if (pattern.empty()) throw InvalidPattern("scripted rule: empty pattern");
        Rule r;
        r.kind = kind;
        r.pattern = kind == PatternKind::substring ? to_lower(pattern) : pattern;
        if (kind == PatternKind::regex) {
            try {
                r.compiled = std::regex(pattern, std::regex::icase);
            } catch (const std::regex_error& e) {
                throw InvalidPattern(std::string("scripted rule: bad regex: ") + e.what());
            }
        }
        r.response = response;
        r.failure = failure;
        r.delay_ms = delay_ms;
        std::lock_guard lock(mutex_);
        r.id = next_id_++;
        const int id = r.id;
        if (position < 0 || position >= static_cast<int>(rules_.size())) {
            rules_.push_back(std::move(r));
        } else {
            rules_.insert(rules_.begin() + position, std::move(r));
        }
        return id;
    }

    static bool matches(const Rule& r, const std::string& raw, const std::string& lowered) {
        if (r.kind == PatternKind::substring)
            return lowered.find(r.pattern) != std::string::npos;
        return std::regex_search(raw, r.compiled);
    }

    ModelResponse make_response(const ModelRequest& request, const std::string& text,
                                Millis latency) const {
        ModelResponse resp;
        resp.text = text;
        resp.prompt_tokens = approx_tokens(request.system) + approx_tokens(request.user_message);
        resp.completion_tokens = approx_tokens(text);
        resp.latency_ms = latency;
        return resp;
    }

    mutable std::mutex mutex_;
    std::string default_response_;
    std::vector<Rule> rules_;
    int next_id_ = 1;
};

/// One HTTP chat-completion call per complete(). Plain-http endpoints only;
/// TLS is terminated upstream of this process.
class RemoteBackend : public ModelBackend {
public:
    using ModelBackend::ModelBackend;

protected:
    ModelResponse do_complete(const ModelRequest& request, Millis timeout_ms) override {
        const BackendDescriptor& d = descriptor();
        auto [base, path] = split_endpoint(d.endpoint);

        nlohmann::json body;
        body[d.wire.model_field] = d.model_id;
        nlohmann::json messages = nlohmann::json::array();
        if (!request.system.empty())
            messages.push_back({{d.wire.role_field, "system"},
                                {d.wire.content_field, request.system}});
        messages.push_back({{d.wire.role_field, "user"},
                            {d.wire.content_field, request.user_message}});
        body[d.wire.messages_field] = std::move(messages);
        body[d.wire.temperature_field] = request.temperature;
        body[d.wire.max_tokens_field] = request.max_tokens;
        if (request.seed) body[d.wire.seed_field] = *request.seed;

        httplib::Client cli(base);
        cli.set_connection_timeout(0, static_cast<time_t>(timeout_ms) * 1000);
        cli.set_read_timeout(0, static_cast<time_t>(timeout_ms) * 1000);
        cli.set_write_timeout(0, static_cast<time_t>(timeout_ms) * 1000);
        httplib::Headers headers;
        if (!d.api_key.empty()) headers.emplace("Authorization", "Bearer " + d.api_key);

        const auto started = std::chrono::steady_clock::now();
        auto res = cli.Post(path, headers, body.dump(), "application/json");
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - started)
                                 .count();

        if (!res) {
            if (res.error() == httplib::Error::ConnectionTimeout || elapsed >= timeout_ms)
                throw TimeoutError("backend '" + d.name + "' timed out after " +
                                   std::to_string(elapsed) + " ms");
            throw TransportError("backend '" + d.name +
                                 "' unreachable: " + httplib::to_string(res.error()));
        }
        if (res->status < 200 || res->status >= 300)
            throw TransportError("backend '" + d.name + "' returned HTTP " +
                                 std::to_string(res->status));

        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw TransportError("backend '" + d.name +
                                 "' returned malformed JSON: " + e.what());
        }

        if (!d.pinned_fingerprint.empty()) {
            auto fp = lookup_path(parsed, d.wire.response_fingerprint_path);
            if (fp != nullptr && fp->is_string() &&
                fp->get<std::string>() != d.pinned_fingerprint)
                throw ConfigMismatch("backend '" + d.name + "' advertises fingerprint " +
                                     fp->get<std::string>() + ", pinned " +
                                     d.pinned_fingerprint);
        }

        auto text = lookup_path(parsed, d.wire.response_text_path);
        if (text == nullptr || !text->is_string())
            throw TransportError("backend '" + d.name + "' response is missing " +
                                 d.wire.response_text_path);

        ModelResponse resp;
        resp.text = text->get<std::string>();
        resp.latency_ms = elapsed;
        resp.prompt_tokens = approx_tokens(request.system) + approx_tokens(request.user_message);
        resp.completion_tokens = approx_tokens(resp.text);
        if (parsed.contains("usage") && parsed["usage"].is_object()) {
            const auto& u = parsed["usage"];
            if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number())
                resp.prompt_tokens = u["prompt_tokens"].get<std::int64_t>();
            if (u.contains("completion_tokens") && u["completion_tokens"].is_number())
                resp.completion_tokens = u["completion_tokens"].get<std::int64_t>();
        }
        return resp;
    }

private:
    static std::pair<std::string, std::string> split_endpoint(const std::string& url) {
        if (url.rfind("https://", 0) == 0)
            throw TransportError("https endpoints are not supported; terminate TLS upstream");
        if (url.rfind("http://", 0) != 0)
            throw TransportError("endpoint must be an http:// URL: " + url);
        auto slash = url.find('/', 7);
        if (slash == std::string::npos) return {url, "/"};
        return {url.substr(0, slash), url.substr(slash)};
    }

    // Dot path into the response JSON; numeric segments index arrays.
    static const nlohmann::json* lookup_path(const nlohmann::json& root,
                                             const std::string& path) {
        const nlohmann::json* cur = &root;
        std::size_t i = 0;
        while (i <= path.size()) {
            std::size_t dot = path.find('.', i);
            std::string seg = path.substr(i, dot == std::string::npos ? std::string::npos
                                                                      : dot - i);
            if (seg.empty()) return nullptr;
            bool numeric = std::all_of(seg.begin(), seg.end(), [](unsigned char c) {
                return std::isdigit(c);
            });
            if (numeric && cur->is_array()) {
                std::size_t idx = std::stoul(seg);
                if (idx >= cur->size()) return nullptr;
                cur = &(*cur)[idx];
            } else if (cur->is_object() && cur->contains(seg)) {
                cur = &(*cur)[seg];
            } else {
                return nullptr;
            }
            if (dot == std::string::npos) break;
            i = dot + 1;
        }
        return cur;
    }
};

inline BackendPtr make_backend(const BackendDescriptor& d,
                               const std::string& default_response = "") {
    if (d.kind == BackendKind::scripted)
        return std::make_shared<ScriptedBackend>(d, default_response);
    return std::make_shared<RemoteBackend>(d);
}

// The validation and generation prompts the pipeline renders. The security
// templates instruct a fixed verdict sentence format so verdicts stay
// machine-parseable.

inline PromptTemplate security_input_template() {
    return {"security-input",
            "You are an expert agent specialized in enforcing security policy for the "
            "organization. The policies are defined in a context, your job is to examine "
            "user requests and determine if these requests are compliant with the "
            "security policy.\n"
            "\n"
            "Here is a security policy rule:\n"
            "{{policy_context}}\n"
            "\n"
            "Your answer should be in the following format:\n"
            "The user request is rejected because it violates article # (The number of "
            "the article that demonstrates the violation)\n"
            "Or you answer can be:\n"
            "The user request is approved if it doesn't violate any defined policy.\n"
            "\n"
            "Here is a user request:\n"
            "{{user_request}}\n"
            "\n"
            "What will be your answer in accordance with the policies that have been "
            "defined in the context section."};
}

inline PromptTemplate security_output_template() {
    return {"security-output",
            "You are an expert agent specialized in enforcing security policy for the "
            "organization. The policies are defined in a context, your job is to examine "
            "candidate responses before delivery and determine if these responses are "
            "compliant with the security policy.\n"
            "\n"
            "Here is a security policy rule:\n"
            "{{policy_context}}\n"
            "\n"
            "Your answer should be in the following format:\n"
            "The response is rejected because it violates article # (The number of the "
            "article that demonstrates the violation)\n"
            "Or you answer can be:\n"
            "The response is approved if it doesn't violate any defined policy.\n"
            "\n"
            "Here is the original user request:\n"
            "{{user_request}}\n"
            "\n"
            "Here is the candidate response:\n"
            "{{candidate_response}}\n"
            "\n"
            "What will be your answer in accordance with the policies that have been "
            "defined in the context section."};
}

inline PromptTemplate business_answer_template() {
    return {"business-answer",
            "You are a helpful assistant for the organization. Answer the user's "
            "question accurately and concisely, using the organization's documents "
            "provided as context.\n"
            "\n"
            "Context:\n"
            "{{business_context}}\n"
            "\n"
            "{{violations_section}}"
            "Here is the user question:\n"
            "{{user_request}}"};
}

}  // namespace llmgate
