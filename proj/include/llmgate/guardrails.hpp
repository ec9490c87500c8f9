#pragma once

#include <cctype>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "llmgate/common.hpp"
#include "llmgate/risk.hpp"

namespace llmgate {

class OversizeInput : public Error {
public:
    OversizeInput(std::size_t actual, std::size_t limit)
        : Error("input of " + std::to_string(actual) + " chars exceeds limit " +
                std::to_string(limit)),
          actual(actual),
          limit(limit) {}
    std::size_t actual;
    std::size_t limit;
};

class FloodPattern : public Error {
public:
    FloodPattern(std::string token, std::size_t run_length)
        : Error("token repeated " + std::to_string(run_length) + " times consecutively"),
          token(std::move(token)),
          run_length(run_length) {}
    std::string token;
    std::size_t run_length;
};

struct SanitizationLimits {
    std::size_t max_chars = 10'000;
    std::size_t max_repeated_token_run = 200;
    bool strip_control_chars = true;
};

enum class EncodingProfile { html, plain, json_string };

inline std::string encoding_profile_str(EncodingProfile p) {
    switch (p) {
        case EncodingProfile::html: return "html";
        case EncodingProfile::plain: return "plain";
        case EncodingProfile::json_string: return "json_string";
    }
    throw Error("invalid EncodingProfile");
}

inline EncodingProfile parse_encoding_profile(std::string_view s) {
    if (s == "html") return EncodingProfile::html;
    if (s == "plain") return EncodingProfile::plain;
    if (s == "json_string") return EncodingProfile::json_string;
    throw Error("unknown encoding profile: " + std::string(s));
}

enum class DetectorSeverity { advise, block };

enum class PostCheck { none, luhn };

struct DetectorRule {
    std::string name;
    std::string pattern;  // regex source, compiled case-insensitively
    RiskId risk_id = RiskId::LLM06;
    DetectorSeverity severity = DetectorSeverity::advise;
    PostCheck post_check = PostCheck::none;
};

struct Finding {
    std::string rule_name;
    RiskId risk_id = RiskId::LLM06;
    DetectorSeverity severity = DetectorSeverity::advise;
    std::size_t start = 0;
    std::size_t end = 0;  // exclusive
    std::string redacted_excerpt;
};

/// Strips control characters (other than newline and tab) when configured,
/// then rejects oversize inputs and single-token floods. Idempotent on
/// accepted inputs.
inline std::string sanitize_input(std::string_view text, const SanitizationLimits& limits) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        const auto uc = static_cast<unsigned char>(c);
        if (limits.strip_control_chars && uc < 0x20 && c != '\n' && c != '\t') continue;
        if (limits.strip_control_chars && uc == 0x7f) continue;
        out.push_back(c);
    }
    if (out.size() > limits.max_chars) throw OversizeInput(out.size(), limits.max_chars);

    std::string prev;
    std::string cur;
    std::size_t run = 0;
    auto flush = [&] {
        if (cur.empty()) return;
        if (cur == prev) {
            ++run;
        } else {
            prev = cur;
            run = 1;
        }
        if (run > limits.max_repeated_token_run) throw FloodPattern(cur, run);
        cur.clear();
    };
    for (char c : out) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            cur.push_back(c);
        }
    }
    flush();
    return out;
}

/// html escapes & < > " ' (ampersand first); json_string escapes per the
/// JSON string grammar; plain is the identity. Each profile is injective.
inline std::string encode_output(std::string_view text, EncodingProfile profile) {
    switch (profile) {
        case EncodingProfile::plain:
            return std::string(text);
        case EncodingProfile::html: {
            std::string out;
            out.reserve(text.size());
            for (char c : text) {
                switch (c) {
                    case '&': out += "&amp;"; break;
                    case '<': out += "&lt;"; break;
                    case '>': out += "&gt;"; break;
                    case '"': out += "&quot;"; break;
                    case '\'': out += "&#39;"; break;
                    default: out.push_back(c);
                }
            }
            return out;
        }
        case EncodingProfile::json_string: {
            static const char* hex = "0123456789abcdef";
            std::string out;
            out.reserve(text.size());
            for (char c : text) {
                const auto uc = static_cast<unsigned char>(c);
                switch (c) {
                    case '"': out += "\\\""; break;
                    case '\\': out += "\\\\"; break;
                    case '\b': out += "\\b"; break;
                    case '\f': out += "\\f"; break;
                    case '\n': out += "\\n"; break;
                    case '\r': out += "\\r"; break;
                    case '\t': out += "\\t"; break;
                    default:
                        if (uc < 0x20) {
                            out += "\\u00";
                            out.push_back(hex[uc >> 4]);
                            out.push_back(hex[uc & 0x0f]);
                        } else {
                            out.push_back(c);
                        }
                }
            }
            return out;
        }
    }
    throw Error("invalid EncodingProfile");
}

/// Mod-10 checksum over the digits embedded in the span.
inline bool luhn_check(std::string_view span) {
    std::vector<int> digits;
    for (char c : span)
        if (std::isdigit(static_cast<unsigned char>(c))) digits.push_back(c - '0');
    if (digits.size() < 2) return false;
    int sum = 0;
    bool dbl = false;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        int d = *it;
        if (dbl) {
            d *= 2;
            if (d > 9) d -= 9;
        }
        sum += d;
        dbl = !dbl;
    }
    return sum % 10 == 0;
}

/// Masks all but the last four characters of a matched span, capped at
/// 64 characters. Spans of four characters or fewer are fully masked.
inline std::string redact_span(std::string_view span) {
    std::string out;
    if (span.size() <= 4) {
        out.assign(span.size(), '*');
    } else {
        out.assign(span.size() - 4, '*');
        out.append(span.substr(span.size() - 4));
    }
    if (out.size() > 64) out = out.substr(out.size() - 64);
    return out;
}

class CompiledDetector {
public:
    explicit CompiledDetector(DetectorRule rule) : rule_(std::move(rule)) {
        try {
            regex_ = std::regex(rule_.pattern, std::regex::icase | std::regex::optimize);
        } catch (const std::regex_error& e) {
            throw InvalidPattern("detector rule '" + rule_.name +
                                 "': bad pattern: " + e.what());
        }
    }

    const DetectorRule& rule() const { return rule_; }

    // Non-overlapping matches in left-to-right order.
    std::vector<Finding> scan(std::string_view text) const {
        std::vector<Finding> findings;
        auto begin = std::cregex_iterator(text.data(), text.data() + text.size(), regex_);
        for (auto it = begin; it != std::cregex_iterator(); ++it) {
            const auto& m = *it;
            if (m.length(0) == 0) continue;
            std::string_view span = text.substr(m.position(0), m.length(0));
            if (rule_.post_check == PostCheck::luhn && !luhn_check(span)) continue;
            Finding f;
            f.rule_name = rule_.name;
            f.risk_id = rule_.risk_id;
            f.severity = rule_.severity;
            f.start = static_cast<std::size_t>(m.position(0));
            f.end = f.start + static_cast<std::size_t>(m.length(0));
            f.redacted_excerpt = redact_span(span);
            findings.push_back(std::move(f));
        }
        return findings;
    }

private:
    DetectorRule rule_;
    std::regex regex_;
};

inline std::vector<CompiledDetector> compile_rules(const std::vector<DetectorRule>& rules) {
    std::vector<CompiledDetector> out;
    out.reserve(rules.size());
    for (const DetectorRule& r : rules) out.emplace_back(r);
    return out;
}

inline std::vector<Finding> scan(std::string_view text,
                                 const std::vector<CompiledDetector>& rules) {
    std::vector<Finding> findings;
    for (const CompiledDetector& d : rules) {
        auto fs = d.scan(text);
        findings.insert(findings.end(), fs.begin(), fs.end());
    }
    return findings;
}

/// Default rule set: payment-card numbers gated by Luhn, credential keyword
/// proximity, and common prompt-injection phrasings. Patterns are
/// configuration; these are the shipped baseline.
inline std::vector<DetectorRule> default_detector_rules() {
    return {
        {"payment-card", R"(\d(?:[ -]?\d){12,15})", RiskId::LLM06,
         DetectorSeverity::block, PostCheck::luhn},
        {"credential-keywords",
         R"((password|passphrase|credential)s?\s+(for|of|to)\s)", RiskId::LLM06,
         DetectorSeverity::advise, PostCheck::none},
        {"prompt-injection-override",
         R"((ignore|disregard|forget)\s+(all\s+|the\s+|your\s+)?(previous|prior|above|earlier)\s+(instructions|rules|prompts))",
         RiskId::LLM01, DetectorSeverity::advise, PostCheck::none},
        {"prompt-injection-reveal",
         R"(reveal\s+(the\s+|your\s+)?(system\s+prompt|hidden\s+(rules|instructions)))",
         RiskId::LLM01, DetectorSeverity::advise, PostCheck::none},
    };
}

}  // namespace llmgate
