#pragma once

#include <array>
#include <set>
#include <string>
#include <string_view>

#include "llmgate/common.hpp"

namespace llmgate {

// OWASP Top 10 risk identifiers for LLM applications.
enum class RiskId {
    LLM01,  // prompt injection
    LLM02,  // insecure output handling
    LLM03,  // training data poisoning
    LLM04,  // model denial of service
    LLM05,  // supply chain vulnerabilities
    LLM06,  // sensitive information disclosure
    LLM07,  // insecure plugin design
    LLM08,  // excessive agency
    LLM09,  // overreliance
    LLM10,  // model theft
};

inline constexpr std::array<RiskId, 10> kAllRisks = {
    RiskId::LLM01, RiskId::LLM02, RiskId::LLM03, RiskId::LLM04, RiskId::LLM05,
    RiskId::LLM06, RiskId::LLM07, RiskId::LLM08, RiskId::LLM09, RiskId::LLM10,
};

inline std::string risk_id_str(RiskId r) {
    switch (r) {
        case RiskId::LLM01: return "LLM01";
        case RiskId::LLM02: return "LLM02";
        case RiskId::LLM03: return "LLM03";
        case RiskId::LLM04: return "LLM04";
        case RiskId::LLM05: return "LLM05";
        case RiskId::LLM06: return "LLM06";
        case RiskId::LLM07: return "LLM07";
        case RiskId::LLM08: return "LLM08";
        case RiskId::LLM09: return "LLM09";
        case RiskId::LLM10: return "LLM10";
    }
    throw Error("invalid RiskId");
}

inline RiskId parse_risk_id(std::string_view s) {
    for (RiskId r : kAllRisks)
        if (risk_id_str(r) == s) return r;
    throw Error("unknown risk id: " + std::string(s));
}

inline std::string risk_name(RiskId r) {
    switch (r) {
        case RiskId::LLM01: return "Prompt Injection";
        case RiskId::LLM02: return "Insecure Output Handling";
        case RiskId::LLM03: return "Training Data Poisoning";
        case RiskId::LLM04: return "Model Denial of Service";
        case RiskId::LLM05: return "Supply Chain Vulnerabilities";
        case RiskId::LLM06: return "Sensitive Information Disclosure";
        case RiskId::LLM07: return "Insecure Plugin Design";
        case RiskId::LLM08: return "Excessive Agency";
        case RiskId::LLM09: return "Overreliance";
        case RiskId::LLM10: return "Model Theft";
    }
    throw Error("invalid RiskId");
}

// Which side of the pipeline mitigates each risk. LLM01/LLM04/LLM05 are
// reduced by input validation and sanitization; LLM02/LLM06/LLM08/LLM09 by
// output validation and encoding. Fixed constants, not configuration.
struct RiskMapping {
    RiskId risk_id;
    std::string name;
    std::set<std::string> mitigating_controls;
};

inline const std::set<RiskId>& input_side_risks() {
    static const std::set<RiskId> s = {RiskId::LLM01, RiskId::LLM04, RiskId::LLM05};
    return s;
}

inline const std::set<RiskId>& output_side_risks() {
    static const std::set<RiskId> s = {RiskId::LLM02, RiskId::LLM06, RiskId::LLM08,
                                       RiskId::LLM09};
    return s;
}

inline RiskMapping risk_mapping(RiskId r) {
    RiskMapping m{r, risk_name(r), {}};
    if (input_side_risks().count(r)) {
        m.mitigating_controls.insert("input_validation");
        m.mitigating_controls.insert("input_sanitization");
    }
    if (output_side_risks().count(r)) {
        m.mitigating_controls.insert("output_validation");
        m.mitigating_controls.insert("output_encoding");
    }
    if (m.mitigating_controls.empty()) m.mitigating_controls.insert("access_control");
    return m;
}

}  // namespace llmgate
