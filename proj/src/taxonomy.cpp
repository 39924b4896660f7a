#include "medrails/taxonomy.hpp"

#include <algorithm>
#include <cctype>

namespace medrails {

namespace {

std::string normalize(std::string_view text) {
    size_t begin = 0;
    size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    std::string out;
    out.reserve(end - begin);
    for (size_t i = begin; i < end; ++i)
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
    return out;
}

}  // namespace

std::string_view canonical_label(HallucinationType t) {
    switch (t) {
        case HallucinationType::Factual: return "factual";
        case HallucinationType::LogicalReasoning: return "logical_reasoning";
        case HallucinationType::Extrinsic: return "extrinsic";
        case HallucinationType::Intrinsic: return "intrinsic";
        case HallucinationType::Diagnostic: return "diagnostic";
        case HallucinationType::Semantic: return "semantic";
        case HallucinationType::Therapeutic: return "therapeutic";
    }
    return "factual";
}

std::string_view canonical_label(JailbreakCategory c) {
    switch (c) {
        case JailbreakCategory::PromptInjection: return "prompt_injection";
        case JailbreakCategory::ContentManipulationPolicyEvasion:
            return "content_manipulation_policy_evasion";
        case JailbreakCategory::ConfidentialityBreach: return "confidentiality_breach";
        case JailbreakCategory::MaliciousMisuse: return "malicious_misuse";
        case JailbreakCategory::DecisionSupportUndermining:
            return "decision_support_undermining";
    }
    return "prompt_injection";
}

std::string canonical_label(const TaxonomyLabel& label) {
    return std::visit([](auto v) { return std::string(canonical_label(v)); }, label);
}

std::string_view display_label(HallucinationType t) {
    switch (t) {
        case HallucinationType::Factual: return "Factual Hallucinations";
        case HallucinationType::LogicalReasoning: return "Logical or Reasoning Hallucinations";
        case HallucinationType::Extrinsic: return "Extrinsic Hallucinations";
        case HallucinationType::Intrinsic: return "Intrinsic Hallucinations";
        case HallucinationType::Diagnostic: return "Diagnostic Hallucinations";
        case HallucinationType::Semantic: return "Semantic Hallucinations";
        case HallucinationType::Therapeutic: return "Therapeutic Hallucinations";
    }
    return "Factual Hallucinations";
}

std::string_view display_label(JailbreakCategory c) {
    switch (c) {
        case JailbreakCategory::PromptInjection: return "Prompt Injection Attacks";
        case JailbreakCategory::ContentManipulationPolicyEvasion:
            return "Content Manipulation and Policy Evasion";
        case JailbreakCategory::ConfidentialityBreach: return "Confidentiality Breaches";
        case JailbreakCategory::MaliciousMisuse: return "Model Misuse for Malicious Intent";
        case JailbreakCategory::DecisionSupportUndermining:
            return "Undermining Decision-Support Systems";
    }
    return "Prompt Injection Attacks";
}

HallucinationType parse_hallucination_label(std::string_view text) {
    const std::string key = normalize(text);
    for (HallucinationType t : kAllHallucinationTypes) {
        if (key == canonical_label(t) || key == normalize(display_label(t))) return t;
    }
    throw UnknownLabelError(std::string(text));
}

JailbreakCategory parse_jailbreak_label(std::string_view text) {
    const std::string key = normalize(text);
    for (JailbreakCategory c : kAllJailbreakCategories) {
        if (key == canonical_label(c) || key == normalize(display_label(c))) return c;
    }
    throw UnknownLabelError(std::string(text));
}

TaxonomyLabel parse_safety_label(LabelKind kind, std::string_view text) {
    if (kind == LabelKind::Hallucination) return parse_hallucination_label(text);
    return parse_jailbreak_label(text);
}

std::optional<TaxonomyLabel> try_parse_any_label(std::string_view text) {
    try {
        return TaxonomyLabel(parse_jailbreak_label(text));
    } catch (const UnknownLabelError&) {
    }
    try {
        return TaxonomyLabel(parse_hallucination_label(text));
    } catch (const UnknownLabelError&) {
    }
    return std::nullopt;
}

std::string_view decision_name(Decision d) {
    switch (d) {
        case Decision::Allow: return "allow";
        case Decision::Block: return "block";
        case Decision::Rewrite: return "rewrite";
    }
    return "allow";
}

}  // namespace medrails
