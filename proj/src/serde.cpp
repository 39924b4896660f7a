#include "medrails/serde.hpp"

namespace medrails {

nlohmann::json verdict_to_json(const SafetyVerdict& verdict) {
    nlohmann::json evidence = nlohmann::json::array();
    for (const auto& e : verdict.evidence)
        evidence.push_back({{"rail", e.rail_id}, {"matched", e.matched}, {"similarity", e.similarity}});
    nlohmann::json out = {
        {"decision", std::string(decision_name(verdict.decision))},
        {"confidence", verdict.confidence},
        {"evidence", std::move(evidence)},
    };
    if (verdict.category) out["category"] = canonical_label(*verdict.category);
    return out;
}

nlohmann::json match_to_json(const MatchResult& match) {
    return {{"form", match.form_name}, {"similarity", match.similarity}, {"example", match.example}};
}

nlohmann::json rule_hit_to_json(const RuleHit& hit) {
    return {{"pattern", hit.pattern_id}, {"begin", hit.begin}, {"end", hit.end}};
}

nlohmann::json screen_report_to_json(const InputScreenReport& report) {
    nlohmann::json matches = nlohmann::json::array();
    for (const auto& m : report.matches) matches.push_back(match_to_json(m));
    nlohmann::json hits = nlohmann::json::array();
    for (const auto& h : report.rule_hits) hits.push_back(rule_hit_to_json(h));
    return {
        {"verdict", verdict_to_json(report.verdict)},
        {"matches", std::move(matches)},
        {"rule_hits", std::move(hits)},
    };
}

nlohmann::json kb_status_to_json(const KbStatus& status) {
    nlohmann::json out = {{"kind", std::string(kb_status_name(status.kind))}};
    if (status.kind != KbStatus::Kind::Unknown) out["canonical"] = status.canonical;
    if (status.kind == KbStatus::Kind::NearMiss) out["distance"] = status.distance;
    return out;
}

nlohmann::json term_match_to_json(const TermMatch& match) {
    return {
        {"surface", match.surface},
        {"begin", match.begin},
        {"end", match.end},
        {"normalized", match.normalized},
        {"status", kb_status_to_json(match.status)},
        {"looks_like_drug", match.looks_like_drug},
    };
}

nlohmann::json schema_report_to_json(const SchemaReport& report) {
    nlohmann::json violations = nlohmann::json::array();
    for (const auto& v : report.violations)
        violations.push_back({{"key", v.key}, {"detail", v.detail}});
    return {{"ok", report.ok}, {"violations", std::move(violations)}};
}

nlohmann::json validation_report_to_json(const ValidationReport& report) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : report.terms) terms.push_back(term_match_to_json(t));
    nlohmann::json invalid = nlohmann::json::array();
    for (const auto& t : report.invalid_terms) invalid.push_back(term_match_to_json(t));
    nlohmann::json out = {
        {"terms", std::move(terms)},
        {"invalid_terms", std::move(invalid)},
        {"attempt", report.attempt},
        {"disposition", std::string(disposition_name(report.disposition))},
    };
    if (report.schema) out["schema"] = schema_report_to_json(*report.schema);
    return out;
}

}  // namespace medrails
