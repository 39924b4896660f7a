// serde.hpp - JSON views of report types, shared by the audit trail,
// the HTTP wire protocol, and the CLI
#pragma once

#include <json.hpp>

#include "medrails/input_rail.hpp"
#include "medrails/output_rail.hpp"
#include "medrails/semantic_matcher.hpp"
#include "medrails/taxonomy.hpp"

namespace medrails {

nlohmann::json verdict_to_json(const SafetyVerdict& verdict);
nlohmann::json match_to_json(const MatchResult& match);
nlohmann::json rule_hit_to_json(const RuleHit& hit);
nlohmann::json screen_report_to_json(const InputScreenReport& report);
nlohmann::json kb_status_to_json(const KbStatus& status);
nlohmann::json term_match_to_json(const TermMatch& match);
nlohmann::json schema_report_to_json(const SchemaReport& report);
nlohmann::json validation_report_to_json(const ValidationReport& report);

}  // namespace medrails
