// input_rail.hpp - prompt screening: deny-list regexes plus KNN matching
// against declared attack patterns, before any generation happens
#pragma once

#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "medrails/rail_dsl.hpp"
#include "medrails/semantic_matcher.hpp"
#include "medrails/taxonomy.hpp"

namespace medrails {

struct DenyRule {
    std::string id;       // "deny:<line>"
    std::string pattern;  // source text, for diagnostics
    std::regex regex;     // compiled case-insensitive
};

struct RuleHit {
    std::string pattern_id;
    size_t begin = 0;  // byte span of the first match
    size_t end = 0;
};

struct InputScreenReport {
    SafetyVerdict verdict;
    std::vector<MatchResult> matches;  // top-k KNN results, similarity descending
    std::vector<RuleHit> rule_hits;
    std::string message;  // refusal text or rewrite template from the matched flow
};

// Deny-list file: one ECMAScript regex per line, `#` comments, UTF-8.
// Patterns are matched case-insensitively. Throws on unreadable files or
// patterns that fail to compile (load time only; screening never throws).
std::vector<DenyRule> load_deny_rules(const std::filesystem::path& path);
std::vector<DenyRule> deny_rules_from_lines(std::string_view text);

// Stateless per call over an immutable index; safe for concurrent requests.
class InputRail {
  public:
    // Builds the KNN index from the spec's attack_pattern forms. A spec with
    // no attack forms screens with deny rules alone.
    InputRail(const RailSpec& spec, std::vector<DenyRule> deny_rules, int k, double tau);

    // Block when a deny rule fires or the top attack match clears tau;
    // Rewrite when the matched flow says rewrite. Never throws.
    InputScreenReport screen(std::string_view prompt) const;

    // Deny-list-only pass, reused by the pipeline's final gate.
    std::vector<RuleHit> scan_deny_rules(std::string_view text) const;

    double tau() const { return tau_; }
    size_t attack_example_count() const { return index_ ? index_->size() : 0; }

  private:
    RailSpec spec_;
    std::vector<DenyRule> deny_rules_;
    std::optional<MatcherIndex> index_;
    double tau_;
};

}  // namespace medrails
