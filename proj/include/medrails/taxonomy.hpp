// taxonomy.hpp - risk taxonomies and the shared verdict vocabulary
#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace medrails {

// Seven hallucination risk classes, in table order.
enum class HallucinationType {
    Factual,
    LogicalReasoning,
    Extrinsic,
    Intrinsic,
    Diagnostic,
    Semantic,
    Therapeutic,
};

// Five jailbreak / security-vulnerability classes, in table order.
enum class JailbreakCategory {
    PromptInjection,
    ContentManipulationPolicyEvasion,
    ConfidentialityBreach,
    MaliciousMisuse,
    DecisionSupportUndermining,
};

inline constexpr std::array<HallucinationType, 7> kAllHallucinationTypes = {
    HallucinationType::Factual,          HallucinationType::LogicalReasoning,
    HallucinationType::Extrinsic,        HallucinationType::Intrinsic,
    HallucinationType::Diagnostic,       HallucinationType::Semantic,
    HallucinationType::Therapeutic,
};

inline constexpr std::array<JailbreakCategory, 5> kAllJailbreakCategories = {
    JailbreakCategory::PromptInjection,
    JailbreakCategory::ContentManipulationPolicyEvasion,
    JailbreakCategory::ConfidentialityBreach,
    JailbreakCategory::MaliciousMisuse,
    JailbreakCategory::DecisionSupportUndermining,
};

// A label is either a hallucination type or a jailbreak category.
using TaxonomyLabel = std::variant<HallucinationType, JailbreakCategory>;

// Stable machine labels (lower_snake_case). These strings appear verbatim in
// audit logs, datasets, and the wire protocol; do not change them.
std::string_view canonical_label(HallucinationType t);
std::string_view canonical_label(JailbreakCategory c);
std::string canonical_label(const TaxonomyLabel& label);

// Human-readable row headers, accepted as parse aliases.
std::string_view display_label(HallucinationType t);
std::string_view display_label(JailbreakCategory c);

class UnknownLabelError : public std::runtime_error {
  public:
    explicit UnknownLabelError(const std::string& text)
        : std::runtime_error("unknown safety label: \"" + text + "\""), label_(text) {}
    const std::string& label() const { return label_; }

  private:
    std::string label_;
};

// Exact match on the normalized form (trimmed, case-insensitive) against the
// canonical label or the table row header. Never fuzzy. Throws UnknownLabelError.
HallucinationType parse_hallucination_label(std::string_view text);
JailbreakCategory parse_jailbreak_label(std::string_view text);

enum class LabelKind { Hallucination, Jailbreak };
TaxonomyLabel parse_safety_label(LabelKind kind, std::string_view text);

// Tries jailbreak first, then hallucination; nullopt when neither matches.
std::optional<TaxonomyLabel> try_parse_any_label(std::string_view text);

enum class Decision { Allow, Block, Rewrite };

std::string_view decision_name(Decision d);

// One piece of supporting evidence behind a verdict.
struct VerdictEvidence {
    std::string rail_id;       // e.g. "input:knn", "input:denylist", "output:kb"
    std::string matched;       // form name, pattern id, or flagged term
    double similarity = 0.0;   // similarity or rule strength in [0,1]

    bool operator==(const VerdictEvidence&) const = default;
};

// Per-rail decision. Block requires a category and at least one evidence item.
struct SafetyVerdict {
    Decision decision = Decision::Allow;
    std::optional<TaxonomyLabel> category;
    double confidence = 0.0;  // in [0, 1]
    std::vector<VerdictEvidence> evidence;

    bool well_formed() const {
        if (confidence < 0.0 || confidence > 1.0) return false;
        if (decision == Decision::Block && (!category.has_value() || evidence.empty()))
            return false;
        return true;
    }
};

}  // namespace medrails
