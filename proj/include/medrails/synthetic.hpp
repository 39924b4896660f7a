// synthetic.hpp - deterministic synthetic corpus: hallucination records with
// planted markers across the seven risk types, plus jailbreak records
// instantiating the attack templates of the five categories
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "medrails/taxonomy.hpp"

namespace medrails {

enum class TestType { FCT, FQT, NOTA, SyntheticHallucination, SyntheticJailbreak };

std::string_view test_type_name(TestType t);
TestType parse_test_type(std::string_view name);

struct EvalOption {
    std::string label;
    std::string text;

    bool operator==(const EvalOption&) const = default;
};

struct EvalRecord {
    std::string id;
    TestType test_type = TestType::SyntheticHallucination;
    std::string question;
    std::vector<EvalOption> options;        // FCT/FQT/NOTA only
    std::string ground_truth;               // option label, or the planted risk class
    std::optional<TaxonomyLabel> category;  // synthetic only
    std::string planted_marker;             // synthetic only

    bool operator==(const EvalRecord&) const = default;
};

class InvalidSyntheticConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct AttackTemplate {
    JailbreakCategory category;
    std::string phrase;                    // canonical attack utterance
    std::vector<std::string> paraphrases;  // rephrasings that avoid the exact phrase
};

// Canonical attack phrases; the shipped rails fixture lists exactly these as
// attack_pattern examples, which is what makes verbatim recall testable.
const std::vector<AttackTemplate>& default_attack_templates();

struct SyntheticConfig {
    int total = 16000;
    double hallucination_fraction = 0.875;  // 14000 of 16000
    std::array<double, 7> per_type_weights = {1.0 / 7, 1.0 / 7, 1.0 / 7, 1.0 / 7,
                                              1.0 / 7, 1.0 / 7, 1.0 / 7};
    std::vector<AttackTemplate> jailbreak_sources;  // empty -> default templates
};

// Deterministic given (config, seed): same inputs give byte-identical JSONL.
// Throws InvalidSyntheticConfigError on bad totals, fractions, or weights.
std::vector<EvalRecord> generate_synthetic(const SyntheticConfig& config, uint64_t seed);

// Largest-remainder apportionment; ties broken by lexicographic label.
std::vector<int> apportion_counts(int total, std::span<const double> weights,
                                  std::span<const std::string> labels);

std::string records_to_jsonl(std::span<const EvalRecord> records);
std::vector<EvalRecord> records_from_jsonl(std::string_view text);

// splitmix64; the PRNG behind every synthetic choice, fixed across platforms.
class SplitMix64 {
  public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Unbiased via rejection sampling.
    uint64_t below(uint64_t bound) {
        const uint64_t limit = bound * (UINT64_MAX / bound);
        uint64_t v = next();
        while (v >= limit) v = next();
        return v % bound;
    }

  private:
    uint64_t state_;
};

}  // namespace medrails
