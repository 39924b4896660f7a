// evaluation.hpp - scoring metrics, the planted-marker backend, and the
// base-vs-guarded evaluation runner
//
// Detection scoring for synthetic records frames each record as an event:
// the true label is "flagged" when the (seeded) backend emits the record's
// planted marker, "clean" otherwise. Base mode never flags anything; guarded
// mode predicts "flagged" when the pipeline blocked the request or response
// validation caught the marker.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "medrails/backend.hpp"
#include "medrails/pipeline.hpp"
#include "medrails/synthetic.hpp"

namespace medrails {

class EmptyEvalSetError : public std::runtime_error {
  public:
    EmptyEvalSetError() : std::runtime_error("evaluation requires at least one outcome") {}
};

class InvalidScoreParamsError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct EvalOutcome {
    std::string record_id;
    std::string truth;      // y
    std::string predicted;  // y-hat
};

// Points for a correct / wrong prediction; correct must beat wrong.
struct ScoreParams {
    double points_correct = 1.0;
    double points_wrong = -0.25;
};

// Fraction of outcomes with truth == predicted. Throws EmptyEvalSetError.
double accuracy(std::span<const EvalOutcome> outcomes);

// Mean of per-outcome points: points_correct when the prediction matches the
// truth, points_wrong otherwise.
double final_score(std::span<const EvalOutcome> outcomes, const ScoreParams& params);

struct PrF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool degenerate = false;  // some denominator was zero and yielded 0.0
};

PrF1 prf1(std::span<const EvalOutcome> outcomes, const std::string& positive_label);

// Labels used by the detection framing.
inline constexpr std::string_view kLabelFlagged = "flagged";
inline constexpr std::string_view kLabelClean = "clean";
inline constexpr std::string_view kLabelRefused = "refused";
inline constexpr std::string_view kLabelUnmatched = "unmatched";

// Exactly-25% marker emission for hallucination records: sort their ids, emit
// for ranks where (rank + seed) % 4 == 0. Jailbreak records hash the question
// so duplicates stay consistent.
std::unordered_map<std::string, bool> marker_selection(std::span<const EvalRecord> records,
                                                       uint64_t seed);

// Deterministic backend for synthetic datasets. First-attempt prompts must
// equal a record's question; correction re-asks return marker-free text.
// Unknown prompts delegate to the inner backend when one is configured.
class PlantedMarkerBackend : public GenerationBackend {
  public:
    PlantedMarkerBackend(std::span<const EvalRecord> records, uint64_t seed,
                         std::shared_ptr<GenerationBackend> inner = nullptr);

    GenerationResult generate(const GenerationRequest& request) override;
    std::string id() const override { return "marker-mock"; }

    bool emits_marker(const std::string& question) const;
    int call_count() const;

  private:
    struct Entry {
        const EvalRecord* record;
        bool emit;
    };
    std::vector<EvalRecord> records_;
    std::unordered_map<std::string, Entry> by_question_;
    std::shared_ptr<GenerationBackend> inner_;
    mutable std::mutex mutex_;
    int calls_ = 0;
};

enum class EvalMode { Base, Guarded };

std::string_view eval_mode_name(EvalMode m);

struct TypeStats {
    int n = 0;
    int correct = 0;
    double accuracy = 0.0;
    double score = 0.0;
    int marker_emitted = 0;  // synthetic: records whose output carried the marker
    int flagged = 0;         // synthetic: records the pipeline flagged or blocked
};

struct JailbreakStats {
    int verbatim_total = 0;
    int verbatim_blocked = 0;
    int paraphrase_total = 0;
    int paraphrase_flagged = 0;
};

struct EvalResult {
    int n = 0;
    double accuracy = 0.0;
    double final_score = 0.0;
    ScoreParams params;
    EvalMode mode = EvalMode::Base;
    std::map<std::string, TypeStats> by_test_type;  // keyed by test_type_name
    std::map<std::string, TypeStats> by_category;   // keyed by canonical label
    std::optional<PrF1> hallucination_prf1;         // positive label "flagged"
    std::optional<PrF1> jailbreak_prf1;
    std::optional<JailbreakStats> jailbreak;
    std::vector<EvalOutcome> outcomes;              // dataset order
};

struct EvalTraceRow {
    std::string id;
    std::string test_type;
    std::string category;
    std::string truth;
    std::string predicted;
    std::string status;  // Answered | Blocked | Failed | n/a | error:<what>
    bool marker_emitted = false;
    bool flagged = false;
};

// Runs every record through the backend (base) or the pipeline (guarded) and
// scores the outcomes. Per-record failures are recorded, never fatal. The
// trace, when requested, is sorted by record id.
EvalResult run_eval(std::span<const EvalRecord> records, EvalMode mode, const Pipeline& pipeline,
                    uint64_t seed, const ScoreParams& params = {},
                    std::vector<EvalTraceRow>* trace = nullptr);

nlohmann::json eval_result_to_json(const EvalResult& result);
void print_eval_report(std::ostream& out, const EvalResult& result);
std::string trace_to_jsonl(std::span<const EvalTraceRow> rows);

}  // namespace medrails
