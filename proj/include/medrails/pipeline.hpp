// pipeline.hpp - end-to-end guarded flow: input screening, KB retrieval,
// generation, response validation, bounded correction loop, final gate
#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "medrails/audit.hpp"
#include "medrails/backend.hpp"
#include "medrails/input_rail.hpp"
#include "medrails/knowledge_base.hpp"
#include "medrails/output_rail.hpp"
#include "medrails/rail_dsl.hpp"

namespace medrails {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct BackendConfig {
    enum class Type { Mock, Http };
    Type type = Type::Mock;
    std::filesystem::path scenario_path;  // mock
    std::string host = "127.0.0.1";       // http
    int port = 0;
    std::string path = "/generate";
    int timeout_ms = 5000;
};

struct PipelineConfig {
    std::filesystem::path rails_path;
    std::filesystem::path drug_lexicon_path;
    std::filesystem::path term_lexicon_path;
    std::filesystem::path denylist_path;
    std::optional<std::filesystem::path> suffix_path;   // defaults built in
    std::optional<int> k;      // overrides rails params; default 5
    std::optional<double> tau; // overrides rails params; default 0.75
    int max_correction_attempts = 3;
    std::optional<std::filesystem::path> schema_path;
    BackendConfig backend;
    std::string fallback_message =
        "I can't provide a verified answer to that request. Please consult a clinician.";
    int gen_max_tokens = 512;
    double gen_temperature = 0.0;
};

struct GuardedResponse {
    enum class Status { Answered, Blocked, Failed };
    enum class FailureReason { None, AttemptsExhausted, BackendError };

    Status status = Status::Answered;
    std::string text;
    std::string audit_id;
    FailureReason failure = FailureReason::None;
};

std::string_view guarded_status_name(GuardedResponse::Status s);

struct GuardedRun {
    GuardedResponse response;
    AuditTrail trail;
};

// Shared state (rails, KB, index, scenario table) is immutable after load;
// one instance serves concurrent requests.
class Pipeline {
  public:
    // Loads every artifact up front; throws ConfigError on any failure.
    static Pipeline load(const PipelineConfig& config);

    // Same, but serves a caller-supplied backend instead of building one
    // from the config (the eval harness swaps in its scripted backend).
    static Pipeline load_with_backend(const PipelineConfig& config,
                                      std::shared_ptr<GenerationBackend> backend);

    Pipeline(RailSpec rails, KnowledgeBase kb, std::vector<DenyRule> deny_rules,
             std::vector<std::string> suffixes, std::optional<SchemaSpec> schema,
             std::shared_ptr<GenerationBackend> backend, const PipelineConfig& config);

    Pipeline(Pipeline&& other) noexcept;
    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;
    Pipeline& operator=(Pipeline&&) = delete;

    GuardedRun run_guarded(std::string_view prompt) const;

    // Response-side validation only, for the /v1/validate endpoint and CLI.
    ValidationReport validate_text(std::string_view text, const SchemaSpec* schema) const;

    const KnowledgeBase& kb() const { return kb_; }
    const RailSpec& rails() const { return rails_; }
    const std::vector<std::string>& suffixes() const { return suffixes_; }
    const SchemaSpec* schema() const { return schema_ ? &*schema_ : nullptr; }
    GenerationBackend& backend() const { return *backend_; }
    int max_correction_attempts() const { return max_correction_attempts_; }
    const std::string& fallback_message() const { return fallback_message_; }
    int k() const { return k_; }
    double tau() const { return tau_; }

  private:
    RailSpec rails_;
    KnowledgeBase kb_;
    std::vector<std::string> suffixes_;
    std::optional<SchemaSpec> schema_;
    std::shared_ptr<GenerationBackend> backend_;
    std::unique_ptr<InputRail> input_rail_;
    int k_;
    double tau_;
    int max_correction_attempts_;
    std::string fallback_message_;
    int gen_max_tokens_;
    double gen_temperature_;
    mutable std::atomic<uint64_t> next_request_ = 1;

    std::vector<ContextPassage> retrieve_passages(std::string_view prompt) const;
    std::string next_request_id() const;
};

}  // namespace medrails
