// backend.hpp - pluggable generation backends: a scripted mock for
// deterministic tests and an HTTP client for any real model endpoint
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace medrails {

struct ContextPassage {
    std::string source_id;
    std::string text;
};

struct GenerationRequest {
    std::string prompt;
    std::vector<ContextPassage> context_passages;
    std::string correction_of;  // prior response id; empty on the first attempt
    int max_tokens = 512;       // >= 1
    double temperature = 0.0;   // >= 0
};

enum class FinishReason { Complete, Truncated, BackendError };

std::string_view finish_reason_name(FinishReason r);

struct GenerationResult {
    std::string text;  // empty when finish == BackendError
    std::string backend_id;
    std::chrono::microseconds latency{0};
    FinishReason finish = FinishReason::Complete;
};

class BackendError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class BackendUnavailableError : public BackendError {
  public:
    using BackendError::BackendError;
};

class BackendTimeoutError : public BackendError {
  public:
    using BackendError::BackendError;
};

// Mock only: no scenario entry covers the request. Signals a broken fixture.
class ScenarioMissError : public BackendError {
  public:
    using BackendError::BackendError;
};

// Backends must tolerate concurrent generate() calls.
class GenerationBackend {
  public:
    virtual ~GenerationBackend() = default;
    virtual GenerationResult generate(const GenerationRequest& request) = 0;
    virtual std::string id() const = 0;
};

// Retrieved passages are concatenated under a fixed, versioned delimiter
// block; serving code places the block before the user prompt.
inline constexpr std::string_view kContextTemplateVersion = "context/v1";
std::string render_context_block(const std::vector<ContextPassage>& passages);

struct ScenarioEntry {
    std::string match;   // substring of the prompt; empty matches everything
    int attempt = 0;     // 1-based; 0 matches any attempt
    std::string response;
    int delay_ms = 0;    // artificial latency, for concurrency tests
};

// Scripted backend. The scenario table is immutable after load; per-pattern
// attempt counters make (prompt pattern, attempt) lookups deterministic for a
// fixed request sequence.
class MockBackend : public GenerationBackend {
  public:
    explicit MockBackend(std::vector<ScenarioEntry> scenarios);

    // Scenario file: JSON list of {match, attempt, response, delay_ms?}.
    static std::unique_ptr<MockBackend> from_file(const std::filesystem::path& path);
    static std::unique_ptr<MockBackend> from_json(std::string_view json_text);

    GenerationResult generate(const GenerationRequest& request) override;
    std::string id() const override { return "mock"; }

    int call_count() const;
    void reset_counters();

  private:
    std::vector<ScenarioEntry> scenarios_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, int> attempts_by_match_;
    int calls_ = 0;
};

// Single POST per request with a bounded timeout and one retry on transport
// failure. Wire format: JSON {prompt, context, max_tokens, temperature} in,
// {text} out.
class HttpBackend : public GenerationBackend {
  public:
    HttpBackend(std::string host, int port, std::string path = "/generate",
                std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));

    GenerationResult generate(const GenerationRequest& request) override;
    std::string id() const override;

  private:
    std::string host_;
    int port_;
    std::string path_;
    std::chrono::milliseconds timeout_;
};

}  // namespace medrails
