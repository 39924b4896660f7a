// audit.hpp - per-request audit trail and append-only sinks
//
// Wire format: JSON Lines, one stage record per line, schema "audit/1".
// Fields: schema, request_id, seq, stage, ts_ms, attempt, data.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace medrails {

inline constexpr std::string_view kAuditSchema = "audit/1";

struct AuditRecord {
    std::string request_id;
    int seq = 0;
    std::string stage;  // input_screen|retrieve|generate|validate|correct|final_gate|deliver
    int64_t ts_ms = 0;
    int attempt = 0;    // generation attempt, 0 when not applicable
    nlohmann::json data;

    bool operator==(const AuditRecord&) const = default;
};

struct AuditTrail {
    std::string request_id;
    std::vector<AuditRecord> records;

    void add(std::string stage, int attempt, nlohmann::json data);

    // True when the record ends the request: a deliver stage, or a screening
    // stage whose data carries blocked=true.
    static bool is_terminal(const AuditRecord& record);

    std::string to_jsonl() const;
    static AuditTrail from_jsonl(std::string_view text);

    bool operator==(const AuditTrail&) const = default;
};

class AuditSink {
  public:
    virtual ~AuditSink() = default;
    // Must be safe for concurrent calls; a trail's records stay contiguous
    // and ordered within the sink.
    virtual void append(const AuditTrail& trail) = 0;
    virtual size_t trail_count() const = 0;
};

class MemoryAuditSink : public AuditSink {
  public:
    void append(const AuditTrail& trail) override;
    size_t trail_count() const override;
    std::vector<AuditTrail> trails() const;
    std::string dump_jsonl() const;

  private:
    mutable std::mutex mutex_;
    std::vector<AuditTrail> trails_;
};

class FileAuditSink : public AuditSink {
  public:
    explicit FileAuditSink(const std::filesystem::path& path);
    void append(const AuditTrail& trail) override;
    size_t trail_count() const override;

  private:
    mutable std::mutex mutex_;
    std::ofstream out_;
    size_t count_ = 0;
};

}  // namespace medrails
