#include "medrails/audit.hpp"

#include <chrono>

namespace medrails {

namespace {

int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

}  // namespace

void AuditTrail::add(std::string stage, int attempt, nlohmann::json data) {
    AuditRecord record;
    record.request_id = request_id;
    record.seq = static_cast<int>(records.size());
    record.stage = std::move(stage);
    record.ts_ms = now_ms();
    record.attempt = attempt;
    record.data = std::move(data);
    records.push_back(std::move(record));
}

bool AuditTrail::is_terminal(const AuditRecord& record) {
    if (record.stage == "deliver") return true;
    return record.data.is_object() && record.data.value("blocked", false);
}

std::string AuditTrail::to_jsonl() const {
    std::string out;
    for (const auto& r : records) {
        nlohmann::json line = {
            {"schema", kAuditSchema}, {"request_id", r.request_id}, {"seq", r.seq},
            {"stage", r.stage},       {"ts_ms", r.ts_ms},           {"attempt", r.attempt},
            {"data", r.data},
        };
        out += line.dump();
        out += '\n';
    }
    return out;
}

AuditTrail AuditTrail::from_jsonl(std::string_view text) {
    AuditTrail trail;
    size_t start = 0;
    while (start < text.size()) {
        size_t nl = text.find('\n', start);
        std::string_view line =
            nl == std::string_view::npos ? text.substr(start) : text.substr(start, nl - start);
        if (!line.empty()) {
            const nlohmann::json doc = nlohmann::json::parse(line);
            if (doc.at("schema").get<std::string>() != kAuditSchema)
                throw std::runtime_error("unsupported audit schema: " +
                                         doc.at("schema").get<std::string>());
            AuditRecord record;
            record.request_id = doc.at("request_id").get<std::string>();
            record.seq = doc.at("seq").get<int>();
            record.stage = doc.at("stage").get<std::string>();
            record.ts_ms = doc.at("ts_ms").get<int64_t>();
            record.attempt = doc.at("attempt").get<int>();
            record.data = doc.at("data");
            if (trail.request_id.empty()) trail.request_id = record.request_id;
            trail.records.push_back(std::move(record));
        }
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return trail;
}

void MemoryAuditSink::append(const AuditTrail& trail) {
    std::lock_guard<std::mutex> lock(mutex_);
    trails_.push_back(trail);
}

size_t MemoryAuditSink::trail_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return trails_.size();
}

std::vector<AuditTrail> MemoryAuditSink::trails() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return trails_;
}

std::string MemoryAuditSink::dump_jsonl() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::string out;
    for (const auto& t : trails_) out += t.to_jsonl();
    return out;
}

FileAuditSink::FileAuditSink(const std::filesystem::path& path)
    : out_(path, std::ios::app | std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open audit log for append: " + path.string());
}

void FileAuditSink::append(const AuditTrail& trail) {
    const std::string lines = trail.to_jsonl();
    std::lock_guard<std::mutex> lock(mutex_);
    out_ << lines;
    out_.flush();
    ++count_;
}

size_t FileAuditSink::trail_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return count_;
}

}  // namespace medrails
