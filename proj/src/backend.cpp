#include "medrails/backend.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace medrails {

std::string_view finish_reason_name(FinishReason r) {
    switch (r) {
        case FinishReason::Complete: return "complete";
        case FinishReason::Truncated: return "truncated";
        case FinishReason::BackendError: return "backend_error";
    }
    return "complete";
}

std::string render_context_block(const std::vector<ContextPassage>& passages) {
    if (passages.empty()) return {};
    std::string out;
    out += "=== retrieved-context (";
    out += kContextTemplateVersion;
    out += ") ===\n";
    for (const auto& p : passages) {
        out += "[" + p.source_id + "] " + p.text + "\n";
    }
    out += "=== end retrieved-context ===\n";
    return out;
}

MockBackend::MockBackend(std::vector<ScenarioEntry> scenarios)
    : scenarios_(std::move(scenarios)) {}

std::unique_ptr<MockBackend> MockBackend::from_json(std::string_view json_text) {
    const nlohmann::json doc = nlohmann::json::parse(json_text);
    std::vector<ScenarioEntry> scenarios;
    for (const auto& item : doc) {
        ScenarioEntry entry;
        entry.match = item.at("match").get<std::string>();
        entry.attempt = item.value("attempt", 0);
        entry.response = item.at("response").get<std::string>();
        entry.delay_ms = item.value("delay_ms", 0);
        scenarios.push_back(std::move(entry));
    }
    return std::make_unique<MockBackend>(std::move(scenarios));
}

std::unique_ptr<MockBackend> MockBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

GenerationResult MockBackend::generate(const GenerationRequest& request) {
    const auto start = std::chrono::steady_clock::now();

    const ScenarioEntry* chosen = nullptr;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        ++calls_;
        // First scenario pattern contained in the prompt decides which
        // per-pattern attempt counter advances.
        const ScenarioEntry* pattern_owner = nullptr;
        for (const auto& entry : scenarios_) {
            if (request.prompt.find(entry.match) != std::string::npos) {
                pattern_owner = &entry;
                break;
            }
        }
        if (pattern_owner) {
            const int attempt = ++attempts_by_match_[pattern_owner->match];
            for (const auto& entry : scenarios_) {
                if (entry.match == pattern_owner->match &&
                    (entry.attempt == 0 || entry.attempt == attempt)) {
                    chosen = &entry;
                    break;
                }
            }
        }
    }
    if (!chosen)
        throw ScenarioMissError("no scenario entry matches prompt (attempt tracking): \"" +
                                request.prompt.substr(0, 80) + "\"");

    if (chosen->delay_ms > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(chosen->delay_ms));

    GenerationResult result;
    result.text = chosen->response;
    result.backend_id = id();
    result.finish = FinishReason::Complete;
    result.latency = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::steady_clock::now() - start);
    return result;
}

int MockBackend::call_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return calls_;
}

void MockBackend::reset_counters() {
    std::lock_guard<std::mutex> lock(mutex_);
    attempts_by_match_.clear();
    calls_ = 0;
}

HttpBackend::HttpBackend(std::string host, int port, std::string path,
                         std::chrono::milliseconds timeout)
    : host_(std::move(host)), port_(port), path_(std::move(path)), timeout_(timeout) {}

std::string HttpBackend::id() const {
    return "http:" + host_ + ":" + std::to_string(port_);
}

GenerationResult HttpBackend::generate(const GenerationRequest& request) {
    const auto start = std::chrono::steady_clock::now();

    nlohmann::json body = {
        {"prompt", request.prompt},
        {"context", render_context_block(request.context_passages)},
        {"max_tokens", request.max_tokens},
        {"temperature", request.temperature},
    };
    const std::string payload = body.dump();

    httplib::Client client(host_, port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usecs =
        std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());

    httplib::Result res;
    for (int tries = 0; tries < 2; ++tries) {  // one retry on transport failure
        res = client.Post(path_, payload, "application/json");
        if (res) break;
    }
    if (!res) {
        if (res.error() == httplib::Error::ConnectionTimeout ||
            res.error() == httplib::Error::Read || res.error() == httplib::Error::Write)
            throw BackendTimeoutError("backend timed out: " + id());
        throw BackendUnavailableError("backend unreachable: " + id());
    }
    if (res->status != 200)
        throw BackendUnavailableError("backend returned HTTP " + std::to_string(res->status));

    const nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("text") || !reply.at("text").is_string())
        throw BackendUnavailableError("backend reply is not JSON with a string text field");

    GenerationResult result;
    result.text = reply.at("text").get<std::string>();
    result.backend_id = id();
    result.finish = FinishReason::Complete;
    result.latency = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::steady_clock::now() - start);
    return result;
}

}  // namespace medrails
