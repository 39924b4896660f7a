// gateway.hpp - HTTP service wrapping the pipeline
//
// Endpoints:
//   POST /v1/chat     {prompt}         -> {status, text, audit_id}
//   POST /v1/validate {text, schema?}  -> validation report
//   GET  /v1/healthz                   -> {ok, kb_entries, rails_forms, version}
//
// Errors: 400 malformed body, 413 over the size cap, 429 over the concurrency
// cap, 502 backend failure (the body still carries the fallback message).
#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>

#include "medrails/audit.hpp"
#include "medrails/pipeline.hpp"

namespace httplib {
class Server;
}

namespace medrails {

inline constexpr std::string_view kGatewayVersion = "0.3.0";

struct GatewayConfig {
    std::string listen_address = "127.0.0.1";
    int port = 8080;
    std::filesystem::path audit_log_path = "audit.jsonl";
    size_t request_size_cap = 1 << 20;  // bytes
    int concurrent_request_cap = 64;
    PipelineConfig pipeline;
};

// Config file is JSON; MEDRAILS_LISTEN ("host:port") and MEDRAILS_AUDIT
// override the listen address and audit path.
GatewayConfig load_gateway_config(const std::filesystem::path& path);
GatewayConfig parse_gateway_config(std::string_view json_text,
                                   const std::filesystem::path& base_dir);

class GatewayServer {
  public:
    // Fails fast: the pipeline must already be loaded. The sink receives the
    // full audit trail of every /v1/chat call before the response is sent.
    GatewayServer(GatewayConfig config, std::shared_ptr<Pipeline> pipeline,
                  std::shared_ptr<AuditSink> sink);
    ~GatewayServer();

    GatewayServer(const GatewayServer&) = delete;
    GatewayServer& operator=(const GatewayServer&) = delete;

    // Binds and serves on a background thread; returns the bound port.
    // Pass port 0 in the config to pick a free port.
    int start();
    void stop();

    // Blocking serve for the CLI.
    bool serve_forever();

    const GatewayConfig& config() const { return config_; }

  private:
    void install_routes();

    GatewayConfig config_;
    std::shared_ptr<Pipeline> pipeline_;
    std::shared_ptr<AuditSink> sink_;
    std::unique_ptr<httplib::Server> server_;
    std::thread serve_thread_;
    std::atomic<int> in_flight_{0};
    int bound_port_ = 0;
};

}  // namespace medrails
