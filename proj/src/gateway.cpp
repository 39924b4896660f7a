#include "medrails/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "medrails/serde.hpp"

namespace medrails {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& p) {
    return p.is_absolute() ? p : base / p;
}

// Guard that counts a request in flight for the lifetime of a handler call.
class InFlightGuard {
  public:
    InFlightGuard(std::atomic<int>& counter, int cap)
        : counter_(counter), admitted_(counter_.fetch_add(1) + 1 <= cap) {
        if (!admitted_) counter_.fetch_sub(1);
    }
    ~InFlightGuard() {
        if (admitted_) counter_.fetch_sub(1);
    }
    bool admitted() const { return admitted_; }

  private:
    std::atomic<int>& counter_;
    bool admitted_;
};

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

GatewayConfig parse_gateway_config(std::string_view json_text,
                                   const std::filesystem::path& base_dir) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("gateway config: ") + e.what());
    }

    GatewayConfig config;
    config.listen_address = doc.value("listen", std::string("127.0.0.1"));
    config.port = doc.value("port", 8080);
    config.audit_log_path = resolve(base_dir, doc.value("audit_log", std::string("audit.jsonl")));
    config.request_size_cap = doc.value("request_size_cap", static_cast<size_t>(1 << 20));
    config.concurrent_request_cap = doc.value("concurrent_request_cap", 64);
    if (config.request_size_cap < 1 || config.concurrent_request_cap < 1)
        throw ConfigError("gateway config: caps must be >= 1");

    const nlohmann::json pj = doc.contains("pipeline") ? doc.at("pipeline") : doc;
    PipelineConfig& p = config.pipeline;
    try {
        p.rails_path = resolve(base_dir, pj.at("rails").get<std::string>());
        p.drug_lexicon_path = resolve(base_dir, pj.at("drugs").get<std::string>());
        p.term_lexicon_path = resolve(base_dir, pj.at("terms").get<std::string>());
        p.denylist_path = resolve(base_dir, pj.at("denylist").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("gateway config: pipeline paths: ") + e.what());
    }
    if (pj.contains("suffixes"))
        p.suffix_path = resolve(base_dir, pj.at("suffixes").get<std::string>());
    if (pj.contains("k")) p.k = pj.at("k").get<int>();
    if (pj.contains("tau")) p.tau = pj.at("tau").get<double>();
    p.max_correction_attempts = pj.value("max_correction_attempts", 3);
    if (pj.contains("schema")) p.schema_path = resolve(base_dir, pj.at("schema").get<std::string>());
    if (pj.contains("fallback_message"))
        p.fallback_message = pj.at("fallback_message").get<std::string>();
    p.gen_max_tokens = pj.value("max_tokens", 512);
    p.gen_temperature = pj.value("temperature", 0.0);

    if (pj.contains("backend")) {
        const auto& bj = pj.at("backend");
        const std::string type = bj.value("type", std::string("mock"));
        if (type == "mock") {
            p.backend.type = BackendConfig::Type::Mock;
            p.backend.scenario_path = resolve(base_dir, bj.at("scenario").get<std::string>());
        } else if (type == "http") {
            p.backend.type = BackendConfig::Type::Http;
            p.backend.host = bj.value("host", std::string("127.0.0.1"));
            p.backend.port = bj.at("port").get<int>();
            p.backend.path = bj.value("path", std::string("/generate"));
            p.backend.timeout_ms = bj.value("timeout_ms", 5000);
        } else {
            throw ConfigError("gateway config: backend type must be mock or http");
        }
    }

    if (const char* listen = std::getenv("MEDRAILS_LISTEN")) {
        const std::string value(listen);
        const size_t colon = value.rfind(':');
        if (colon == std::string::npos)
            throw ConfigError("MEDRAILS_LISTEN must be host:port");
        config.listen_address = value.substr(0, colon);
        config.port = std::atoi(value.c_str() + colon + 1);
    }
    if (const char* audit = std::getenv("MEDRAILS_AUDIT")) config.audit_log_path = audit;
    return config;
}

GatewayConfig load_gateway_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open gateway config: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_gateway_config(buf.str(), path.parent_path());
}

GatewayServer::GatewayServer(GatewayConfig config, std::shared_ptr<Pipeline> pipeline,
                             std::shared_ptr<AuditSink> sink)
    : config_(std::move(config)),
      pipeline_(std::move(pipeline)),
      sink_(std::move(sink)),
      server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

GatewayServer::~GatewayServer() { stop(); }

void GatewayServer::install_routes() {
    server_->new_task_queue = [] { return new httplib::ThreadPool(32); };
    server_->set_payload_max_length(config_.request_size_cap);
    server_->set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            std::string what = "internal error";
            try {
                if (ep) std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                what = e.what();
            } catch (...) {
            }
            send_json(res, 500, {{"error", what}});
        });

    server_->Post("/v1/chat", [this](const httplib::Request& req, httplib::Response& res) {
        if (req.body.size() > config_.request_size_cap) {
            send_json(res, 413, {{"error", "request body exceeds size cap"}});
            return;
        }
        InFlightGuard guard(in_flight_, config_.concurrent_request_cap);
        if (!guard.admitted()) {
            send_json(res, 429, {{"error", "too many concurrent requests"}});
            return;
        }
        const nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.contains("prompt") || !body.at("prompt").is_string()) {
            send_json(res, 400, {{"error", "body must be JSON with a string prompt"}});
            return;
        }

        const GuardedRun run = pipeline_->run_guarded(body.at("prompt").get<std::string>());
        sink_->append(run.trail);  // before responding

        const nlohmann::json reply = {
            {"status", std::string(guarded_status_name(run.response.status))},
            {"text", run.response.text},
            {"audit_id", run.response.audit_id},
        };
        const bool backend_failure =
            run.response.failure == GuardedResponse::FailureReason::BackendError;
        send_json(res, backend_failure ? 502 : 200, reply);
    });

    server_->Post("/v1/validate", [this](const httplib::Request& req, httplib::Response& res) {
        if (req.body.size() > config_.request_size_cap) {
            send_json(res, 413, {{"error", "request body exceeds size cap"}});
            return;
        }
        const nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.contains("text") || !body.at("text").is_string()) {
            send_json(res, 400, {{"error", "body must be JSON with a string text"}});
            return;
        }
        std::optional<SchemaSpec> schema;
        if (body.contains("schema")) {
            try {
                schema = parse_schema_spec(body.at("schema").dump());
            } catch (const std::exception& e) {
                send_json(res, 400, {{"error", std::string("bad schema: ") + e.what()}});
                return;
            }
        }
        const ValidationReport report = pipeline_->validate_text(
            body.at("text").get<std::string>(), schema ? &*schema : nullptr);
        send_json(res, 200, validation_report_to_json(report));
    });

    server_->Get("/v1/healthz", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200,
                  {{"ok", true},
                   {"kb_entries", pipeline_->kb().entry_count()},
                   {"rails_forms", pipeline_->rails().forms.size()},
                   {"version", std::string(kGatewayVersion)}});
    });
}

int GatewayServer::start() {
    if (config_.port == 0) {
        bound_port_ = server_->bind_to_any_port(config_.listen_address);
        if (bound_port_ <= 0) throw ConfigError("cannot bind to " + config_.listen_address);
    } else {
        if (!server_->bind_to_port(config_.listen_address, config_.port))
            throw ConfigError("cannot bind to " + config_.listen_address + ":" +
                              std::to_string(config_.port));
        bound_port_ = config_.port;
    }
    serve_thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound_port_;
}

void GatewayServer::stop() {
    if (server_) server_->stop();
    if (serve_thread_.joinable()) serve_thread_.join();
}

bool GatewayServer::serve_forever() {
    return server_->listen(config_.listen_address, config_.port);
}

}  // namespace medrails
