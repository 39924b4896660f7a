// medrails - medical LLM safety gateway CLI
//
// Subcommands: serve, validate, eval, synth, rails.
// Exit codes: 0 success, 1 validation findings, 2 usage or config errors.
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "medrails/evaluation.hpp"
#include "medrails/gateway.hpp"
#include "medrails/pipeline.hpp"
#include "medrails/serde.hpp"
#include "medrails/synthetic.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFindings = 1;
constexpr int kExitUsage = 2;

std::string read_stream(std::istream& in) {
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int cmd_serve(const std::string& config_path) {
    const medrails::GatewayConfig config = medrails::load_gateway_config(config_path);
    auto pipeline =
        std::make_shared<medrails::Pipeline>(medrails::Pipeline::load(config.pipeline));
    auto sink = std::make_shared<medrails::FileAuditSink>(config.audit_log_path);
    medrails::GatewayServer server(config, pipeline, sink);
    std::cerr << "medrails " << medrails::kGatewayVersion << " listening on "
              << config.listen_address << ":" << config.port << " (kb entries: "
              << pipeline->kb().entry_count() << ", rails forms: "
              << pipeline->rails().forms.size() << ")\n";
    return server.serve_forever() ? kExitOk : kExitUsage;
}

int cmd_validate(const std::string& drugs, const std::string& terms,
                 const std::string& suffixes, const std::string& schema_path,
                 const std::string& text_arg) {
    const medrails::KnowledgeBase kb = medrails::KnowledgeBase::load(drugs, terms);
    const std::vector<std::string> suffix_list =
        suffixes.empty() ? medrails::default_drug_suffixes()
                         : medrails::load_drug_suffixes(suffixes);
    std::optional<medrails::SchemaSpec> schema;
    if (!schema_path.empty()) schema = medrails::load_schema_spec(schema_path);

    const std::string text = text_arg.empty() ? read_stream(std::cin) : text_arg;
    const medrails::ValidationReport report = medrails::validate_response(
        text, kb, suffix_list, schema ? &*schema : nullptr, 1);

    std::cout << medrails::validation_report_to_json(report).dump(2) << "\n";
    return report.disposition == medrails::Disposition::Valid ? kExitOk : kExitFindings;
}

int cmd_eval(const std::string& dataset_path, const std::string& mode_name,
             const std::string& config_path, uint64_t seed, const std::string& trace_path,
             const std::string& out_path) {
    std::ifstream in(dataset_path, std::ios::binary);
    if (!in) {
        std::cerr << "cannot open dataset: " << dataset_path << "\n";
        return kExitUsage;
    }
    const auto records = medrails::records_from_jsonl(read_stream(in));

    const medrails::GatewayConfig gateway = medrails::load_gateway_config(config_path);
    // Non-synthetic records delegate to the configured backend when it loads.
    std::shared_ptr<medrails::GenerationBackend> inner;
    try {
        if (gateway.pipeline.backend.type == medrails::BackendConfig::Type::Mock) {
            inner = medrails::MockBackend::from_file(gateway.pipeline.backend.scenario_path);
        } else {
            inner = std::make_shared<medrails::HttpBackend>(
                gateway.pipeline.backend.host, gateway.pipeline.backend.port,
                gateway.pipeline.backend.path,
                std::chrono::milliseconds(gateway.pipeline.backend.timeout_ms));
        }
    } catch (const std::exception&) {
        inner = nullptr;
    }
    auto backend = std::make_shared<medrails::PlantedMarkerBackend>(records, seed, inner);
    const medrails::Pipeline pipeline =
        medrails::Pipeline::load_with_backend(gateway.pipeline, backend);

    const medrails::EvalMode mode =
        mode_name == "base" ? medrails::EvalMode::Base : medrails::EvalMode::Guarded;
    std::vector<medrails::EvalTraceRow> trace;
    const medrails::EvalResult result = medrails::run_eval(
        records, mode, pipeline, seed, {}, trace_path.empty() ? nullptr : &trace);

    medrails::print_eval_report(std::cout, result);
    if (!trace_path.empty()) {
        std::ofstream tout(trace_path, std::ios::binary);
        tout << medrails::trace_to_jsonl(trace);
    }
    if (!out_path.empty()) {
        std::ofstream jout(out_path, std::ios::binary);
        jout << medrails::eval_result_to_json(result).dump(2) << "\n";
    }
    return kExitOk;
}

int cmd_synth(int total, uint64_t seed, const std::string& out_path, double fraction) {
    medrails::SyntheticConfig config;
    config.total = total;
    config.hallucination_fraction = fraction;
    const auto records = medrails::generate_synthetic(config, seed);
    const std::string jsonl = medrails::records_to_jsonl(records);
    if (out_path == "-") {
        std::cout << jsonl;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            std::cerr << "cannot open output file: " << out_path << "\n";
            return kExitUsage;
        }
        out << jsonl;
    }
    std::cerr << "wrote " << records.size() << " records\n";
    return kExitOk;
}

int cmd_rails_check(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "cannot open rails file: " << path << "\n";
        return kExitUsage;
    }
    try {
        const medrails::RailSpec spec = medrails::parse_rail_source(read_stream(in));
        size_t examples = 0;
        for (const auto& form : spec.forms) examples += form.examples.size();
        std::cout << spec.forms.size() << " form" << (spec.forms.size() == 1 ? "" : "s") << ", "
                  << spec.flows.size() << " flow" << (spec.flows.size() == 1 ? "" : "s") << " ("
                  << examples << " examples)\n";
        return kExitOk;
    } catch (const medrails::RailParseError& e) {
        std::cerr << path << ":" << e.line() << ":" << e.col() << ": " << e.what() << "\n";
        return kExitFindings;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"medrails - medical LLM safety gateway"};
    app.require_subcommand(1);

    auto* serve = app.add_subcommand("serve", "run the HTTP gateway");
    std::string serve_config;
    serve->add_option("--config", serve_config, "gateway config JSON")->required();

    auto* validate = app.add_subcommand("validate", "validate text against the knowledge base");
    std::string v_drugs, v_terms, v_suffixes, v_schema, v_text;
    validate->add_option("--drugs", v_drugs, "drug lexicon CSV")->required();
    validate->add_option("--terms", v_terms, "medical term list")->required();
    validate->add_option("--suffixes", v_suffixes, "drug suffix list");
    validate->add_option("--schema", v_schema, "structured-output schema JSON");
    validate->add_option("--text", v_text, "text to validate (default: stdin)");

    auto* eval = app.add_subcommand("eval", "run the evaluation harness");
    std::string e_dataset, e_mode = "guarded", e_config, e_trace, e_out;
    uint64_t e_seed = 7;
    eval->add_option("--dataset", e_dataset, "JSONL dataset")->required();
    eval->add_option("--mode", e_mode, "base or guarded")
        ->check(CLI::IsMember({"base", "guarded"}));
    eval->add_option("--config", e_config, "gateway config JSON")->required();
    eval->add_option("--seed", e_seed, "selection seed (default 7)");
    eval->add_option("--trace", e_trace, "write per-record JSONL trace here");
    eval->add_option("--out", e_out, "write the JSON report here");

    auto* synth = app.add_subcommand("synth", "generate the synthetic corpus");
    int s_total = 16000;
    uint64_t s_seed = 7;
    double s_fraction = 0.875;
    std::string s_out;
    synth->add_option("--total", s_total, "record count (default 16000)");
    synth->add_option("--seed", s_seed, "generator seed (default 7)");
    synth->add_option("--fraction", s_fraction, "hallucination fraction (default 0.875)");
    synth->add_option("--out", s_out, "output JSONL path, or - for stdout")->required();

    auto* rails = app.add_subcommand("rails", "rail-definition tools");
    rails->require_subcommand(1);
    auto* rails_check = rails->add_subcommand("check", "parse a rails file and report");
    std::string r_path;
    rails_check->add_option("path", r_path, ".rails file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints usage or error text
        return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*serve) return cmd_serve(serve_config);
        if (*validate) return cmd_validate(v_drugs, v_terms, v_suffixes, v_schema, v_text);
        if (*eval) return cmd_eval(e_dataset, e_mode, e_config, e_seed, e_trace, e_out);
        if (*synth) return cmd_synth(s_total, s_seed, s_out, s_fraction);
        if (*rails_check) return cmd_rails_check(r_path);
    } catch (const medrails::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
