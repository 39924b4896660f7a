#include "medrails/pipeline.hpp"

#include <algorithm>
#include <set>

#include "medrails/serde.hpp"

namespace medrails {

namespace {

std::string read_text_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(std::string("cannot open ") + what + ": " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string substitute_original(std::string_view tmpl, std::string_view original) {
    std::string out(tmpl);
    const std::string placeholder = "{original}";
    size_t pos = out.find(placeholder);
    while (pos != std::string::npos) {
        out.replace(pos, placeholder.size(), original);
        pos = out.find(placeholder, pos + original.size());
    }
    return out;
}

}  // namespace

std::string_view guarded_status_name(GuardedResponse::Status s) {
    switch (s) {
        case GuardedResponse::Status::Answered: return "Answered";
        case GuardedResponse::Status::Blocked: return "Blocked";
        case GuardedResponse::Status::Failed: return "Failed";
    }
    return "Answered";
}

Pipeline Pipeline::load(const PipelineConfig& config) {
    return load_with_backend(config, nullptr);
}

Pipeline Pipeline::load_with_backend(const PipelineConfig& config,
                                     std::shared_ptr<GenerationBackend> backend_override) {
    RailSpec rails;
    try {
        rails = parse_rail_source(read_text_file(config.rails_path, "rails file"));
    } catch (const RailParseError& e) {
        throw ConfigError(std::string("rails file: ") + e.what());
    }

    KnowledgeBase kb;
    try {
        kb = KnowledgeBase::load(config.drug_lexicon_path, config.term_lexicon_path);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("lexicon: ") + e.what());
    }

    std::vector<DenyRule> deny_rules;
    try {
        deny_rules = load_deny_rules(config.denylist_path);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("deny-list: ") + e.what());
    }

    std::vector<std::string> suffixes;
    try {
        suffixes = config.suffix_path ? load_drug_suffixes(*config.suffix_path)
                                      : default_drug_suffixes();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("drug suffixes: ") + e.what());
    }

    std::optional<SchemaSpec> schema;
    if (config.schema_path) {
        try {
            schema = load_schema_spec(*config.schema_path);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("schema: ") + e.what());
        }
    }

    std::shared_ptr<GenerationBackend> backend = std::move(backend_override);
    if (!backend) {
        try {
            if (config.backend.type == BackendConfig::Type::Mock) {
                backend = MockBackend::from_file(config.backend.scenario_path);
            } else {
                backend = std::make_shared<HttpBackend>(
                    config.backend.host, config.backend.port, config.backend.path,
                    std::chrono::milliseconds(config.backend.timeout_ms));
            }
        } catch (const std::exception& e) {
            throw ConfigError(std::string("backend: ") + e.what());
        }
    }

    return Pipeline(std::move(rails), std::move(kb), std::move(deny_rules), std::move(suffixes),
                    std::move(schema), std::move(backend), config);
}

Pipeline::Pipeline(RailSpec rails, KnowledgeBase kb, std::vector<DenyRule> deny_rules,
                   std::vector<std::string> suffixes, std::optional<SchemaSpec> schema,
                   std::shared_ptr<GenerationBackend> backend, const PipelineConfig& config)
    : rails_(std::move(rails)),
      kb_(std::move(kb)),
      suffixes_(std::move(suffixes)),
      schema_(std::move(schema)),
      backend_(std::move(backend)),
      max_correction_attempts_(config.max_correction_attempts),
      fallback_message_(config.fallback_message),
      gen_max_tokens_(config.gen_max_tokens),
      gen_temperature_(config.gen_temperature) {
    if (max_correction_attempts_ < 0)
        throw ConfigError("max_correction_attempts must be >= 0");
    if (gen_max_tokens_ < 1) throw ConfigError("max_tokens must be >= 1");
    if (gen_temperature_ < 0.0) throw ConfigError("temperature must be >= 0");
    // Matcher params: defaults, then rails `param` lines, then explicit config.
    k_ = config.k.value_or(rails_.params.k.value_or(kDefaultK));
    tau_ = config.tau.value_or(rails_.params.tau.value_or(kDefaultTau));
    input_rail_ = std::make_unique<InputRail>(rails_, std::move(deny_rules), k_, tau_);
}

Pipeline::Pipeline(Pipeline&& other) noexcept
    : rails_(std::move(other.rails_)),
      kb_(std::move(other.kb_)),
      suffixes_(std::move(other.suffixes_)),
      schema_(std::move(other.schema_)),
      backend_(std::move(other.backend_)),
      input_rail_(std::move(other.input_rail_)),
      k_(other.k_),
      tau_(other.tau_),
      max_correction_attempts_(other.max_correction_attempts_),
      fallback_message_(std::move(other.fallback_message_)),
      gen_max_tokens_(other.gen_max_tokens_),
      gen_temperature_(other.gen_temperature_),
      next_request_(other.next_request_.load()) {}

std::string Pipeline::next_request_id() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "req-%06llu",
                  static_cast<unsigned long long>(next_request_.fetch_add(1)));
    return buf;
}

std::vector<ContextPassage> Pipeline::retrieve_passages(std::string_view prompt) const {
    std::vector<ContextPassage> passages;
    std::set<std::string> seen;
    for (const auto& match : extract_terms(prompt, kb_, suffixes_)) {
        if (!match.status.valid()) continue;
        const std::string& canonical = match.status.canonical;
        if (!seen.insert(canonical).second) continue;
        ContextPassage passage;
        passage.source_id = "kb:" + canonical;
        passage.text = canonical;
        for (const auto& drug : kb_.drugs()) {
            if (drug.name == canonical && !drug.synonyms.empty()) {
                passage.text += " (synonyms: ";
                for (size_t i = 0; i < drug.synonyms.size(); ++i) {
                    if (i) passage.text += ", ";
                    passage.text += drug.synonyms[i];
                }
                passage.text += ")";
                break;
            }
        }
        passages.push_back(std::move(passage));
    }
    return passages;
}

ValidationReport Pipeline::validate_text(std::string_view text, const SchemaSpec* schema) const {
    return validate_response(text, kb_, suffixes_, schema, 1);
}

GuardedRun Pipeline::run_guarded(std::string_view prompt) const {
    GuardedRun run;
    run.trail.request_id = next_request_id();
    run.response.audit_id = run.trail.request_id;

    // Stage 1: input screen. A blocked request performs zero backend calls.
    // The raw prompt is recorded here in full; the trail is operator-side
    // and nothing from it is echoed to the client.
    const InputScreenReport screen = input_rail_->screen(prompt);
    {
        nlohmann::json data = screen_report_to_json(screen);
        data["prompt"] = std::string(prompt);
        data["blocked"] = screen.verdict.decision == Decision::Block;
        run.trail.add("input_screen", 0, std::move(data));
    }
    if (screen.verdict.decision == Decision::Block) {
        run.response.status = GuardedResponse::Status::Blocked;
        run.response.text = screen.message.empty() ? fallback_message_ : screen.message;
        return run;
    }

    std::string working_prompt(prompt);
    if (screen.verdict.decision == Decision::Rewrite && !screen.message.empty())
        working_prompt = substitute_original(screen.message, prompt);

    // Stage 2: retrieval over the prompt.
    const std::vector<ContextPassage> passages = retrieve_passages(working_prompt);
    {
        nlohmann::json ids = nlohmann::json::array();
        for (const auto& p : passages) ids.push_back(p.source_id);
        run.trail.add("retrieve", 0, {{"passages", std::move(ids)}});
    }

    // Stages 3..: generate / validate / correct, bounded by the attempt cap.
    const int max_generations = 1 + max_correction_attempts_;
    std::string current_prompt = working_prompt;
    std::string prior_response_id;

    for (int attempt = 1; attempt <= max_generations; ++attempt) {
        GenerationRequest request;
        request.prompt = current_prompt;
        request.context_passages = passages;
        request.correction_of = prior_response_id;
        request.max_tokens = gen_max_tokens_;
        request.temperature = gen_temperature_;

        GenerationResult result;
        try {
            result = backend_->generate(request);
        } catch (const std::exception& e) {
            // BackendError or anything else a plugged-in backend throws:
            // the run fails closed instead of crashing the request.
            run.trail.add("generate", attempt,
                          {{"backend", backend_->id()},
                           {"finish", "backend_error"},
                           {"error", e.what()}});
            run.trail.add("deliver", attempt,
                          {{"status", "Failed"}, {"reason", "backend_error"}});
            run.response.status = GuardedResponse::Status::Failed;
            run.response.failure = GuardedResponse::FailureReason::BackendError;
            run.response.text = fallback_message_;
            return run;
        }
        prior_response_id = run.trail.request_id + ":g" + std::to_string(attempt);
        run.trail.add("generate", attempt,
                      {{"backend", result.backend_id},
                       {"finish", std::string(finish_reason_name(result.finish))},
                       {"response_id", prior_response_id},
                       {"latency_us", result.latency.count()},
                       {"text", result.text}});

        ValidationReport report =
            validate_response(result.text, kb_, suffixes_, schema_ ? &*schema_ : nullptr, attempt);
        run.trail.add("validate", attempt, validation_report_to_json(report));

        if (report.disposition == Disposition::Valid) {
            // Final gate: deny-list re-screen of the outgoing text.
            const auto gate_hits = input_rail_->scan_deny_rules(result.text);
            nlohmann::json gate = nlohmann::json::array();
            for (const auto& hit : gate_hits) gate.push_back(rule_hit_to_json(hit));
            const bool gate_blocked = !gate_hits.empty();
            run.trail.add("final_gate", attempt,
                          {{"rule_hits", std::move(gate)}, {"blocked", gate_blocked}});
            if (gate_blocked) {
                run.response.status = GuardedResponse::Status::Blocked;
                run.response.text = fallback_message_;
                return run;
            }
            run.trail.add("deliver", attempt, {{"status", "Answered"}});
            run.response.status = GuardedResponse::Status::Answered;
            run.response.text = result.text;
            return run;
        }

        if (attempt == max_generations) break;

        const std::string correction =
            build_correction_prompt(report, working_prompt, result.text);
        run.trail.add("correct", attempt,
                      {{"template", std::string(kCorrectionTemplateVersion)},
                       {"invalid_terms", validation_report_to_json(report)["invalid_terms"]},
                       {"prompt", correction}});
        current_prompt = correction;
    }

    run.trail.add("deliver", max_generations,
                  {{"status", "Failed"}, {"reason", "attempts_exhausted"}});
    run.response.status = GuardedResponse::Status::Failed;
    run.response.failure = GuardedResponse::FailureReason::AttemptsExhausted;
    run.response.text = fallback_message_;
    return run;
}

}  // namespace medrails
