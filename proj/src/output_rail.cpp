#include "medrails/output_rail.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace medrails {

namespace {

bool is_token_byte(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '\'';
}

struct Token {
    size_t begin;
    size_t end;
    std::string normalized;
};

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    size_t i = 0;
    while (i < text.size()) {
        if (!is_token_byte(text[i])) {
            ++i;
            continue;
        }
        size_t start = i;
        while (i < text.size() && is_token_byte(text[i])) ++i;
        std::string norm = normalize_term(text.substr(start, i - start));
        if (!norm.empty()) tokens.push_back({start, i, std::move(norm)});
    }
    return tokens;
}

std::string join_normalized(const std::vector<Token>& tokens, size_t first, size_t count) {
    std::string out = tokens[first].normalized;
    for (size_t j = 1; j < count; ++j) {
        out.push_back(' ');
        out += tokens[first + j].normalized;
    }
    return out;
}

bool json_value_matches(const nlohmann::json& value, FieldType type) {
    switch (type) {
        case FieldType::String: return value.is_string();
        case FieldType::Integer: return value.is_number_integer();
        case FieldType::Number: return value.is_number();
        case FieldType::Boolean: return value.is_boolean();
    }
    return false;
}

FieldType parse_field_type(const std::string& name) {
    if (name == "string") return FieldType::String;
    if (name == "integer") return FieldType::Integer;
    if (name == "number") return FieldType::Number;
    if (name == "boolean") return FieldType::Boolean;
    throw std::runtime_error("unknown schema field type: " + name);
}

}  // namespace

std::string_view disposition_name(Disposition d) {
    switch (d) {
        case Disposition::Valid: return "valid";
        case Disposition::NeedsCorrection: return "needs_correction";
        case Disposition::Failed: return "failed";
    }
    return "valid";
}

std::string_view field_type_name(FieldType t) {
    switch (t) {
        case FieldType::String: return "string";
        case FieldType::Integer: return "integer";
        case FieldType::Number: return "number";
        case FieldType::Boolean: return "boolean";
    }
    return "string";
}

std::vector<std::string> default_drug_suffixes() {
    return {"mab",    "nib",   "pril",  "sartan", "statin", "olol",
            "azole",  "cillin", "micin", "mycin",  "thrin",  "oxetine"};
}

std::vector<std::string> load_drug_suffixes(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open suffix file: " + path.string());
    std::vector<std::string> suffixes;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        std::string s = normalize_term(line);
        if (!s.empty()) suffixes.push_back(std::move(s));
    }
    if (suffixes.empty()) throw std::runtime_error("suffix file has no entries: " + path.string());
    return suffixes;
}

bool fires_drug_suffix(std::string_view normalized, const std::vector<std::string>& suffixes) {
    for (const auto& suffix : suffixes) {
        if (normalized.size() > suffix.size() && normalized.ends_with(suffix)) return true;
    }
    return false;
}

std::vector<TermMatch> extract_terms(std::string_view text, const KnowledgeBase& kb,
                                     const std::vector<std::string>& suffixes) {
    std::vector<TermMatch> matches;
    const auto tokens = tokenize(text);
    const size_t max_words = kb.max_phrase_words();

    size_t i = 0;
    while (i < tokens.size()) {
        // Longest dictionary match starting at token i.
        size_t matched_len = 0;
        KbStatus matched_status;
        std::string matched_norm;
        const size_t limit = std::min(max_words, tokens.size() - i);
        for (size_t len = limit; len >= 1; --len) {
            std::string phrase = join_normalized(tokens, i, len);
            if (auto hit = kb.lookup_exact(phrase)) {
                matched_len = len;
                matched_status = *hit;
                matched_norm = std::move(phrase);
                break;
            }
        }
        if (matched_len > 0) {
            TermMatch m;
            m.begin = tokens[i].begin;
            m.end = tokens[i + matched_len - 1].end;
            m.surface = std::string(text.substr(m.begin, m.end - m.begin));
            m.normalized = std::move(matched_norm);
            m.status = matched_status;
            m.looks_like_drug = fires_drug_suffix(m.normalized, suffixes);
            matches.push_back(std::move(m));
            i += matched_len;
            continue;
        }
        // Leftover token: drug-suffix heuristic makes it a lookup candidate.
        if (fires_drug_suffix(tokens[i].normalized, suffixes)) {
            TermMatch m;
            m.begin = tokens[i].begin;
            m.end = tokens[i].end;
            m.surface = std::string(text.substr(m.begin, m.end - m.begin));
            m.normalized = tokens[i].normalized;
            m.status = kb.lookup_term(tokens[i].normalized);
            m.looks_like_drug = true;
            matches.push_back(std::move(m));
        }
        ++i;
    }
    return matches;
}

ValidationReport validate_response(std::string_view response, const KnowledgeBase& kb,
                                   const std::vector<std::string>& suffixes,
                                   const SchemaSpec* schema, int attempt) {
    ValidationReport report;
    report.attempt = attempt;
    report.terms = extract_terms(response, kb, suffixes);
    for (const auto& term : report.terms)
        if (!term.status.valid()) report.invalid_terms.push_back(term);
    if (schema) report.schema = check_output_schema(response, *schema);

    const bool schema_ok = !report.schema || report.schema->ok;
    report.disposition = report.invalid_terms.empty() && schema_ok ? Disposition::Valid
                                                                   : Disposition::NeedsCorrection;
    return report;
}

std::string build_correction_prompt(const ValidationReport& report,
                                    std::string_view original_prompt,
                                    std::string_view prior_response) {
    const bool schema_bad = report.schema && !report.schema->ok;
    if (report.invalid_terms.empty() && !schema_bad) throw NothingToCorrectError();

    std::string out;
    out += "[";
    out += kCorrectionTemplateVersion;
    out += "] Your previous answer failed verification against the medical knowledge base.\n";
    out += "Problems found:\n";
    for (const auto& term : report.invalid_terms) {
        if (term.status.kind == KbStatus::Kind::NearMiss) {
            out += "- The term \"" + term.surface + "\" could not be verified; did you mean \"" +
                   term.status.canonical + "\"?\n";
        } else {
            out += "- The term \"" + term.surface +
                   "\" could not be verified against the medical knowledge base.\n";
        }
    }
    if (schema_bad) {
        for (const auto& v : report.schema->violations) {
            out += "- Structured output problem: " + v.detail + "\n";
        }
    }
    out += "Original question:\n";
    out += original_prompt;
    out += "\nYour previous answer:\n";
    out += prior_response;
    out += "\nRewrite your answer to the original question using only terminology that can be "
           "verified against the medical knowledge base, and fix every problem listed above.\n";
    return out;
}

SchemaReport check_output_schema(std::string_view text, const SchemaSpec& schema) {
    SchemaReport report;
    const nlohmann::json doc = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) {
        report.ok = false;
        report.violations.push_back({SchemaViolation::Kind::NotStructured, "",
                                     "not structured output (expected a JSON object)"});
        return report;
    }

    for (const auto& field : schema.fields) {
        auto it = doc.find(field.name);
        if (it == doc.end()) {
            if (field.required)
                report.violations.push_back({SchemaViolation::Kind::MissingKey, field.name,
                                             "missing required key \"" + field.name + "\""});
            continue;
        }
        if (!json_value_matches(*it, field.type))
            report.violations.push_back(
                {SchemaViolation::Kind::WrongType, field.name,
                 "key \"" + field.name + "\" has the wrong type (expected " +
                     std::string(field_type_name(field.type)) + ")"});
    }
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const bool declared =
            std::any_of(schema.fields.begin(), schema.fields.end(),
                        [&](const FieldSpec& f) { return f.name == it.key(); });
        if (!declared)
            report.violations.push_back({SchemaViolation::Kind::UnexpectedKey, it.key(),
                                         "unexpected key \"" + it.key() + "\""});
    }
    report.ok = report.violations.empty();
    return report;
}

SchemaSpec parse_schema_spec(std::string_view json_text) {
    const nlohmann::json doc = nlohmann::json::parse(json_text);
    SchemaSpec spec;
    for (const auto& field : doc.at("fields")) {
        FieldSpec f;
        f.name = field.at("name").get<std::string>();
        f.type = parse_field_type(field.at("type").get<std::string>());
        f.required = field.value("required", false);
        spec.fields.push_back(std::move(f));
    }
    return spec;
}

SchemaSpec load_schema_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schema file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_schema_spec(buf.str());
}

}  // namespace medrails
