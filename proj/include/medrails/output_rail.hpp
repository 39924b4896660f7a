// output_rail.hpp - response-side validation: term extraction, KB lookup,
// structured-output schema checks, and correction-prompt construction
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "medrails/knowledge_base.hpp"

namespace medrails {

// One extracted term. Spans are byte offsets into the response; slicing the
// response at the span reproduces the surface string.
struct TermMatch {
    std::string surface;
    size_t begin = 0;  // byte offset, inclusive
    size_t end = 0;    // byte offset, exclusive
    std::string normalized;
    KbStatus status;
    bool looks_like_drug = false;

    bool operator==(const TermMatch&) const = default;
};

enum class FieldType { String, Integer, Number, Boolean };

struct FieldSpec {
    std::string name;
    FieldType type = FieldType::String;
    bool required = false;
};

struct SchemaSpec {
    std::vector<FieldSpec> fields;
};

struct SchemaViolation {
    enum class Kind { NotStructured, MissingKey, WrongType, UnexpectedKey };
    Kind kind;
    std::string key;     // empty for NotStructured
    std::string detail;

    bool operator==(const SchemaViolation&) const = default;
};

struct SchemaReport {
    bool ok = true;
    std::vector<SchemaViolation> violations;
};

enum class Disposition { Valid, NeedsCorrection, Failed };

std::string_view disposition_name(Disposition d);
std::string_view field_type_name(FieldType t);

struct ValidationReport {
    std::vector<TermMatch> terms;
    std::vector<TermMatch> invalid_terms;  // status Unknown or NearMiss
    int attempt = 1;
    Disposition disposition = Disposition::Valid;
    std::optional<SchemaReport> schema;
};

class NothingToCorrectError : public std::runtime_error {
  public:
    NothingToCorrectError()
        : std::runtime_error("validation report has no invalid terms or schema violations") {}
};

// Drug-name suffix heuristic. The list ships as a data file so it can be
// edited without code changes; the built-in default matches that file.
std::vector<std::string> default_drug_suffixes();
std::vector<std::string> load_drug_suffixes(const std::filesystem::path& path);

bool fires_drug_suffix(std::string_view normalized, const std::vector<std::string>& suffixes);

// Tokenize by word boundaries, longest-match against KB names/synonyms/terms,
// then run the drug-suffix heuristic over the leftover tokens. Never throws.
std::vector<TermMatch> extract_terms(std::string_view text, const KnowledgeBase& kb,
                                     const std::vector<std::string>& suffixes);

// extract_terms + invalid-term partition + optional schema check. Disposition
// is Valid or NeedsCorrection; Failed is assigned only by the pipeline.
ValidationReport validate_response(std::string_view response, const KnowledgeBase& kb,
                                   const std::vector<std::string>& suffixes,
                                   const SchemaSpec* schema, int attempt);

inline constexpr std::string_view kCorrectionTemplateVersion = "correction/v1";

// Deterministic re-ask prompt naming each problem. Throws NothingToCorrectError
// when the report carries neither invalid terms nor schema violations.
std::string build_correction_prompt(const ValidationReport& report,
                                    std::string_view original_prompt,
                                    std::string_view prior_response);

// Parses text as JSON and compares the top-level object against the schema.
// Non-JSON (or non-object) text yields a single NotStructured violation.
SchemaReport check_output_schema(std::string_view text, const SchemaSpec& schema);

// Schema file: JSON {"fields":[{"name":...,"type":...,"required":...}]}.
SchemaSpec load_schema_spec(const std::filesystem::path& path);
SchemaSpec parse_schema_spec(std::string_view json_text);

}  // namespace medrails
