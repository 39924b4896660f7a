#include <doctest.h>

#include <json.hpp>

#include "medrails/output_rail.hpp"
#include "support.hpp"

using namespace medrails;

namespace {

const std::vector<std::string>& suffixes() {
    static const std::vector<std::string> s = default_drug_suffixes();
    return s;
}

}  // namespace

TEST_CASE("dictionary hit extracts a known term") {
    const auto matches = extract_terms("Take aspirin for pain", testsupport::fixture_kb(),
                                       suffixes());
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].surface == "aspirin");
    CHECK(matches[0].status == KbStatus::known("aspirin"));
    CHECK(matches[0].begin == 5);
    CHECK(matches[0].end == 12);
}

TEST_CASE("fabricated drug fires the suffix heuristic and stays unknown") {
    const auto matches = extract_terms("Suggesting hydromethrin for treating hypertension",
                                       testsupport::fixture_kb(), suffixes());
    REQUIRE(matches.size() == 2);
    CHECK(matches[0].surface == "hydromethrin");
    CHECK(matches[0].looks_like_drug);
    CHECK(matches[0].status.kind == KbStatus::Kind::Unknown);
    CHECK(matches[1].surface == "hypertension");
    CHECK(matches[1].status == KbStatus::known("hypertension"));
}

TEST_CASE("empty text extracts nothing") {
    CHECK(extract_terms("", testsupport::fixture_kb(), suffixes()).empty());
}

TEST_CASE("multiword terms match longest-first") {
    const auto matches = extract_terms("History of heart failure and atrial fibrillation.",
                                       testsupport::fixture_kb(), suffixes());
    REQUIRE(matches.size() == 2);
    CHECK(matches[0].normalized == "heart failure");
    CHECK(matches[1].normalized == "atrial fibrillation");

    const auto drug = extract_terms("Start potassium chloride supplements",
                                    testsupport::fixture_kb(), suffixes());
    REQUIRE(drug.size() == 1);
    CHECK(drug[0].normalized == "potassium chloride");
    CHECK(drug[0].status == KbStatus::known("potassium chloride"));
}

TEST_CASE("spans are non-overlapping, sorted, and slice back to the surface") {
    SplitMix64 rng(77);
    const std::vector<std::string> words = {"aspirin",     "hydromethrin", "and", "for",
                                            "hypertension", "take",        "mg",  "velmomab",
                                            "heart",        "failure",     "..."};
    for (int i = 0; i < 100; ++i) {
        std::string text;
        const size_t n = rng.below(20);
        for (size_t j = 0; j < n; ++j) {
            text += words[rng.below(words.size())];
            text += rng.below(4) == 0 ? ", " : " ";
        }
        const auto matches = extract_terms(text, testsupport::fixture_kb(), suffixes());
        size_t prev_end = 0;
        for (const auto& m : matches) {
            CHECK(m.begin >= prev_end);
            CHECK(m.end > m.begin);
            CHECK(text.substr(m.begin, m.end - m.begin) == m.surface);
            prev_end = m.end;
        }
    }
}

TEST_CASE("extraction and validation never throw on arbitrary bytes") {
    const KnowledgeBase& kb = testsupport::fixture_kb();
    SchemaSpec schema;
    schema.fields = {{"diagnosis", FieldType::String, true}};
    SplitMix64 rng(57);
    for (int i = 0; i < 200; ++i) {
        std::string junk;
        const size_t len = rng.below(400);
        for (size_t j = 0; j < len; ++j) junk.push_back(static_cast<char>(rng.below(256)));
        CHECK_NOTHROW(extract_terms(junk, kb, suffixes()));
        CHECK_NOTHROW(validate_response(junk, kb, suffixes(), &schema, 1));
        CHECK_NOTHROW(check_output_schema(junk, schema));
    }
}

TEST_CASE("validation partitions invalid terms and sets the disposition") {
    const KnowledgeBase& kb = testsupport::fixture_kb();

    const ValidationReport valid = validate_response("Take aspirin for hypertension.", kb,
                                                     suffixes(), nullptr, 1);
    CHECK(valid.disposition == Disposition::Valid);
    CHECK(valid.invalid_terms.empty());

    const ValidationReport bad = validate_response(
        "Suggesting hydromethrin for treating hypertension", kb, suffixes(), nullptr, 1);
    CHECK(bad.disposition == Disposition::NeedsCorrection);
    REQUIRE(bad.invalid_terms.size() == 1);
    CHECK(bad.invalid_terms[0].normalized == "hydromethrin");
}

TEST_CASE("validation is idempotent") {
    const KnowledgeBase& kb = testsupport::fixture_kb();
    const char* text = "Suggesting hydromethrin and asprinolol for angina";
    const ValidationReport a = validate_response(text, kb, suffixes(), nullptr, 2);
    const ValidationReport b = validate_response(text, kb, suffixes(), nullptr, 2);
    CHECK(a.terms == b.terms);
    CHECK(a.invalid_terms == b.invalid_terms);
    CHECK(a.disposition == b.disposition);
}

TEST_CASE("schema violations force NeedsCorrection") {
    SchemaSpec schema;
    schema.fields = {{"diagnosis", FieldType::String, true}};
    const ValidationReport report = validate_response("{\"confidence\": 0.9}",
                                                      testsupport::fixture_kb(), suffixes(),
                                                      &schema, 1);
    CHECK(report.disposition == Disposition::NeedsCorrection);
    REQUIRE(report.schema.has_value());
    CHECK_FALSE(report.schema->ok);
}

TEST_CASE("correction prompt names each problem") {
    const KnowledgeBase& kb = testsupport::fixture_kb();
    ValidationReport report = validate_response(
        "Suggesting hydromethrin for treating hypertension", kb, suffixes(), nullptr, 1);
    const std::string prompt =
        build_correction_prompt(report, "How do I treat hypertension?", "prior answer");
    CHECK(prompt.find("The term \"hydromethrin\" could not be verified") != std::string::npos);
    CHECK(prompt.find("How do I treat hypertension?") != std::string::npos);
    CHECK(prompt.find("prior answer") != std::string::npos);
    CHECK(prompt.find(kCorrectionTemplateVersion) != std::string::npos);
}

TEST_CASE("near-miss corrections suggest the intended term") {
    ValidationReport report;
    report.disposition = Disposition::NeedsCorrection;
    TermMatch match;
    match.surface = "asprin";
    match.normalized = "asprin";
    match.status = KbStatus::near_miss("aspirin", 1);
    report.invalid_terms.push_back(match);
    const std::string prompt = build_correction_prompt(report, "q", "r");
    CHECK(prompt.find("did you mean \"aspirin\"?") != std::string::npos);
}

TEST_CASE("a valid report has nothing to correct") {
    ValidationReport report;
    report.disposition = Disposition::Valid;
    CHECK_THROWS_AS(build_correction_prompt(report, "q", "r"), NothingToCorrectError);
}

TEST_CASE("schema check accepts conforming JSON") {
    SchemaSpec schema;
    schema.fields = {{"diagnosis", FieldType::String, true},
                     {"confidence", FieldType::Number, false}};
    const SchemaReport ok = check_output_schema("{\"diagnosis\":\"flu\",\"confidence\":0.9}",
                                                schema);
    CHECK(ok.ok);
    CHECK(ok.violations.empty());
}

TEST_CASE("schema check reports wrong types and missing keys by flag") {
    SchemaSpec optional_conf;
    optional_conf.fields = {{"diagnosis", FieldType::String, true},
                            {"confidence", FieldType::Number, false}};
    const SchemaReport one = check_output_schema("{\"diagnosis\":42}", optional_conf);
    CHECK_FALSE(one.ok);
    REQUIRE(one.violations.size() == 1);
    CHECK(one.violations[0].kind == SchemaViolation::Kind::WrongType);
    CHECK(one.violations[0].key == "diagnosis");

    SchemaSpec required_conf = optional_conf;
    required_conf.fields[1].required = true;
    const SchemaReport two = check_output_schema("{\"diagnosis\":42}", required_conf);
    CHECK(two.violations.size() == 2);
}

TEST_CASE("prose is a single not-structured violation") {
    SchemaSpec schema;
    schema.fields = {{"diagnosis", FieldType::String, true}};
    for (const char* text : {"The diagnosis is flu.", "[1,2,3]", "42"}) {
        const SchemaReport report = check_output_schema(text, schema);
        CHECK_FALSE(report.ok);
        REQUIRE(report.violations.size() == 1);
        CHECK(report.violations[0].kind == SchemaViolation::Kind::NotStructured);
    }
}

TEST_CASE("unexpected keys are violations") {
    SchemaSpec schema;
    schema.fields = {{"diagnosis", FieldType::String, true}};
    const SchemaReport report =
        check_output_schema("{\"diagnosis\":\"flu\",\"extra\":1}", schema);
    CHECK_FALSE(report.ok);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].kind == SchemaViolation::Kind::UnexpectedKey);
}

TEST_CASE("integer fields accept integers but not floats") {
    SchemaSpec schema;
    schema.fields = {{"count", FieldType::Integer, true}};
    CHECK(check_output_schema("{\"count\": 3}", schema).ok);
    CHECK_FALSE(check_output_schema("{\"count\": 3.5}", schema).ok);

    SchemaSpec number_schema;
    number_schema.fields = {{"count", FieldType::Number, true}};
    CHECK(check_output_schema("{\"count\": 3}", number_schema).ok);
    CHECK(check_output_schema("{\"count\": 3.5}", number_schema).ok);
}

TEST_CASE("schema spec files parse") {
    const SchemaSpec spec = load_schema_spec(testsupport::data_dir() / "schemas/diagnosis.json");
    REQUIRE(spec.fields.size() == 2);
    CHECK(spec.fields[0].name == "diagnosis");
    CHECK(spec.fields[0].required);
    CHECK(spec.fields[1].type == FieldType::Number);
}

TEST_CASE("a passing schema report is sound under hand re-checking") {
    SchemaSpec schema;
    schema.fields = {{"diagnosis", FieldType::String, true},
                     {"confidence", FieldType::Number, false},
                     {"urgent", FieldType::Boolean, true},
                     {"visits", FieldType::Integer, false}};

    SplitMix64 rng(91);
    int ok_count = 0;
    for (int i = 0; i < 300; ++i) {
        // Random documents over the schema's keys plus an occasional stranger.
        nlohmann::json doc = nlohmann::json::object();
        for (const auto& field : schema.fields) {
            switch (rng.below(4)) {
                case 0: break;  // omit
                case 1: doc[field.name] = "text"; break;
                case 2: doc[field.name] = 1 + static_cast<int>(rng.below(9)); break;
                default: doc[field.name] = rng.below(2) == 0; break;
            }
        }
        if (rng.below(5) == 0) doc["stray"] = 1;

        const SchemaReport report = check_output_schema(doc.dump(), schema);
        if (!report.ok) continue;
        ++ok_count;
        // Hand re-check: every required key present with the right type, no
        // undeclared keys.
        for (const auto& field : schema.fields) {
            if (field.required) REQUIRE(doc.contains(field.name));
            if (!doc.contains(field.name)) continue;
            switch (field.type) {
                case FieldType::String: CHECK(doc[field.name].is_string()); break;
                case FieldType::Integer: CHECK(doc[field.name].is_number_integer()); break;
                case FieldType::Number: CHECK(doc[field.name].is_number()); break;
                case FieldType::Boolean: CHECK(doc[field.name].is_boolean()); break;
            }
        }
        for (auto it = doc.begin(); it != doc.end(); ++it) {
            const bool declared = std::any_of(
                schema.fields.begin(), schema.fields.end(),
                [&](const FieldSpec& f) { return f.name == it.key(); });
            CHECK(declared);
        }
    }
    CHECK(ok_count > 0);  // the generator must hit some passing documents
}

TEST_CASE("suffix list loads from the data file and matches the built-in default") {
    const auto from_file = load_drug_suffixes(testsupport::data_dir() / "drug_suffixes.txt");
    CHECK(from_file == default_drug_suffixes());
    CHECK(fires_drug_suffix("hydromethrin", from_file));
    CHECK(fires_drug_suffix("atorvastatin", from_file));
    CHECK_FALSE(fires_drug_suffix("thrin", from_file));  // must be longer than the suffix
    CHECK_FALSE(fires_drug_suffix("clinician", from_file));
}
