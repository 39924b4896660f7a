// knowledge_base.hpp - local medical lexicon: drug names, synonyms, terms
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace medrails {

struct DrugEntry {
    std::string name;                   // canonical, normalized lowercase
    std::vector<std::string> synonyms;  // normalized, distinct from name
    std::string source;                 // provenance tag, e.g. "fixture"
};

struct KbStatus {
    enum class Kind { Known, Synonym, NearMiss, Unknown };

    Kind kind = Kind::Unknown;
    std::string canonical;  // empty for Unknown
    int distance = 0;       // 1 or 2 for NearMiss, otherwise 0

    bool valid() const { return kind == Kind::Known || kind == Kind::Synonym; }
    bool operator==(const KbStatus&) const = default;

    static KbStatus known(std::string name) { return {Kind::Known, std::move(name), 0}; }
    static KbStatus synonym(std::string name) { return {Kind::Synonym, std::move(name), 0}; }
    static KbStatus near_miss(std::string name, int d) {
        return {Kind::NearMiss, std::move(name), d};
    }
    static KbStatus unknown() { return {}; }
};

std::string_view kb_status_name(KbStatus::Kind kind);

class LexiconFormatError : public std::runtime_error {
  public:
    LexiconFormatError(std::string file, int line, const std::string& message)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + message),
          file_(std::move(file)),
          line_(line) {}
    int line() const { return line_; }
    const std::string& file() const { return file_; }

  private:
    std::string file_;
    int line_;
};

class EmptyLexiconError : public std::runtime_error {
  public:
    EmptyLexiconError() : std::runtime_error("lexicon files contain no entries") {}
};

// Lowercase, trim, strip surrounding punctuation. Shared by loading and lookup.
std::string normalize_term(std::string_view raw);

// Restricted Damerau-Levenshtein (adjacent transposition) distance.
int edit_distance(std::string_view a, std::string_view b);

// Immutable after load; shared read-only across concurrent requests.
class KnowledgeBase {
  public:
    // Drug CSV: header `name,synonyms,source`, synonyms `;`-separated.
    // Term file: one term per line, `#` comments.
    static KnowledgeBase load(const std::filesystem::path& drug_file,
                              const std::filesystem::path& term_file);

    // Parse from in-memory content (used by tests and by load()).
    static KnowledgeBase from_strings(std::string_view drug_csv, std::string_view term_lines,
                                      const std::string& drug_file_name = "drugs.csv",
                                      const std::string& term_file_name = "terms.txt");

    // Exact name -> Known, exact synonym -> Synonym, edit distance <= 2 to any
    // name/term/synonym -> NearMiss (smallest distance, ties by canonical
    // name), otherwise Unknown. Never throws.
    KbStatus lookup_term(std::string_view term) const;

    // Exact-only lookup of an already-normalized phrase; nullopt when absent.
    std::optional<KbStatus> lookup_exact(const std::string& normalized) const;

    size_t drug_count() const { return drugs_.size(); }
    size_t term_count() const { return terms_.size(); }
    size_t entry_count() const { return drug_count() + term_count(); }
    size_t max_phrase_words() const { return max_phrase_words_; }

    const std::vector<DrugEntry>& drugs() const { return drugs_; }
    const std::vector<std::string>& terms() const { return terms_; }

  private:
    std::vector<DrugEntry> drugs_;
    std::vector<std::string> terms_;  // normalized general medical terms

    // candidate -> canonical name; candidates cover names, terms, synonyms
    std::unordered_map<std::string, KbStatus> exact_;
    std::vector<std::pair<std::string, std::string>> fuzzy_candidates_;  // (candidate, canonical)
    size_t max_phrase_words_ = 1;

    void finalize();
};

}  // namespace medrails
