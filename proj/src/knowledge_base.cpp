#include "medrails/knowledge_base.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace medrails {

namespace {

bool is_punct_byte(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        size_t pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.emplace_back(text.substr(start));
            return parts;
        }
        parts.emplace_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open lexicon file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

size_t count_words(std::string_view phrase) {
    size_t words = phrase.empty() ? 0 : 1;
    for (char c : phrase)
        if (c == ' ') ++words;
    return words;
}

}  // namespace

std::string normalize_term(std::string_view raw) {
    size_t begin = 0;
    size_t end = raw.size();
    while (begin < end && (std::isspace(static_cast<unsigned char>(raw[begin])) ||
                           is_punct_byte(raw[begin])))
        ++begin;
    while (end > begin && (std::isspace(static_cast<unsigned char>(raw[end - 1])) ||
                           is_punct_byte(raw[end - 1])))
        --end;
    std::string out;
    out.reserve(end - begin);
    bool pending_space = false;
    for (size_t i = begin; i < end; ++i) {
        char c = raw[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

int edit_distance(std::string_view a, std::string_view b) {
    const size_t n = a.size();
    const size_t m = b.size();
    if (n == 0) return static_cast<int>(m);
    if (m == 0) return static_cast<int>(n);

    std::vector<int> prev2(m + 1), prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int>(i);
        for (size_t j = 1; j <= m; ++j) {
            const int cost = a[i - 1] == b[j - 1] ? 0 : 1;
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
            if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1])
                cur[j] = std::min(cur[j], prev2[j - 2] + 1);
        }
        std::swap(prev2, prev);
        std::swap(prev, cur);
    }
    return prev[m];
}

std::string_view kb_status_name(KbStatus::Kind kind) {
    switch (kind) {
        case KbStatus::Kind::Known: return "known";
        case KbStatus::Kind::Synonym: return "synonym";
        case KbStatus::Kind::NearMiss: return "near_miss";
        case KbStatus::Kind::Unknown: return "unknown";
    }
    return "unknown";
}

KnowledgeBase KnowledgeBase::load(const std::filesystem::path& drug_file,
                                  const std::filesystem::path& term_file) {
    return from_strings(read_file(drug_file), read_file(term_file), drug_file.string(),
                        term_file.string());
}

KnowledgeBase KnowledgeBase::from_strings(std::string_view drug_csv, std::string_view term_lines,
                                          const std::string& drug_file_name,
                                          const std::string& term_file_name) {
    KnowledgeBase kb;
    std::unordered_map<std::string, size_t> by_name;

    const auto drug_lines = split(drug_csv, '\n');
    for (size_t i = 0; i < drug_lines.size(); ++i) {
        std::string line = drug_lines[i];
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const int lineno = static_cast<int>(i) + 1;
        if (lineno == 1) {
            if (line != "name,synonyms,source")
                throw LexiconFormatError(drug_file_name, 1,
                                         "expected header 'name,synonyms,source'");
            continue;
        }
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 3)
            throw LexiconFormatError(drug_file_name, lineno,
                                     "expected 3 columns, got " + std::to_string(fields.size()));
        const std::string name = normalize_term(fields[0]);
        if (name.empty())
            throw LexiconFormatError(drug_file_name, lineno, "empty drug name column");

        size_t idx;
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            idx = kb.drugs_.size();
            by_name.emplace(name, idx);
            kb.drugs_.push_back({name, {}, normalize_term(fields[2])});
        } else {
            idx = it->second;  // duplicate canonical names merge synonyms
        }
        DrugEntry& entry = kb.drugs_[idx];
        for (const auto& raw_syn : split(fields[1], ';')) {
            const std::string syn = normalize_term(raw_syn);
            if (syn.empty() || syn == name) continue;
            if (std::find(entry.synonyms.begin(), entry.synonyms.end(), syn) ==
                entry.synonyms.end())
                entry.synonyms.push_back(syn);
        }
    }

    const auto term_rows = split(term_lines, '\n');
    std::unordered_map<std::string, bool> seen_terms;
    for (size_t i = 0; i < term_rows.size(); ++i) {
        std::string line = term_rows[i];
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const std::string term = normalize_term(line);
        if (term.empty())
            throw LexiconFormatError(term_file_name, static_cast<int>(i) + 1,
                                     "term normalizes to an empty string");
        if (!seen_terms.emplace(term, true).second) continue;
        kb.terms_.push_back(term);
    }

    if (kb.drugs_.empty() && kb.terms_.empty()) throw EmptyLexiconError();
    kb.finalize();
    return kb;
}

void KnowledgeBase::finalize() {
    // Precedence on exact collisions: drug name, then term, then synonym.
    for (const auto& drug : drugs_) {
        exact_[drug.name] = KbStatus::known(drug.name);
        max_phrase_words_ = std::max(max_phrase_words_, count_words(drug.name));
    }
    for (const auto& term : terms_) {
        exact_.emplace(term, KbStatus::known(term));
        max_phrase_words_ = std::max(max_phrase_words_, count_words(term));
    }
    for (const auto& drug : drugs_) {
        for (const auto& syn : drug.synonyms) {
            exact_.emplace(syn, KbStatus::synonym(drug.name));
            max_phrase_words_ = std::max(max_phrase_words_, count_words(syn));
        }
    }

    for (const auto& drug : drugs_) {
        fuzzy_candidates_.emplace_back(drug.name, drug.name);
        for (const auto& syn : drug.synonyms) fuzzy_candidates_.emplace_back(syn, drug.name);
    }
    for (const auto& term : terms_) fuzzy_candidates_.emplace_back(term, term);
}

std::optional<KbStatus> KnowledgeBase::lookup_exact(const std::string& normalized) const {
    auto it = exact_.find(normalized);
    if (it == exact_.end()) return std::nullopt;
    return it->second;
}

KbStatus KnowledgeBase::lookup_term(std::string_view term) const {
    const std::string key = normalize_term(term);
    if (key.empty()) return KbStatus::unknown();

    if (auto hit = lookup_exact(key)) return *hit;

    constexpr int kMaxDistance = 2;
    int best_distance = kMaxDistance + 1;
    const std::string* best_canonical = nullptr;
    const auto key_len = static_cast<long>(key.size());
    for (const auto& [candidate, canonical] : fuzzy_candidates_) {
        if (std::abs(static_cast<long>(candidate.size()) - key_len) > kMaxDistance) continue;
        const int d = edit_distance(key, candidate);
        if (d > kMaxDistance) continue;
        if (d < best_distance ||
            (d == best_distance && (best_canonical == nullptr || canonical < *best_canonical))) {
            best_distance = d;
            best_canonical = &canonical;
        }
    }
    if (best_canonical) return KbStatus::near_miss(*best_canonical, best_distance);
    return KbStatus::unknown();
}

}  // namespace medrails
