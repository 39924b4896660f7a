#include "medrails/semantic_matcher.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace medrails {

namespace {

uint64_t fnv1a64(const char* data, size_t len) {
    uint64_t h = 14695981039346656037ULL;
    for (size_t i = 0; i < len; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 1099511628211ULL;
    }
    return h;
}

// Lowercase, trim, collapse whitespace runs to a single space.
std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!out.empty()) pending_space = true;
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

}  // namespace

EmbeddingVector embed(std::string_view text) {
    EmbeddingVector vec{};
    const std::string normalized = normalize_text(text);
    if (normalized.empty()) return vec;  // zero vector stays zero

    const std::string padded = "#" + normalized + "#";
    for (size_t i = 0; i + 3 <= padded.size(); ++i) {
        vec[fnv1a64(padded.data() + i, 3) % kEmbeddingDim] += 1.0;
    }
    double norm_sq = 0.0;
    for (double v : vec) norm_sq += v * v;
    const double norm = std::sqrt(norm_sq);
    if (norm > 0.0)
        for (double& v : vec) v /= norm;
    return vec;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    double dot = 0.0;
    for (size_t i = 0; i < kEmbeddingDim; ++i) dot += a[i] * b[i];
    return dot;
}

MatcherIndex::MatcherIndex(std::vector<IndexEntry> entries, int k, double tau, EmbedFn embedder)
    : entries_(std::move(entries)), k_(k), tau_(tau), embedder_(std::move(embedder)) {}

MatcherIndex MatcherIndex::build(std::span<const CanonicalForm> forms, int k, double tau,
                                 EmbedFn embedder) {
    if (k < 1) throw InvalidParamError("matcher param k must be >= 1, got " + std::to_string(k));
    if (tau < 0.0 || tau > 1.0)
        throw InvalidParamError("matcher param tau must be in [0,1], got " + std::to_string(tau));
    if (forms.empty()) throw EmptyRailSetError();

    EmbedFn fn = embedder ? std::move(embedder) : [](std::string_view t) { return embed(t); };

    std::vector<IndexEntry> entries;
    for (const auto& form : forms) {
        if (form.examples.empty()) throw EmptyRailSetError();
        for (const auto& example : form.examples)
            entries.push_back({form.name, example, fn(example)});
    }
    return MatcherIndex(std::move(entries), k, tau, std::move(fn));
}

std::vector<MatchResult> MatcherIndex::nearest(std::string_view query) const {
    const EmbeddingVector q = embedder_(query);

    std::vector<MatchResult> results;
    results.reserve(entries_.size());
    for (const auto& entry : entries_)
        results.push_back({entry.form_name, cosine(q, entry.vec), entry.example});

    std::sort(results.begin(), results.end(), [](const MatchResult& a, const MatchResult& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        if (a.form_name != b.form_name) return a.form_name < b.form_name;
        return a.example < b.example;
    });
    if (results.size() > static_cast<size_t>(k_)) results.resize(static_cast<size_t>(k_));
    return results;
}

}  // namespace medrails
