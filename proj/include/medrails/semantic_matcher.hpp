// semantic_matcher.hpp - deterministic text embedding and exhaustive KNN
//
// The embedding is hashed character trigrams: lowercase, collapse whitespace,
// pad with '#', hash each trigram (FNV-1a 64-bit) into 256 buckets, count,
// L2-normalize. Dependency-free and bit-reproducible across runs and
// platforms. Swap in a learned embedder through the EmbedFn seam if needed.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "medrails/rail_dsl.hpp"

namespace medrails {

inline constexpr size_t kEmbeddingDim = 256;
inline constexpr int kDefaultK = 5;
inline constexpr double kDefaultTau = 0.75;

// Either the zero vector (degenerate input) or unit L2 norm within 1e-9.
using EmbeddingVector = std::array<double, kEmbeddingDim>;

EmbeddingVector embed(std::string_view text);

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

using EmbedFn = std::function<EmbeddingVector(std::string_view)>;

struct IndexEntry {
    std::string form_name;
    std::string example;
    EmbeddingVector vec;
};

struct MatchResult {
    std::string form_name;
    double similarity = 0.0;
    std::string example;

    bool operator==(const MatchResult&) const = default;
};

class EmptyRailSetError : public std::runtime_error {
  public:
    EmptyRailSetError() : std::runtime_error("cannot build a matcher index from zero forms") {}
};

class InvalidParamError : public std::runtime_error {
  public:
    explicit InvalidParamError(const std::string& what) : std::runtime_error(what) {}
};

// Immutable after build; safe for concurrent queries.
class MatcherIndex {
  public:
    // One entry per (form, example) pair. Throws EmptyRailSetError when forms
    // is empty, InvalidParamError when k < 1 or tau outside [0, 1].
    static MatcherIndex build(std::span<const CanonicalForm> forms, int k = kDefaultK,
                              double tau = kDefaultTau, EmbedFn embedder = nullptr);

    // Top-k entries by cosine similarity, ties broken by (form name, example)
    // ascending. Similarities at full precision; the caller applies tau.
    std::vector<MatchResult> nearest(std::string_view query) const;

    size_t size() const { return entries_.size(); }
    int k() const { return k_; }
    double tau() const { return tau_; }
    const std::vector<IndexEntry>& entries() const { return entries_; }

  private:
    MatcherIndex(std::vector<IndexEntry> entries, int k, double tau, EmbedFn embedder);

    std::vector<IndexEntry> entries_;
    int k_;
    double tau_;
    EmbedFn embedder_;
};

}  // namespace medrails
