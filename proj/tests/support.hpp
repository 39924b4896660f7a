// Test-only helpers: fixture paths, random generators, independent oracles.
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "medrails/knowledge_base.hpp"
#include "medrails/rail_dsl.hpp"
#include "medrails/semantic_matcher.hpp"
#include "medrails/synthetic.hpp"

namespace testsupport {

inline std::filesystem::path data_dir() { return MEDRAILS_DATA_DIR; }

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline const medrails::KnowledgeBase& fixture_kb() {
    static const medrails::KnowledgeBase kb = medrails::KnowledgeBase::load(
        data_dir() / "lexicon/drugs.csv", data_dir() / "lexicon/terms.txt");
    return kb;
}

inline const medrails::RailSpec& fixture_rails() {
    static const medrails::RailSpec spec =
        medrails::parse_rail_source(read_file(data_dir() / "rails/medical.rails"));
    return spec;
}

// --- random rail specs -------------------------------------------------

inline std::string random_utterance(medrails::SplitMix64& rng) {
    static const std::string charset =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
        " \"\\#:,.!?-_(){}<>'";
    const size_t len = rng.below(41);
    std::string out;
    for (size_t i = 0; i < len; ++i) out.push_back(charset[rng.below(charset.size())]);
    return out;
}

inline medrails::RailSpec random_rail_spec(medrails::SplitMix64& rng) {
    using namespace medrails;
    RailSpec spec;
    if (rng.below(2)) spec.params.k = 1 + static_cast<int>(rng.below(10));
    if (rng.below(2)) spec.params.tau = static_cast<double>(rng.below(10001)) / 10000.0;

    const size_t nforms = 1 + rng.below(5);
    for (size_t i = 0; i < nforms; ++i) {
        CanonicalForm form;
        form.name = "form_" + std::to_string(i) + "_" + std::to_string(rng.below(1000));
        const bool attack = rng.below(2) == 0;
        form.kind = attack ? FormKind::AttackPattern : FormKind::UserIntent;
        if (attack) {
            if (rng.below(2)) {
                form.category = TaxonomyLabel(
                    kAllJailbreakCategories[rng.below(kAllJailbreakCategories.size())]);
            } else {
                form.category = TaxonomyLabel(
                    kAllHallucinationTypes[rng.below(kAllHallucinationTypes.size())]);
            }
        } else if (rng.below(4) == 0) {
            form.category =
                TaxonomyLabel(kAllHallucinationTypes[rng.below(kAllHallucinationTypes.size())]);
        }
        const size_t nex = 1 + rng.below(4);
        for (size_t j = 0; j < nex; ++j) form.examples.push_back(random_utterance(rng));
        spec.forms.push_back(std::move(form));
    }
    for (const auto& form : spec.forms) {
        if (rng.below(2)) continue;
        FlowRule flow;
        flow.trigger = form.name;
        switch (rng.below(3)) {
            case 0:
                flow.action = FlowAction::Block;
                flow.message = random_utterance(rng);
                break;
            case 1: flow.action = FlowAction::Allow; break;
            default:
                flow.action = FlowAction::Rewrite;
                flow.message = random_utterance(rng);
                break;
        }
        spec.flows.push_back(std::move(flow));
    }
    return spec;
}

// --- independent KNN oracle --------------------------------------------

struct OracleHit {
    std::string form;
    double similarity;
    std::string example;
};

// Exhaustive scan written separately from MatcherIndex::nearest; dot products
// accumulate in the same index order so equal inputs give bit-equal values.
inline std::vector<OracleHit> knn_oracle(const std::vector<medrails::CanonicalForm>& forms,
                                         const std::string& query, size_t k) {
    const medrails::EmbeddingVector q = medrails::embed(query);
    std::vector<OracleHit> hits;
    for (const auto& form : forms) {
        for (const auto& example : form.examples) {
            const medrails::EmbeddingVector e = medrails::embed(example);
            double dot = 0.0;
            for (size_t i = 0; i < medrails::kEmbeddingDim; ++i) dot += q[i] * e[i];
            hits.push_back({form.name, dot, example});
        }
    }
    std::stable_sort(hits.begin(), hits.end(), [](const OracleHit& a, const OracleHit& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        if (a.form != b.form) return a.form < b.form;
        return a.example < b.example;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

// --- brute-force restricted Damerau-Levenshtein -------------------------

inline int dl_oracle(const std::string& a, const std::string& b) {
    // Plain recursive definition with memoization; independent of the DP
    // row implementation under test.
    const size_t n = a.size(), m = b.size();
    std::vector<std::vector<int>> memo(n + 1, std::vector<int>(m + 1, -1));
    struct Rec {
        const std::string& a;
        const std::string& b;
        std::vector<std::vector<int>>& memo;
        int operator()(size_t i, size_t j) {
            if (memo[i][j] >= 0) return memo[i][j];
            int r;
            if (i == 0) {
                r = static_cast<int>(j);
            } else if (j == 0) {
                r = static_cast<int>(i);
            } else {
                r = std::min((*this)(i - 1, j) + 1, (*this)(i, j - 1) + 1);
                r = std::min(r, (*this)(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1));
                if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1])
                    r = std::min(r, (*this)(i - 2, j - 2) + 1);
            }
            return memo[i][j] = r;
        }
    };
    return Rec{a, b, memo}(n, m);
}

}  // namespace testsupport
