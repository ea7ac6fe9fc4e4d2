#pragma once

#include <set>
#include <string>
#include <vector>

#include "taxalign/align.hpp"
#include "taxalign/csls.hpp"
#include "taxalign/embeddings.hpp"
#include "taxalign/taxonomy.hpp"

namespace taxalign {

struct MatchRecord {
    CategoryCode source;
    CategoryCode target;
    double score = 0.0;
    std::string method;
    std::vector<std::string> flags;

    bool has_flag(const std::string& flag) const {
        for (const auto& f : flags) {
            if (f == flag) return true;
        }
        return false;
    }
};

struct MatchResult {
    std::vector<MatchRecord> records;
    std::vector<CategoryCode> skipped; // sources excluded by the mask
};

// Category description as a set of tokens.
struct TokenBag {
    CategoryCode code;
    std::set<std::string> tokens;
};

std::vector<TokenBag> build_token_bags(const Taxonomy& taxonomy);

// sim(A,B) = |A cap B| / (2|A|) + |A cap B| / (2|B|), in [0,1]; 0 when either
// bag is empty.
double string_sim(const TokenBag& a, const TokenBag& b);

// Per-source argmax target by string_sim. Empty source bags score 0, pair
// with the lowest-code target and carry a "low-confidence" flag.
MatchResult match_strings(const std::vector<TokenBag>& sources,
                          const std::vector<TokenBag>& targets);

// Per-source argmax target by cosine or CSLS over (W x, y). Masked rows on
// either side are excluded; skipped sources are reported.
MatchResult match_vectors(const CategoryVectorSet& source,
                          const CategoryVectorSet& target,
                          const MappingMatrix& mapping, Scorer scorer,
                          int csls_k = 10);

enum class BaseMatcher { string_sim, cosine, csls };

// Inputs a hierarchical match may need; vectors/mapping for the vector
// bases, bags for the string base.
struct MatchInputs {
    const CategoryVectorSet* source_vectors = nullptr;
    const CategoryVectorSet* target_vectors = nullptr;
    const MappingMatrix* mapping = nullptr;
    const std::vector<TokenBag>* source_bags = nullptr;
    const std::vector<TokenBag>* target_bags = nullptr;
    int csls_k = 10;
};

// Top-down constrained matching: level-1 categories are matched over the
// full target level; deeper categories only among descendants of their
// parent's matched target (levels clamped to the target depth). Empty
// candidate sets fall back to the full level with a "fallback" flag.
MatchResult hierarchical_match(const Taxonomy& source_taxonomy,
                               const Taxonomy& target_taxonomy,
                               BaseMatcher base, const MatchInputs& inputs);

void save_matches(const MatchResult& result, const std::string& path);
std::vector<MatchRecord> load_matches(const std::string& path,
                                      const Scheme& source_scheme,
                                      const Scheme& target_scheme);

} // namespace taxalign
