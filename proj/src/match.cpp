#include "taxalign/match.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

namespace taxalign {

namespace {

const char* method_name(BaseMatcher base, bool hierarchical) {
    switch (base) {
    case BaseMatcher::string_sim: return hierarchical ? "hier-string" : "string";
    case BaseMatcher::cosine: return hierarchical ? "hier-vector" : "cosine";
    case BaseMatcher::csls: return hierarchical ? "hier-csls" : "csls";
    }
    return "?";
}

void sort_records(std::vector<MatchRecord>& records) {
    std::sort(records.begin(), records.end(),
              [](const MatchRecord& a, const MatchRecord& b) {
                  if (a.score != b.score) return a.score > b.score;
                  if (!(a.source == b.source)) return a.source < b.source;
                  return a.target < b.target;
              });
}

// Scores one source category against target candidates; knows which sources
// are usable at all. One implementation per base matcher.
class CandidateScorer {
public:
    virtual ~CandidateScorer() = default;
    virtual bool usable(const CategoryCode& source) const = 0;
    // Score against one target; candidates with no score return nullopt
    // upstream by being excluded from the candidate list.
    virtual double score(const CategoryCode& source,
                         const CategoryCode& target) const = 0;
    virtual bool target_usable(const CategoryCode& target) const = 0;
};

class StringScorer : public CandidateScorer {
public:
    StringScorer(const std::vector<TokenBag>& sources,
                 const std::vector<TokenBag>& targets) {
        for (const auto& bag : sources) src_[bag.code.segments] = &bag;
        for (const auto& bag : targets) tgt_[bag.code.segments] = &bag;
    }
    bool usable(const CategoryCode&) const override { return true; }
    bool target_usable(const CategoryCode&) const override { return true; }
    double score(const CategoryCode& source,
                 const CategoryCode& target) const override {
        auto s = src_.find(source.segments);
        auto t = tgt_.find(target.segments);
        if (s == src_.end() || t == tgt_.end()) return 0.0;
        return string_sim(*s->second, *t->second);
    }
    bool empty_bag(const CategoryCode& source) const {
        auto s = src_.find(source.segments);
        return s == src_.end() || s->second->tokens.empty();
    }

private:
    std::map<std::vector<std::string>, const TokenBag*> src_;
    std::map<std::vector<std::string>, const TokenBag*> tgt_;
};

class VectorScorer : public CandidateScorer {
public:
    VectorScorer(const CategoryVectorSet& source,
                 const CategoryVectorSet& target,
                 const MappingMatrix& mapping, Scorer scorer, int csls_k)
        : scorer_(scorer) {
        if (source.dim() != target.dim()) {
            throw DataError("match_vectors: dimension mismatch");
        }
        mapped_ = unit_rows(source.matrix * mapping.W.transpose());
        targets_ = unit_rows(target.matrix);
        for (std::size_t i = 0; i < source.codes.size(); ++i) {
            if (source.mask[i]) {
                src_rows_[source.codes[i].segments] =
                    static_cast<Eigen::Index>(i);
            }
        }
        for (std::size_t j = 0; j < target.codes.size(); ++j) {
            if (target.mask[j]) {
                tgt_rows_[target.codes[j].segments] =
                    static_cast<Eigen::Index>(j);
            }
        }
        if (src_rows_.empty() || tgt_rows_.empty()) {
            throw DataError("match_vectors: no usable rows");
        }

        if (scorer_ == Scorer::csls) {
            // Neighborhoods over the usable rows only.
            Eigen::MatrixXd Xs(static_cast<Eigen::Index>(src_rows_.size()),
                               mapped_.cols());
            Eigen::MatrixXd Ys(static_cast<Eigen::Index>(tgt_rows_.size()),
                               targets_.cols());
            Eigen::Index i = 0;
            for (auto& [segments, row] : src_rows_) Xs.row(i++) = mapped_.row(row);
            Eigen::Index j = 0;
            for (auto& [segments, row] : tgt_rows_) Ys.row(j++) = targets_.row(row);
            int k = static_cast<int>(std::min<Eigen::Index>(
                csls_k, std::min(Xs.rows(), Ys.rows())));
            Neighborhoods nb = build_neighborhoods(Xs, Ys, k);
            i = 0;
            for (auto& [segments, row] : src_rows_) {
                r_src_[segments] = nb.source[i++].mean_cos;
            }
            j = 0;
            for (auto& [segments, row] : tgt_rows_) {
                r_tgt_[segments] = nb.target[j++].mean_cos;
            }
        }
    }

    bool usable(const CategoryCode& source) const override {
        return src_rows_.count(source.segments) > 0;
    }
    bool target_usable(const CategoryCode& target) const override {
        return tgt_rows_.count(target.segments) > 0;
    }
    double score(const CategoryCode& source,
                 const CategoryCode& target) const override {
        Eigen::Index s = src_rows_.at(source.segments);
        Eigen::Index t = tgt_rows_.at(target.segments);
        double cos = mapped_.row(s).dot(targets_.row(t));
        if (scorer_ == Scorer::cosine) return cos;
        return 2.0 * cos - r_src_.at(source.segments) -
               r_tgt_.at(target.segments);
    }

private:
    Scorer scorer_;
    Eigen::MatrixXd mapped_;
    Eigen::MatrixXd targets_;
    std::map<std::vector<std::string>, Eigen::Index> src_rows_, tgt_rows_;
    std::map<std::vector<std::string>, double> r_src_, r_tgt_;
};

// Argmax over candidates with ties broken by lowest target code.
std::pair<const CategoryCode*, double> pick_best(
    const CandidateScorer& scorer, const CategoryCode& source,
    const std::vector<CategoryCode>& candidates) {
    const CategoryCode* best = nullptr;
    double best_score = 0.0;
    for (const auto& candidate : candidates) {
        double score = scorer.score(source, candidate);
        if (!best || score > best_score ||
            (score == best_score && candidate < *best)) {
            best = &candidate;
            best_score = score;
        }
    }
    return {best, best_score};
}

} // namespace

std::vector<TokenBag> build_token_bags(const Taxonomy& taxonomy) {
    std::vector<TokenBag> bags;
    bags.reserve(taxonomy.size());
    for (const auto& code : taxonomy.codes()) {
        TokenBag bag;
        bag.code = code;
        for (auto& token : tokenize(taxonomy.at(code).description)) {
            bag.tokens.insert(std::move(token));
        }
        bags.push_back(std::move(bag));
    }
    return bags;
}

double string_sim(const TokenBag& a, const TokenBag& b) {
    if (a.tokens.empty() || b.tokens.empty()) return 0.0;
    std::size_t common = 0;
    for (const auto& token : a.tokens) common += b.tokens.count(token);
    double overlap = static_cast<double>(common);
    return overlap / (2.0 * a.tokens.size()) + overlap / (2.0 * b.tokens.size());
}

MatchResult match_strings(const std::vector<TokenBag>& sources,
                          const std::vector<TokenBag>& targets) {
    if (sources.empty()) throw DataError("match_strings: empty source set");
    if (targets.empty()) throw DataError("match_strings: empty target set");

    std::vector<CategoryCode> target_codes;
    for (const auto& bag : targets) target_codes.push_back(bag.code);
    std::sort(target_codes.begin(), target_codes.end());

    StringScorer scorer(sources, targets);
    MatchResult result;
    for (const auto& bag : sources) {
        auto [best, score] = pick_best(scorer, bag.code, target_codes);
        MatchRecord record;
        record.source = bag.code;
        record.target = *best;
        record.score = score;
        record.method = "string";
        if (scorer.empty_bag(bag.code)) record.flags.push_back("low-confidence");
        result.records.push_back(std::move(record));
    }
    sort_records(result.records);
    return result;
}

MatchResult match_vectors(const CategoryVectorSet& source,
                          const CategoryVectorSet& target,
                          const MappingMatrix& mapping, Scorer scorer,
                          int csls_k) {
    VectorScorer vscorer(source, target, mapping, scorer, csls_k);

    std::vector<CategoryCode> target_codes;
    for (std::size_t j = 0; j < target.codes.size(); ++j) {
        if (target.mask[j]) target_codes.push_back(target.codes[j]);
    }
    std::sort(target_codes.begin(), target_codes.end());

    MatchResult result;
    for (std::size_t i = 0; i < source.codes.size(); ++i) {
        if (!source.mask[i]) {
            result.skipped.push_back(source.codes[i]);
            continue;
        }
        auto [best, score] = pick_best(vscorer, source.codes[i], target_codes);
        MatchRecord record;
        record.source = source.codes[i];
        record.target = *best;
        record.score = score;
        record.method = scorer == Scorer::cosine ? "cosine" : "csls";
        result.records.push_back(std::move(record));
    }
    if (result.records.empty()) {
        throw DataError("match_vectors: no usable source rows");
    }
    sort_records(result.records);
    return result;
}

MatchResult hierarchical_match(const Taxonomy& source_taxonomy,
                               const Taxonomy& target_taxonomy,
                               BaseMatcher base, const MatchInputs& inputs) {
    std::unique_ptr<CandidateScorer> scorer;
    const StringScorer* string_scorer = nullptr;
    if (base == BaseMatcher::string_sim) {
        if (!inputs.source_bags || !inputs.target_bags) {
            throw ConfigError("hierarchical_match: string base needs token bags");
        }
        auto s = std::make_unique<StringScorer>(*inputs.source_bags,
                                                *inputs.target_bags);
        string_scorer = s.get();
        scorer = std::move(s);
    } else {
        if (!inputs.source_vectors || !inputs.target_vectors ||
            !inputs.mapping) {
            throw ConfigError(
                "hierarchical_match: vector base needs vectors and a mapping");
        }
        scorer = std::make_unique<VectorScorer>(
            *inputs.source_vectors, *inputs.target_vectors, *inputs.mapping,
            base == BaseMatcher::cosine ? Scorer::cosine : Scorer::csls,
            inputs.csls_k);
    }

    auto usable_level = [&](int level) {
        std::vector<CategoryCode> codes;
        for (auto& code : target_taxonomy.level_slice(level)) {
            if (scorer->target_usable(code)) codes.push_back(code);
        }
        std::sort(codes.begin(), codes.end());
        return codes;
    };

    MatchResult result;
    std::map<std::vector<std::string>, CategoryCode> assigned;
    const char* method = method_name(base, true);

    for (int level = 1; level <= source_taxonomy.max_depth(); ++level) {
        int target_level = std::min(level, target_taxonomy.max_depth());
        std::vector<CategoryCode> full_level = usable_level(target_level);

        for (const auto& code : source_taxonomy.level_slice(level)) {
            if (!scorer->usable(code)) {
                result.skipped.push_back(code);
                continue;
            }

            std::vector<CategoryCode> candidates;
            bool fallback = false;
            if (level == 1) {
                candidates = full_level;
            } else {
                const auto& parent = source_taxonomy.at(code).parent;
                const CategoryCode* anchor = nullptr;
                if (parent) {
                    auto it = assigned.find(parent->segments);
                    if (it != assigned.end()) anchor = &it->second;
                }
                if (anchor) {
                    if (target_level > anchor->level()) {
                        candidates = target_taxonomy.descendants_at_level(
                            *anchor, target_level);
                    } else {
                        // Depth clamped: stay within the anchor's class.
                        const auto& anchor_parent =
                            target_taxonomy.at(*anchor).parent;
                        if (anchor_parent) {
                            candidates = target_taxonomy.descendants_at_level(
                                *anchor_parent, target_level);
                        } else {
                            candidates = full_level;
                        }
                    }
                    std::erase_if(candidates, [&](const CategoryCode& c) {
                        return !scorer->target_usable(c);
                    });
                    std::sort(candidates.begin(), candidates.end());
                }
                if (candidates.empty()) {
                    candidates = full_level;
                    fallback = true;
                }
            }
            if (candidates.empty()) continue;

            auto [best, score] = pick_best(*scorer, code, candidates);
            MatchRecord record;
            record.source = code;
            record.target = *best;
            record.score = score;
            record.method = method;
            if (fallback) record.flags.push_back("fallback");
            if (string_scorer && string_scorer->empty_bag(code)) {
                record.flags.push_back("low-confidence");
            }
            assigned[code.segments] = *best;
            result.records.push_back(std::move(record));
        }
    }
    sort_records(result.records);
    return result;
}

void save_matches(const MatchResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out.precision(12);
    for (const auto& record : result.records) {
        out << record.source.raw << '\t' << record.target.raw << '\t'
            << record.score << '\t' << record.method << '\t';
        for (std::size_t i = 0; i < record.flags.size(); ++i) {
            if (i) out << ',';
            out << record.flags[i];
        }
        out << '\n';
    }
}

std::vector<MatchRecord> load_matches(const std::string& path,
                                      const Scheme& source_scheme,
                                      const Scheme& target_scheme) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open match file '" + path + "'");
    std::vector<MatchRecord> records;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string source, target, score, method, flags;
        std::getline(ss, source, '\t');
        std::getline(ss, target, '\t');
        std::getline(ss, score, '\t');
        std::getline(ss, method, '\t');
        std::getline(ss, flags, '\t');
        if (source.empty() || target.empty() || score.empty()) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": malformed match record");
        }
        MatchRecord record;
        record.source = parse_code(source, source_scheme);
        record.target = parse_code(target, target_scheme);
        record.score = std::stod(score);
        record.method = method;
        std::istringstream fs(flags);
        std::string flag;
        while (std::getline(fs, flag, ',')) {
            if (!flag.empty()) record.flags.push_back(flag);
        }
        records.push_back(std::move(record));
    }
    return records;
}

} // namespace taxalign
