#include <doctest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "taxalign/match.hpp"

using namespace taxalign;

namespace {

TokenBag bag(const char* raw, std::initializer_list<const char*> tokens) {
    TokenBag b;
    b.code = parse_code(raw, Scheme::dotted());
    for (const char* t : tokens) b.tokens.insert(t);
    return b;
}

CategoryVectorSet vector_set(const Eigen::MatrixXd& matrix,
                             const Scheme& scheme = Scheme::dotted()) {
    CategoryVectorSet set;
    set.scheme = scheme.id;
    set.matrix = matrix;
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        set.codes.push_back(
            parse_code("9" + std::to_string(10 + i), scheme));
        set.mask.push_back(!matrix.row(i).isZero());
    }
    return set;
}

MappingMatrix identity_mapping(Eigen::Index d) {
    MappingMatrix mapping;
    mapping.W = Eigen::MatrixXd::Identity(d, d);
    mapping.method = "identity";
    return mapping;
}

} // namespace

TEST_CASE("csls_score matches the definition") {
    Eigen::VectorXd x(2), y(2);
    x << 1, 0;
    y << 0.6, 0.8;
    Neighborhood nx{0, {}, 0.3};
    Neighborhood ny{0, {}, 0.5};
    // 2 * 0.6 - 0.3 - 0.5
    CHECK(csls_score(x, y, nx, ny) == doctest::Approx(0.4));
}

TEST_CASE("csls_score against a brute-force oracle") {
    Eigen::MatrixXd src = fixtures::gaussian(12, 5, 3);
    Eigen::MatrixXd tgt = fixtures::gaussian(15, 5, 4);
    int k = 4;
    Neighborhoods hoods = build_neighborhoods(src, tgt, k);
    for (Eigen::Index i = 0; i < src.rows(); ++i) {
        for (Eigen::Index j = 0; j < tgt.rows(); ++j) {
            // Oracle: full sort of cosines, mean of the top k.
            auto mean_top_k = [&](const Eigen::VectorXd& v,
                                  const Eigen::MatrixXd& other) {
                std::vector<double> cosines;
                for (Eigen::Index r = 0; r < other.rows(); ++r) {
                    cosines.push_back(cosine(v, other.row(r)));
                }
                std::sort(cosines.rbegin(), cosines.rend());
                double sum = 0;
                for (int t = 0; t < k; ++t) sum += cosines[t];
                return sum / k;
            };
            double expected = 2.0 * cosine(src.row(i), tgt.row(j)) -
                              mean_top_k(src.row(i), tgt) -
                              mean_top_k(tgt.row(j), src);
            double got = csls_score(src.row(i), tgt.row(j), hoods.source[i],
                                    hoods.target[j]);
            CHECK(got == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("build_neighborhoods hand-checked enumeration") {
    Eigen::MatrixXd src(3, 2);
    src << 1, 0, 0, 1, 2, 0; // row 2 checks unit-normalization too
    Eigen::MatrixXd tgt(3, 2);
    tgt << 1, 0, 0, 1, 0.6, 0.8; // cosines vs row 0: 1.0, 0.0, 0.6
    Neighborhoods hoods = build_neighborhoods(src, tgt, 2);
    REQUIRE(hoods.source.size() == 3);
    CHECK(hoods.source[0].neighbors == std::vector<Eigen::Index>{0, 2});
    CHECK(hoods.source[0].mean_cos == doctest::Approx(0.8));

    // k covering the whole space averages everything.
    Neighborhoods all = build_neighborhoods(src, tgt, 3);
    CHECK(all.source[0].neighbors.size() == 3);
    CHECK(all.source[0].mean_cos == doctest::Approx((1.0 + 0.0 + 0.6) / 3));

    // Ties break to the lowest index: rows 0 and 2 are the same direction.
    CHECK(all.target[0].neighbors == std::vector<Eigen::Index>{0, 2, 1});

    CHECK_THROWS_AS(build_neighborhoods(src, tgt, 0), ConfigError);
    CHECK_THROWS_AS(build_neighborhoods(src, tgt, 4), ConfigError);
}

TEST_CASE("string_sim on hand-worked examples") {
    TokenBag boots = bag("01", {"rubber", "boots"});
    CHECK(string_sim(boots, boots) == doctest::Approx(1.0));

    TokenBag women = bag("02", {"boots", "rubber", "women"});
    // |A cap B| = 2; 2/(2*2) + 2/(2*3) = 0.5 + 1/3
    CHECK(string_sim(boots, women) == doctest::Approx(0.5 + 1.0 / 3.0));

    TokenBag disjoint = bag("03", {"cement"});
    CHECK(string_sim(boots, disjoint) == doctest::Approx(0.0));

    TokenBag empty = bag("04", {});
    CHECK(string_sim(boots, empty) == 0.0);
    CHECK(string_sim(empty, empty) == 0.0);
}

TEST_CASE("string_sim properties: symmetry, range, identity-of-equals") {
    std::mt19937_64 rng(17);
    std::vector<std::string> lexicon{"a", "b", "c", "d", "e", "f", "g"};
    for (int trial = 0; trial < 200; ++trial) {
        TokenBag a, b;
        for (const auto& w : lexicon) {
            if (rng() % 2) a.tokens.insert(w);
            if (rng() % 2) b.tokens.insert(w);
        }
        if (a.tokens.empty() || b.tokens.empty()) continue;
        double ab = string_sim(a, b);
        CHECK(ab == string_sim(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        // sim == 1 iff the bags are equal.
        CHECK((ab == doctest::Approx(1.0)) == (a.tokens == b.tokens));
    }
}

TEST_CASE("match_strings recovers self-pairs and reports ties by code") {
    std::vector<TokenBag> sources{
        bag("01", {"rubber", "boots"}),
        bag("02", {"cement", "bags"}),
        bag("03", {"fresh", "fish"}),
    };
    MatchResult result = match_strings(sources, sources);
    REQUIRE(result.records.size() == 3);
    for (const auto& rec : result.records) {
        CHECK(rec.source == rec.target);
        CHECK(rec.score == doctest::Approx(1.0));
        CHECK(rec.method == "string");
    }
}

TEST_CASE("match_strings agrees with a brute-force argmax") {
    std::mt19937_64 rng(23);
    std::vector<std::string> lexicon{"u", "v", "w", "x", "y", "z"};
    auto random_bags = [&](const char* prefix, int n) {
        std::vector<TokenBag> bags;
        for (int i = 0; i < n; ++i) {
            TokenBag b;
            b.code = parse_code(prefix + std::to_string(10 + i),
                                Scheme::dotted());
            for (const auto& word : lexicon) {
                if (rng() % 2) b.tokens.insert(word);
            }
            if (b.tokens.empty()) b.tokens.insert(lexicon[i % lexicon.size()]);
            bags.push_back(std::move(b));
        }
        return bags;
    };
    std::vector<TokenBag> sources = random_bags("1", 5);
    std::vector<TokenBag> targets = random_bags("2", 5);
    MatchResult result = match_strings(sources, targets);
    REQUIRE(result.records.size() == sources.size());
    std::map<std::string, const MatchRecord*> by_source;
    for (const auto& rec : result.records) by_source[rec.source.raw] = &rec;
    for (const auto& src : sources) {
        double best = -1.0;
        CategoryCode best_code;
        for (const auto& t : targets) {
            double s = string_sim(src, t);
            if (s > best || (s == best && t.code < best_code)) {
                best = s;
                best_code = t.code;
            }
        }
        const MatchRecord* rec = by_source.at(src.code.raw);
        CHECK(rec->target == best_code);
        CHECK(rec->score == doctest::Approx(best));
    }
}

TEST_CASE("match_strings flags empty source bags") {
    std::vector<TokenBag> sources{bag("01", {})};
    std::vector<TokenBag> targets{bag("05", {"a"}), bag("04", {"b"})};
    MatchResult result = match_strings(sources, targets);
    REQUIRE(result.records.size() == 1);
    CHECK(result.records[0].score == 0.0);
    CHECK(result.records[0].target.raw == "04"); // lowest code
    CHECK(result.records[0].has_flag("low-confidence"));
}

TEST_CASE("match_vectors with the identity mapping recovers self-pairs") {
    Eigen::MatrixXd x = fixtures::gaussian(20, 6, 31);
    CategoryVectorSet set = vector_set(x);
    for (Scorer scorer : {Scorer::cosine, Scorer::csls}) {
        MatchResult result =
            match_vectors(set, set, identity_mapping(6), scorer, 3);
        REQUIRE(result.records.size() == 20);
        for (const auto& rec : result.records) {
            CHECK(rec.source == rec.target);
        }
        CHECK(result.skipped.empty());
    }
}

TEST_CASE("match_vectors is invariant under an orthogonal target transform") {
    Eigen::MatrixXd x = fixtures::gaussian(15, 5, 37);
    Eigen::MatrixXd r = fixtures::random_orthogonal(5, 38);
    CategoryVectorSet source = vector_set(x);
    CategoryVectorSet target = vector_set(x * r.transpose());
    MappingMatrix mapping;
    mapping.W = r;
    mapping.method = "procrustes";
    MatchResult rotated =
        match_vectors(source, target, mapping, Scorer::cosine);
    MatchResult plain =
        match_vectors(source, source, identity_mapping(5), Scorer::cosine);
    REQUIRE(rotated.records.size() == plain.records.size());
    std::map<std::string, const MatchRecord*> by_source;
    for (const auto& rec : plain.records) by_source[rec.source.raw] = &rec;
    for (const auto& rec : rotated.records) {
        const MatchRecord* expected = by_source.at(rec.source.raw);
        CHECK(rec.target.raw == expected->target.raw);
        CHECK(rec.score == doctest::Approx(expected->score).epsilon(1e-10));
    }
}

TEST_CASE("match_vectors skips masked sources and excludes masked targets") {
    Eigen::MatrixXd x = fixtures::gaussian(6, 4, 41);
    x.row(2).setZero();
    CategoryVectorSet source = vector_set(x);
    CategoryVectorSet target = vector_set(fixtures::gaussian(6, 4, 42));
    target.matrix.row(0).setZero();
    target.mask[0] = false;
    MatchResult result =
        match_vectors(source, target, identity_mapping(4), Scorer::cosine);
    CHECK(result.records.size() == 5);
    REQUIRE(result.skipped.size() == 1);
    CHECK(result.skipped[0].raw == "912");
    for (const auto& rec : result.records) {
        CHECK(rec.target.raw != "910");
    }

    CategoryVectorSet empty = vector_set(Eigen::MatrixXd::Zero(3, 4));
    CHECK_THROWS_AS(
        match_vectors(source, empty, identity_mapping(4), Scorer::cosine),
        DataError);
}

TEST_CASE("csls demotes hub targets that plain cosine prefers") {
    // A hub row close to everything: under CSLS its inflated neighborhood
    // mean must cost it matches relative to cosine.
    Eigen::Index n = 40, d = 8;
    Eigen::MatrixXd src = unit_rows(fixtures::gaussian(n, d, 51));
    Eigen::MatrixXd tgt = src;
    Eigen::VectorXd hub = src.colwise().mean().normalized();
    for (Eigen::Index i = 0; i < n; ++i) {
        tgt.row(i) = unit_rows((0.55 * hub.transpose() + 0.45 * src.row(i)));
    }
    tgt.row(0) = hub.transpose();

    auto hub_share = [&](Scorer scorer) {
        CategoryVectorSet s = vector_set(src);
        CategoryVectorSet t = vector_set(tgt);
        MatchResult result =
            match_vectors(s, t, identity_mapping(d), scorer, 10);
        long hits = 0;
        for (const auto& rec : result.records) {
            if (rec.target.raw == "910") ++hits;
        }
        return static_cast<double>(hits) / result.records.size();
    };
    CHECK(hub_share(Scorer::csls) <= hub_share(Scorer::cosine));
}

namespace {

Taxonomy toy_source() {
    fixtures::TempDir dir;
    std::string path = dir.write("src.tsv",
                                 "01\tfootwear\n"
                                 "01.1\trubber boots\n"
                                 "01.2\tleather shoes\n"
                                 "02\tbuilding materials\n"
                                 "02.1\tcement bags\n");
    return load_taxonomy(path, Scheme::dotted());
}

Taxonomy toy_target() {
    fixtures::TempDir dir;
    std::string path = dir.write("tgt.tsv",
                                 "100\tfootwear items\n"
                                 "100-10\tboots rubber\n"
                                 "100-20\tshoes leather\n"
                                 "200\tmaterials building\n"
                                 "200-10\tbags cement\n"
                                 "200-20\tbricks clay\n");
    return load_taxonomy(path, Scheme::class_item());
}

} // namespace

TEST_CASE("hierarchical_match constrains children to the parent's subtree") {
    Taxonomy source = toy_source();
    Taxonomy target = toy_target();
    auto source_bags = build_token_bags(source);
    auto target_bags = build_token_bags(target);
    MatchInputs inputs;
    inputs.source_bags = &source_bags;
    inputs.target_bags = &target_bags;
    MatchResult result =
        hierarchical_match(source, target, BaseMatcher::string_sim, inputs);
    REQUIRE(result.records.size() == 5);
    std::map<std::string, const MatchRecord*> by_source;
    for (const auto& rec : result.records) by_source[rec.source.raw] = &rec;
    CHECK(by_source.at("01")->target.raw == "100");
    CHECK(by_source.at("01.1")->target.raw == "100-10");
    CHECK(by_source.at("01.2")->target.raw == "100-20");
    CHECK(by_source.at("02")->target.raw == "200");
    CHECK(by_source.at("02.1")->target.raw == "200-10");
    for (const auto& rec : result.records) {
        CHECK_FALSE(rec.has_flag("fallback"));
        CHECK(rec.method == "hier-string");
    }
}

TEST_CASE("hierarchical_match falls back to the full level when needed") {
    fixtures::TempDir dir;
    // Target class 300 has no items, so 03.1 cannot match inside it.
    std::string src_path = dir.write("src.tsv",
                                     "03\tglassware\n"
                                     "03.1\twine glasses\n");
    std::string tgt_path = dir.write("tgt.tsv",
                                     "300\tglassware\n"
                                     "400\tcutlery\n"
                                     "400-10\twine glasses\n");
    Taxonomy source = load_taxonomy(src_path, Scheme::dotted());
    Taxonomy target = load_taxonomy(tgt_path, Scheme::class_item());
    auto source_bags = build_token_bags(source);
    auto target_bags = build_token_bags(target);
    MatchInputs inputs;
    inputs.source_bags = &source_bags;
    inputs.target_bags = &target_bags;
    MatchResult result =
        hierarchical_match(source, target, BaseMatcher::string_sim, inputs);
    std::map<std::string, const MatchRecord*> by_source;
    for (const auto& rec : result.records) by_source[rec.source.raw] = &rec;
    CHECK(by_source.at("03")->target.raw == "300");
    CHECK(by_source.at("03.1")->target.raw == "400-10");
    CHECK(by_source.at("03.1")->has_flag("fallback"));
}

TEST_CASE("hierarchical_match clamps deep sources to the target depth") {
    fixtures::TempDir dir;
    std::string src_path = dir.write("src.tsv",
                                     "05\ttools\n"
                                     "05.1\thand tools\n"
                                     "05.1.1\thammers hand tools\n");
    std::string tgt_path = dir.write("tgt.tsv",
                                     "500\ttools\n"
                                     "500-10\thand tools hammers\n"
                                     "500-20\tpower drills\n");
    Taxonomy source = load_taxonomy(src_path, Scheme::dotted());
    Taxonomy target = load_taxonomy(tgt_path, Scheme::class_item());
    auto source_bags = build_token_bags(source);
    auto target_bags = build_token_bags(target);
    MatchInputs inputs;
    inputs.source_bags = &source_bags;
    inputs.target_bags = &target_bags;
    MatchResult result =
        hierarchical_match(source, target, BaseMatcher::string_sim, inputs);
    std::map<std::string, const MatchRecord*> by_source;
    for (const auto& rec : result.records) by_source[rec.source.raw] = &rec;
    // Level 3 clamps to target level 2: siblings of the level-2 anchor.
    CHECK(by_source.at("05.1.1")->target.raw == "500-10");
    CHECK(by_source.at("05.1.1")->target.segments.size() == 2);
}

TEST_CASE("level-1-only hierarchy equals flat matching") {
    fixtures::TempDir dir;
    std::string src_path = dir.write("src.tsv",
                                     "01\tred apples\n"
                                     "02\tgreen pears\n"
                                     "03\tyellow bananas\n");
    std::string tgt_path = dir.write("tgt.tsv",
                                     "100\tbananas yellow\n"
                                     "200\tapples red\n"
                                     "300\tpears green\n");
    Taxonomy source = load_taxonomy(src_path, Scheme::dotted());
    Taxonomy target = load_taxonomy(tgt_path, Scheme::class_item());
    auto source_bags = build_token_bags(source);
    auto target_bags = build_token_bags(target);
    MatchInputs inputs;
    inputs.source_bags = &source_bags;
    inputs.target_bags = &target_bags;
    MatchResult hier =
        hierarchical_match(source, target, BaseMatcher::string_sim, inputs);
    MatchResult flat = match_strings(source_bags, target_bags);
    REQUIRE(hier.records.size() == flat.records.size());
    for (std::size_t i = 0; i < flat.records.size(); ++i) {
        CHECK(hier.records[i].source == flat.records[i].source);
        CHECK(hier.records[i].target == flat.records[i].target);
        CHECK(hier.records[i].score == doctest::Approx(flat.records[i].score));
    }
}

TEST_CASE("match save/load round-trip") {
    fixtures::TempDir dir;
    MatchResult result;
    MatchRecord rec;
    rec.source = parse_code("01.1", Scheme::dotted());
    rec.target = parse_code("100-10", Scheme::class_item());
    rec.score = 0.8125;
    rec.method = "csls";
    rec.flags = {"fallback", "low-confidence"};
    result.records.push_back(rec);
    std::string path = dir.file("matches.tsv");
    save_matches(result, path);
    auto loaded = load_matches(path, Scheme::dotted(), Scheme::class_item());
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].source.raw == "01.1");
    CHECK(loaded[0].target.raw == "100-10");
    CHECK(loaded[0].score == doctest::Approx(0.8125));
    CHECK(loaded[0].method == "csls");
    CHECK(loaded[0].has_flag("fallback"));
    CHECK(loaded[0].has_flag("low-confidence"));
}
