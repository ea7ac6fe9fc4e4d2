#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "taxalign/align.hpp"

using namespace taxalign;

namespace {

SeedDictionary identity_dict(Eigen::Index n) {
    SeedDictionary dict;
    for (Eigen::Index i = 0; i < n; ++i) dict.pairs.emplace_back(i, i);
    return dict;
}

double max_orthogonality_error(const Eigen::MatrixXd& W) {
    Eigen::MatrixXd gram = W.transpose() * W;
    gram.diagonal().array() -= 1.0;
    return gram.cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("procrustes_solve recovers the identity") {
    Eigen::MatrixXd x = fixtures::gaussian(20, 6, 1);
    MappingMatrix mapping = procrustes_solve(x, x, identity_dict(20));
    CHECK((mapping.W - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() <=
          1e-10);
}

TEST_CASE("procrustes_solve recovers a random rotation") {
    auto fixture = fixtures::rotated_clone(100, 50, 0.0, 7);
    MappingMatrix mapping =
        procrustes_solve(fixture.X, fixture.Y, identity_dict(100));
    CHECK((mapping.W - fixture.R).norm() <= 1e-6);
    CHECK(max_orthogonality_error(mapping.W) <= 1e-8);
}

TEST_CASE("procrustes_solve on an exact 90 degree rotation") {
    Eigen::MatrixXd x(2, 2), y(2, 2);
    x << 1, 0, 0, 1;
    y << 0, 1, -1, 0;
    MappingMatrix mapping = procrustes_solve(x, y, identity_dict(2));
    Eigen::MatrixXd expected(2, 2);
    expected << 0, -1, 1, 0;
    CHECK((mapping.W - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("procrustes_solve error cases") {
    Eigen::MatrixXd x = fixtures::gaussian(4, 3, 2);
    CHECK_THROWS_AS(procrustes_solve(x, x, SeedDictionary{}), DataError);

    SeedDictionary out_of_range;
    out_of_range.pairs.emplace_back(0, 10);
    CHECK_THROWS_AS(procrustes_solve(x, x, out_of_range), DataError);

    Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(4, 3);
    CHECK_THROWS_AS(procrustes_solve(zeros, zeros, identity_dict(4)),
                    NumericalError);
}

TEST_CASE("procrustes_solve is invariant to common positive rescaling") {
    auto fixture = fixtures::rotated_clone(40, 8, 0.0, 3);
    MappingMatrix base =
        procrustes_solve(fixture.X, fixture.Y, identity_dict(40));
    MappingMatrix scaled = procrustes_solve(3.5 * fixture.X, 3.5 * fixture.Y,
                                            identity_dict(40));
    CHECK((base.W - scaled.W).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("vecmap_transform preserves the source Gram matrix on X=Y") {
    Eigen::MatrixXd x = fixtures::gaussian(15, 5, 4);
    VecmapResult result = vecmap_transform(x, x, identity_dict(15));
    Eigen::MatrixXd before = unit_rows(x) * unit_rows(x).transpose();
    Eigen::MatrixXd after =
        unit_rows(result.X) * unit_rows(result.X).transpose();
    CHECK((before - after).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("vecmap_transform does not hurt dictionary-pair cosine") {
    auto fixture = fixtures::rotated_clone(60, 10, 0.0, 5);
    SeedDictionary dict = identity_dict(60);
    double before = 0.0;
    for (Eigen::Index i = 0; i < 60; ++i) {
        before += cosine(fixture.X.row(i), fixture.Y.row(i));
    }
    VecmapResult result = vecmap_transform(fixture.X, fixture.Y, dict);
    double after = 0.0;
    for (Eigen::Index i = 0; i < 60; ++i) {
        after += cosine(result.X.row(i), result.Y.row(i));
    }
    CHECK(after >= before - 1e-10);
}

TEST_CASE("vecmap_transform with a single pair aligns that pair") {
    Eigen::MatrixXd x = fixtures::gaussian(10, 4, 8);
    Eigen::MatrixXd y = fixtures::gaussian(12, 4, 9);
    SeedDictionary dict;
    dict.pairs.emplace_back(3, 5);
    VecmapResult result = vecmap_transform(x, y, dict);
    CHECK(cosine(result.X.row(3), result.Y.row(5)) ==
          doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("induce_dictionary identity pairing in mutual mode") {
    Eigen::MatrixXd x = fixtures::gaussian(12, 6, 10);
    SeedDictionary dict =
        induce_dictionary(x, x, Scorer::cosine, InductionMode::mutual);
    REQUIRE(dict.pairs.size() == 12);
    CHECK(fixtures::precision_at_1(dict.pairs) == 1.0);
}

TEST_CASE("induce_dictionary breaks ties toward the lowest index") {
    Eigen::MatrixXd x(1, 2);
    x << 1, 0;
    Eigen::MatrixXd y(8, 2);
    y.setZero();
    for (Eigen::Index i = 0; i < 8; ++i) y(i, 1) = 1; // all equidistant
    y.row(3) << 0.6, 0.8;
    y.row(7) << 0.6, 0.8; // rows 3 and 7 tie for best
    SeedDictionary dict =
        induce_dictionary(x, y, Scorer::cosine, InductionMode::forward);
    REQUIRE(dict.pairs.size() == 1);
    CHECK(dict.pairs[0].second == 3);
}

TEST_CASE("induce_dictionary excludes zero rows") {
    Eigen::MatrixXd x = fixtures::gaussian(5, 3, 6);
    x.row(2).setZero();
    SeedDictionary dict =
        induce_dictionary(x, x, Scorer::cosine, InductionMode::forward);
    CHECK(dict.pairs.size() == 4);
    for (const auto& [s, t] : dict.pairs) CHECK(s != 2);

    Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(3, 3);
    CHECK_THROWS_AS(
        induce_dictionary(zeros, x, Scorer::cosine, InductionMode::forward),
        DataError);
}

TEST_CASE("csls forward induction on the rotated clone is near-perfect") {
    auto fixture = fixtures::rotated_clone(150, 20, 0.0, 11);
    MappingMatrix mapping =
        procrustes_solve(fixture.X, fixture.Y, identity_dict(150));
    SeedDictionary dict =
        induce_dictionary(fixture.X * mapping.W.transpose(), fixture.Y,
                          Scorer::csls, InductionMode::forward);
    CHECK(fixtures::precision_at_1(dict.pairs) >= 0.99);
}

TEST_CASE("refine reaches a fixed point on aligned spaces") {
    Eigen::MatrixXd x = unit_rows(fixtures::gaussian(40, 8, 13));
    SeedDictionary seed;
    for (Eigen::Index i = 0; i < 4; ++i) seed.pairs.emplace_back(i, i);
    AlignmentConfig cfg;
    MappingMatrix mapping = refine(x, x, seed, cfg);
    CHECK((mapping.W - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() <=
          1e-6);
    CHECK(mapping.iterations < cfg.refinement_iterations); // early stop
}

TEST_CASE("refine with one iteration has history length 1") {
    auto fixture = fixtures::rotated_clone(30, 6, 0.0, 17);
    AlignmentConfig cfg;
    cfg.refinement_iterations = 1;
    MappingMatrix mapping = refine(fixture.X, fixture.Y, identity_dict(30), cfg);
    CHECK(mapping.iterations == 1);
    CHECK(mapping.objective_history.size() == 1);
}

TEST_CASE("refine recovers the rotation from a 10% seed") {
    auto fixture = fixtures::rotated_clone(300, 15, 0.01, 19);
    SeedDictionary seed;
    for (Eigen::Index i = 0; i < 30; ++i) seed.pairs.emplace_back(i, i);
    AlignmentConfig cfg;
    MappingMatrix mapping = refine(fixture.X, fixture.Y, seed, cfg);

    // P@1 on the held-out pairs.
    SeedDictionary induced =
        induce_dictionary(fixture.X * mapping.W.transpose(), fixture.Y,
                          Scorer::csls, InductionMode::forward);
    long hits = 0, held_out = 0;
    for (const auto& [s, t] : induced.pairs) {
        if (s < 30) continue;
        ++held_out;
        if (s == t) ++hits;
    }
    REQUIRE(held_out > 0);
    CHECK(static_cast<double>(hits) / held_out >= 0.95);
}

TEST_CASE("refine with a perfect dictionary never degrades P@1") {
    auto fixture = fixtures::rotated_clone(120, 10, 0.01, 23);
    SeedDictionary full = identity_dict(120);
    AlignmentConfig cfg;
    MappingMatrix round1 = procrustes_solve(fixture.X, fixture.Y, full);
    MappingMatrix refined = refine(fixture.X, fixture.Y, full, cfg);

    auto p_at_1 = [&](const MappingMatrix& m) {
        SeedDictionary induced =
            induce_dictionary(fixture.X * m.W.transpose(), fixture.Y,
                              Scorer::csls, InductionMode::forward);
        return fixtures::precision_at_1(induced.pairs);
    };
    CHECK(p_at_1(refined) >= p_at_1(round1));
}

TEST_CASE("self_learn recovers identity on identical spaces") {
    Eigen::MatrixXd x = unit_rows(fixtures::gaussian(60, 10, 29));
    AlignmentConfig cfg;
    cfg.restarts = 1;
    MappingMatrix mapping = self_learn(x, x, cfg);
    SeedDictionary induced =
        induce_dictionary(x * mapping.W.transpose(), x, Scorer::csls,
                          InductionMode::forward);
    CHECK(fixtures::precision_at_1(induced.pairs) == 1.0);
}

TEST_CASE("self_learn requires enough usable rows") {
    Eigen::MatrixXd x = unit_rows(fixtures::gaussian(10, 4, 31));
    AlignmentConfig cfg; // csls_k = 10 needs >= 20 rows
    CHECK_THROWS_AS(self_learn(x, x, cfg), DataError);
}

TEST_CASE("mapping save/load round-trip") {
    fixtures::TempDir dir;
    auto fixture = fixtures::rotated_clone(20, 5, 0.0, 37);
    MappingMatrix mapping =
        procrustes_solve(fixture.X, fixture.Y, identity_dict(20));
    mapping.objective_history = {0.25, 0.5};
    std::string path = dir.file("mapping.txt");
    save_mapping(mapping, path);
    MappingMatrix loaded = load_mapping(path);
    CHECK(loaded.method == "procrustes");
    CHECK((loaded.W - mapping.W).cwiseAbs().maxCoeff() <= 1e-12);
    REQUIRE(loaded.objective_history.size() == 2);
    CHECK(loaded.objective_history[1] == doctest::Approx(0.5));
}

TEST_CASE("load_seed_dictionary resolves codes to rows") {
    fixtures::TempDir dir;
    CategoryVectorSet source, target;
    source.scheme = "dotted";
    target.scheme = "class-item";
    for (const char* raw : {"01", "01.11", "02"}) {
        source.codes.push_back(parse_code(raw, Scheme::dotted()));
    }
    for (const char* raw : {"620", "620-80"}) {
        target.codes.push_back(parse_code(raw, Scheme::class_item()));
    }
    std::string path = dir.write("dict.tsv", "01.11\t620-80\n01\t620\n");
    SeedDictionary dict = load_seed_dictionary(path, source, target);
    REQUIRE(dict.pairs.size() == 2);
    CHECK(dict.pairs[0] == std::make_pair<Eigen::Index, Eigen::Index>(1, 1));
    CHECK(dict.pairs[1] == std::make_pair<Eigen::Index, Eigen::Index>(0, 0));

    std::string bad = dir.write("bad.tsv", "99.99\t620\n");
    CHECK_THROWS_AS(load_seed_dictionary(bad, source, target), DataError);
}
