#include <doctest.h>

#include <random>

#include "../oracles.hpp"
#include "mxe/constraints.hpp"
#include "mxe/errors.hpp"
#include "mxe/partition.hpp"
#include "mxe/synthetic.hpp"

using namespace mxe;

namespace {

DataMatrix three_points() {
    Matrix x(3, 2);
    x << 1, 0, 0, 1, 0, 0;
    return DataMatrix(x, {});
}

DataMatrix gaussian_data(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = normal(rng);
    return DataMatrix(x, {});
}

RowSetPtr rows(std::vector<std::size_t> idx) { return std::make_shared<const RowSet>(std::move(idx)); }

}  // namespace

TEST_CASE("linear and quadratic constraint functions on the three points") {
    const auto x = three_points().values();
    const RowSet i13({0, 2});
    CHECK(eval_linear(x, i13, Vector::Unit(2, 0)) == 1.0);
    CHECK(eval_quadratic(x, i13, Vector::Unit(2, 0)) == 0.5);
    CHECK(eval_quadratic(x, RowSet({1}), Vector::Unit(2, 1)) == 0.0);
    CHECK_THROWS_AS(eval_linear(x, RowSet(), Vector::Unit(2, 0)), InvalidConstraint);
    CHECK_THROWS_AS(eval_quadratic(x, RowSet(), Vector::Unit(2, 0)), InvalidConstraint);
}

TEST_CASE("full-row constraint functions match column oracles") {
    const auto data = gaussian_data(10, 3, 11);
    const auto& x = data.values();
    const auto all = RowSet::all(10);
    std::vector<std::size_t> idx(all.begin(), all.end());
    for (Eigen::Index j = 0; j < 3; ++j) {
        const Vector e = Vector::Unit(3, j);
        CHECK(eval_linear(x, all, e) == doctest::Approx(oracle::column_sum(x, j)).epsilon(1e-13));
        CHECK(eval_quadratic(x, all, e) == doctest::Approx(10.0 * oracle::two_pass_variance(x, idx, j)).epsilon(1e-12));
    }
}

TEST_CASE("make_primitive validates direction and rows") {
    const auto data = three_points();
    CHECK_THROWS_AS(make_primitive(data, ConstraintKind::linear, rows({0}), Vector::Zero(2)), InvalidConstraint);
    CHECK_THROWS_AS(make_primitive(data, ConstraintKind::linear, rows({}), Vector::Unit(2, 0)), InvalidConstraint);
    CHECK_THROWS_AS(make_primitive(data, ConstraintKind::linear, rows({7}), Vector::Unit(2, 0)), InvalidConstraint);
    CHECK_THROWS_AS(make_primitive(data, ConstraintKind::linear, rows({0}), Vector::Unit(3, 0)), InvalidConstraint);
    const auto c = make_primitive(data, ConstraintKind::quadratic, rows({0, 2}), Vector::Unit(2, 0));
    CHECK(c.target == 0.5);
    CHECK(c.anchor_mean.isApprox(Vector::Unit(2, 0) * 0.5));
}

TEST_CASE("composite expansion counts and targets") {
    const auto data = gaussian_data(40, 4, 5);
    const auto margin = expand_composite(data, CompositeSpec::margin());
    REQUIRE(margin.expansion.size() == 8);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(margin.expansion[2 * j].kind == ConstraintKind::linear);
        CHECK(margin.expansion[2 * j + 1].kind == ConstraintKind::quadratic);
        CHECK(margin.expansion[2 * j].direction == Vector::Unit(4, static_cast<Eigen::Index>(j)));
    }
    const auto one = expand_composite(data, CompositeSpec::one_cluster());
    CHECK(one.expansion.size() == 8);
    const auto cl = expand_composite(data, CompositeSpec::cluster(RowSet({1, 4, 9, 20, 33})));
    CHECK(cl.expansion.size() == 8);
    const auto two = expand_composite(data, CompositeSpec::two_d(RowSet::all(40), Vector::Unit(4, 0), Vector::Unit(4, 1)));
    CHECK(two.expansion.size() == 4);
    CHECK_THROWS_AS(expand_composite(data, CompositeSpec::cluster(RowSet())), InvalidConstraint);
    Vector skew(4);
    skew << 1, 1e-6, 0, 0;
    CHECK_THROWS_AS(expand_composite(data, CompositeSpec::two_d(RowSet::all(40), Vector::Unit(4, 1), skew.normalized())),
                    InvalidConstraint);

    // Re-evaluating every primitive on the data reproduces its target exactly.
    for (const auto* comp : {&margin, &one, &cl, &two})
        for (const auto& p : comp->expansion) CHECK(evaluate(p, data.values()) == p.target);
}

TEST_CASE("cluster directions are orthonormal with fixed sign") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto data = gaussian_data(30, 6, seed);
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < 30; i += 1 + seed % 3) idx.push_back(i);
        const Matrix v = cluster_directions(data.values(), RowSet(idx));
        CHECK((v.transpose() * v - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-8);
        for (Eigen::Index j = 0; j < v.cols(); ++j) {
            Eigen::Index at;
            v.col(j).cwiseAbs().maxCoeff(&at);
            CHECK(v(at, j) > 0.0);
        }
    }
    // Fewer rows than dimensions: degenerate, still orthonormal.
    const auto data = gaussian_data(10, 6, 1);
    const Matrix v = cluster_directions(data.values(), RowSet({2, 7}));
    CHECK((v.transpose() * v - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("cluster on two of the three points") {
    const auto data = three_points();
    const auto c = expand_composite(data, CompositeSpec::cluster(RowSet({0, 2})));
    REQUIRE(c.expansion.size() == 4);
    CHECK(c.expansion[1].target == doctest::Approx(0.5));
    CHECK(c.expansion[3].target == doctest::Approx(0.0));
    CHECK(std::abs(c.expansion[1].direction(0)) == doctest::Approx(1.0));
}

TEST_CASE("duplicate primitives are dropped") {
    const auto data = gaussian_data(20, 3, 2);
    ConstraintSet set;
    CHECK(set.add(expand_composite(data, CompositeSpec::cluster(RowSet({1, 2, 3, 4})))) == 6);
    CHECK(set.add(expand_composite(data, CompositeSpec::cluster(RowSet({4, 3, 2, 1})))) == 0);
    CHECK(set.composites().size() == 1);
    CHECK(set.add(expand_composite(data, CompositeSpec::margin())) == 6);
    // one_cluster and a cluster over all rows share primitives
    CHECK(set.add(expand_composite(data, CompositeSpec::one_cluster())) == 6);
    CHECK(set.add(expand_composite(data, CompositeSpec::cluster(RowSet::all(20)))) == 0);
    CHECK(set.size() == 18);
}

TEST_CASE("partition without constraints is one class") {
    const auto p = build_partition(100, {});
    CHECK(p.classes() == 1);
    CHECK(p.class_sizes[0] == 100);
}

TEST_CASE("partition of the overlapping three-point constraints") {
    const auto problem = gen_adversarial3();
    const auto pa = build_partition(3, problem.case_a);
    CHECK(pa.classes() == 2);
    CHECK(pa.class_of_row[0] == pa.class_of_row[2]);
    const auto pb = build_partition(3, problem.case_b);
    CHECK(pb.classes() == 3);
    CHECK(pb.class_constraint_sets[pb.class_of_row[2]].size() == 8);
    CHECK(pb.class_constraint_sets[pb.class_of_row[0]].size() == 4);
}

TEST_CASE("disjoint clusters plus margin give k classes") {
    const auto data = gen_clustered(60, 3, 4, 9);
    ConstraintSet set;
    set.add(expand_composite(data, CompositeSpec::margin()));
    for (std::size_t c = 0; c < 4; ++c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < 60; ++i)
            if (data.class_labels()[i] == "c" + std::to_string(c + 1)) idx.push_back(i);
        set.add(expand_composite(data, CompositeSpec::cluster(RowSet(idx))));
    }
    const auto p = build_partition(60, set.primitives());
    CHECK(p.classes() == 4);
    CHECK(oracle::brute_force_classes(60, set.primitives()).size() == 4);
}

namespace {

std::vector<PrimitiveConstraint> random_constraints(const DataMatrix& data, std::size_t count, std::mt19937_64& rng) {
    std::vector<PrimitiveConstraint> out;
    std::bernoulli_distribution pick(0.35);
    for (std::size_t t = 0; t < count; ++t) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < data.rows(); ++i)
            if (pick(rng)) idx.push_back(i);
        if (idx.empty()) idx.push_back(t % data.rows());
        out.push_back(make_primitive(data, t % 2 ? ConstraintKind::quadratic : ConstraintKind::linear, rows(idx),
                                     oracle::random_unit(static_cast<Eigen::Index>(data.cols()), rng)));
    }
    return out;
}

std::vector<std::set<std::size_t>> classes_of(const RowPartition& p) {
    std::vector<std::set<std::size_t>> out(p.classes());
    for (std::size_t i = 0; i < p.rows(); ++i) out[p.class_of_row[i]].insert(i);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST_CASE("partition matches brute-force grouping, is permutation-equivariant and only refines") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 40;
        const auto data = gaussian_data(n, 3, 100 + trial);
        const auto cs = random_constraints(data, 1 + trial % 6, rng);
        const auto p = build_partition(n, cs);

        CHECK(classes_of(p) == oracle::brute_force_classes(n, cs));
        std::size_t total = 0;
        for (auto s : p.class_sizes) total += s;
        CHECK(total == n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                bool same_cover = true;
                for (const auto& c : cs) same_cover &= c.rows->contains(i) == c.rows->contains(j);
                CHECK((p.class_of_row[i] == p.class_of_row[j]) == same_cover);
            }

        // Relabel rows by a random permutation.
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<PrimitiveConstraint> moved = cs;
        for (auto& c : moved) {
            std::vector<std::size_t> idx;
            for (auto i : *c.rows) idx.push_back(perm[i]);
            c.rows = rows(idx);
        }
        const auto q = build_partition(n, moved);
        CHECK(q.classes() == p.classes());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                CHECK((p.class_of_row[i] == p.class_of_row[j]) == (q.class_of_row[perm[i]] == q.class_of_row[perm[j]]));

        // Adding constraints never merges classes.
        auto more = cs;
        for (auto& c : random_constraints(data, 2, rng)) more.push_back(c);
        const auto r = build_partition(n, more);
        CHECK(r.classes() >= p.classes());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (r.class_of_row[i] == r.class_of_row[j]) CHECK(p.class_of_row[i] == p.class_of_row[j]);
    }
}

TEST_CASE("partition rejects out-of-range rows") {
    const auto data = three_points();
    auto c = make_primitive(data, ConstraintKind::linear, rows({0}), Vector::Unit(2, 0));
    CHECK_THROWS_AS(build_partition(1, {c, make_primitive(data, ConstraintKind::linear, rows({2}), Vector::Unit(2, 0))}),
                    InvalidConstraint);
}
