#include <doctest.h>

#include <random>
#include <sstream>

#include "../oracles.hpp"
#include "mxe/errors.hpp"
#include "mxe/model.hpp"
#include "mxe/synthetic.hpp"

using namespace mxe;

namespace {

DataMatrix gaussian_data(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = normal(rng) + (i % 3 == 0 ? 1.5 : 0.0);
    return DataMatrix(x, {});
}

std::vector<PrimitiveConstraint> overlapping_clusters(const DataMatrix& data) {
    ConstraintSet set;
    set.add(expand_composite(data, CompositeSpec::margin()));
    std::vector<std::size_t> a, b;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        if (i < 2 * data.rows() / 3) a.push_back(i);
        if (i >= data.rows() / 3) b.push_back(i);
    }
    set.add(expand_composite(data, CompositeSpec::cluster(RowSet(a))));
    set.add(expand_composite(data, CompositeSpec::cluster(RowSet(b))));
    return set.primitives();
}

// Single class covering every row, parameters replaced by a random SPD pair.
BackgroundModel random_single_class(const DataMatrix& data, ConstraintKind kind, std::mt19937_64& rng) {
    const auto d = static_cast<Eigen::Index>(data.cols());
    auto all = std::make_shared<const RowSet>(RowSet::all(data.rows()));
    auto model = init_model(data, {make_primitive(data, kind, all, oracle::random_unit(d, rng))});
    auto& p = model.params()[0];
    p.natural_second = oracle::random_spd(d, rng);
    p.cov = p.natural_second.inverse();
    std::normal_distribution<double> normal;
    for (Eigen::Index j = 0; j < d; ++j) p.natural_first(j) = normal(rng);
    p.mean = p.cov * p.natural_first;
    return model;
}

}  // namespace

TEST_CASE("initial model is the unit spherical Gaussian") {
    const auto data = gaussian_data(9, 3, 1);
    const auto m = init_model(data, overlapping_clusters(data));
    CHECK(m.status == FitStatus::unfitted);
    for (const auto& p : m.params()) {
        CHECK(p.cov == Matrix::Identity(3, 3));
        CHECK(p.mean.isZero(0.0));
    }
}

TEST_CASE("single linear and quadratic updates hit their targets") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const auto data = gaussian_data(12, 4, 200 + trial);
        auto lin = random_single_class(data, ConstraintKind::linear, rng);
        update_linear(lin, 0);
        CHECK(expected_value(lin, 0) == doctest::Approx(lin.constraints()[0].target).epsilon(1e-10));

        auto quad = random_single_class(data, ConstraintKind::quadratic, rng);
        const auto r = update_quadratic(quad, 0);
        CHECK_FALSE(r.clamped);
        CHECK(expected_value(quad, 0) == doctest::Approx(quad.constraints()[0].target).epsilon(1e-9));
        const auto& p = quad.params()[0];
        CHECK((p.cov - p.natural_second.inverse()).norm() <= 1e-9 * p.cov.norm());
        CHECK((p.mean - p.cov * p.natural_first).norm() <= 1e-9 * (1.0 + p.mean.norm()));
    }
}

TEST_CASE("phi is decreasing and convex on the feasible interval") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const auto data = gaussian_data(15, 3, 300 + trial);
        const auto model = init_model(data, overlapping_clusters(data));
        for (std::size_t t = 0; t < model.constraints().size(); ++t) {
            if (model.constraints()[t].kind != ConstraintKind::quadratic) continue;
            const double lo = quadratic_lambda_lower_bound(model, t);
            std::vector<double> grid;
            for (int k = 1; k < 60; ++k) grid.push_back(lo + (std::min(-lo, 50.0) + (-lo)) * k / 60.0);
            double prev = quadratic_phi(model, t, grid[0]);
            double prev_slope = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 1; k < grid.size(); ++k) {
                const double v = quadratic_phi(model, t, grid[k]);
                CHECK(v < prev);
                const double slope = (v - prev) / (grid[k] - grid[k - 1]);
                CHECK(slope >= prev_slope - 1e-9 * std::abs(prev_slope));
                prev_slope = slope;
                prev = v;
            }
        }
    }
}

TEST_CASE("Woodbury-maintained covariance matches direct inversion") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t d = 2 + trial % 12;
        const auto data = gaussian_data(d + 6, d, 400 + trial);
        auto model = random_single_class(data, ConstraintKind::quadratic, rng);
        update_quadratic(model, 0);
        const auto& p = model.params()[0];
        const Matrix direct = p.natural_second.inverse();
        CHECK((p.cov - direct).norm() / direct.norm() <= 1e-10);
    }
}

TEST_CASE("three-point data with one cluster: exact solution after one sweep") {
    const auto problem = gen_adversarial3();
    FitConfig config;
    auto fitted = fit(init_model(problem.data, problem.case_a), config);
    CHECK(fitted.status == FitStatus::converged);
    CHECK(fitted.diagnostics.sweeps <= 2);
    const auto& p1 = fitted.params_of_row(0);
    const auto& p2 = fitted.params_of_row(1);
    CHECK(&p1 == &fitted.params_of_row(2));
    CHECK(std::abs(p1.mean(0) - 0.5) <= 1e-6);
    CHECK(std::abs(p1.mean(1)) <= 1e-6);
    CHECK(std::abs(p1.cov(0, 0) - 0.25) <= 1e-6);
    CHECK(std::abs(p1.cov(1, 1)) <= 1e-6);
    CHECK(std::abs(p1.cov(0, 1)) <= 1e-6);
    CHECK((p2.cov - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(p2.mean.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("factored fit agrees with the per-row reference optimizer") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto data = gaussian_data(12, 3, seed);
        const auto cs = overlapping_clusters(data);
        FitConfig config;
        config.stop_on_convergence = false;
        config.max_sweeps = 300;
        config.time_budget = std::chrono::duration<double>(60.0);
        const auto fitted = fit(init_model(data, cs), config);

        oracle::PerRowModel ref(data.rows(), data.cols());
        ref.fit(cs, 300);
        for (std::size_t t = 0; t < cs.size(); ++t)
            CHECK(std::abs(ref.expected(cs[t]) - expected_value(fitted, t)) <= 1e-6);
        for (std::size_t i = 0; i < data.rows(); ++i) {
            const auto& p = fitted.params_of_row(i);
            CHECK((p.mean - ref.mean(i)).cwiseAbs().maxCoeff() <= 1e-6);
            CHECK((p.cov - ref.cov(i)).cwiseAbs().maxCoeff() <= 1e-6);
        }
    }
}

TEST_CASE("converged status implies every moment residual within tolerance") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto data = gen_clustered(300, 5, 3, seed).standardized();
        ConstraintSet set;
        set.add(expand_composite(data, CompositeSpec::margin()));
        for (const char* l : {"c1", "c2", "c3"}) {
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < data.rows(); ++i)
                if (data.class_labels()[i] == l) idx.push_back(i);
            set.add(expand_composite(data, CompositeSpec::cluster(RowSet(idx))));
        }
        FitConfig config;
        const auto fitted = fit(init_model(data, set.primitives()), config);
        REQUIRE(fitted.status == FitStatus::converged);
        for (std::size_t t = 0; t < set.size(); ++t) {
            const auto& c = set.primitives()[t];
            // Per-row expectation, not the overlap-weighted shortcut.
            double e = 0.0;
            for (auto i : *c.rows) {
                const auto& p = fitted.params_of_row(i);
                const double u = c.direction.dot(p.mean) - (c.kind == ConstraintKind::quadratic ? c.anchor_projection() : 0.0);
                e += c.kind == ConstraintKind::linear ? u : c.direction.dot(p.cov * c.direction) + u * u;
            }
            CHECK(moment_residual(c, e) <= config.moment_tolerance);
        }
    }
}

TEST_CASE("stop conditions leave a consistent cutoff model") {
    const auto problem = gen_adversarial3();
    FitConfig config;
    config.moment_tolerance = 1e-9;
    config.lambda_tolerance = 1e-9;
    config.max_sweeps = 40;
    auto m = fit(init_model(problem.data, problem.case_b), config);
    CHECK(m.status == FitStatus::cutoff);
    CHECK(m.diagnostics.sweeps == 40);
    for (const auto& p : m.params()) CHECK((p.cov - p.natural_second.inverse()).norm() <= 1e-8 * (1 + p.cov.norm()));

    config.max_sweeps = 0;
    config.time_budget = std::chrono::duration<double>(0.05);
    m = fit(init_model(problem.data, problem.case_b), config);
    CHECK(m.status == FitStatus::cutoff);
    CHECK(m.diagnostics.wall_ms < 1000.0);

    std::stop_source src;
    src.request_stop();
    config.time_budget = std::chrono::duration<double>(10.0);
    m = fit(init_model(problem.data, problem.case_b), config, {}, src.get_token());
    CHECK(m.status == FitStatus::cutoff);
    CHECK(m.diagnostics.sweeps == 0);
}

TEST_CASE("overlapping three-point clusters converge by the moment test") {
    const auto problem = gen_adversarial3();
    const auto m = fit(init_model(problem.data, problem.case_b), FitConfig{});
    CHECK(m.status == FitStatus::converged);
    CHECK(m.diagnostics.sweeps > 2);
}

TEST_CASE("refresh floors variances and keeps the pair consistent") {
    const auto data = gaussian_data(6, 2, 3);
    auto m = init_model(data, {});
    auto& p = m.params()[0];
    p.natural_second << 1e20, 0, 0, 2;
    p.natural_first << 1, 1;
    CHECK(refresh_duals(m, 1e-12) == 1);
    CHECK(p.natural_second(0, 0) == doctest::Approx(1e12));
    CHECK(p.cov(0, 0) == doctest::Approx(1e-12));
    CHECK(p.cov(1, 1) == doctest::Approx(0.5));
    CHECK(p.mean(1) == doctest::Approx(0.5));
}

TEST_CASE("fit log csv") {
    std::ostringstream out;
    write_fit_log(out, {{1, 0.5, 0.25, 1.0}});
    CHECK(out.str().rfind("sweep,max_lambda_change,max_residual,elapsed_ms\n1,", 0) == 0);
}

TEST_CASE("config validation") {
    FitConfig c;
    c.lambda_tolerance = -1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = FitConfig{};
    c.refresh_interval = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
}
