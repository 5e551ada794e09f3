#include "mxe/synthetic.hpp"

#include <random>

#include "mxe/errors.hpp"

namespace mxe {

std::string_view to_string(Generator g) {
    switch (g) {
        case Generator::x5: return "x5";
        case Generator::clustered: return "clustered";
        case Generator::adversarial3: return "adversarial3";
        case Generator::intro3d: return "intro3d";
    }
    return "x5";
}

Generator generator_from_string(std::string_view name) {
    for (auto g : {Generator::x5, Generator::clustered, Generator::adversarial3, Generator::intro3d})
        if (to_string(g) == name) return g;
    throw InvalidArgument("unknown generator '" + std::string(name) + "'");
}

void SyntheticSpec::validate() const {
    if (n < 1 || d < 1 || k < 1) throw InvalidArgument("n, d and k must be at least 1");
    if (generator == Generator::clustered && k > n) throw InvalidArgument("more clusters than rows");
}

namespace {

std::vector<std::string> names(std::size_t d) {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < d; ++j) out.push_back("x" + std::to_string(j + 1));
    return out;
}

}  // namespace

DataMatrix gen_x5(std::uint64_t seed) {
    constexpr std::size_t n = 1000;
    constexpr std::size_t per = 250;
    static const double centres[4][3] = {{0, 0, 0}, {0, 0, 1}, {0, 1, 0}, {1, 0, 0}};
    static const double centres45[3][2] = {{1, 0}, {0, 1}, {0, 0}};
    static const char* labels45[3] = {"E", "F", "G"};

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, kX5Spread);
    std::normal_distribution<double> noise45(0.0, kX5Spread45);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Matrix x(n, 5);
    std::vector<std::string> cls(n), cls45(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i / per;
        cls[i] = std::string(1, static_cast<char>('A' + c));
        std::size_t e = 2;
        const double u = unit(rng);
        const double v = unit(rng);
        if (c > 0 && u < 0.75) e = v < 0.5 ? 0 : 1;
        cls45[i] = labels45[e];
        const auto r = static_cast<Eigen::Index>(i);
        for (int j = 0; j < 3; ++j) x(r, j) = centres[c][j] + noise(rng);
        for (int j = 0; j < 2; ++j) x(r, 3 + j) = centres45[e][j] + noise45(rng);
    }
    DataMatrix data(std::move(x), names(5), {}, std::move(cls));
    data.set_extra_labels("cluster45", std::move(cls45));
    return data;
}

DataMatrix gen_clustered(std::size_t n, std::size_t d, std::size_t k, std::uint64_t seed) {
    SyntheticSpec{Generator::clustered, n, d, k, seed}.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix centroids(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
    for (Eigen::Index c = 0; c < centroids.rows(); ++c)
        for (Eigen::Index j = 0; j < centroids.cols(); ++j) centroids(c, j) = 3.0 * normal(rng);

    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::vector<std::string> labels;
    labels.reserve(n);
    std::size_t row = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t size = n / k + (c < n % k ? 1 : 0);
        for (std::size_t i = 0; i < size; ++i, ++row) {
            for (Eigen::Index j = 0; j < x.cols(); ++j)
                x(static_cast<Eigen::Index>(row), j) = centroids(static_cast<Eigen::Index>(c), j) + normal(rng);
            labels.push_back("c" + std::to_string(c + 1));
        }
    }
    return DataMatrix(std::move(x), names(d), {}, std::move(labels));
}

Adversarial3 gen_adversarial3() {
    Matrix x(3, 2);
    x << 1, 0, 0, 1, 0, 0;
    DataMatrix data(std::move(x), names(2));
    const auto first = std::make_shared<const RowSet>(std::vector<std::size_t>{0, 2});
    const auto second = std::make_shared<const RowSet>(std::vector<std::size_t>{1, 2});
    auto cluster = [&](const RowSetPtr& rows) {
        std::vector<PrimitiveConstraint> out;
        for (int j = 0; j < 2; ++j) {
            const Vector w = Vector::Unit(2, j);
            out.push_back(make_primitive(data, ConstraintKind::linear, rows, w));
            out.push_back(make_primitive(data, ConstraintKind::quadratic, rows, w));
        }
        return out;
    };
    auto a = cluster(first);
    auto b = a;
    for (auto& c : cluster(second)) b.push_back(std::move(c));
    return Adversarial3{std::move(data), std::move(a), std::move(b)};
}

DataMatrix gen_intro3d(std::uint64_t seed) {
    struct Blob {
        std::size_t size;
        double centre[3];
        double spread[3];
        const char* label;
    };
    static const Blob blobs[4] = {
        {50, {0.0, 0.0, 0.0}, {0.5, 0.5, 0.5}, "a"},
        {50, {3.0, 0.0, 0.0}, {0.5, 0.5, 0.5}, "b"},
        {25, {1.5, 2.6, 0.75}, {0.5, 0.5, 0.25}, "c"},
        {25, {1.5, 2.6, -0.75}, {0.5, 0.5, 0.25}, "d"},
    };
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix x(150, 3);
    std::vector<std::string> labels;
    Eigen::Index row = 0;
    for (const auto& b : blobs) {
        for (std::size_t i = 0; i < b.size; ++i, ++row) {
            for (int j = 0; j < 3; ++j) x(row, j) = b.centre[j] + b.spread[j] * normal(rng);
            labels.emplace_back(b.label);
        }
    }
    return DataMatrix(std::move(x), names(3), {}, std::move(labels));
}

DataMatrix generate(const SyntheticSpec& spec) {
    spec.validate();
    switch (spec.generator) {
        case Generator::x5: return gen_x5(spec.seed);
        case Generator::clustered: return gen_clustered(spec.n, spec.d, spec.k, spec.seed);
        case Generator::adversarial3: return gen_adversarial3().data;
        case Generator::intro3d: return gen_intro3d(spec.seed);
    }
    throw InvalidArgument("unknown generator");
}

}  // namespace mxe
