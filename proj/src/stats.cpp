#include "mxe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "mxe/errors.hpp"

namespace mxe {

namespace {

constexpr double kStdFloor = 1e-12;

struct Moments {
    double mean = 0.0;
    double std = 0.0;
};

template <class Pred>
Moments column_moments(const Matrix& x, Eigen::Index j, Pred include) {
    double sum = 0.0;
    double count = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (!include(static_cast<std::size_t>(i))) continue;
        sum += x(i, j);
        count += 1.0;
    }
    if (count == 0.0) return {};
    const double mean = sum / count;
    double ss = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (!include(static_cast<std::size_t>(i))) continue;
        ss += (x(i, j) - mean) * (x(i, j) - mean);
    }
    return {mean, std::sqrt(ss / count)};
}

}  // namespace

SelectionStats selection_stats(const DataMatrix& data, const RowSet& rows) {
    if (rows.empty()) throw InvalidArgument("selection is empty");
    if (rows.max_index() >= data.rows()) throw InvalidArgument("selection row out of range");
    const auto n = data.rows();
    std::vector<char> in(n, 0);
    for (auto i : rows) in[i] = 1;

    SelectionStats out;
    out.count = rows.size();
    out.rest_empty = rows.size() == n;
    const double n_sel = static_cast<double>(rows.size());
    const double n_rest = static_cast<double>(n - rows.size());
    const Matrix& x = data.raw();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        AttributeStats a;
        a.column = static_cast<std::size_t>(j);
        a.name = data.column_names()[a.column];
        const auto sel = column_moments(x, j, [&](std::size_t i) { return in[i] != 0; });
        const auto rest = column_moments(x, j, [&](std::size_t i) { return in[i] == 0; });
        a.mean_selected = sel.mean;
        a.std_selected = sel.std;
        a.mean_rest = rest.mean;
        a.std_rest = rest.std;
        if (!out.rest_empty) {
            const double pooled =
                std::sqrt((n_sel * sel.std * sel.std + n_rest * rest.std * rest.std) / (n_sel + n_rest));
            a.score = std::abs(sel.mean - rest.mean) / std::max(pooled, kStdFloor) +
                      std::abs(std::log(std::max(sel.std, kStdFloor) / std::max(rest.std, kStdFloor)));
        }
        out.attributes.push_back(std::move(a));
    }
    out.ranking.resize(out.attributes.size());
    std::iota(out.ranking.begin(), out.ranking.end(), std::size_t{0});
    std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](std::size_t a, std::size_t b) {
        return out.attributes[a].score > out.attributes[b].score;
    });

    if (data.has_labels()) {
        std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // (class size, intersection)
        for (std::size_t i = 0; i < n; ++i) {
            auto& c = counts[data.class_labels()[i]];
            ++c.first;
            c.second += in[i] ? 1 : 0;
        }
        for (const auto& [label, c] : counts) {
            const double uni = static_cast<double>(c.first + rows.size() - c.second);
            out.jaccard[label] = static_cast<double>(c.second) / uni;
        }
    }
    return out;
}

double chi2_quantile_2dof(double level) {
    if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence level must lie in (0, 1)");
    return -2.0 * std::log1p(-level);
}

Ellipse confidence_ellipse(const Matrix& points, double level) {
    if (points.cols() != 2) throw InvalidArgument("ellipse needs 2-D points");
    if (points.rows() < 3) throw InvalidArgument("ellipse needs at least 3 points");
    const double q = chi2_quantile_2dof(level);
    Ellipse e;
    e.center = points.colwise().mean().transpose();
    const Matrix c = points.rowwise() - e.center.transpose();
    const Eigen::Matrix2d cov = (c.transpose() * c) / static_cast<double>(points.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
    // Ascending eigenvalues; major axis is the second.
    for (int k = 0; k < 2; ++k) {
        const int src = 1 - k;
        e.semi_axes(k) = std::sqrt(q * std::max(eig.eigenvalues()(src), 0.0));
        e.axes.col(k) = eig.eigenvectors().col(src);
    }
    if (e.axes(0, 0) < 0.0 || (e.axes(0, 0) == 0.0 && e.axes(1, 0) < 0.0)) e.axes.col(0) *= -1.0;
    e.angle = std::atan2(e.axes(1, 0), e.axes(0, 0));
    return e;
}

}  // namespace mxe
