#include "mxe/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "mxe/errors.hpp"

namespace mxe {

std::string_view to_string(ViewMethod method) { return method == ViewMethod::pca ? "pca" : "ica"; }

ViewMethod view_method_from_string(std::string_view name) {
    if (name == "pca") return ViewMethod::pca;
    if (name == "ica") return ViewMethod::ica;
    throw InvalidArgument("unknown view method '" + std::string(name) + "'");
}

namespace {

struct ClassTransform {
    bool identity = false;
    Matrix basis;       // eigenvectors of Sigma
    Vector variances;   // eigenvalues of Sigma
    Vector mean;
};

ClassTransform class_transform(const ClassParams& p) {
    ClassTransform t;
    t.mean = p.mean;
    const auto d = p.cov.rows();
    if (p.mean.isZero(0.0) && p.cov == Matrix::Identity(d, d)) {
        t.identity = true;
        return t;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (p.cov + p.cov.transpose()));
    t.basis = eig.eigenvectors();
    t.variances = eig.eigenvalues();
    return t;
}

}  // namespace

WhitenedMatrix whiten(const Matrix& data, const BackgroundModel& model, std::uint64_t model_version) {
    if (model.status == FitStatus::in_progress) throw StaleModel("background model is being fitted");
    if (static_cast<std::size_t>(data.cols()) != model.dims() ||
        static_cast<std::size_t>(data.rows()) != model.partition().rows())
        throw InvalidArgument("data shape does not match the background model");

    std::vector<ClassTransform> transforms;
    transforms.reserve(model.params().size());
    for (const auto& p : model.params()) transforms.push_back(class_transform(p));

    WhitenedMatrix out{Matrix(data.rows(), data.cols()), model_version};
    Vector z(data.cols());
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const auto& t = transforms[model.partition().class_of_row[static_cast<std::size_t>(i)]];
        if (t.identity) {
            out.values.row(i) = data.row(i);
            continue;
        }
        z.noalias() = t.basis.transpose() * (data.row(i).transpose() - t.mean);
        for (Eigen::Index k = 0; k < z.size(); ++k) {
            const double var = t.variances(k);
            double v = z(k) == 0.0 ? 0.0 : (var > 0.0 ? z(k) / std::sqrt(var) : std::copysign(kWhitenClip, z(k)));
            z(k) = std::clamp(v, -kWhitenClip, kWhitenClip);
        }
        out.values.row(i).noalias() = (t.basis * z).transpose();
    }
    return out;
}

Matrix sample_background(const BackgroundModel& model, std::uint64_t seed) {
    if (model.status == FitStatus::in_progress) throw StaleModel("background model is being fitted");
    const auto d = static_cast<Eigen::Index>(model.dims());
    std::vector<Matrix> factors;
    factors.reserve(model.params().size());
    for (const auto& p : model.params()) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (p.cov + p.cov.transpose()));
        factors.push_back(eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal());
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto n = model.partition().rows();
    Matrix out(static_cast<Eigen::Index>(n), d);
    Vector z(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < d; ++k) z(k) = normal(rng);
        const auto c = model.partition().class_of_row[i];
        out.row(static_cast<Eigen::Index>(i)).noalias() = (model.params()[c].mean + factors[c] * z).transpose();
    }
    return out;
}

double pca_score(double variance) {
    const double v = std::max(variance, 1e-300);
    return 0.5 * (v - std::log(v) - 1.0);
}

double log_cosh(double x) {
    const double a = std::abs(x);
    return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

namespace {

double gaussian_logcosh_integrand(double x) {
    return log_cosh(x) * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double simpson(double a, double b, double fa, double fm, double fb) { return (b - a) / 6.0 * (fa + 4.0 * fm + fb); }

double adaptive_simpson(double a, double b, double fa, double fm, double fb, double whole, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = gaussian_logcosh_integrand(lm);
    const double frm = gaussian_logcosh_integrand(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps) return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
           adaptive_simpson(m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

}  // namespace

double gaussian_logcosh_mean() {
    static const double value = [] {
        // Even integrand: integrate [0, 16] piecewise and double. Whole-interval
        // Simpson would see near-zero samples at 0, 8 and 16 and stop early.
        double total = 0.0;
        for (int piece = 0; piece < 32; ++piece) {
            const double a = 0.5 * piece, b = a + 0.5;
            const double fa = gaussian_logcosh_integrand(a);
            const double fb = gaussian_logcosh_integrand(b);
            const double fm = gaussian_logcosh_integrand(0.5 * (a + b));
            total += adaptive_simpson(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), 1e-16, 40);
        }
        return 2.0 * total;
    }();
    return value;
}

namespace {

void check_view_input(const Matrix& y) {
    if (y.rows() < 3) throw InvalidArgument("a projection needs at least 3 rows");
    if (y.cols() < 2) throw InvalidArgument("a 2-D projection needs at least 2 columns");
    if (!y.allFinite()) throw InvalidArgument("whitened data contains non-finite values");
}

Matrix covariance(const Matrix& y, Vector& mean) {
    mean = y.colwise().mean().transpose();
    const Matrix c = y.rowwise() - mean.transpose();
    Matrix cov = Matrix::Zero(y.cols(), y.cols());
    cov.selfadjointView<Eigen::Lower>().rankUpdate(c.transpose(), 1.0 / static_cast<double>(y.rows()));
    return cov.selfadjointView<Eigen::Lower>();
}

void fix_sign(Eigen::Ref<Vector> v) {
    Eigen::Index at = 0;
    v.cwiseAbs().maxCoeff(&at);
    if (v(at) < 0.0) v = -v;
}

}  // namespace

ProjectionView pca_view(const WhitenedMatrix& whitened) {
    const Matrix& y = whitened.values;
    check_view_input(y);
    Vector mean;
    const Matrix cov = covariance(y, mean);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    const Vector& var = eig.eigenvalues();
    if (!(var.maxCoeff() > 0.0)) throw InvalidArgument("whitened data has zero variance");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(var.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return pca_score(var(a)) > pca_score(var(b));
    });

    ProjectionView view;
    view.method = ViewMethod::pca;
    view.model_version = whitened.source_model_version;
    view.directions.resize(y.cols(), 2);
    for (std::size_t j = 0; j < order.size(); ++j) {
        view.scores.push_back(pca_score(var(order[j])));
        view.variances.push_back(var(order[j]));
    }
    for (Eigen::Index j = 0; j < 2; ++j) {
        Vector v = eig.eigenvectors().col(order[static_cast<std::size_t>(j)]);
        fix_sign(v);
        view.directions.col(j) = v;
    }
    view.data_points = y * view.directions;
    return view;
}

namespace {

// (W W')^{-1/2} W
Matrix symmetric_decorrelation(const Matrix& w) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(w * w.transpose());
    const Vector inv_sqrt = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose() * w;
}

}  // namespace

ProjectionView ica_view(const WhitenedMatrix& whitened, const IcaOptions& options) {
    const Matrix& y = whitened.values;
    check_view_input(y);
    const auto n = y.rows();
    const auto d = y.cols();
    if (n <= d) throw InvalidArgument("ICA needs more rows than columns");

    Vector mean;
    const Matrix cov = covariance(y, mean);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    const Vector& ev = eig.eigenvalues();
    if (!(ev.maxCoeff() > 0.0)) throw InvalidArgument("whitened data has zero variance");

    Eigen::Index wanted = options.n_components == 0 ? std::min<Eigen::Index>(d, 20)
                                                    : std::min<Eigen::Index>(d, static_cast<Eigen::Index>(options.n_components));
    Eigen::Index rank = 0;
    for (Eigen::Index j = 0; j < d; ++j) rank += ev(j) > 1e-10 * ev.maxCoeff() ? 1 : 0;
    const Eigen::Index p = std::min(wanted, rank);
    if (p < 2) throw InvalidArgument("whitened data has rank below 2");

    // Pre-whitening onto the top-p principal subspace: z = K (y - mean).
    Matrix k(p, d);
    for (Eigen::Index j = 0; j < p; ++j) {
        const Eigen::Index src = d - 1 - j;
        k.row(j) = eig.eigenvectors().col(src).transpose() / std::sqrt(ev(src));
    }
    const Matrix z = k * (y.rowwise() - mean.transpose()).transpose();  // p x n

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix w(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) w(i, j) = normal(rng);
    w = symmetric_decorrelation(w);

    const double inv_n = 1.0 / static_cast<double>(n);
    Matrix best = w;
    double best_lim = std::numeric_limits<double>::infinity();
    std::size_t it = 0;
    bool converged = false;
    Matrix wz(p, n);
    for (it = 1; it <= options.max_iterations; ++it) {
        wz.noalias() = w * z;
        const Matrix g = wz.array().tanh().matrix();
        const Vector gp_mean = (1.0 - g.array().square()).rowwise().mean().matrix();
        Matrix next = g * z.transpose() * inv_n - gp_mean.asDiagonal() * w;
        next = symmetric_decorrelation(next);
        const double lim = (1.0 - (next * w.transpose()).diagonal().array().abs()).abs().maxCoeff();
        w = next;
        if (lim < best_lim) {
            best_lim = lim;
            best = w;
        }
        if (lim < options.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) w = best;

    const Matrix unmixing = w * k;  // p x d, rows map (y - mean) to sources
    const Matrix sources = w * z;
    const double kappa = gaussian_logcosh_mean();
    std::vector<double> raw(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) acc += log_cosh(sources(j, i));
        raw[static_cast<std::size_t>(j)] = acc * inv_n - kappa;
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(raw[static_cast<std::size_t>(a)]) > std::abs(raw[static_cast<std::size_t>(b)]);
    });

    ProjectionView view;
    view.method = ViewMethod::ica;
    view.model_version = whitened.source_model_version;
    view.not_converged = !converged;
    view.iterations = std::min(it, options.max_iterations);
    for (auto j : order) view.scores.push_back(raw[static_cast<std::size_t>(j)]);

    Vector first = unmixing.row(order[0]).transpose();
    first.normalize();
    fix_sign(first);
    Vector second = unmixing.row(order[1]).transpose();
    second -= second.dot(first) * first;
    second.normalize();
    fix_sign(second);
    view.directions.resize(d, 2);
    view.directions.col(0) = first;
    view.directions.col(1) = second;
    view.data_points = y * view.directions;
    return view;
}

Matrix project(const Matrix& points, const ProjectionView& view) {
    if (points.cols() != view.directions.rows()) throw InvalidArgument("point dimension does not match view directions");
    return points * view.directions;
}

}  // namespace mxe
