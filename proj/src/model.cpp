#include "mxe/model.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mxe/errors.hpp"

namespace mxe {

ClassParams ClassParams::standard(Eigen::Index d) {
    return ClassParams{Vector::Zero(d), Matrix::Identity(d, d), Vector::Zero(d), Matrix::Identity(d, d)};
}

std::string_view to_string(FitStatus status) {
    switch (status) {
        case FitStatus::unfitted: return "unfitted";
        case FitStatus::converged: return "converged";
        case FitStatus::cutoff: return "cutoff";
        case FitStatus::in_progress: return "in_progress";
    }
    return "unfitted";
}

void FitConfig::validate() const {
    if (!(lambda_tolerance > 0.0) || !(moment_tolerance > 0.0) || !(root_tolerance > 0.0) || !(variance_floor > 0.0))
        throw InvalidArgument("fit tolerances must be positive");
    if (!(time_budget.count() > 0.0)) throw InvalidArgument("fit time budget must be positive");
    if (refresh_interval == 0) throw InvalidArgument("refresh interval must be positive");
}

void write_fit_log(std::ostream& out, const std::vector<SweepRecord>& log) {
    out << "sweep,max_lambda_change,max_residual,elapsed_ms\n";
    for (const auto& r : log) out << r.sweep << ',' << r.max_lambda_change << ',' << r.max_residual << ',' << r.elapsed_ms << '\n';
}

BackgroundModel::BackgroundModel(RowPartition partition, std::vector<PrimitiveConstraint> constraints, std::size_t dims)
    : dims_(dims), partition_(std::move(partition)), constraints_(std::move(constraints)) {
    if (dims_ == 0) throw InvalidArgument("model needs at least one dimension");
    overlaps_.resize(constraints_.size());
    for (std::size_t c = 0; c < partition_.classes(); ++c) {
        for (std::size_t t : partition_.class_constraint_sets[c]) {
            overlaps_.at(t).push_back({c, static_cast<double>(partition_.class_sizes[c])});
        }
    }
    for (std::size_t t = 0; t < constraints_.size(); ++t) {
        if (static_cast<std::size_t>(constraints_[t].direction.size()) != dims_)
            throw InvalidConstraint("constraint direction has wrong dimension");
        if (overlaps_[t].empty()) throw InvalidArgument("partition does not cover constraint rows");
    }
    params_.assign(partition_.classes(), ClassParams::standard(static_cast<Eigen::Index>(dims_)));
}

BackgroundModel init_model(RowPartition partition, std::vector<PrimitiveConstraint> constraints, std::size_t dims) {
    return BackgroundModel(std::move(partition), std::move(constraints), dims);
}

BackgroundModel init_model(const DataMatrix& data, std::vector<PrimitiveConstraint> constraints) {
    auto partition = build_partition(data.rows(), constraints);
    return BackgroundModel(std::move(partition), std::move(constraints), data.cols());
}

double expected_value(const BackgroundModel& model, std::size_t t) {
    const auto& c = model.constraints().at(t);
    const Vector& w = c.direction;
    double v = 0.0;
    if (c.kind == ConstraintKind::linear) {
        for (const auto& o : model.overlaps(t)) v += o.count * w.dot(model.params()[o.cls].mean);
    } else {
        const double delta = c.anchor_projection();
        for (const auto& o : model.overlaps(t)) {
            const auto& p = model.params()[o.cls];
            const double q = w.dot(p.mean) - delta;
            v += o.count * (w.dot(p.cov * w) + q * q);
        }
    }
    return v;
}

double moment_residual(const PrimitiveConstraint& c, double expected) {
    const double n = static_cast<double>(c.size());
    double r;
    if (c.kind == ConstraintKind::linear) {
        r = std::abs(expected - c.target) / n;
    } else {
        r = std::abs(std::sqrt(std::max(expected, 0.0) / n) - std::sqrt(std::max(c.target, 0.0) / n));
    }
    return r / c.data_scale;
}

namespace {

// Per-class quantities of one quadratic update: s = w' Sigma w, u = w' m - delta.
struct QuadTerms {
    std::vector<double> count;
    std::vector<double> s;
    std::vector<double> u;

    double phi(double lambda, double target) const {
        double v = 0.0;
        for (std::size_t k = 0; k < s.size(); ++k) {
            const double a = 1.0 + lambda * s[k];
            v += count[k] * (s[k] / a + u[k] * u[k] / (a * a));
        }
        return v - target;
    }

    double dphi(double lambda) const {
        double v = 0.0;
        for (std::size_t k = 0; k < s.size(); ++k) {
            const double a = 1.0 + lambda * s[k];
            v -= count[k] * (s[k] * s[k] / (a * a) + 2.0 * s[k] * u[k] * u[k] / (a * a * a));
        }
        return v;
    }

    double max_s() const { return s.empty() ? 0.0 : *std::max_element(s.begin(), s.end()); }
};

QuadTerms quad_terms(const BackgroundModel& model, std::size_t t, Matrix* g_out) {
    const auto& c = model.constraints()[t];
    const auto& ov = model.overlaps(t);
    const Vector& w = c.direction;
    const double delta = c.anchor_projection();
    QuadTerms q;
    q.count.reserve(ov.size());
    q.s.reserve(ov.size());
    q.u.reserve(ov.size());
    if (g_out) g_out->resize(w.size(), static_cast<Eigen::Index>(ov.size()));
    for (std::size_t k = 0; k < ov.size(); ++k) {
        const auto& p = model.params()[ov[k].cls];
        Vector g = p.cov * w;
        q.count.push_back(ov[k].count);
        q.s.push_back(std::max(0.0, w.dot(g)));
        q.u.push_back(w.dot(p.mean) - delta);
        if (g_out) g_out->col(static_cast<Eigen::Index>(k)) = g;
    }
    return q;
}

// Safeguarded Newton on a bracket [lo, hi] with phi(lo) > 0 > phi(hi).
// phi is decreasing and convex there, so Newton from the left is monotone;
// bisection covers steps that leave the bracket.
double solve_decreasing(const QuadTerms& q, double target, double lo, double hi, double tol) {
    double x = lo;
    double fx = q.phi(x, target);
    if (std::abs(fx) <= tol) return x;
    for (int it = 0; it < 200; ++it) {
        const double d = q.dphi(x);
        double next = (d < 0.0 && std::isfinite(d)) ? x - fx / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        x = next;
        fx = q.phi(x, target);
        if (std::abs(fx) <= tol) return x;
        if (fx > 0.0) lo = x;
        else hi = x;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi))) break;
    }
    return x;
}

}  // namespace

double quadratic_phi(const BackgroundModel& model, std::size_t t, double lambda) {
    const auto q = quad_terms(model, t, nullptr);
    return q.phi(lambda, model.constraints().at(t).target);
}

double quadratic_lambda_lower_bound(const BackgroundModel& model, std::size_t t) {
    const double smax = quad_terms(model, t, nullptr).max_s();
    return smax > 0.0 ? -1.0 / smax : -std::numeric_limits<double>::infinity();
}

UpdateResult update_linear(BackgroundModel& model, std::size_t t, const FitConfig& config) {
    (void)config;
    const auto& c = model.constraints().at(t);
    if (c.kind != ConstraintKind::linear) throw InvalidArgument("update_linear on a quadratic constraint");
    const auto& ov = model.overlaps(t);
    const Vector& w = c.direction;

    Matrix g(w.size(), static_cast<Eigen::Index>(ov.size()));
    double current = 0.0;
    double denom = 0.0;
    for (std::size_t k = 0; k < ov.size(); ++k) {
        const auto& p = model.params()[ov[k].cls];
        g.col(static_cast<Eigen::Index>(k)).noalias() = p.cov * w;
        current += ov[k].count * w.dot(p.mean);
        denom += ov[k].count * w.dot(g.col(static_cast<Eigen::Index>(k)));
    }
    UpdateResult r;
    r.moment_change = moment_residual(c, current);
    const double lambda = (c.target - current) / denom;
    if (!(denom > 0.0) || !std::isfinite(lambda)) {
        r.stalled = true;
        return r;
    }
    r.lambda_change = lambda;
    if (lambda == 0.0) return r;
    for (std::size_t k = 0; k < ov.size(); ++k) {
        auto& p = model.params()[ov[k].cls];
        p.natural_first.noalias() += lambda * w;
        p.mean.noalias() += lambda * g.col(static_cast<Eigen::Index>(k));
    }
    return r;
}

UpdateResult update_quadratic(BackgroundModel& model, std::size_t t, const FitConfig& config) {
    const auto& c = model.constraints().at(t);
    if (c.kind != ConstraintKind::quadratic) throw InvalidArgument("update_quadratic on a linear constraint");
    const auto& ov = model.overlaps(t);
    const Vector& w = c.direction;
    const double delta = c.anchor_projection();

    Matrix g;
    const QuadTerms q = quad_terms(model, t, &g);
    const double phi0 = q.phi(0.0, c.target);
    UpdateResult r;
    r.moment_change = moment_residual(c, phi0 + c.target);

    const double tol = config.root_tolerance * std::max(1.0, std::abs(c.target));
    if (std::abs(phi0) <= tol) return r;
    const double smax = q.max_s();
    if (!(smax > 0.0)) {
        r.stalled = true;
        return r;
    }

    double lambda;
    if (phi0 > 0.0) {
        // Root to the right of zero; a zero-variance target puts it at infinity.
        const double hi = 1.0 / config.variance_floor;
        if (q.phi(hi, c.target) > 0.0) {
            lambda = hi;
            r.clamped = true;
        } else {
            lambda = solve_decreasing(q, c.target, 0.0, hi, tol);
        }
    } else {
        // Root between the pole at -1/smax and zero.
        double lo = 0.0;
        bool bracketed = false;
        for (int k = 1; k <= 15; ++k) {
            lo = -(1.0 - std::pow(10.0, -k)) / smax;
            if (q.phi(lo, c.target) > 0.0) {
                bracketed = true;
                break;
            }
        }
        if (bracketed) {
            lambda = solve_decreasing(q, c.target, lo, 0.0, tol);
        } else {
            lambda = lo;
            r.clamped = true;
        }
    }
    r.lambda_change = lambda;

    const Matrix wwT = w * w.transpose();
    for (std::size_t k = 0; k < ov.size(); ++k) {
        auto& p = model.params()[ov[k].cls];
        const auto gk = g.col(static_cast<Eigen::Index>(k));
        const double s = q.s[k];
        const double e = q.u[k] + delta;
        const double coef = lambda / (1.0 + lambda * s);
        // Woodbury: (theta2 + lambda w w')^-1 = Sigma - lambda g g' / (1 + lambda w'g)
        p.cov.noalias() -= coef * gk * gk.transpose();
        p.natural_second.noalias() += lambda * wwT;
        p.natural_first.noalias() += (lambda * delta) * w;
        // m' = Sigma' theta1' expanded so that only vector operations remain.
        p.mean.noalias() += (lambda * delta - coef * (e + lambda * delta * s)) * gk;
    }
    return r;
}

std::size_t refresh_duals(BackgroundModel& model, double variance_floor) {
    std::size_t floored = 0;
    const double max_precision = 1.0 / variance_floor;
    for (auto& p : model.params()) {
        const Matrix sym = 0.5 * (p.natural_second + p.natural_second.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
        Vector precision = eig.eigenvalues();
        bool hit = false;
        for (Eigen::Index j = 0; j < precision.size(); ++j) {
            if (!(precision(j) <= max_precision)) {
                precision(j) = max_precision;
                hit = true;
            }
            if (!(precision(j) >= variance_floor)) {
                precision(j) = variance_floor;
                hit = true;
            }
        }
        const Matrix& u = eig.eigenvectors();
        p.cov = u * precision.cwiseInverse().asDiagonal() * u.transpose();
        if (hit) {
            p.natural_second = u * precision.asDiagonal() * u.transpose();
            ++floored;
        } else {
            p.natural_second = sym;
        }
        p.mean = p.cov * p.natural_first;
    }
    return floored;
}

void compute_residuals(BackgroundModel& model) {
    const auto k = model.constraints().size();
    model.diagnostics.residuals.resize(k);
    model.diagnostics.moment_residuals.resize(k);
    for (std::size_t t = 0; t < k; ++t) {
        const double v = expected_value(model, t);
        model.diagnostics.residuals[t] = std::abs(v - model.constraints()[t].target);
        model.diagnostics.moment_residuals[t] = moment_residual(model.constraints()[t], v);
    }
}

BackgroundModel fit(BackgroundModel model, const FitConfig& config, const SweepObserver& observer, std::stop_token stop) {
    config.validate();
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    const auto elapsed_ms = [&] { return std::chrono::duration<double, std::milli>(clock::now() - start).count(); };
    const double budget_ms = config.time_budget.count() * 1000.0;

    auto& diag = model.diagnostics;
    diag = FitDiagnostics{};
    model.status = FitStatus::in_progress;
    const auto k = model.constraints().size();

    auto finish = [&](FitStatus status) {
        diag.floored_classes += refresh_duals(model, config.variance_floor);
        compute_residuals(model);
        diag.wall_ms = elapsed_ms();
        model.status = status;
        return std::move(model);
    };

    if (k == 0) return finish(FitStatus::converged);

    for (std::size_t sweep = 1;; ++sweep) {
        SweepRecord rec;
        rec.sweep = sweep;
        for (std::size_t t = 0; t < k; ++t) {
            if (stop.stop_requested() || elapsed_ms() >= budget_ms) {
                diag.sweeps = sweep - 1;
                return finish(FitStatus::cutoff);
            }
            const auto r = model.constraints()[t].kind == ConstraintKind::linear ? update_linear(model, t, config)
                                                                                 : update_quadratic(model, t, config);
            rec.max_lambda_change = std::max(rec.max_lambda_change, std::abs(r.lambda_change));
            rec.max_residual = std::max(rec.max_residual, r.moment_change);
            diag.stalled_updates += r.stalled ? 1 : 0;
            diag.clamped_updates += r.clamped ? 1 : 0;
        }
        diag.sweeps = sweep;
        if (sweep % config.refresh_interval == 0) diag.floored_classes += refresh_duals(model, config.variance_floor);
        rec.elapsed_ms = elapsed_ms();
        diag.log.push_back(rec);
        if (observer) observer(rec, model);

        if (config.stop_on_convergence &&
            (rec.max_lambda_change <= config.lambda_tolerance || rec.max_residual <= config.moment_tolerance)) {
            compute_residuals(model);
            const auto& mr = diag.moment_residuals;
            if (*std::max_element(mr.begin(), mr.end()) <= config.moment_tolerance) return finish(FitStatus::converged);
        }
        if (config.max_sweeps != 0 && sweep >= config.max_sweeps) return finish(FitStatus::cutoff);
    }
}

}  // namespace mxe
