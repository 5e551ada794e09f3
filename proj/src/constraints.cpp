#include "mxe/constraints.hpp"

#include <cmath>

#include "mxe/errors.hpp"

namespace mxe {

std::string_view to_string(ConstraintKind kind) {
    return kind == ConstraintKind::linear ? "linear" : "quadratic";
}

std::string_view to_string(CompositeVariant variant) {
    switch (variant) {
        case CompositeVariant::margin: return "margin";
        case CompositeVariant::cluster: return "cluster";
        case CompositeVariant::one_cluster: return "one_cluster";
        case CompositeVariant::two_d: return "two_d";
    }
    return "margin";
}

CompositeVariant composite_variant_from_string(std::string_view name) {
    if (name == "margin") return CompositeVariant::margin;
    if (name == "cluster") return CompositeVariant::cluster;
    if (name == "one_cluster" || name == "onecluster" || name == "1-cluster") return CompositeVariant::one_cluster;
    if (name == "two_d" || name == "2d" || name == "twod") return CompositeVariant::two_d;
    throw InvalidArgument("unknown constraint variant '" + std::string(name) + "'");
}

namespace {

void check_rows(const Matrix& x, const RowSet& rows) {
    if (rows.empty()) throw InvalidConstraint("constraint row set is empty");
    if (rows.max_index() >= static_cast<std::size_t>(x.rows())) throw InvalidConstraint("constraint row index out of range");
}

void check_direction(const Matrix& x, const Vector& w) {
    if (w.size() != x.cols()) throw InvalidConstraint("direction length does not match column count");
    if (!w.allFinite() || !(w.norm() > 0.0)) throw InvalidConstraint("direction must be finite and nonzero");
}

}  // namespace

Vector row_mean(const Matrix& x, const RowSet& rows) {
    check_rows(x, rows);
    Vector m = Vector::Zero(x.cols());
    for (std::size_t i : rows) m += x.row(static_cast<Eigen::Index>(i)).transpose();
    return m / static_cast<double>(rows.size());
}

double eval_linear(const Matrix& x, const RowSet& rows, const Vector& w) {
    check_rows(x, rows);
    double s = 0.0;
    for (std::size_t i : rows) s += x.row(static_cast<Eigen::Index>(i)).dot(w);
    return s;
}

double eval_quadratic(const Matrix& x, const RowSet& rows, const Vector& w, const Vector& anchor) {
    check_rows(x, rows);
    const double shift = anchor.dot(w);
    double s = 0.0;
    for (std::size_t i : rows) {
        const double u = x.row(static_cast<Eigen::Index>(i)).dot(w) - shift;
        s += u * u;
    }
    return s;
}

double eval_quadratic(const Matrix& x, const RowSet& rows, const Vector& w) {
    return eval_quadratic(x, rows, w, row_mean(x, rows));
}

PrimitiveConstraint make_primitive(const DataMatrix& data, ConstraintKind kind, RowSetPtr rows, Vector direction) {
    if (!rows) throw InvalidConstraint("constraint row set is missing");
    check_rows(data.values(), *rows);
    check_direction(data.values(), direction);
    PrimitiveConstraint c;
    c.kind = kind;
    c.anchor_mean = row_mean(data.values(), *rows);
    c.target = kind == ConstraintKind::linear ? eval_linear(data.values(), *rows, direction)
                                              : eval_quadratic(data.values(), *rows, direction, c.anchor_mean);
    const double scale = data.directional_std(direction);
    c.data_scale = scale > 0.0 ? scale : 1.0;
    c.rows = std::move(rows);
    c.direction = std::move(direction);
    return c;
}

double evaluate(const PrimitiveConstraint& c, const Matrix& x) {
    return c.kind == ConstraintKind::linear ? eval_linear(x, *c.rows, c.direction)
                                            : eval_quadratic(x, *c.rows, c.direction, c.anchor_mean);
}

CompositeSpec CompositeSpec::margin() { return CompositeSpec{CompositeVariant::margin, {}, {}, {}}; }
CompositeSpec CompositeSpec::one_cluster() { return CompositeSpec{CompositeVariant::one_cluster, {}, {}, {}}; }
CompositeSpec CompositeSpec::cluster(RowSet rows) { return CompositeSpec{CompositeVariant::cluster, std::move(rows), {}, {}}; }
CompositeSpec CompositeSpec::two_d(RowSet rows, Vector first, Vector second) {
    return CompositeSpec{CompositeVariant::two_d, std::move(rows), std::move(first), std::move(second)};
}

Matrix cluster_directions(const Matrix& x, const RowSet& rows) {
    const Vector mean = row_mean(x, rows);
    // Right singular vectors of the centered block are the eigenvectors of its
    // scatter matrix; the eigen route always yields a full orthonormal basis,
    // including when |rows| < d.
    Matrix scatter = Matrix::Zero(x.cols(), x.cols());
    Matrix block(static_cast<Eigen::Index>(rows.size()), x.cols());
    Eigen::Index r = 0;
    for (std::size_t i : rows) block.row(r++) = x.row(static_cast<Eigen::Index>(i)) - mean.transpose();
    scatter.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
    scatter = scatter.selfadjointView<Eigen::Lower>();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(scatter);
    const Eigen::Index d = x.cols();
    Matrix v(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        Vector col = eig.eigenvectors().col(d - 1 - j);
        Eigen::Index at = 0;
        col.cwiseAbs().maxCoeff(&at);
        if (col(at) < 0.0) col = -col;
        v.col(j) = col;
    }
    return v;
}

CompositeConstraint expand_composite(const DataMatrix& data, const CompositeSpec& spec) {
    CompositeConstraint out{spec, {}};
    const auto d = static_cast<Eigen::Index>(data.cols());
    auto push_pair = [&](const RowSetPtr& rows, const Vector& w) {
        out.expansion.push_back(make_primitive(data, ConstraintKind::linear, rows, w));
        out.expansion.push_back(make_primitive(data, ConstraintKind::quadratic, rows, w));
    };
    switch (spec.variant) {
        case CompositeVariant::margin: {
            out.spec.rows = RowSet::all(data.rows());
            auto rows = std::make_shared<const RowSet>(out.spec.rows);
            for (Eigen::Index j = 0; j < d; ++j) push_pair(rows, Vector::Unit(d, j));
            break;
        }
        case CompositeVariant::one_cluster:
        case CompositeVariant::cluster: {
            if (spec.variant == CompositeVariant::one_cluster) out.spec.rows = RowSet::all(data.rows());
            if (out.spec.rows.empty()) throw InvalidConstraint("cluster constraint needs at least one row");
            check_rows(data.values(), out.spec.rows);
            auto rows = std::make_shared<const RowSet>(out.spec.rows);
            const Matrix dirs = cluster_directions(data.values(), *rows);
            for (Eigen::Index j = 0; j < d; ++j) push_pair(rows, dirs.col(j));
            break;
        }
        case CompositeVariant::two_d: {
            if (spec.rows.empty()) throw InvalidConstraint("2-D constraint needs at least one row");
            check_direction(data.values(), spec.first);
            check_direction(data.values(), spec.second);
            const double cosine = std::abs(spec.first.dot(spec.second)) / (spec.first.norm() * spec.second.norm());
            if (cosine > 1e-8) throw InvalidConstraint("2-D constraint directions must be orthogonal");
            auto rows = std::make_shared<const RowSet>(spec.rows);
            push_pair(rows, spec.first);
            push_pair(rows, spec.second);
            break;
        }
    }
    return out;
}

bool same_primitive(const PrimitiveConstraint& a, const PrimitiveConstraint& b, double tol) {
    if (a.kind != b.kind) return false;
    if (a.direction.size() != b.direction.size()) return false;
    if ((a.direction - b.direction).cwiseAbs().maxCoeff() > tol) return false;
    return a.rows == b.rows || *a.rows == *b.rows;
}

std::size_t ConstraintSet::add(CompositeConstraint composite) {
    std::vector<PrimitiveConstraint> fresh;
    for (auto& p : composite.expansion) {
        bool dup = false;
        for (const auto& q : primitives_) {
            if (same_primitive(p, q)) {
                dup = true;
                break;
            }
        }
        for (const auto& q : fresh) {
            if (dup) break;
            dup = same_primitive(p, q);
        }
        if (!dup) fresh.push_back(std::move(p));
    }
    if (fresh.empty()) return 0;
    primitives_.insert(primitives_.end(), fresh.begin(), fresh.end());
    composite.expansion = std::move(fresh);
    const auto added = composite.expansion.size();
    composites_.push_back(std::move(composite));
    return added;
}

}  // namespace mxe
