#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mxe/data.hpp"

namespace mxe {

enum class ConstraintKind { linear, quadratic };

std::string_view to_string(ConstraintKind kind);

/// Sum over rows of w^T x_i.
double eval_linear(const Matrix& x, const RowSet& rows, const Vector& w);
/// Sum over rows of (w^T (x_i - m_I))^2 with m_I the row-set mean of x.
double eval_quadratic(const Matrix& x, const RowSet& rows, const Vector& w);
/// Sum over rows of (w^T (x_i - anchor))^2 for a fixed anchor.
double eval_quadratic(const Matrix& x, const RowSet& rows, const Vector& w, const Vector& anchor);

Vector row_mean(const Matrix& x, const RowSet& rows);

/// One expectation constraint E[f(X, rows, direction)] = target.
/// anchor_mean and target are fixed from the observed data at creation.
struct PrimitiveConstraint {
    ConstraintKind kind = ConstraintKind::linear;
    RowSetPtr rows;
    Vector direction;
    double target = 0.0;
    Vector anchor_mean;
    /// Standard deviation of the full data along `direction`; the scale for
    /// convergence and residual checks.
    double data_scale = 1.0;

    std::size_t size() const { return rows->size(); }
    /// anchor_mean^T direction
    double anchor_projection() const { return anchor_mean.dot(direction); }
};

/// Creates a primitive whose target is evaluated on `data`.
PrimitiveConstraint make_primitive(const DataMatrix& data, ConstraintKind kind, RowSetPtr rows, Vector direction);

/// Constraint function value of `c` on an arbitrary matrix of the same shape.
double evaluate(const PrimitiveConstraint& c, const Matrix& x);

enum class CompositeVariant { margin, cluster, one_cluster, two_d };

std::string_view to_string(CompositeVariant variant);
CompositeVariant composite_variant_from_string(std::string_view name);

/// User-level request before expansion.
struct CompositeSpec {
    CompositeVariant variant = CompositeVariant::margin;
    RowSet rows;        // cluster and two_d
    Vector first;       // two_d
    Vector second;      // two_d

    static CompositeSpec margin();
    static CompositeSpec one_cluster();
    static CompositeSpec cluster(RowSet rows);
    static CompositeSpec two_d(RowSet rows, Vector first, Vector second);
};

struct CompositeConstraint {
    CompositeSpec spec;
    std::vector<PrimitiveConstraint> expansion;
};

/// Expands a user-level constraint into primitives with targets taken from `data`.
///  margin      -> {linear, quadratic} per column, 2d primitives
///  cluster     -> {linear, quadratic} per right singular vector of the centered rows, 2d primitives
///  one_cluster -> cluster over all rows
///  two_d       -> {linear, quadratic} x {first, second}, 4 primitives
CompositeConstraint expand_composite(const DataMatrix& data, const CompositeSpec& spec);

/// Orthonormal right singular vectors of the row-centered submatrix, ordered by
/// decreasing singular value, each with its largest-magnitude entry positive.
Matrix cluster_directions(const Matrix& x, const RowSet& rows);

/// Identical kind, equal row sets and directions within `tol` (max-abs).
bool same_primitive(const PrimitiveConstraint& a, const PrimitiveConstraint& b, double tol = 1e-10);

/// Ordered registry of composites and their primitives. Duplicate primitives
/// are dropped on insertion; a composite contributing nothing new is not stored.
class ConstraintSet {
public:
    /// Returns the number of primitives actually added.
    std::size_t add(CompositeConstraint composite);

    const std::vector<CompositeConstraint>& composites() const { return composites_; }
    const std::vector<PrimitiveConstraint>& primitives() const { return primitives_; }
    std::size_t size() const { return primitives_.size(); }
    bool empty() const { return primitives_.empty(); }

private:
    std::vector<CompositeConstraint> composites_;
    std::vector<PrimitiveConstraint> primitives_;
};

}  // namespace mxe
