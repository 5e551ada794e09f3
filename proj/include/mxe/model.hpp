#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "mxe/constraints.hpp"
#include "mxe/partition.hpp"

namespace mxe {

/// Natural (Sigma^-1 m, Sigma^-1) and dual (m, Sigma) parameters of one
/// equivalence class of rows.
struct ClassParams {
    Vector natural_first;
    Matrix natural_second;
    Vector mean;
    Matrix cov;

    static ClassParams standard(Eigen::Index d);
};

enum class FitStatus { unfitted, converged, cutoff, in_progress };

std::string_view to_string(FitStatus status);

struct FitConfig {
    double lambda_tolerance = 1e-2;
    /// In units of the full-data standard deviation along each constraint direction.
    double moment_tolerance = 1e-2;
    std::chrono::duration<double> time_budget{10.0};
    /// 0 means unbounded.
    std::size_t max_sweeps = 0;
    double root_tolerance = 1e-10;
    /// Smallest variance kept by refresh_duals; also bounds the per-update
    /// multiplier change at 1/variance_floor.
    double variance_floor = 1e-12;
    std::size_t refresh_interval = 25;
    /// When false the sweep loop ignores the convergence tests and runs until
    /// max_sweeps or the time budget.
    bool stop_on_convergence = true;

    void validate() const;
};

struct SweepRecord {
    std::size_t sweep = 0;
    double max_lambda_change = 0.0;
    /// Largest change of a constraint moment (mean, or root of the variance
    /// statistic) made during the sweep, in units of the data scale.
    double max_residual = 0.0;
    double elapsed_ms = 0.0;
};

struct FitDiagnostics {
    /// |E[f] - target| per primitive, as of the last refresh.
    std::vector<double> residuals;
    /// Residuals in moment units divided by the data scale.
    std::vector<double> moment_residuals;
    std::size_t sweeps = 0;
    double wall_ms = 0.0;
    std::size_t stalled_updates = 0;
    std::size_t clamped_updates = 0;
    std::size_t floored_classes = 0;
    std::vector<SweepRecord> log;
};

/// Writes the sweep log as CSV: sweep,max_lambda_change,max_residual,elapsed_ms.
void write_fit_log(std::ostream& out, const std::vector<SweepRecord>& log);

/// Rows of one class inside the row set of a constraint.
struct ClassOverlap {
    std::size_t cls = 0;
    double count = 0.0;
};

/// MaxEnt background distribution: one Gaussian parameter block per
/// equivalence class of rows.
class BackgroundModel {
public:
    BackgroundModel(RowPartition partition, std::vector<PrimitiveConstraint> constraints, std::size_t dims);

    std::size_t dims() const { return dims_; }
    const RowPartition& partition() const { return partition_; }
    const std::vector<PrimitiveConstraint>& constraints() const { return constraints_; }
    const std::vector<ClassOverlap>& overlaps(std::size_t t) const { return overlaps_.at(t); }

    const std::vector<ClassParams>& params() const { return params_; }
    std::vector<ClassParams>& params() { return params_; }
    const ClassParams& params_of_row(std::size_t row) const { return params_[partition_.class_of_row.at(row)]; }

    FitStatus status = FitStatus::unfitted;
    FitDiagnostics diagnostics;

private:
    std::size_t dims_;
    RowPartition partition_;
    std::vector<PrimitiveConstraint> constraints_;
    std::vector<std::vector<ClassOverlap>> overlaps_;
    std::vector<ClassParams> params_;
};

/// Every class starts at the unit spherical Gaussian: theta = (0, I), mu = (0, I).
BackgroundModel init_model(RowPartition partition, std::vector<PrimitiveConstraint> constraints, std::size_t dims);
/// Builds the partition over the rows of `data` and initializes.
BackgroundModel init_model(const DataMatrix& data, std::vector<PrimitiveConstraint> constraints);

/// E_p[f_t] summed over classes weighted by their overlap with the row set.
double expected_value(const BackgroundModel& model, std::size_t t);

/// |mean moment difference| for linear, |root-variance difference| for
/// quadratic, divided by the data scale of the constraint.
double moment_residual(const PrimitiveConstraint& c, double expected);

struct UpdateResult {
    double lambda_change = 0.0;
    /// Moment residual of the constraint just before the update.
    double moment_change = 0.0;
    bool stalled = false;
    bool clamped = false;
};

UpdateResult update_linear(BackgroundModel& model, std::size_t t, const FitConfig& config = {});
UpdateResult update_quadratic(BackgroundModel& model, std::size_t t, const FitConfig& config = {});

/// phi(lambda) for quadratic constraint t: expected value after a change of
/// lambda in its multiplier, minus the target. Decreasing in lambda on the
/// feasible interval (quadratic_lambda_lower_bound, inf).
double quadratic_phi(const BackgroundModel& model, std::size_t t, double lambda);
double quadratic_lambda_lower_bound(const BackgroundModel& model, std::size_t t);

/// Recomputes Sigma = theta2^-1 and m = Sigma theta1 for every class. Eigenvalues
/// of Sigma are floored at `variance_floor`, and theta2 is made consistent.
/// Returns the number of classes where the floor was applied.
std::size_t refresh_duals(BackgroundModel& model, double variance_floor = 1e-12);

/// Recomputes residual diagnostics for every constraint.
void compute_residuals(BackgroundModel& model);

using SweepObserver = std::function<void(const SweepRecord&, const BackgroundModel&)>;

/// Round-robin coordinate ascent over the constraints in insertion order.
/// Stops on convergence (max lambda change or max moment change below
/// tolerance, confirmed by the residual check), the time budget, max_sweeps,
/// or a stop request; the last three leave status == cutoff.
BackgroundModel fit(BackgroundModel model, const FitConfig& config = {}, const SweepObserver& observer = {},
                    std::stop_token stop = {});

}  // namespace mxe
