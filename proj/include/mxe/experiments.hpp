#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "mxe/model.hpp"
#include "mxe/synthetic.hpp"

namespace mxe {

enum class AdversarialCase { a, b };

AdversarialCase adversarial_case_from_string(std::string_view name);

struct ConvergenceTrace {
    /// (Sigma_1)_11 after each sweep; entry 0 is the initial value.
    std::vector<double> sigma11;
    BackgroundModel model;
    double wall_ms = 0.0;
};

/// Runs exactly `sweeps` sweeps on the three-point data (no convergence
/// stop, no time budget).
ConvergenceTrace run_convergence(AdversarialCase which, std::size_t sweeps);

/// Runs until the default convergence test passes or `max_sweeps` is hit.
ConvergenceTrace run_convergence_until_converged(AdversarialCase which, std::size_t max_sweeps);

void write_trace_csv(std::ostream& out, const std::vector<double>& sigma11);

/// Least-squares slope of log(trace[s]) against log(s) for s in [from, to].
double loglog_slope(const std::vector<double>& trace, std::size_t from, std::size_t to);

/// Margin plus one cluster constraint per class label (the latter only when
/// there is more than one label), in label order of first appearance.
std::vector<CompositeSpec> runtime_constraints(const DataMatrix& data);

struct RuntimeCase {
    std::size_t n = 2048;
    std::size_t d = 16;
    std::size_t k = 1;
};

struct RuntimeRow {
    RuntimeCase params;
    double optim_ms = 0.0;  // median
    double ica_ms = 0.0;    // median
    std::size_t primitives = 0;
    std::size_t max_sweeps = 0;
    std::size_t cutoffs = 0;
};

struct RuntimeOptions {
    std::size_t repeats = 10;
    std::uint64_t seed = 0;
    bool run_ica = true;
    /// Safety valve; the experiment itself runs without a cutoff.
    std::optional<double> time_budget_s;
};

RuntimeRow run_runtime_case(const RuntimeCase& c, const RuntimeOptions& options);
std::vector<RuntimeRow> run_runtime(const std::vector<RuntimeCase>& grid, const RuntimeOptions& options);

void write_runtime_csv(std::ostream& out, const std::vector<RuntimeRow>& rows);
void write_runtime_markdown(std::ostream& out, const std::vector<RuntimeRow>& rows);

double median(std::vector<double> values);

}  // namespace mxe
