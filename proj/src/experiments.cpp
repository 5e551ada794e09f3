#include "mxe/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>

#include "mxe/errors.hpp"
#include "mxe/projection.hpp"

namespace mxe {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

constexpr std::chrono::duration<double> kNoBudget{1e9};

ConvergenceTrace run_adversarial(AdversarialCase which, const FitConfig& config) {
    auto problem = gen_adversarial3();
    auto constraints = which == AdversarialCase::a ? problem.case_a : problem.case_b;
    auto model = init_model(problem.data, std::move(constraints));
    std::vector<double> trace{model.params_of_row(0).cov(0, 0)};
    const auto start = Clock::now();
    auto fitted = fit(std::move(model), config,
                      [&](const SweepRecord&, const BackgroundModel& m) { trace.push_back(m.params_of_row(0).cov(0, 0)); });
    const double wall = ms_since(start);
    return ConvergenceTrace{std::move(trace), std::move(fitted), wall};
}

}  // namespace

AdversarialCase adversarial_case_from_string(std::string_view name) {
    if (name == "A" || name == "a") return AdversarialCase::a;
    if (name == "B" || name == "b") return AdversarialCase::b;
    throw InvalidArgument("unknown case '" + std::string(name) + "', expected A or B");
}

ConvergenceTrace run_convergence(AdversarialCase which, std::size_t sweeps) {
    if (sweeps == 0) {
        auto problem = gen_adversarial3();
        auto model = init_model(problem.data, which == AdversarialCase::a ? problem.case_a : problem.case_b);
        return ConvergenceTrace{{model.params_of_row(0).cov(0, 0)}, std::move(model), 0.0};
    }
    FitConfig config;
    config.stop_on_convergence = false;
    config.max_sweeps = sweeps;
    config.time_budget = kNoBudget;
    return run_adversarial(which, config);
}

ConvergenceTrace run_convergence_until_converged(AdversarialCase which, std::size_t max_sweeps) {
    FitConfig config;
    config.max_sweeps = max_sweeps;
    config.time_budget = kNoBudget;
    return run_adversarial(which, config);
}

void write_trace_csv(std::ostream& out, const std::vector<double>& sigma11) {
    out << "sweep,sigma11\n";
    out.precision(17);
    for (std::size_t s = 0; s < sigma11.size(); ++s) out << s << ',' << sigma11[s] << '\n';
}

double loglog_slope(const std::vector<double>& trace, std::size_t from, std::size_t to) {
    if (from < 1 || to >= trace.size() || from >= to) throw InvalidArgument("slope range outside the trace");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    double count = 0;
    for (std::size_t s = from; s <= to; ++s) {
        if (!(trace[s] > 0.0)) throw InvalidArgument("trace must be positive for a log-log fit");
        const double x = std::log(static_cast<double>(s));
        const double y = std::log(trace[s]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        count += 1;
    }
    return (count * sxy - sx * sy) / (count * sxx - sx * sx);
}

std::vector<CompositeSpec> runtime_constraints(const DataMatrix& data) {
    std::vector<CompositeSpec> specs{CompositeSpec::margin()};
    if (!data.has_labels()) return specs;
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const auto& label = data.class_labels()[i];
        auto [it, inserted] = members.try_emplace(label);
        if (inserted) order.push_back(label);
        it->second.push_back(i);
    }
    if (order.size() < 2) return specs;
    for (const auto& label : order) specs.push_back(CompositeSpec::cluster(RowSet(members[label])));
    return specs;
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const auto mid = values.size() / 2;
    return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

RuntimeRow run_runtime_case(const RuntimeCase& c, const RuntimeOptions& options) {
    if (options.repeats == 0) throw InvalidArgument("repeats must be at least 1");
    RuntimeRow row;
    row.params = c;
    std::vector<double> optim, ica;
    for (std::size_t r = 0; r < options.repeats; ++r) {
        const auto data = gen_clustered(c.n, c.d, c.k, options.seed + r).standardized();
        ConstraintSet set;
        for (const auto& spec : runtime_constraints(data)) set.add(expand_composite(data, spec));
        row.primitives = set.size();
        auto model = init_model(data, set.primitives());

        FitConfig config;
        config.time_budget = options.time_budget_s ? std::chrono::duration<double>(*options.time_budget_s) : kNoBudget;
        auto start = Clock::now();
        const auto fitted = fit(std::move(model), config);
        optim.push_back(ms_since(start));
        row.max_sweeps = std::max(row.max_sweeps, fitted.diagnostics.sweeps);
        row.cutoffs += fitted.status == FitStatus::cutoff ? 1 : 0;

        if (options.run_ica) {
            start = Clock::now();
            const auto y = whiten(data.values(), fitted);
            IcaOptions io;
            io.seed = options.seed + r;
            ica_view(y, io);
            ica.push_back(ms_since(start));
        }
    }
    row.optim_ms = median(optim);
    row.ica_ms = median(ica);
    return row;
}

std::vector<RuntimeRow> run_runtime(const std::vector<RuntimeCase>& grid, const RuntimeOptions& options) {
    std::vector<RuntimeRow> rows;
    rows.reserve(grid.size());
    for (const auto& c : grid) rows.push_back(run_runtime_case(c, options));
    return rows;
}

void write_runtime_csv(std::ostream& out, const std::vector<RuntimeRow>& rows) {
    out << "n,d,k,primitives,optim_s,ica_s,max_sweeps,cutoffs\n";
    for (const auto& r : rows) {
        out << r.params.n << ',' << r.params.d << ',' << r.params.k << ',' << r.primitives << ','
            << r.optim_ms / 1000.0 << ',' << r.ica_ms / 1000.0 << ',' << r.max_sweeps << ',' << r.cutoffs << '\n';
    }
}

void write_runtime_markdown(std::ostream& out, const std::vector<RuntimeRow>& rows) {
    // One line per (n, d) with the k values in brace lists, like the classic table.
    std::map<std::pair<std::size_t, std::size_t>, std::vector<const RuntimeRow*>> grouped;
    std::vector<std::pair<std::size_t, std::size_t>> order;
    for (const auto& r : rows) {
        auto key = std::make_pair(r.params.n, r.params.d);
        if (!grouped.count(key)) order.push_back(key);
        grouped[key].push_back(&r);
    }
    auto list = [](const std::vector<const RuntimeRow*>& g, auto field) {
        std::string s = "{";
        char buf[32];
        for (std::size_t i = 0; i < g.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.3g", field(*g[i]));
            s += (i ? "," : "") + std::string(buf);
        }
        return s + "}";
    };
    out << "| n | d | k | optim (ms) | ica (ms) |\n|---|---|---|---|---|\n";
    for (const auto& key : order) {
        const auto& g = grouped[key];
        std::string ks = "{";
        for (std::size_t i = 0; i < g.size(); ++i) ks += (i ? "," : "") + std::to_string(g[i]->params.k);
        ks += "}";
        out << "| " << key.first << " | " << key.second << " | " << ks << " | "
            << list(g, [](const RuntimeRow& r) { return r.optim_ms; }) << " | "
            << list(g, [](const RuntimeRow& r) { return r.ica_ms; }) << " |\n";
    }
}

}  // namespace mxe
