#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "mxe/api.hpp"
#include "mxe/errors.hpp"
#include "mxe/experiments.hpp"
#include "mxe/synthetic.hpp"

namespace {

std::ostream& open_out(const std::string& path, std::ofstream& file) {
    if (path.empty() || path == "-") return std::cout;
    file.open(path, std::ios::binary);
    if (!file) throw mxe::Error("cannot write " + path);
    return file;
}

mxe::HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MaxEnt background models and informative projections"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::string out;

    auto* gen = app.add_subcommand("gen", "Write a synthetic dataset as CSV");
    std::string generator = "x5";
    std::size_t n = 2048, d = 16, k = 4;
    gen->add_option("--generator,-g", generator, "x5, clustered, adversarial3 or intro3d")->capture_default_str();
    gen->add_option("--seed", seed)->capture_default_str();
    gen->add_option("--n", n, "rows (clustered)")->capture_default_str();
    gen->add_option("--d", d, "columns (clustered)")->capture_default_str();
    gen->add_option("--k", k, "clusters (clustered)")->capture_default_str();
    gen->add_option("--out,-o", out, "output file, stdout if omitted");

    auto* conv = app.add_subcommand("convergence", "Trace (Sigma_1)_11 on the three-point data");
    std::string which = "B";
    std::size_t sweeps = 10000;
    conv->add_option("--case", which, "A or B")->capture_default_str();
    conv->add_option("--sweeps", sweeps)->capture_default_str();
    conv->add_option("--out,-o", out);

    auto* rt = app.add_subcommand("runtime", "Median optimizer and ICA wall times on clustered data");
    std::vector<std::size_t> ns{2048}, ds{16, 32}, ks{1, 2, 4, 8};
    std::size_t repeats = 10;
    std::string format = "markdown";
    double budget = 0.0;
    bool no_ica = false;
    rt->add_option("--n", ns)->capture_default_str();
    rt->add_option("--d", ds)->capture_default_str();
    rt->add_option("--k", ks)->capture_default_str();
    rt->add_option("--repeats", repeats)->capture_default_str();
    rt->add_option("--seed", seed)->capture_default_str();
    rt->add_option("--format", format, "markdown or csv")->capture_default_str();
    rt->add_option("--time-budget", budget, "seconds per fit, 0 for none")->capture_default_str();
    rt->add_flag("--no-ica", no_ica);
    rt->add_option("--out,-o", out);

    auto* serve = app.add_subcommand("serve", "Serve the session API over HTTP");
    std::string host = "127.0.0.1";
    int port = 8080;
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        std::ofstream file;
        if (*gen) {
            mxe::SyntheticSpec spec{mxe::generator_from_string(generator), n, d, k, seed};
            const auto data = mxe::generate(spec);
            open_out(out, file) << mxe::write_csv(data, spec.generator == mxe::Generator::x5 ? "cluster" : "label");
        } else if (*conv) {
            const auto trace = mxe::run_convergence(mxe::adversarial_case_from_string(which), sweeps);
            mxe::write_trace_csv(open_out(out, file), trace.sigma11);
            std::cerr << "status " << mxe::to_string(trace.model.status) << ", " << trace.wall_ms << " ms\n";
        } else if (*rt) {
            std::vector<mxe::RuntimeCase> grid;
            for (auto nn : ns)
                for (auto dd : ds)
                    for (auto kk : ks) grid.push_back({nn, dd, kk});
            mxe::RuntimeOptions options;
            options.repeats = repeats;
            options.seed = seed;
            options.run_ica = !no_ica;
            if (budget > 0.0) options.time_budget_s = budget;
            std::vector<mxe::RuntimeRow> rows;
            for (const auto& c : grid) {
                rows.push_back(mxe::run_runtime_case(c, options));
                std::cerr << "n=" << c.n << " d=" << c.d << " k=" << c.k << " optim " << rows.back().optim_ms
                          << " ms, ica " << rows.back().ica_ms << " ms\n";
            }
            auto& os = open_out(out, file);
            if (format == "csv") mxe::write_runtime_csv(os, rows);
            else if (format == "markdown") mxe::write_runtime_markdown(os, rows);
            else throw mxe::InvalidArgument("unknown format '" + format + "'");
        } else if (*serve) {
            mxe::ApiRouter router(std::make_shared<mxe::SessionStore>());
            mxe::HttpServer server(router);
            const int bound = server.bind(host, port);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on http://" << host << ':' << bound << '\n';
            server.listen();
            g_server = nullptr;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
