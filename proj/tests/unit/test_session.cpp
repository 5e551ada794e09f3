#include <doctest.h>

#include <thread>

#include "mxe/api.hpp"
#include "mxe/errors.hpp"
#include "mxe/synthetic.hpp"

// After Eigen (see http_server.cpp).
#include <httplib.h>

using namespace mxe;

namespace {

struct Api {
    ApiRouter router{std::make_shared<SessionStore>()};

    ApiResponse call(const std::string& method, const std::string& path, const Json& body = nullptr,
                     std::map<std::string, std::string> query = {}) {
        ApiRequest r;
        r.method = method;
        r.path = path;
        r.query = std::move(query);
        if (!body.is_null()) r.body = body.dump();
        return router.handle(r);
    }
};

std::string x5_csv(std::uint64_t seed) { return write_csv(gen_x5(seed), "cluster"); }

Json x5_session_body(std::uint64_t seed) {
    return Json{{"csv", x5_csv(seed)}, {"label_columns", {"cluster", "cluster45"}}, {"seed", seed}, {"view_method", "ica"}};
}

const std::string kThreePoints = "x1,x2\n1,0\n0,1\n0,0\n";

}  // namespace

TEST_CASE("session creation and errors") {
    Api api;
    auto r = api.call("POST", "/sessions", x5_session_body(0));
    REQUIRE(r.status == 201);
    CHECK(r.body["id"] == 1);
    CHECK(r.body["rows"] == 1000);
    CHECK(r.body["columns"].size() == 5);
    CHECK(r.body["class_labels"] == Json({"A", "B", "C", "D"}));
    CHECK(api.call("POST", "/sessions", x5_session_body(0)).body["id"] == 2);

    r = api.call("POST", "/sessions", Json{{"csv", "a,b\n1,2\n"}});
    CHECK(r.status == 400);
    r = api.call("POST", "/sessions", Json{{"csv", "a,b\n1,2\n3,x\n4,5\n"}});
    CHECK(r.status == 400);
    CHECK(r.body["error"]["code"] == "parse_error");
    CHECK(r.body["error"]["line"] == 3);
    CHECK(r.body["error"]["column"] == 2);
    CHECK(api.call("POST", "/sessions", Json{{"nope", 1}}).status == 400);
    CHECK(api.call("GET", "/sessions/99").status == 404);
    CHECK(api.call("GET", "/elsewhere").status == 404);
    CHECK(api.call("PUT", "/sessions/1").status == 405);
    CHECK(api.call("GET", "/sessions").body["sessions"] == Json({1, 2}));
    CHECK(api.call("DELETE", "/sessions/2").status == 200);
    CHECK(api.call("GET", "/sessions/2").status == 404);
}

TEST_CASE("csv upload with query parameters") {
    Api api;
    ApiRequest r{"POST", "/sessions", {{"label", "kind"}, {"standardize", "false"}, {"seed", "4"}},
                 "a,b,kind\n1,2,x\n3,1,y\n0,5,x\n2,2,y\n", "text/csv"};
    const auto out = api.router.handle(r);
    REQUIRE(out.status == 201);
    CHECK(out.body["standardized"] == false);
    CHECK(out.body["settings"]["seed"] == 4);
}

TEST_CASE("view payload") {
    Api api;
    api.call("POST", "/sessions", x5_session_body(0));
    auto v = api.call("GET", "/sessions/1/view", nullptr, {{"method", "pca"}});
    REQUIRE(v.status == 200);
    CHECK(v.body["method"] == "pca");
    CHECK(v.body["points"].size() == 1000);
    CHECK(v.body["points"][0].contains("bg_x"));
    CHECK(v.body["directions"].size() == 2);
    CHECK(v.body["directions"][0].size() == 5);
    CHECK(v.body["stale"] == false);
    CHECK(v.body["scores"].size() == 5);
    const auto cached = api.call("GET", "/sessions/1/view", nullptr, {{"cached", "true"}});
    CHECK(cached.body == v.body);
    CHECK(api.call("GET", "/sessions/1/view", nullptr, {{"method", "tsne"}}).status == 400);
}

TEST_CASE("selection, statistics and ellipses") {
    Api api;
    api.call("POST", "/sessions", x5_session_body(0));
    auto r = api.call("POST", "/sessions/1/selection", Json{{"grouping", "A"}});
    CHECK(r.body["count"] == 250);
    r = api.call("POST", "/sessions/1/selection", Json{{"grouping", "B"}, {"mode", "add"}});
    CHECK(r.body["count"] == 500);
    r = api.call("POST", "/sessions/1/selection", Json{{"rows", {0, 1, 2}}, {"mode", "remove"}});
    CHECK(r.body["count"] == 497);
    r = api.call("POST", "/sessions/1/selection", Json{{"rows", {5, 6, 7, 8}}});
    CHECK(r.body["rows"] == Json({5, 6, 7, 8}));
    CHECK(api.call("POST", "/sessions/1/selection", Json{{"rows", {5000}}}).status == 400);
    CHECK(api.call("POST", "/sessions/1/selection", Json{{"rows", {1}}, {"mode", "xor"}}).status == 400);

    api.call("POST", "/sessions/1/selection", Json{{"grouping", "C"}});
    const auto stats = api.call("GET", "/sessions/1/selection/stats", nullptr, {{"top", "2"}});
    REQUIRE(stats.status == 200);
    CHECK(stats.body["count"] == 250);
    CHECK(stats.body["jaccard"]["C"] == 1.0);
    CHECK(stats.body["top"].size() == 2);

    const auto el = api.call("GET", "/sessions/1/selection/ellipses");
    REQUIRE(el.status == 200);
    CHECK(el.body["selection"]["semi_axes"].size() == 2);
    CHECK(el.body["background"]["center"].size() == 2);

    api.call("POST", "/sessions/1/selection", Json{{"rows", Json::array()}});
    CHECK(api.call("GET", "/sessions/1/selection/stats").status == 400);
}

TEST_CASE("constraints, staleness and fitting") {
    Api api;
    api.call("POST", "/sessions", x5_session_body(0));
    CHECK(api.call("POST", "/sessions/1/constraints", Json{{"variant", "cluster"}}).status == 400);
    // A fit without constraints is a no-op.
    auto f = api.call("POST", "/sessions/1/fit", nullptr, {{"wait", "true"}});
    CHECK(f.status == 200);
    CHECK(f.body["model_version"] == 0);

    std::size_t total = 0;
    for (const char* g : {"A", "B", "C", "D"}) {
        api.call("POST", "/sessions/1/selection", Json{{"grouping", g}});
        const auto r = api.call("POST", "/sessions/1/constraints", Json{{"variant", "cluster"}});
        REQUIRE(r.status == 200);
        total += r.body["added"].get<std::size_t>();
    }
    CHECK(total == 40);
    // Same selection again: deduplicated.
    auto r = api.call("POST", "/sessions/1/constraints", Json{{"variant", "cluster"}});
    CHECK(r.body["added"] == 0);
    CHECK(r.body["primitives"] == 40);
    CHECK(r.body["model_version"] == 4);

    auto v = api.call("GET", "/sessions/1/view");
    CHECK(v.status == 409);
    CHECK(v.body["error"]["code"] == "stale_model");
    auto cached = api.call("GET", "/sessions/1/view", nullptr, {{"cached", "true"}});
    CHECK(cached.body["stale"] == true);

    f = api.call("POST", "/sessions/1/fit", nullptr, {{"wait", "true"}});
    REQUIRE(f.status == 200);
    CHECK(f.body["status"] == "converged");
    CHECK(f.body["model_version"] == 5);
    v = api.call("GET", "/sessions/1/view");
    CHECK(v.status == 200);
    CHECK(v.body["model_version"] == 5);

    const auto list = api.call("GET", "/sessions/1/constraints");
    CHECK(list.body["composites"].size() == 4);
    CHECK(list.body["composites"][0]["rows"].size() == 250);
}

TEST_CASE("one fit at a time, cancellation leaves a usable cutoff model") {
    Api api;
    auto r = api.call("POST", "/sessions",
                      Json{{"csv", kThreePoints},
                           {"standardize", false},
                           {"fit", {{"moment_tolerance", 1e-14}, {"lambda_tolerance", 1e-14}, {"time_budget_s", 20}}}});
    REQUIRE(r.status == 201);
    api.call("POST", "/sessions/1/constraints", Json{{"variant", "cluster"}, {"rows", {0, 2}}});
    api.call("POST", "/sessions/1/constraints", Json{{"variant", "cluster"}, {"rows", {1, 2}}});
    CHECK(api.call("POST", "/sessions/1/fit").status == 202);
    CHECK(api.call("POST", "/sessions/1/fit").status == 409);
    CHECK(api.call("POST", "/sessions/1/constraints", Json{{"variant", "margin"}}).status == 409);
    CHECK(api.call("GET", "/sessions/1/fit/status").body["running"] == true);
    // Reads keep working on the last snapshot.
    CHECK(api.call("GET", "/sessions/1/selection").status == 200);
    CHECK(api.call("GET", "/sessions/1/export").status == 200);
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    CHECK(api.call("POST", "/sessions/1/fit/cancel").status == 202);
    api.router.store().get(1)->wait_for_fit();
    const auto st = api.call("GET", "/sessions/1/fit/status");
    CHECK(st.body["running"] == false);
    CHECK(st.body["status"] == "cutoff");
    CHECK(st.body["sweeps"].get<std::size_t>() > 0);
    CHECK(api.call("GET", "/sessions/1/view").status == 200);
}

TEST_CASE("budgeted fit ends in cutoff") {
    Api api;
    api.call("POST", "/sessions",
             Json{{"csv", kThreePoints},
                  {"standardize", false},
                  {"fit", {{"moment_tolerance", 1e-14}, {"lambda_tolerance", 1e-14}, {"time_budget_s", 0.2}}}});
    api.call("POST", "/sessions/1/constraints", Json{{"variant", "cluster"}, {"rows", {0, 2}}});
    api.call("POST", "/sessions/1/constraints", Json{{"variant", "cluster"}, {"rows", {1, 2}}});
    const auto f = api.call("POST", "/sessions/1/fit", Json{{"wait", true}});
    CHECK(f.body["status"] == "cutoff");
    CHECK(f.body["elapsed_ms"].get<double>() < 2000.0);
}

TEST_CASE("fitted session residuals are within tolerance unless cut off") {
    Api api;
    api.call("POST", "/sessions", x5_session_body(3));
    api.call("POST", "/sessions/1/constraints", Json{{"variant", "margin"}});
    api.call("POST", "/sessions/1/selection", Json{{"grouping", "cluster45:E"}});
    api.call("POST", "/sessions/1/constraints", Json{{"variant", "cluster"}});
    api.call("POST", "/sessions/1/fit", nullptr, {{"wait", "true"}});
    const auto s = api.router.store().get(1);
    const auto model = s->model();
    if (model->status != FitStatus::cutoff) {
        CHECK(model->status == FitStatus::converged);
        for (double r : model->diagnostics.moment_residuals) CHECK(r <= s->settings().fit.moment_tolerance);
    }
}

TEST_CASE("groupings") {
    Api api;
    api.call("POST", "/sessions", x5_session_body(0));
    auto r = api.call("POST", "/sessions/1/groupings", Json{{"name", "mine"}, {"rows", {3, 1, 2}}});
    CHECK(r.body["version"] == 1);
    r = api.call("GET", "/sessions/1/groupings/mine");
    CHECK(r.body["rows"] == Json({1, 2, 3}));
    api.call("POST", "/sessions/1/selection", Json{{"rows", {7, 9}}});
    r = api.call("POST", "/sessions/1/groupings", Json{{"name", "mine"}});
    CHECK(r.body["version"] == 2);
    CHECK(api.call("GET", "/sessions/1/groupings/mine").body["rows"] == Json({7, 9}));
    CHECK(api.call("GET", "/sessions/1/groupings/B").body["rows"].size() == 250);
    CHECK(api.call("GET", "/sessions/1/groupings/cluster45:G").body["rows"].size() >= 250);
    CHECK(api.call("GET", "/sessions/1/groupings/nothing").status == 404);
    CHECK(api.call("GET", "/sessions/1/groupings").body["groupings"]["mine"]["version"] == 2);
    CHECK(api.call("POST", "/sessions/1/groupings", Json{{"rows", {1}}}).status == 400);
}

TEST_CASE("two-dimensional constraint pulls the view back to data space") {
    Api api;
    api.call("POST", "/sessions", x5_session_body(0));
    const auto s = api.router.store().get(1);
    s->compute_view(ViewMethod::pca);
    const auto view = *s->current_view();
    const Matrix w = Session::pull_back(s->data().values(), view);
    // Unconstrained: whitening is the identity, so the pull-back recovers the view directions.
    CHECK((w - view.directions).cwiseAbs().maxCoeff() <= 1e-8);

    api.call("POST", "/sessions/1/selection", Json{{"grouping", "A"}});
    const auto r = api.call("POST", "/sessions/1/constraints", Json{{"variant", "2d"}});
    CHECK(r.body["added"] == 4);
    const auto comp = s->composites().back();
    CHECK(comp.spec.variant == CompositeVariant::two_d);
    CHECK(std::abs(comp.spec.first.dot(comp.spec.second)) <= 1e-12);
}

TEST_CASE("archive round trip") {
    Api api;
    api.call("POST", "/sessions", x5_session_body(1));
    api.call("POST", "/sessions/1/selection", Json{{"grouping", "A"}});
    api.call("POST", "/sessions/1/constraints", Json{{"variant", "cluster"}});
    api.call("POST", "/sessions/1/groupings", Json{{"name", "g"}, {"rows", {4, 5}}});
    api.call("POST", "/sessions/1/fit", nullptr, {{"wait", "true"}});
    api.call("GET", "/sessions/1/view", nullptr, {{"method", "ica"}});
    const auto first = api.call("GET", "/sessions/1/export").body;
    const auto imported = api.call("POST", "/sessions/import", first);
    REQUIRE(imported.status == 201);
    CHECK(imported.body["id"] == 2);
    const auto second = api.call("GET", "/sessions/2/export").body;
    CHECK(first.dump() == second.dump());
    CHECK(api.call("GET", "/sessions/2/view").status == 200);
    CHECK(api.call("POST", "/sessions/import", Json{{"format", "other"}}).status == 400);
}

TEST_CASE("http front end") {
    ApiRouter router(std::make_shared<SessionStore>());
    HttpServer server(router);
    const int port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    std::thread t([&] { server.listen(); });
    httplib::Client client("127.0.0.1", port);
    for (int i = 0; i < 100 && !client.Get("/health"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    auto res = client.Post("/sessions", Json{{"csv", kThreePoints}, {"standardize", false}}.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 201);
    res = client.Get("/sessions/1/view?method=pca");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(Json::parse(res->body)["points"].size() == 3);
    server.stop();
    t.join();
}
