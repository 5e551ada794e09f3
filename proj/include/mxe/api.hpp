#pragma once

#include <map>
#include <memory>
#include <string>

#include "mxe/session.hpp"

namespace mxe {

struct ApiRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
    std::string content_type = "application/json";
};

struct ApiResponse {
    int status = 200;
    Json body;
};

/// Transport-independent JSON API over a SessionStore.
///
///   GET    /health
///   GET    /sessions
///   POST   /sessions                      JSON {csv, label_columns, id_column, standardize, seed,
///                                          view_method, fit} or text/csv with the same as query params
///   POST   /sessions/import               archive JSON
///   GET    /sessions/{id}
///   DELETE /sessions/{id}
///   GET    /sessions/{id}/view            ?method=pca|ica  ?cached=true
///   GET    /sessions/{id}/selection
///   POST   /sessions/{id}/selection       {rows: [row_id], mode} or {grouping, mode}
///   GET    /sessions/{id}/selection/stats ?top=4
///   GET    /sessions/{id}/selection/ellipses ?level=0.95
///   GET    /sessions/{id}/constraints
///   POST   /sessions/{id}/constraints     {variant, rows?}
///   POST   /sessions/{id}/fit             ?wait=true
///   GET    /sessions/{id}/fit/status
///   POST   /sessions/{id}/fit/cancel
///   GET    /sessions/{id}/groupings
///   POST   /sessions/{id}/groupings       {name, rows?}
///   GET    /sessions/{id}/groupings/{name}
///   GET    /sessions/{id}/export
///
/// Errors come back as {error: {code, message}} with 400 (bad input, plus
/// line/column for CSV errors), 404, 405 or 409 (fit running, stale model).
class ApiRouter {
public:
    explicit ApiRouter(std::shared_ptr<SessionStore> store);

    ApiResponse handle(const ApiRequest& request);
    SessionStore& store() { return *store_; }

private:
    std::shared_ptr<SessionStore> store_;
};

/// Small HTTP front end for an ApiRouter.
class HttpServer {
public:
    explicit HttpServer(ApiRouter& router);
    ~HttpServer();

    /// Binds; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace mxe
