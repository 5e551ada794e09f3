#include "mxe/api.hpp"
#include "mxe/errors.hpp"

// After Eigen: <resolv.h> defines _res, which Eigen uses as a parameter name.
#include <httplib.h>

namespace mxe {

struct HttpServer::Impl {
    ApiRouter& router;
    httplib::Server server;

    explicit Impl(ApiRouter& r) : router(r) {
        auto handler = [this](const httplib::Request& req, httplib::Response& res) {
            ApiRequest ar;
            ar.method = req.method;
            ar.path = req.path;
            for (const auto& [k, v] : req.params) ar.query[k] = v;
            ar.body = req.body;
            ar.content_type = req.get_header_value("Content-Type");
            if (ar.content_type.empty()) ar.content_type = "application/json";
            const auto out = router.handle(ar);
            res.status = out.status;
            res.set_content(out.body.dump(), "application/json");
        };
        server.Get(".*", handler);
        server.Post(".*", handler);
        server.Delete(".*", handler);
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });
    }
};

HttpServer::HttpServer(ApiRouter& router) : impl_(std::make_unique<Impl>(router)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw Error("cannot bind to " + host);
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind to " + host + ":" + std::to_string(port));
    return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace mxe
