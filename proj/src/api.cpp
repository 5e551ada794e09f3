#include "mxe/api.hpp"

#include <charconv>
#include <sstream>
#include <vector>

#include "mxe/errors.hpp"

namespace mxe {

namespace {

ApiResponse error(int status, std::string code, std::string message) {
    return {status, Json{{"error", {{"code", std::move(code)}, {"message", std::move(message)}}}}};
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream in(path);
    while (std::getline(in, part, '/'))
        if (!part.empty()) parts.push_back(part);
    return parts;
}

std::uint64_t parse_u64(const std::string& s, const char* what) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw InvalidArgument(std::string("bad ") + what + " '" + s + "'");
    return v;
}

double parse_double(const std::string& s, const char* what) {
    double v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw InvalidArgument(std::string("bad ") + what + " '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw InvalidArgument("bad boolean '" + s + "'");
}

std::optional<std::string> query(const ApiRequest& r, const std::string& key) {
    const auto it = r.query.find(key);
    if (it == r.query.end()) return std::nullopt;
    return it->second;
}

Json parse_body(const ApiRequest& r) {
    if (r.body.empty()) return Json::object();
    try {
        return Json::parse(r.body);
    } catch (const Json::parse_error& e) {
        throw InvalidArgument(std::string("request body is not valid JSON: ") + e.what());
    }
}

SessionSettings settings_from_json(const Json& j) {
    SessionSettings s;
    if (j.contains("label_columns")) s.csv.label_columns = j.at("label_columns").get<std::vector<std::string>>();
    if (j.contains("label_column") && !j.at("label_column").is_null())
        s.csv.label_columns.insert(s.csv.label_columns.begin(), j.at("label_column").get<std::string>());
    if (j.contains("id_column") && !j.at("id_column").is_null()) s.csv.id_column = j.at("id_column").get<std::string>();
    if (j.contains("standardize")) s.csv.standardize = j.at("standardize").get<bool>();
    if (j.contains("delimiter")) {
        const auto d = j.at("delimiter").get<std::string>();
        if (d.size() != 1) throw InvalidArgument("delimiter must be one character");
        s.csv.delimiter = d[0];
    }
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("view_method")) s.view_method = view_method_from_string(j.at("view_method").get<std::string>());
    if (j.contains("fit")) s.fit = fit_config_from_json(j.at("fit"));
    return s;
}

SessionSettings settings_from_query(const ApiRequest& r) {
    SessionSettings s;
    if (auto v = query(r, "label")) {
        std::istringstream in(*v);
        std::string col;
        while (std::getline(in, col, ','))
            if (!col.empty()) s.csv.label_columns.push_back(col);
    }
    if (auto v = query(r, "id_column")) s.csv.id_column = *v;
    if (auto v = query(r, "standardize")) s.csv.standardize = parse_bool(*v);
    if (auto v = query(r, "seed")) s.seed = parse_u64(*v, "seed");
    if (auto v = query(r, "view_method")) s.view_method = view_method_from_string(*v);
    if (auto v = query(r, "time_budget_s")) s.fit.time_budget = std::chrono::duration<double>(parse_double(*v, "time budget"));
    s.fit.validate();
    return s;
}

RowSet rows_from_ids(const Session& s, const Json& j) {
    if (!j.is_array()) throw InvalidArgument("rows must be an array of row ids");
    const auto ids = j.get<std::vector<RowId>>();
    try {
        return s.data().rows_from_ids(ids);
    } catch (const NotFound& e) {
        throw InvalidArgument(e.what());
    }
}

Json ids_json(const Session& s, const RowSet& rows) { return Json(s.data().ids_of(rows)); }

Json session_summary(const Session& s) {
    const auto& data = s.data();
    const auto progress = s.fit_progress();
    Json labels = Json::array();
    if (data.has_labels()) {
        std::vector<std::string> seen;
        for (const auto& l : data.class_labels())
            if (std::find(seen.begin(), seen.end(), l) == seen.end()) seen.push_back(l);
        labels = seen;
    }
    Json extra = Json::array();
    for (const auto& [name, values] : data.extra_labels()) extra.push_back(name);
    return Json{{"id", s.id()},
                {"rows", data.rows()},
                {"columns", data.column_names()},
                {"class_labels", std::move(labels)},
                {"extra_label_columns", std::move(extra)},
                {"standardized", data.standardization().enabled},
                {"model_version", s.model_version()},
                {"fit", to_json(progress)},
                {"composites", s.composites().size()},
                {"primitives", s.primitive_count()},
                {"settings", {{"seed", s.settings().seed},
                              {"view_method", to_string(s.settings().view_method)},
                              {"fit", to_json(s.settings().fit)}}}};
}

Json composites_json(const Session& s) {
    Json out = Json::array();
    for (const auto& c : s.composites()) {
        Json e{{"variant", to_string(c.spec.variant)}, {"primitives", c.expansion.size()}};
        if (c.spec.variant == CompositeVariant::cluster || c.spec.variant == CompositeVariant::two_d)
            e["rows"] = ids_json(s, c.spec.rows);
        if (c.spec.variant == CompositeVariant::two_d) {
            e["first"] = std::vector<double>(c.spec.first.data(), c.spec.first.data() + c.spec.first.size());
            e["second"] = std::vector<double>(c.spec.second.data(), c.spec.second.data() + c.spec.second.size());
        }
        out.push_back(std::move(e));
    }
    return out;
}

class MethodNotAllowed : public Error {
public:
    using Error::Error;
};

ApiResponse session_route(Session& s, const ApiRequest& r, const std::vector<std::string>& parts) {
    const auto& m = r.method;
    const std::string sub = parts.size() > 2 ? parts[2] : "";
    const std::string leaf = parts.size() > 3 ? parts[3] : "";
    if (parts.size() > 4) throw NotFound("no such endpoint");

    if (sub == "view" && leaf.empty()) {
        if (m != "GET") throw MethodNotAllowed("use GET");
        std::optional<ViewMethod> method;
        if (auto v = query(r, "method")) method = view_method_from_string(*v);
        std::optional<ProjectionView> view;
        if (auto c = query(r, "cached"); c && parse_bool(*c)) {
            view = s.current_view();
            if (!view) throw NotFound("no current view");
        } else {
            view = s.compute_view(method);
        }
        return {200, view_to_json(*view, s.data(), s.selection(), s.model_version())};
    }
    if (sub == "selection") {
        if (leaf.empty()) {
            if (m == "GET") return {200, Json{{"rows", ids_json(s, s.selection())}}};
            if (m != "POST") throw MethodNotAllowed("use GET or POST");
            const Json body = parse_body(r);
            const auto mode = selection_mode_from_string(body.value("mode", std::string("replace")));
            RowSet rows;
            if (body.contains("grouping")) rows = s.load_grouping(body.at("grouping").get<std::string>());
            else if (body.contains("rows")) rows = rows_from_ids(s, body.at("rows"));
            else throw InvalidArgument("selection needs rows or grouping");
            const auto sel = s.select(rows, mode);
            return {200, Json{{"count", sel.size()}, {"rows", ids_json(s, sel)}}};
        }
        if (m != "GET") throw MethodNotAllowed("use GET");
        if (leaf == "stats") {
            auto stats = s.selection_stats();
            Json j = to_json(stats);
            std::size_t top = 4;
            if (auto v = query(r, "top")) top = parse_u64(*v, "top");
            top = std::min(top, stats.ranking.size());
            j["top"] = std::vector<std::size_t>(stats.ranking.begin(), stats.ranking.begin() + static_cast<std::ptrdiff_t>(top));
            return {200, j};
        }
        if (leaf == "ellipses") {
            const double level = query(r, "level") ? parse_double(*query(r, "level"), "level") : 0.95;
            const auto view = s.current_view();
            if (!view) throw InvalidArgument("no current view");
            const auto sel = s.selection();
            if (sel.size() < 3) throw InvalidArgument("ellipses need at least 3 selected rows");
            Matrix data(static_cast<Eigen::Index>(sel.size()), 2), bg(static_cast<Eigen::Index>(sel.size()), 2);
            Eigen::Index k = 0;
            for (auto i : sel) {
                data.row(k) = view->data_points.row(static_cast<Eigen::Index>(i));
                bg.row(k) = view->background_points.row(static_cast<Eigen::Index>(i));
                ++k;
            }
            return {200, Json{{"level", level},
                              {"model_version", view->model_version},
                              {"selection", to_json(confidence_ellipse(data, level))},
                              {"background", to_json(confidence_ellipse(bg, level))}}};
        }
        throw NotFound("no such endpoint");
    }
    if (sub == "constraints" && leaf.empty()) {
        if (m == "GET") return {200, Json{{"composites", composites_json(s)}, {"primitives", s.primitive_count()}}};
        if (m != "POST") throw MethodNotAllowed("use GET or POST");
        const Json body = parse_body(r);
        if (!body.contains("variant")) throw InvalidArgument("constraint needs a variant");
        const auto variant = composite_variant_from_string(body.at("variant").get<std::string>());
        std::optional<RowSet> rows;
        if (body.contains("rows")) rows = rows_from_ids(s, body.at("rows"));
        const auto added = s.add_constraint(variant, rows);
        return {200, Json{{"added", added},
                          {"primitives", s.primitive_count()},
                          {"composites", s.composites().size()},
                          {"model_version", s.model_version()}}};
    }
    if (sub == "fit") {
        if (leaf.empty()) {
            if (m != "POST") throw MethodNotAllowed("use POST");
            s.start_fit();
            const Json body = parse_body(r);
            bool wait = body.is_object() && body.value("wait", false);
            if (auto v = query(r, "wait")) wait = parse_bool(*v);
            if (!wait) return {202, to_json(s.fit_progress())};
            s.wait_for_fit();
            return {200, to_json(s.fit_progress())};
        }
        if (leaf == "status") {
            if (m != "GET") throw MethodNotAllowed("use GET");
            return {200, to_json(s.fit_progress())};
        }
        if (leaf == "cancel") {
            if (m != "POST") throw MethodNotAllowed("use POST");
            s.cancel_fit();
            return {202, to_json(s.fit_progress())};
        }
        throw NotFound("no such endpoint");
    }
    if (sub == "groupings") {
        if (leaf.empty()) {
            if (m == "GET") {
                Json out = Json::object();
                for (const auto& [name, g] : s.groupings()) out[name] = {{"count", g.rows.size()}, {"version", g.version}};
                return {200, Json{{"groupings", std::move(out)}}};
            }
            if (m != "POST") throw MethodNotAllowed("use GET or POST");
            const Json body = parse_body(r);
            if (!body.contains("name")) throw InvalidArgument("grouping needs a name");
            const auto name = body.at("name").get<std::string>();
            const RowSet rows = body.contains("rows") ? rows_from_ids(s, body.at("rows")) : s.selection();
            const auto version = s.save_grouping(name, rows);
            return {200, Json{{"name", name}, {"version", version}, {"count", rows.size()}}};
        }
        if (m != "GET") throw MethodNotAllowed("use GET");
        const auto rows = s.load_grouping(leaf);
        return {200, Json{{"name", leaf}, {"rows", ids_json(s, rows)}}};
    }
    if (sub == "export" && leaf.empty()) {
        if (m != "GET") throw MethodNotAllowed("use GET");
        return {200, s.export_archive()};
    }
    throw NotFound("no such endpoint");
}

}  // namespace

ApiRouter::ApiRouter(std::shared_ptr<SessionStore> store) : store_(std::move(store)) {}

ApiResponse ApiRouter::handle(const ApiRequest& r) {
    try {
        const auto parts = split_path(r.path);
        if (parts.size() == 1 && parts[0] == "health") return {200, Json{{"status", "ok"}}};
        if (parts.empty() || parts[0] != "sessions") throw NotFound("no such endpoint");
        if (parts.size() == 1) {
            if (r.method == "GET") return {200, Json{{"sessions", store_->ids()}}};
            if (r.method != "POST") throw MethodNotAllowed("use GET or POST");
            std::shared_ptr<Session> s;
            if (r.content_type.rfind("text/csv", 0) == 0) {
                s = store_->create(r.body, settings_from_query(r));
            } else {
                const Json body = parse_body(r);
                if (!body.contains("csv")) throw InvalidArgument("session needs a csv field");
                s = store_->create(body.at("csv").get<std::string>(), settings_from_json(body));
            }
            return {201, session_summary(*s)};
        }
        if (parts.size() == 2 && parts[1] == "import") {
            if (r.method != "POST") throw MethodNotAllowed("use POST");
            auto s = store_->import_archive(parse_body(r));
            return {201, session_summary(*s)};
        }
        const auto id = parse_u64(parts[1], "session id");
        auto s = store_->get(id);
        if (parts.size() == 2) {
            if (r.method == "GET") return {200, session_summary(*s)};
            if (r.method == "DELETE") {
                store_->erase(id);
                return {200, Json{{"deleted", id}}};
            }
            throw MethodNotAllowed("use GET or DELETE");
        }
        return session_route(*s, r, parts);
    } catch (const ParseError& e) {
        auto resp = error(400, "parse_error", e.what());
        resp.body["error"]["line"] = e.line();
        resp.body["error"]["column"] = e.column();
        return resp;
    } catch (const InvalidConstraint& e) {
        return error(400, "invalid_constraint", e.what());
    } catch (const InvalidArgument& e) {
        return error(400, "invalid_argument", e.what());
    } catch (const NotFound& e) {
        return error(404, "not_found", e.what());
    } catch (const MethodNotAllowed& e) {
        return error(405, "method_not_allowed", e.what());
    } catch (const Conflict& e) {
        return error(409, "conflict", e.what());
    } catch (const StaleModel& e) {
        return error(409, "stale_model", e.what());
    } catch (const Json::exception& e) {
        return error(400, "invalid_argument", e.what());
    } catch (const std::exception& e) {
        return error(500, "internal", e.what());
    }
}

}  // namespace mxe
