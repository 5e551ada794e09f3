#include "mxe/session.hpp"

#include <algorithm>

#include "mxe/errors.hpp"

namespace mxe {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Json vector_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Json matrix_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
    return rows;
}

Vector vector_from_json(const Json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix matrix_from_json(const Json& j, Eigen::Index cols) {
    Matrix m(static_cast<Eigen::Index>(j.size()), cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != cols) throw InvalidArgument("ragged matrix in archive");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

Json ids_json(const DataMatrix& data, const RowSet& rows) { return Json(data.ids_of(rows)); }

RowSet rows_from_json(const DataMatrix& data, const Json& j) {
    const auto ids = j.get<std::vector<RowId>>();
    return data.rows_from_ids(ids);
}

FitStatus fit_status_from_string(std::string_view s) {
    for (auto st : {FitStatus::unfitted, FitStatus::converged, FitStatus::cutoff, FitStatus::in_progress})
        if (to_string(st) == s) return st;
    throw InvalidArgument("unknown fit status '" + std::string(s) + "'");
}

Json view_archive_json(const ProjectionView& v) {
    return Json{{"method", to_string(v.method)},
                {"model_version", v.model_version},
                {"directions", matrix_json(v.directions.transpose())},
                {"scores", v.scores},
                {"variances", v.variances},
                {"not_converged", v.not_converged},
                {"iterations", v.iterations},
                {"data_points", matrix_json(v.data_points)},
                {"background_points", matrix_json(v.background_points)}};
}

ProjectionView view_from_archive(const Json& j, Eigen::Index d) {
    ProjectionView v;
    v.method = view_method_from_string(j.at("method").get<std::string>());
    v.model_version = j.at("model_version").get<std::uint64_t>();
    v.directions = matrix_from_json(j.at("directions"), d).transpose();
    v.scores = j.at("scores").get<std::vector<double>>();
    v.variances = j.at("variances").get<std::vector<double>>();
    v.not_converged = j.at("not_converged").get<bool>();
    v.iterations = j.at("iterations").get<std::size_t>();
    v.data_points = matrix_from_json(j.at("data_points"), 2);
    v.background_points = matrix_from_json(j.at("background_points"), 2);
    return v;
}

}  // namespace

SelectionMode selection_mode_from_string(std::string_view name) {
    if (name == "replace") return SelectionMode::replace;
    if (name == "add") return SelectionMode::add;
    if (name == "remove") return SelectionMode::remove;
    throw InvalidArgument("unknown selection mode '" + std::string(name) + "'");
}

Session::Session(std::uint64_t id, std::string csv, SessionSettings settings)
    : id_(id), csv_(std::move(csv)), settings_(std::move(settings)), data_(read_csv(csv_, settings_.csv)) {
    settings_.fit.validate();
    if (data_.rows() < 3) throw InvalidArgument("a session needs at least 3 rows");
    if (data_.cols() < 2) throw InvalidArgument("a session needs at least 2 numeric columns");
    model_ = std::make_shared<const BackgroundModel>(init_model(data_, {}));
    compute_view();
}

Session::~Session() { worker_.request_stop(); }

std::shared_ptr<const BackgroundModel> Session::model() const {
    std::lock_guard lock(mutex_);
    return model_;
}

std::uint64_t Session::model_version() const {
    std::lock_guard lock(mutex_);
    return model_version_;
}

std::vector<CompositeConstraint> Session::composites() const {
    std::lock_guard lock(mutex_);
    return constraints_.composites();
}

std::size_t Session::primitive_count() const {
    std::lock_guard lock(mutex_);
    return constraints_.size();
}

std::uint64_t Session::sample_seed(std::uint64_t model_version) const {
    return splitmix64(settings_.seed ^ splitmix64(model_version));
}

ProjectionView Session::compute_view(std::optional<ViewMethod> method) {
    std::shared_ptr<const BackgroundModel> model;
    std::uint64_t version = 0;
    {
        std::lock_guard lock(mutex_);
        model = model_;
        version = model_version_;
    }
    if (model->status == FitStatus::unfitted && !model->constraints().empty())
        throw StaleModel("constraints changed since the last fit; update the background model first");

    const auto y = whiten(data_.values(), *model, version);
    const auto sample = whiten(sample_background(*model, sample_seed(version)), *model, version);
    const auto m = method.value_or(settings_.view_method);
    ProjectionView view;
    if (m == ViewMethod::pca) {
        view = pca_view(y);
    } else {
        IcaOptions options;
        options.seed = settings_.seed;
        view = ica_view(y, options);
    }
    view.background_points = project(sample.values, view);

    std::lock_guard lock(mutex_);
    if (model_version_ == version) view_ = view;
    return view;
}

std::optional<ProjectionView> Session::current_view() const {
    std::lock_guard lock(mutex_);
    return view_;
}

RowSet Session::select(const RowSet& rows, SelectionMode mode) {
    if (!rows.empty() && rows.max_index() >= data_.rows()) throw InvalidArgument("selection row out of range");
    std::lock_guard lock(mutex_);
    std::vector<std::size_t> out;
    const auto cur = selection_.indices();
    const auto add = rows.indices();
    switch (mode) {
        case SelectionMode::replace: out.assign(add.begin(), add.end()); break;
        case SelectionMode::add: std::set_union(cur.begin(), cur.end(), add.begin(), add.end(), std::back_inserter(out)); break;
        case SelectionMode::remove:
            std::set_difference(cur.begin(), cur.end(), add.begin(), add.end(), std::back_inserter(out));
            break;
    }
    selection_ = RowSet(std::move(out));
    return selection_;
}

RowSet Session::selection() const {
    std::lock_guard lock(mutex_);
    return selection_;
}

SelectionStats Session::selection_stats(const std::optional<RowSet>& rows) const {
    return mxe::selection_stats(data_, rows ? *rows : selection());
}

void Session::ensure_idle() const {
    if (progress_.running) throw Conflict("a fit is running for this session");
}

Matrix Session::pull_back(const Matrix& data, const ProjectionView& view) {
    if (view.data_points.rows() != data.rows()) throw InvalidArgument("view does not match the data");
    Matrix w = data.completeOrthogonalDecomposition().solve(view.data_points);
    const double n0 = w.col(0).norm();
    if (!(n0 > 0.0)) throw InvalidArgument("view direction has no data-space counterpart");
    w.col(0) /= n0;
    w.col(1) -= w.col(1).dot(w.col(0)) * w.col(0);
    const double n1 = w.col(1).norm();
    if (!(n1 > 1e-12)) throw InvalidArgument("view directions collapse in data space");
    w.col(1) /= n1;
    return w;
}

std::size_t Session::add_constraint(CompositeVariant variant, const std::optional<RowSet>& rows) {
    std::lock_guard lock(mutex_);
    ensure_idle();
    CompositeSpec spec;
    switch (variant) {
        case CompositeVariant::margin: spec = CompositeSpec::margin(); break;
        case CompositeVariant::one_cluster: spec = CompositeSpec::one_cluster(); break;
        case CompositeVariant::cluster:
        case CompositeVariant::two_d: {
            RowSet r = rows ? *rows : selection_;
            if (r.empty()) throw InvalidArgument("selection is empty");
            if (variant == CompositeVariant::cluster) {
                spec = CompositeSpec::cluster(std::move(r));
            } else {
                if (!view_) throw InvalidArgument("a 2-D constraint needs a current view");
                const Matrix w = pull_back(data_.values(), *view_);
                spec = CompositeSpec::two_d(std::move(r), w.col(0), w.col(1));
            }
            break;
        }
    }
    const auto added = constraints_.add(expand_composite(data_, spec));
    if (added > 0) {
        model_ = std::make_shared<const BackgroundModel>(init_model(data_, constraints_.primitives()));
        ++model_version_;
        progress_ = FitProgress{};
        progress_.model_version = model_version_;
    }
    return added;
}

void Session::start_fit() {
    std::lock_guard lock(mutex_);
    ensure_idle();
    if (constraints_.empty()) {
        progress_ = FitProgress{};
        progress_.status = FitStatus::converged;
        progress_.model_version = model_version_;
        return;
    }
    BackgroundModel start = init_model(data_, constraints_.primitives());
    progress_ = FitProgress{};
    progress_.running = true;
    progress_.status = FitStatus::in_progress;
    progress_.model_version = model_version_;
    worker_ = std::jthread([this, m = std::move(start)](std::stop_token stop) mutable { run_fit(stop, std::move(m)); });
}

void Session::run_fit(std::stop_token stop, BackgroundModel model) {
    const auto observer = [this](const SweepRecord& rec, const BackgroundModel&) {
        std::lock_guard lock(mutex_);
        progress_.sweeps = rec.sweep;
        progress_.max_lambda_change = rec.max_lambda_change;
        progress_.max_residual = rec.max_residual;
        progress_.elapsed_ms = rec.elapsed_ms;
    };
    try {
        install_model(fit(std::move(model), settings_.fit, observer, stop));
    } catch (...) {
        std::lock_guard lock(mutex_);
        progress_.running = false;
        progress_.status = model_->status;
        fit_done_.notify_all();
    }
}

void Session::install_model(BackgroundModel model) {
    std::lock_guard lock(mutex_);
    const auto& diag = model.diagnostics;
    progress_.running = false;
    progress_.status = model.status;
    progress_.sweeps = diag.sweeps;
    progress_.elapsed_ms = diag.wall_ms;
    if (!diag.log.empty()) {
        progress_.max_lambda_change = diag.log.back().max_lambda_change;
        progress_.max_residual = diag.log.back().max_residual;
    }
    model_ = std::make_shared<const BackgroundModel>(std::move(model));
    progress_.model_version = ++model_version_;
    fit_done_.notify_all();
}

FitProgress Session::fit_progress() const {
    std::lock_guard lock(mutex_);
    FitProgress p = progress_;
    if (!p.running && p.status == FitStatus::unfitted) p.status = model_->status;
    return p;
}

void Session::cancel_fit() { worker_.request_stop(); }

void Session::wait_for_fit() {
    std::unique_lock lock(mutex_);
    fit_done_.wait(lock, [&] { return !progress_.running; });
}

std::uint64_t Session::save_grouping(const std::string& name, const RowSet& rows) {
    if (name.empty()) throw InvalidArgument("grouping name is empty");
    if (!rows.empty() && rows.max_index() >= data_.rows()) throw InvalidArgument("grouping row out of range");
    std::lock_guard lock(mutex_);
    auto [it, inserted] = groupings_.try_emplace(name, Grouping{rows, 1});
    if (!inserted) {
        it->second.rows = rows;
        ++it->second.version;
    }
    return it->second.version;
}

RowSet Session::load_grouping(const std::string& name) const {
    {
        std::lock_guard lock(mutex_);
        if (auto it = groupings_.find(name); it != groupings_.end()) return it->second.rows;
    }
    auto match = [&](const std::vector<std::string>& labels, std::string_view value) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == value) rows.push_back(i);
        return rows;
    };
    if (data_.has_labels()) {
        auto rows = match(data_.class_labels(), name);
        if (!rows.empty()) return RowSet(std::move(rows));
    }
    if (const auto colon = name.find(':'); colon != std::string::npos) {
        const auto it = data_.extra_labels().find(name.substr(0, colon));
        if (it != data_.extra_labels().end()) {
            auto rows = match(it->second, std::string_view(name).substr(colon + 1));
            if (!rows.empty()) return RowSet(std::move(rows));
        }
    }
    throw NotFound("no grouping named '" + name + "'");
}

std::map<std::string, Grouping> Session::groupings() const {
    std::lock_guard lock(mutex_);
    return groupings_;
}

Json Session::export_archive() const {
    std::lock_guard lock(mutex_);
    const auto& csv = settings_.csv;
    Json j;
    j["format"] = "mxe-session";
    j["format_version"] = 1;
    j["source"] = {{"csv", csv_},
                   {"label_columns", csv.label_columns},
                   {"id_column", csv.id_column ? Json(*csv.id_column) : Json(nullptr)},
                   {"standardize", csv.standardize},
                   {"delimiter", std::string(1, csv.delimiter)}};
    j["settings"] = {{"seed", settings_.seed},
                     {"view_method", to_string(settings_.view_method)},
                     {"fit", to_json(settings_.fit)}};
    Json composites = Json::array();
    for (const auto& c : constraints_.composites()) {
        Json e{{"variant", to_string(c.spec.variant)}};
        if (c.spec.variant == CompositeVariant::cluster || c.spec.variant == CompositeVariant::two_d)
            e["rows"] = ids_json(data_, c.spec.rows);
        if (c.spec.variant == CompositeVariant::two_d) {
            e["first"] = vector_json(c.spec.first);
            e["second"] = vector_json(c.spec.second);
        }
        composites.push_back(std::move(e));
    }
    j["constraints"] = std::move(composites);

    Json classes = Json::array();
    for (const auto& p : model_->params()) {
        classes.push_back({{"natural_first", vector_json(p.natural_first)},
                           {"natural_second", matrix_json(p.natural_second)},
                           {"mean", vector_json(p.mean)},
                           {"cov", matrix_json(p.cov)}});
    }
    j["model"] = {{"version", model_version_},
                  {"status", to_string(model_->status)},
                  {"sweeps", model_->diagnostics.sweeps},
                  {"classes", std::move(classes)}};

    Json groups = Json::object();
    for (const auto& [name, g] : groupings_) groups[name] = {{"rows", ids_json(data_, g.rows)}, {"version", g.version}};
    j["groupings"] = std::move(groups);
    j["selection"] = ids_json(data_, selection_);
    j["view"] = view_ ? view_archive_json(*view_) : Json(nullptr);
    return j;
}

std::unique_ptr<Session> Session::import_archive(std::uint64_t id, const Json& archive) {
    try {
        if (archive.at("format").get<std::string>() != "mxe-session") throw InvalidArgument("not a session archive");
        if (archive.at("format_version").get<int>() != 1) throw InvalidArgument("unsupported archive version");
        const auto& src = archive.at("source");
        SessionSettings settings;
        settings.csv.label_columns = src.at("label_columns").get<std::vector<std::string>>();
        if (!src.at("id_column").is_null()) settings.csv.id_column = src.at("id_column").get<std::string>();
        settings.csv.standardize = src.at("standardize").get<bool>();
        const auto delim = src.at("delimiter").get<std::string>();
        if (delim.size() != 1) throw InvalidArgument("delimiter must be one character");
        settings.csv.delimiter = delim[0];
        const auto& st = archive.at("settings");
        settings.seed = st.at("seed").get<std::uint64_t>();
        settings.view_method = view_method_from_string(st.at("view_method").get<std::string>());
        settings.fit = fit_config_from_json(st.at("fit"));

        auto s = std::make_unique<Session>(id, src.at("csv").get<std::string>(), std::move(settings));
        const auto& data = s->data_;
        const auto d = static_cast<Eigen::Index>(data.cols());
        for (const auto& e : archive.at("constraints")) {
            const auto variant = composite_variant_from_string(e.at("variant").get<std::string>());
            CompositeSpec spec;
            switch (variant) {
                case CompositeVariant::margin: spec = CompositeSpec::margin(); break;
                case CompositeVariant::one_cluster: spec = CompositeSpec::one_cluster(); break;
                case CompositeVariant::cluster: spec = CompositeSpec::cluster(rows_from_json(data, e.at("rows"))); break;
                case CompositeVariant::two_d:
                    spec = CompositeSpec::two_d(rows_from_json(data, e.at("rows")), vector_from_json(e.at("first")),
                                                vector_from_json(e.at("second")));
                    break;
            }
            s->constraints_.add(expand_composite(data, spec));
        }

        const auto& m = archive.at("model");
        BackgroundModel model = init_model(data, s->constraints_.primitives());
        const auto& classes = m.at("classes");
        if (classes.size() != model.params().size()) throw InvalidArgument("archive model does not match its constraints");
        for (std::size_t c = 0; c < classes.size(); ++c) {
            auto& p = model.params()[c];
            const auto& jc = classes[c];
            p.natural_first = vector_from_json(jc.at("natural_first"));
            p.natural_second = matrix_from_json(jc.at("natural_second"), d);
            p.mean = vector_from_json(jc.at("mean"));
            p.cov = matrix_from_json(jc.at("cov"), d);
            if (p.natural_first.size() != d || p.mean.size() != d || p.cov.rows() != d || p.natural_second.rows() != d)
                throw InvalidArgument("archive model has the wrong dimension");
        }
        model.status = fit_status_from_string(m.at("status").get<std::string>());
        if (model.status == FitStatus::in_progress) model.status = FitStatus::unfitted;
        model.diagnostics.sweeps = m.at("sweeps").get<std::size_t>();
        compute_residuals(model);
        s->model_ = std::make_shared<const BackgroundModel>(std::move(model));
        s->model_version_ = m.at("version").get<std::uint64_t>();
        s->progress_.status = s->model_->status;
        s->progress_.sweeps = s->model_->diagnostics.sweeps;
        s->progress_.model_version = s->model_version_;

        for (const auto& [name, g] : archive.at("groupings").items())
            s->groupings_[name] = Grouping{rows_from_json(data, g.at("rows")), g.at("version").get<std::uint64_t>()};
        s->selection_ = rows_from_json(data, archive.at("selection"));
        const auto& v = archive.at("view");
        if (v.is_null()) {
            s->view_.reset();
        } else {
            s->view_ = view_from_archive(v, d);
            if (s->view_->data_points.rows() != static_cast<Eigen::Index>(data.rows()))
                throw InvalidArgument("archive view does not match the data");
        }
        return s;
    } catch (const Json::exception& e) {
        throw InvalidArgument(std::string("malformed session archive: ") + e.what());
    }
}

std::shared_ptr<Session> SessionStore::create(std::string csv, SessionSettings settings) {
    std::uint64_t id;
    {
        std::lock_guard lock(mutex_);
        id = next_id_++;
    }
    auto s = std::make_shared<Session>(id, std::move(csv), std::move(settings));
    std::lock_guard lock(mutex_);
    sessions_[id] = s;
    return s;
}

std::shared_ptr<Session> SessionStore::import_archive(const Json& archive) {
    std::uint64_t id;
    {
        std::lock_guard lock(mutex_);
        id = next_id_++;
    }
    std::shared_ptr<Session> s = Session::import_archive(id, archive);
    std::lock_guard lock(mutex_);
    sessions_[id] = s;
    return s;
}

std::shared_ptr<Session> SessionStore::get(std::uint64_t id) const {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFound("no session " + std::to_string(id));
    return it->second;
}

bool SessionStore::erase(std::uint64_t id) {
    std::lock_guard lock(mutex_);
    return sessions_.erase(id) > 0;
}

std::vector<std::uint64_t> SessionStore::ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::uint64_t> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
}

Json to_json(const FitConfig& c) {
    return Json{{"lambda_tolerance", c.lambda_tolerance},
                {"moment_tolerance", c.moment_tolerance},
                {"time_budget_s", c.time_budget.count()},
                {"max_sweeps", c.max_sweeps},
                {"root_tolerance", c.root_tolerance},
                {"variance_floor", c.variance_floor},
                {"refresh_interval", c.refresh_interval},
                {"stop_on_convergence", c.stop_on_convergence}};
}

FitConfig fit_config_from_json(const Json& j, FitConfig c) {
    if (!j.is_object()) throw InvalidArgument("fit settings must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "lambda_tolerance") c.lambda_tolerance = value.get<double>();
        else if (key == "moment_tolerance") c.moment_tolerance = value.get<double>();
        else if (key == "time_budget_s") c.time_budget = std::chrono::duration<double>(value.get<double>());
        else if (key == "max_sweeps") c.max_sweeps = value.get<std::size_t>();
        else if (key == "root_tolerance") c.root_tolerance = value.get<double>();
        else if (key == "variance_floor") c.variance_floor = value.get<double>();
        else if (key == "refresh_interval") c.refresh_interval = value.get<std::size_t>();
        else if (key == "stop_on_convergence") c.stop_on_convergence = value.get<bool>();
        else throw InvalidArgument("unknown fit setting '" + key + "'");
    }
    c.validate();
    return c;
}

Json to_json(const SelectionStats& s) {
    Json attrs = Json::array();
    for (const auto& a : s.attributes) {
        attrs.push_back({{"column", a.column},
                         {"name", a.name},
                         {"mean_selected", a.mean_selected},
                         {"std_selected", a.std_selected},
                         {"mean_rest", a.mean_rest},
                         {"std_rest", a.std_rest},
                         {"score", a.score}});
    }
    return Json{{"count", s.count},
                {"rest_empty", s.rest_empty},
                {"attributes", std::move(attrs)},
                {"ranking", s.ranking},
                {"jaccard", s.jaccard}};
}

Json to_json(const Ellipse& e) {
    return Json{{"center", {e.center(0), e.center(1)}},
                {"semi_axes", {e.semi_axes(0), e.semi_axes(1)}},
                {"axes", {{e.axes(0, 0), e.axes(1, 0)}, {e.axes(0, 1), e.axes(1, 1)}}},
                {"angle", e.angle}};
}

Json to_json(const FitProgress& p) {
    return Json{{"running", p.running},
                {"status", to_string(p.status)},
                {"sweeps", p.sweeps},
                {"max_lambda_change", p.max_lambda_change},
                {"max_residual", p.max_residual},
                {"elapsed_ms", p.elapsed_ms},
                {"model_version", p.model_version}};
}

Json view_to_json(const ProjectionView& view, const DataMatrix& data, const RowSet& selection,
                  std::uint64_t current_model_version) {
    Json points = Json::array();
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        points.push_back({{"row_id", data.row_ids()[i]},
                          {"data_x", view.data_points(r, 0)},
                          {"data_y", view.data_points(r, 1)},
                          {"bg_x", view.background_points(r, 0)},
                          {"bg_y", view.background_points(r, 1)},
                          {"selected", selection.contains(i)}});
    }
    return Json{{"method", to_string(view.method)},
                {"model_version", view.model_version},
                {"stale", view.model_version < current_model_version},
                {"not_converged", view.not_converged},
                {"iterations", view.iterations},
                {"directions", matrix_json(view.directions.transpose())},
                {"scores", view.scores},
                {"variances", view.variances},
                {"points", std::move(points)}};
}

}  // namespace mxe
