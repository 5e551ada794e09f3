#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mxe/constraints.hpp"
#include "mxe/model.hpp"
#include "mxe/projection.hpp"
#include "mxe/stats.hpp"

namespace mxe {

using Json = nlohmann::json;

struct SessionSettings {
    FitConfig fit;
    ViewMethod view_method = ViewMethod::pca;
    std::uint64_t seed = 0;
    CsvOptions csv;
};

enum class SelectionMode { replace, add, remove };

SelectionMode selection_mode_from_string(std::string_view name);

struct Grouping {
    RowSet rows;
    std::uint64_t version = 1;
};

struct FitProgress {
    bool running = false;
    FitStatus status = FitStatus::unfitted;
    std::size_t sweeps = 0;
    double max_lambda_change = 0.0;
    double max_residual = 0.0;
    double elapsed_ms = 0.0;
    std::uint64_t model_version = 0;
};

/// One exploration session. All public members are thread-safe; mutations
/// are serialized and at most one fit runs at a time.
class Session {
public:
    /// Parses `csv` with settings.csv. Throws ParseError or InvalidArgument.
    Session(std::uint64_t id, std::string csv, SessionSettings settings);
    ~Session();

    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    std::uint64_t id() const { return id_; }
    const DataMatrix& data() const { return data_; }
    const SessionSettings& settings() const { return settings_; }

    std::shared_ptr<const BackgroundModel> model() const;
    std::uint64_t model_version() const;
    std::vector<CompositeConstraint> composites() const;
    std::size_t primitive_count() const;

    /// Whitens, samples and projects against the current model and stores the
    /// result as the current view. Throws StaleModel when constraints have
    /// been added since the last fit.
    ProjectionView compute_view(std::optional<ViewMethod> method = std::nullopt);
    std::optional<ProjectionView> current_view() const;

    RowSet select(const RowSet& rows, SelectionMode mode = SelectionMode::replace);
    RowSet selection() const;
    SelectionStats selection_stats(const std::optional<RowSet>& rows = std::nullopt) const;

    /// Adds a composite constraint; `rows` defaults to the current selection
    /// for cluster and 2-D constraints. A 2-D constraint uses the current
    /// view's directions pulled back to data space. Returns the number of new
    /// primitives. Throws Conflict while a fit is running.
    std::size_t add_constraint(CompositeVariant variant, const std::optional<RowSet>& rows = std::nullopt);

    /// Starts a background fit. Throws Conflict if one is running. With no
    /// constraints this is a no-op.
    void start_fit();
    FitProgress fit_progress() const;
    void cancel_fit();
    void wait_for_fit();

    std::uint64_t save_grouping(const std::string& name, const RowSet& rows);
    /// Saved groupings first, then class-label values, then "column:value"
    /// for any extra label column. Throws NotFound.
    RowSet load_grouping(const std::string& name) const;
    std::map<std::string, Grouping> groupings() const;

    /// Self-contained archive: source CSV, settings, constraints, model
    /// parameters, groupings, selection and current view. Timings and the
    /// session id are left out so replays compare equal.
    Json export_archive() const;
    static std::unique_ptr<Session> import_archive(std::uint64_t id, const Json& archive);

    /// Least-squares data-space directions reproducing the view coordinates,
    /// orthonormalized.
    static Matrix pull_back(const Matrix& data, const ProjectionView& view);

    /// Seed of the background sample for a model version.
    std::uint64_t sample_seed(std::uint64_t model_version) const;

private:
    void run_fit(std::stop_token stop, BackgroundModel model);
    void install_model(BackgroundModel model);
    void ensure_idle() const;

    const std::uint64_t id_;
    const std::string csv_;
    const SessionSettings settings_;
    const DataMatrix data_;

    mutable std::mutex mutex_;
    std::condition_variable fit_done_;
    ConstraintSet constraints_;
    std::shared_ptr<const BackgroundModel> model_;
    std::uint64_t model_version_ = 0;
    std::optional<ProjectionView> view_;
    RowSet selection_;
    std::map<std::string, Grouping> groupings_;
    FitProgress progress_;

    std::jthread worker_;  // last: joined before the members it touches go away
};

/// Registry of live sessions with sequential ids.
class SessionStore {
public:
    std::shared_ptr<Session> create(std::string csv, SessionSettings settings);
    std::shared_ptr<Session> import_archive(const Json& archive);
    std::shared_ptr<Session> get(std::uint64_t id) const;
    bool erase(std::uint64_t id);
    std::vector<std::uint64_t> ids() const;

private:
    mutable std::mutex mutex_;
    std::uint64_t next_id_ = 1;
    std::map<std::uint64_t, std::shared_ptr<Session>> sessions_;
};

Json to_json(const FitConfig& config);
FitConfig fit_config_from_json(const Json& j, FitConfig base = {});
Json to_json(const SelectionStats& stats);
Json to_json(const Ellipse& e);
Json to_json(const FitProgress& p);
/// Flat record set with row ids, data and background coordinates and the
/// selection flag; scores and directions alongside.
Json view_to_json(const ProjectionView& view, const DataMatrix& data, const RowSet& selection,
                  std::uint64_t current_model_version);

}  // namespace mxe
