#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "mxe/model.hpp"

namespace mxe {

/// Data mapped through the per-class symmetric inverse square root of the
/// background covariance.
struct WhitenedMatrix {
    Matrix values;
    std::uint64_t source_model_version = 0;
};

/// Magnitude cap on a deviation divided by the square root of a (floored) variance.
inline constexpr double kWhitenClip = 1e6;

/// Per-class transform y = U D^{1/2} U' (x - m) with Sigma^{-1} = U D U'.
/// Throws StaleModel while the model is being fitted.
WhitenedMatrix whiten(const Matrix& data, const BackgroundModel& model, std::uint64_t model_version = 0);

/// Row i drawn from N(m_i, Sigma_i) of its class; deterministic in `seed`.
Matrix sample_background(const BackgroundModel& model, std::uint64_t seed);

enum class ViewMethod { pca, ica };

std::string_view to_string(ViewMethod method);
ViewMethod view_method_from_string(std::string_view name);

struct ProjectionView {
    ViewMethod method = ViewMethod::pca;
    /// Two orthonormal directions in whitened space, as columns.
    Matrix directions;
    /// All computed component scores, ordered by decreasing |score|.
    std::vector<double> scores;
    /// Component variances (PCA) in the same order as scores; empty for ICA.
    std::vector<double> variances;
    Matrix data_points;
    Matrix background_points;
    std::uint64_t model_version = 0;
    /// ICA stopped at its iteration cap.
    bool not_converged = false;
    std::size_t iterations = 0;
};

/// (sigma^2 - log sigma^2 - 1) / 2
double pca_score(double variance);

/// E[log cosh(z)] for z ~ N(0, 1), by adaptive Simpson quadrature.
double gaussian_logcosh_mean();

/// Numerically stable log(cosh(x)).
double log_cosh(double x);

/// Principal components of the (centered) whitened data scored by their
/// variance gap from unity; the two largest scores become the directions.
ProjectionView pca_view(const WhitenedMatrix& whitened);

struct IcaOptions {
    std::uint64_t seed = 0;
    /// 0 selects min(d, 20).
    std::size_t n_components = 0;
    std::size_t max_iterations = 200;
    double tolerance = 1e-6;
};

/// Symmetric FastICA with G(u) = log cosh(u). Component score is
/// mean(log cosh(s)) - E[log cosh(nu)] for the unit-variance source s.
ProjectionView ica_view(const WhitenedMatrix& whitened, const IcaOptions& options = {});

/// points x [w1 w2]
Matrix project(const Matrix& points, const ProjectionView& view);

}  // namespace mxe
