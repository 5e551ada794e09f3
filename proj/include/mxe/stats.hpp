#pragma once

#include <map>
#include <string>
#include <vector>

#include "mxe/data.hpp"

namespace mxe {

struct AttributeStats {
    std::size_t column = 0;
    std::string name;
    double mean_selected = 0.0;
    double std_selected = 0.0;
    double mean_rest = 0.0;
    double std_rest = 0.0;
    /// |mean_sel - mean_rest| / pooled std + |log(std_sel / std_rest)|
    double score = 0.0;
};

struct SelectionStats {
    std::size_t count = 0;
    /// The selection covers every row; scores are all zero.
    bool rest_empty = false;
    /// Per attribute, in column order.
    std::vector<AttributeStats> attributes;
    /// Column indices by decreasing score (ties by column order).
    std::vector<std::size_t> ranking;
    /// Jaccard index of the selection against each class label value.
    std::map<std::string, double> jaccard;
};

/// Statistics on the raw (unstandardized) values. Standard deviations use
/// 1/n. Throws InvalidArgument for an empty selection.
SelectionStats selection_stats(const DataMatrix& data, const RowSet& rows);

/// Quantile of the chi-square distribution with two degrees of freedom.
double chi2_quantile_2dof(double level);

struct Ellipse {
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    /// Semi-axis lengths, major first.
    Eigen::Vector2d semi_axes = Eigen::Vector2d::Zero();
    /// Unit axis directions as columns, major first.
    Eigen::Matrix2d axes = Eigen::Matrix2d::Identity();
    /// Angle of the major axis from the x axis, radians in (-pi/2, pi/2].
    double angle = 0.0;
};

/// Confidence ellipse of 2-D points from their sample mean and sample
/// covariance (1/(m-1)). A degenerate covariance yields a zero minor axis.
Ellipse confidence_ellipse(const Matrix& points, double level = 0.95);

}  // namespace mxe
