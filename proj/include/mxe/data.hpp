#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace mxe {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowId = std::int64_t;

/// Sorted, duplicate-free list of row indices into a DataMatrix.
class RowSet {
public:
    RowSet() = default;
    /// Sorts and deduplicates.
    explicit RowSet(std::vector<std::size_t> indices);

    static RowSet all(std::size_t n);

    std::span<const std::size_t> indices() const { return indices_; }
    std::size_t size() const { return indices_.size(); }
    bool empty() const { return indices_.empty(); }
    bool contains(std::size_t row) const;
    std::size_t max_index() const { return indices_.empty() ? 0 : indices_.back(); }

    auto begin() const { return indices_.begin(); }
    auto end() const { return indices_.end(); }

    friend bool operator==(const RowSet&, const RowSet&) = default;

private:
    std::vector<std::size_t> indices_;
};

using RowSetPtr = std::shared_ptr<const RowSet>;

/// Per-column affine map applied at ingestion: value = (raw - offset) / scale.
struct Standardization {
    Vector offset;
    Vector scale;
    bool enabled = false;
};

/// Observed n x d dataset. Values are finite; row ids are unique.
class DataMatrix {
public:
    DataMatrix(Matrix values, std::vector<std::string> column_names, std::vector<RowId> row_ids = {},
               std::vector<std::string> class_labels = {});

    std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(values_.cols()); }

    const Matrix& values() const { return values_; }
    /// Values before standardization (equal to values() when not standardized).
    const Matrix& raw() const { return raw_; }
    const std::vector<std::string>& column_names() const { return column_names_; }
    const std::vector<RowId>& row_ids() const { return row_ids_; }
    const std::vector<std::string>& class_labels() const { return class_labels_; }
    bool has_labels() const { return !class_labels_.empty(); }
    const Standardization& standardization() const { return standardization_; }

    /// Extra categorical columns beyond the primary class label, keyed by column name.
    const std::map<std::string, std::vector<std::string>>& extra_labels() const { return extra_labels_; }
    void set_extra_labels(std::string column, std::vector<std::string> labels);

    /// Shift to zero mean, scale to unit (population) variance per column.
    /// Constant columns are only centered.
    DataMatrix standardized() const;

    std::size_t index_of(RowId id) const;
    RowSet rows_from_ids(std::span<const RowId> ids) const;
    std::vector<RowId> ids_of(const RowSet& rows) const;

    /// Covariance of the full data (1/n normalization), cached at construction.
    const Matrix& covariance() const { return covariance_; }
    /// Standard deviation of X w over all rows.
    double directional_std(const Vector& w) const;

private:
    Matrix values_;
    Matrix raw_;
    std::vector<std::string> column_names_;
    std::vector<RowId> row_ids_;
    std::vector<std::string> class_labels_;
    std::map<std::string, std::vector<std::string>> extra_labels_;
    std::map<RowId, std::size_t> id_index_;
    Standardization standardization_;
    Matrix covariance_;
};

struct CsvOptions {
    /// Columns holding categorical labels; the first one becomes the class label.
    std::vector<std::string> label_columns;
    /// Optional integer column used as row identifier. Defaults to 0-based row order.
    std::optional<std::string> id_column;
    bool standardize = true;
    char delimiter = ',';
};

/// Parses CSV text: header row first, every non-label cell a decimal real.
/// Throws ParseError naming the offending line and column.
DataMatrix read_csv(std::string_view text, const CsvOptions& options = {});
DataMatrix read_csv_file(const std::string& path, const CsvOptions& options = {});

/// Writes raw values (plus class labels under `label_header` when present).
std::string write_csv(const DataMatrix& data, const std::string& label_header = "label");

}  // namespace mxe
