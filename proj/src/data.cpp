#include "mxe/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mxe/errors.hpp"

namespace mxe {

RowSet::RowSet(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
}

RowSet RowSet::all(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return RowSet(std::move(idx));
}

bool RowSet::contains(std::size_t row) const {
    return std::binary_search(indices_.begin(), indices_.end(), row);
}

DataMatrix::DataMatrix(Matrix values, std::vector<std::string> column_names, std::vector<RowId> row_ids,
                       std::vector<std::string> class_labels)
    : values_(std::move(values)),
      column_names_(std::move(column_names)),
      row_ids_(std::move(row_ids)),
      class_labels_(std::move(class_labels)) {
    const auto n = static_cast<std::size_t>(values_.rows());
    const auto d = static_cast<std::size_t>(values_.cols());
    if (n < 1 || d < 1) throw InvalidArgument("dataset needs at least one row and one column");
    if (!values_.allFinite()) throw InvalidArgument("dataset contains non-finite values");
    if (column_names_.empty()) {
        for (std::size_t j = 0; j < d; ++j) column_names_.push_back("x" + std::to_string(j + 1));
    }
    if (column_names_.size() != d) throw InvalidArgument("column name count does not match column count");
    if (row_ids_.empty()) {
        row_ids_.resize(n);
        std::iota(row_ids_.begin(), row_ids_.end(), RowId{0});
    }
    if (row_ids_.size() != n) throw InvalidArgument("row id count does not match row count");
    if (!class_labels_.empty() && class_labels_.size() != n)
        throw InvalidArgument("class label count does not match row count");
    for (std::size_t i = 0; i < n; ++i) {
        if (!id_index_.emplace(row_ids_[i], i).second)
            throw InvalidArgument("duplicate row id " + std::to_string(row_ids_[i]));
    }
    raw_ = values_;
    standardization_.offset = Vector::Zero(static_cast<Eigen::Index>(d));
    standardization_.scale = Vector::Ones(static_cast<Eigen::Index>(d));

    const Matrix centered = values_.rowwise() - values_.colwise().mean();
    covariance_ = centered.transpose() * centered / static_cast<double>(n);
}

void DataMatrix::set_extra_labels(std::string column, std::vector<std::string> labels) {
    if (labels.size() != rows()) throw InvalidArgument("label count does not match row count");
    extra_labels_[std::move(column)] = std::move(labels);
}

DataMatrix DataMatrix::standardized() const {
    const Vector mean = raw_.colwise().mean().transpose();
    const Matrix centered = raw_.rowwise() - mean.transpose();
    Vector scale = (centered.array().square().colwise().sum() / static_cast<double>(rows())).sqrt().transpose();
    for (Eigen::Index j = 0; j < scale.size(); ++j) {
        if (!(scale(j) > 0.0)) scale(j) = 1.0;
    }
    Matrix scaled = centered.array().rowwise() / scale.transpose().array();
    DataMatrix out(std::move(scaled), column_names_, row_ids_, class_labels_);
    out.raw_ = raw_;
    out.extra_labels_ = extra_labels_;
    out.standardization_ = Standardization{mean, scale, true};
    return out;
}

std::size_t DataMatrix::index_of(RowId id) const {
    const auto it = id_index_.find(id);
    if (it == id_index_.end()) throw NotFound("unknown row id " + std::to_string(id));
    return it->second;
}

RowSet DataMatrix::rows_from_ids(std::span<const RowId> ids) const {
    std::vector<std::size_t> idx;
    idx.reserve(ids.size());
    for (RowId id : ids) idx.push_back(index_of(id));
    return RowSet(std::move(idx));
}

std::vector<RowId> DataMatrix::ids_of(const RowSet& rows) const {
    std::vector<RowId> ids;
    ids.reserve(rows.size());
    for (std::size_t i : rows) ids.push_back(row_ids_.at(i));
    return ids;
}

double DataMatrix::directional_std(const Vector& w) const {
    return std::sqrt(std::max(0.0, w.dot(covariance_ * w)));
}

namespace {

std::vector<std::string_view> split_line(std::string_view line, char delim) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    bool quoted = false;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i < line.size() && line[i] == '"') quoted = !quoted;
        if (i == line.size() || (line[i] == delim && !quoted)) {
            auto cell = line.substr(start, i - start);
            while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
            while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
                cell.remove_suffix(1);
            if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
            cells.push_back(cell);
            start = i + 1;
        }
    }
    return cells;
}

}  // namespace

DataMatrix read_csv(std::string_view text, const CsvOptions& options) {
    std::vector<std::string_view> lines;
    {
        std::size_t start = 0;
        while (start < text.size()) {
            auto end = text.find('\n', start);
            if (end == std::string_view::npos) end = text.size();
            lines.push_back(text.substr(start, end - start));
            start = end + 1;
        }
    }
    std::size_t first = 0;
    auto blank = [](std::string_view l) { return l.find_first_not_of(" \t\r") == std::string_view::npos; };
    while (first < lines.size() && blank(lines[first])) ++first;
    if (first == lines.size()) throw ParseError(1, 1, "empty input");

    const auto header = split_line(lines[first], options.delimiter);
    const std::size_t width = header.size();

    enum class Role { value, label, id };
    std::vector<Role> roles(width, Role::value);
    std::vector<std::string> value_names;
    std::vector<std::size_t> label_pos(options.label_columns.size(), width);
    std::size_t id_pos = width;
    for (std::size_t j = 0; j < width; ++j) {
        const std::string name(header[j]);
        const auto lab = std::find(options.label_columns.begin(), options.label_columns.end(), name);
        if (lab != options.label_columns.end()) {
            roles[j] = Role::label;
            label_pos[static_cast<std::size_t>(lab - options.label_columns.begin())] = j;
        } else if (options.id_column && *options.id_column == name) {
            roles[j] = Role::id;
            id_pos = j;
        } else {
            value_names.push_back(name);
        }
    }
    for (std::size_t l = 0; l < label_pos.size(); ++l) {
        if (label_pos[l] == width) throw ParseError(first + 1, 1, "label column '" + options.label_columns[l] + "' not in header");
    }
    if (options.id_column && id_pos == width)
        throw ParseError(first + 1, 1, "id column '" + *options.id_column + "' not in header");
    if (value_names.empty()) throw ParseError(first + 1, 1, "no numeric columns");

    std::vector<double> cells;
    std::vector<std::vector<std::string>> labels(label_pos.size());
    std::vector<RowId> ids;
    std::size_t n = 0;
    for (std::size_t li = first + 1; li < lines.size(); ++li) {
        if (blank(lines[li])) continue;
        const auto row = split_line(lines[li], options.delimiter);
        if (row.size() != width)
            throw ParseError(li + 1, std::min(row.size(), width) + 1,
                             "expected " + std::to_string(width) + " cells, found " + std::to_string(row.size()));
        for (std::size_t j = 0; j < width; ++j) {
            const auto cell = row[j];
            if (roles[j] == Role::label) {
                const auto l = static_cast<std::size_t>(std::find(label_pos.begin(), label_pos.end(), j) - label_pos.begin());
                labels[l].emplace_back(cell);
                continue;
            }
            if (roles[j] == Role::id) {
                RowId id{};
                const auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), id);
                if (ec != std::errc{} || p != cell.data() + cell.size())
                    throw ParseError(li + 1, j + 1, "row id '" + std::string(cell) + "' is not an integer");
                ids.push_back(id);
                continue;
            }
            double v{};
            const char* b = cell.data();
            const char* e = cell.data() + cell.size();
            if (b != e && *b == '+') ++b;
            const auto [p, ec] = std::from_chars(b, e, v);
            if (cell.empty() || ec != std::errc{} || p != e || !std::isfinite(v))
                throw ParseError(li + 1, j + 1, "cannot parse '" + std::string(cell) + "' as a finite real");
            cells.push_back(v);
        }
        ++n;
    }
    if (n == 0) throw ParseError(first + 2, 1, "no data rows");

    const auto d = value_names.size();
    Matrix values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cells[i * d + j];

    std::vector<std::string> primary = labels.empty() ? std::vector<std::string>{} : labels.front();
    DataMatrix data(std::move(values), std::move(value_names), std::move(ids), std::move(primary));
    for (std::size_t l = 1; l < labels.size(); ++l) data.set_extra_labels(options.label_columns[l], std::move(labels[l]));
    return options.standardize ? data.standardized() : data;
}

DataMatrix read_csv_file(const std::string& path, const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFound("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return read_csv(buf.str(), options);
}

std::string write_csv(const DataMatrix& data, const std::string& label_header) {
    std::ostringstream out;
    out.precision(17);
    const auto& names = data.column_names();
    for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
    if (data.has_labels()) out << ',' << label_header;
    for (const auto& [name, _] : data.extra_labels()) out << ',' << name;
    out << '\n';
    const Matrix& raw = data.raw();
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
        for (Eigen::Index j = 0; j < raw.cols(); ++j) out << (j ? "," : "") << raw(i, j);
        if (data.has_labels()) out << ',' << data.class_labels()[static_cast<std::size_t>(i)];
        for (const auto& [_, labels] : data.extra_labels()) out << ',' << labels[static_cast<std::size_t>(i)];
        out << '\n';
    }
    return out.str();
}

}  // namespace mxe
