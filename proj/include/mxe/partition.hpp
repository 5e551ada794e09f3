#pragma once

#include <cstddef>
#include <vector>

#include "mxe/constraints.hpp"

namespace mxe {

/// Rows with identical covering-constraint sets share a class. Classes are
/// numbered by their first row.
struct RowPartition {
    std::vector<std::size_t> class_of_row;
    std::vector<std::size_t> class_sizes;
    /// Per class, sorted indices of the primitive constraints covering it.
    std::vector<std::vector<std::size_t>> class_constraint_sets;

    std::size_t rows() const { return class_of_row.size(); }
    std::size_t classes() const { return class_sizes.size(); }
};

RowPartition build_partition(std::size_t n, const std::vector<PrimitiveConstraint>& constraints);

}  // namespace mxe
