#include "mxe/partition.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "mxe/errors.hpp"

namespace mxe {

RowPartition build_partition(std::size_t n, const std::vector<PrimitiveConstraint>& constraints) {
    constexpr auto none = std::numeric_limits<std::size_t>::max();

    // Distinct row sets, in first-use order. Primitives of one composite share
    // a row-set pointer, so the pointer check catches most repeats.
    std::vector<const RowSet*> distinct;
    std::vector<std::size_t> set_of_constraint(constraints.size());
    for (std::size_t t = 0; t < constraints.size(); ++t) {
        const RowSet* rows = constraints[t].rows.get();
        if (!rows || rows->empty()) throw InvalidConstraint("constraint row set is empty");
        if (rows->max_index() >= n) throw InvalidConstraint("constraint row index out of range");
        std::size_t found = none;
        for (std::size_t s = distinct.size(); s-- > 0;) {
            if (distinct[s] == rows || *distinct[s] == *rows) {
                found = s;
                break;
            }
        }
        if (found == none) {
            found = distinct.size();
            distinct.push_back(rows);
        }
        set_of_constraint[t] = found;
    }

    // Refine: every row set splits each class it touches into inside/outside.
    std::vector<std::size_t> label(n, 0);
    std::size_t next = 1;
    std::vector<std::size_t> remap;
    for (const RowSet* rows : distinct) {
        remap.assign(next, none);
        for (std::size_t i : *rows) {
            auto& r = remap[label[i]];
            if (r == none) r = next++;
            label[i] = r;
        }
    }

    RowPartition p;
    p.class_of_row.resize(n);
    std::vector<std::size_t> dense(next, none);
    for (std::size_t i = 0; i < n; ++i) {
        auto& c = dense[label[i]];
        if (c == none) {
            c = p.class_sizes.size();
            p.class_sizes.push_back(0);
        }
        p.class_of_row[i] = c;
        ++p.class_sizes[c];
    }

    std::vector<std::vector<std::size_t>> classes_of_set(distinct.size());
    for (std::size_t s = 0; s < distinct.size(); ++s) {
        auto& cls = classes_of_set[s];
        for (std::size_t i : *distinct[s]) cls.push_back(p.class_of_row[i]);
        std::sort(cls.begin(), cls.end());
        cls.erase(std::unique(cls.begin(), cls.end()), cls.end());
    }
    p.class_constraint_sets.assign(p.class_sizes.size(), {});
    for (std::size_t t = 0; t < constraints.size(); ++t) {
        for (std::size_t c : classes_of_set[set_of_constraint[t]]) p.class_constraint_sets[c].push_back(t);
    }
    return p;
}

}  // namespace mxe
