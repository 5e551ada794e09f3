#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mxe/constraints.hpp"

namespace mxe {

enum class Generator { x5, clustered, adversarial3, intro3d };

std::string_view to_string(Generator g);
Generator generator_from_string(std::string_view name);

struct SyntheticSpec {
    Generator generator = Generator::x5;
    std::size_t n = 2048;
    std::size_t d = 16;
    std::size_t k = 4;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Reference five-dimensional example, 1000 rows.
///
/// Dims 1-3 hold clusters A, B, C, D (250 rows each) centred at the origin
/// and the three unit vectors, so every pair of these dims shows A on top of
/// one other cluster. Dims 4-5 hold E at (1,0), F at (0,1) and G at the
/// origin: rows of B, C and D fall in E or F (equally likely) with
/// probability 0.75 and in G otherwise; all of A is in G. Within-cluster
/// std is 0.07 in dims 1-3 and 0.1 in dims 4-5, which keeps A's separation
/// mostly in dims 1-3. Class label is the A-D cluster; the extra label
/// column "cluster45" holds E/F/G. Values are raw (not standardized).
DataMatrix gen_x5(std::uint64_t seed);

inline constexpr double kX5Spread = 0.07;
inline constexpr double kX5Spread45 = 0.1;

/// k Gaussian blobs with unit within-cluster std, centroids drawn from
/// N(0, 9 I), sizes n/k with the remainder spread one row at a time.
DataMatrix gen_clustered(std::size_t n, std::size_t d, std::size_t k, std::uint64_t seed);

struct Adversarial3 {
    DataMatrix data;
    std::vector<PrimitiveConstraint> case_a;
    std::vector<PrimitiveConstraint> case_b;
};

/// X = ((1,0),(0,1),(0,0)). case_a: linear and quadratic constraints along
/// e1 then e2 on rows {0,2}; case_b: case_a plus the same on rows {1,2}.
Adversarial3 gen_adversarial3();

/// 150 points in 3-D: blobs of 50 at (0,0,0) and (3,0,0), blobs of 25 at
/// (1.5, 2.6, 0.75) and (1.5, 2.6, -0.75), std 0.5 (0.25 in the third dim
/// for the two small blobs, so they split only along it).
DataMatrix gen_intro3d(std::uint64_t seed);

DataMatrix generate(const SyntheticSpec& spec);

}  // namespace mxe
