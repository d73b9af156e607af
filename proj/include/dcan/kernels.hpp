#pragma once

#include <cstddef>
#include <span>

// Hot loops used by the tape and by k-means. The omp:: variants are what the
// library calls; serial:: variants are straightforward reference loops kept
// for equivalence tests and the benchmark. Each omp:: kernel partitions work
// by output row, so results do not depend on the thread count.
namespace dcan::kernels {

enum class Trans { no, yes };

struct GemmShape {
    std::size_t m;
    std::size_t n;
    std::size_t k;
};

// C[m x n] = op(A) * op(B) (+ C when accumulate). op(A) is m x k, op(B) is k x n.
// A is stored m x k (or k x m when transposed), B is k x n (or n x k).
namespace serial {
void gemm(Trans ta, Trans tb, GemmShape s, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate);

// For each of `points` rows (width dim) writes the index of the nearest centroid
// (squared Euclidean, ties to the lowest index) and the squared distance.
void assign_nearest(std::span<const double> points, std::span<const double> centroids, std::size_t dim,
                    std::span<std::size_t> assignment, std::span<double> sq_dist);
}  // namespace serial

namespace omp {
void gemm(Trans ta, Trans tb, GemmShape s, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate);

void assign_nearest(std::span<const double> points, std::span<const double> centroids, std::size_t dim,
                    std::span<std::size_t> assignment, std::span<double> sq_dist);
}  // namespace omp

// Below this many multiply-adds the omp kernels run without spawning a team.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 15;

int max_threads();

}  // namespace dcan::kernels
