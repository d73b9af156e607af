#include "dcan/kernels.hpp"

#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dcan::kernels {

namespace {

inline double elem(std::span<const double> x, Trans t, std::size_t rows_stored_cols, std::size_t i,
                   std::size_t j, std::size_t ld_t) {
    // x is logically [i][j]; stored row-major either as-is (width rows_stored_cols) or transposed (width ld_t).
    return t == Trans::no ? x[i * rows_stored_cols + j] : x[j * ld_t + i];
}

inline double sq_dist_row(const double* p, const double* c, std::size_t dim) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
        const double d = p[j] - c[j];
        s += d * d;
    }
    return s;
}

inline void nearest_row(std::size_t i, std::span<const double> points, std::span<const double> centroids,
                        std::size_t dim, std::size_t k, std::span<std::size_t> assignment,
                        std::span<double> sq_dist) {
    const double* p = points.data() + i * dim;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_dist_row(p, centroids.data() + c * dim, dim);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    assignment[i] = best;
    sq_dist[i] = best_d;
}

// Row i of C: accumulates op(A)[i,:] * op(B) in p-major order, which keeps the
// inner loop contiguous over C's row and B's row when B is not transposed.
inline void gemm_row(std::size_t i, Trans ta, Trans tb, GemmShape s, const double* a, const double* b, double* c,
                     bool accumulate) {
    double* crow = c + i * s.n;
    if (!accumulate) {
        for (std::size_t j = 0; j < s.n; ++j) crow[j] = 0.0;
    }
    for (std::size_t p = 0; p < s.k; ++p) {
        const double av = ta == Trans::no ? a[i * s.k + p] : a[p * s.m + i];
        if (av == 0.0) continue;
        if (tb == Trans::no) {
            const double* brow = b + p * s.n;
            for (std::size_t j = 0; j < s.n; ++j) crow[j] += av * brow[j];
        } else {
            for (std::size_t j = 0; j < s.n; ++j) crow[j] += av * b[j * s.k + p];
        }
    }
}

}  // namespace

namespace serial {

void gemm(Trans ta, Trans tb, GemmShape s, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate) {
    for (std::size_t i = 0; i < s.m; ++i) {
        for (std::size_t j = 0; j < s.n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < s.k; ++p) {
                acc += elem(a, ta, s.k, i, p, s.m) * elem(b, tb, s.n, p, j, s.k);
            }
            c[i * s.n + j] = accumulate ? c[i * s.n + j] + acc : acc;
        }
    }
}

void assign_nearest(std::span<const double> points, std::span<const double> centroids, std::size_t dim,
                    std::span<std::size_t> assignment, std::span<double> sq_dist) {
    const std::size_t n = points.size() / dim;
    const std::size_t k = centroids.size() / dim;
    for (std::size_t i = 0; i < n; ++i) nearest_row(i, points, centroids, dim, k, assignment, sq_dist);
}

}  // namespace serial

namespace omp {

void gemm(Trans ta, Trans tb, GemmShape s, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate) {
    const auto m = static_cast<long long>(s.m);
    const bool parallel = s.m * s.n * s.k >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (parallel)
    for (long long i = 0; i < m; ++i) {
        gemm_row(static_cast<std::size_t>(i), ta, tb, s, a.data(), b.data(), c.data(), accumulate);
    }
}

void assign_nearest(std::span<const double> points, std::span<const double> centroids, std::size_t dim,
                    std::span<std::size_t> assignment, std::span<double> sq_dist) {
    const std::size_t n = points.size() / dim;
    const std::size_t k = centroids.size() / dim;
    const bool parallel = n * k * dim >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (parallel)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        nearest_row(static_cast<std::size_t>(i), points, centroids, dim, k, assignment, sq_dist);
    }
}

}  // namespace omp

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace dcan::kernels
