#include "dcan/kmeans.hpp"

#include <algorithm>

#include "dcan/errors.hpp"
#include "dcan/kernels.hpp"
#include "dcan/rng.hpp"

namespace dcan {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

// k-means++: first centre uniform, then proportional to squared distance from
// the nearest chosen centre. When every remaining point coincides with a
// centre, falls back to the lowest-index unchosen point.
Tensor seed_centroids(const Tensor& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.rows(), dim = points.cols();
    Tensor centroids({k, dim});
    std::vector<bool> chosen(n, false);
    std::vector<double> best(n, INFINITY);
    std::size_t pick = rng.index(n);
    for (std::size_t c = 0; c < k; ++c) {
        chosen[pick] = true;
        std::copy_n(points.row(pick).begin(), dim, centroids.row(c).begin());
        if (c + 1 == k) break;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            best[i] = std::min(best[i], sq_dist(points.row(i), centroids.row(c)));
            if (!chosen[i]) total += best[i];
        }
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n;
            std::size_t last = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (chosen[i] || best[i] == 0.0) continue;
                last = i;
                acc += best[i];
                if (acc > target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) pick = last;
        } else {
            pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
        }
    }
    return centroids;
}

}  // namespace

KMeansResult kmeans(const Tensor& points, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
    if (points.rank() != 2) throw DimensionError("kmeans needs a [P x d] point matrix");
    const std::size_t n = points.rows(), dim = points.cols();
    if (k == 0 || n < k) {
        throw ConfigError("kmeans needs 1 <= k <= points (k=" + std::to_string(k) + ", points=" + std::to_string(n) + ")");
    }
    Rng rng(derive_seed(seed, 0x6b6d));
    KMeansResult res;
    res.centroids = seed_centroids(points, k, rng);
    res.assignment.assign(n, 0);
    std::vector<std::size_t> next(n);
    std::vector<double> dist(n);
    std::vector<double> sums(k * dim);
    std::vector<std::size_t> sizes(k);

    for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iter, 1); ++iter) {
        kernels::omp::assign_nearest(points.data(), res.centroids.data(), dim, next, dist);
        double objective = 0.0;
        for (double d : dist) objective += d;
        res.objective.push_back(objective);
        res.iterations = iter + 1;
        if (iter > 0 && next == res.assignment) {
            res.converged = true;
            break;
        }
        res.assignment = next;

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(sizes.begin(), sizes.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = res.assignment[i];
            ++sizes[c];
            const auto p = points.row(i);
            for (std::size_t j = 0; j < dim; ++j) sums[c * dim + j] += p[j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] == 0) continue;
            for (std::size_t j = 0; j < dim; ++j) res.centroids(c, j) = sums[c * dim + j] / static_cast<double>(sizes[c]);
        }
    }
    return res;
}

nlohmann::json FrontDoorDictionaries::to_json() const {
    auto rows = [](const Tensor& t) {
        nlohmann::json arr = nlohmann::json::array();
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const auto row = t.row(r);
            arr.push_back(std::vector<double>(row.begin(), row.end()));
        }
        return arr;
    };
    return {{"mediator", rows(mediator)}, {"global", rows(global)}};
}

FrontDoorDictionaries FrontDoorDictionaries::from_json(const nlohmann::json& j) {
    auto parse = [](const nlohmann::json& arr, const char* name) {
        std::vector<Tensor> rows;
        try {
            for (const auto& r : arr) rows.push_back(Tensor::vector(r.get<std::vector<double>>()));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("malformed ") + name + " dictionary: " + e.what());
        }
        if (rows.empty()) throw FormatError(std::string(name) + " dictionary is empty");
        return stack_rows(rows);
    };
    return {parse(j.at("mediator"), "mediator"), parse(j.at("global"), "global")};
}

FrontDoorDictionaries build_frontdoor_dicts(const Tensor& train_feats, std::size_t mediator_size,
                                            std::size_t global_size, std::uint64_t seed, std::size_t max_iter) {
    if (train_feats.rank() != 2 || train_feats.rows() < std::max(mediator_size, global_size)) {
        throw ConfigError("front-door dictionaries need at least max(M, N) training points");
    }
    FrontDoorDictionaries d;
    d.mediator = kmeans(train_feats, mediator_size, derive_seed(seed, 0x6d6564), max_iter).centroids;
    d.global = kmeans(train_feats, global_size, derive_seed(seed, 0x676c6f), max_iter).centroids;
    return d;
}

}  // namespace dcan
