#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dcan/tensor.hpp"
#include "json.hpp"

namespace dcan {

struct KMeansResult {
    Tensor centroids;                     // [k x d]
    std::vector<std::size_t> assignment;  // per point, nearest centroid
    // Sum of squared distances after every assignment step; non-increasing.
    std::vector<double> objective;
    std::size_t iterations = 0;
    bool converged = false;
};

// Lloyd's algorithm with k-means++ seeding and Euclidean distance. Stops at an
// assignment fixpoint or after max_iter rounds. Empty clusters keep their
// previous centroid. Throws ConfigError when points.rows() < k or k == 0.
KMeansResult kmeans(const Tensor& points, std::size_t k, std::uint64_t seed, std::size_t max_iter = 100);

// Front-door dictionaries of one modality.
struct FrontDoorDictionaries {
    Tensor mediator;  // [M x d]
    Tensor global;    // [N x d]

    nlohmann::json to_json() const;
    static FrontDoorDictionaries from_json(const nlohmann::json& j);
    friend bool operator==(const FrontDoorDictionaries&, const FrontDoorDictionaries&) = default;
};

// Mediator = k-means with k = M, global = k-means with k = N, on the training
// features [P x d]; the two runs use independent seeds derived from `seed`.
FrontDoorDictionaries build_frontdoor_dicts(const Tensor& train_feats, std::size_t mediator_size,
                                            std::size_t global_size, std::uint64_t seed,
                                            std::size_t max_iter = 100);

}  // namespace dcan
