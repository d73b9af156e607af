#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dcan/bacl.hpp"
#include "dcan/data.hpp"
#include "dcan/facl.hpp"
#include "json.hpp"

namespace dcan {

struct ModelConfig {
    FeatureDims dims;
    std::size_t d = 32;  // unified latent width
    std::size_t heads = 4;
    std::size_t k_traits = 5;
    bool use_bacl = true;
    bool use_facl = true;
    bool facl_residual = false;

    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

template <class T>
struct FusionWeights {
    T query;
    T key;
    T value;
    T output;

    template <class F>
    void visit(F&& f) {
        f("query", query);
        f("key", key);
        f("value", value);
        f("output", output);
    }
};

template <class T>
struct HeadWeights {
    T hidden_w;  // [d x d]
    T hidden_b;  // [d]
    T out_w;     // [d x K]
    T out_b;     // [K]

    template <class F>
    void visit(F&& f) {
        f("hidden_w", hidden_w);
        f("hidden_b", hidden_b);
        f("out_w", out_w);
        f("out_b", out_b);
    }
};

// Every learnable tensor of the network. T is Tensor for stored parameters and
// Var for a forward pass bound to a tape. visit() enumerates, in a fixed order,
// only the tensors the enabled modules use; that enumeration defines the
// checkpoint contents, the L2 term and the optimizer state layout.
template <class T>
struct ModelWeights {
    bool use_bacl = true;
    bool use_facl = true;

    T proj[3];  // [d_m x d], indexed by Modality
    BaclWeights<T> bacl[3];
    FaclWeights<T> facl[3];
    T audio_attn;  // [d], pooling weights for audio prototypes
    FusionWeights<T> fusion;
    HeadWeights<T> head;

    template <class F>
    void visit(F&& f) {
        for (Modality m : kModalities) f("proj." + std::string(modality_name(m)), proj[idx(m)]);
        if (use_bacl) {
            for (Modality m : kModalities) {
                const std::string p = "bacl." + std::string(modality_name(m)) + ".";
                bacl[idx(m)].visit([&](const char* n, T& t) { f(p + n, t); });
            }
            f(std::string("audio_attn"), audio_attn);
        }
        if (use_facl) {
            for (Modality m : kModalities) {
                const std::string p = "facl." + std::string(modality_name(m)) + ".";
                facl[idx(m)].visit([&](const char* n, T& t) { f(p + n, t); });
            }
        }
        fusion.visit([&](const char* n, T& t) { f("fusion." + std::string(n), t); });
        head.visit([&](const char* n, T& t) { f("head." + std::string(n), t); });
    }
    template <class F>
    void visit(F&& f) const {
        const_cast<ModelWeights&>(*this).visit([&](const std::string& n, T& t) { f(n, static_cast<const T&>(t)); });
    }

    static constexpr std::size_t idx(Modality m) { return static_cast<std::size_t>(m); }
};

using ModelParams = ModelWeights<Tensor>;

// Deterministic initialization. Each tensor draws from its own stream keyed by
// name, so ablation variants share identical values for the modules they keep.
// Matrices ~ N(0, 1/fan_in); gamma and biases start at 0.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Leaves on `tape` for every visited tensor.
ModelWeights<Var> bind(Tape& tape, const ModelParams& params);

std::vector<std::string> param_names(const ModelParams& params);
std::size_t param_count(const ModelParams& params);

nlohmann::json params_to_json(const ModelParams& params);
// Fills the visited tensors of `params` (flags must already be set).
void params_from_json(ModelParams& params, const nlohmann::json& j);

}  // namespace dcan
