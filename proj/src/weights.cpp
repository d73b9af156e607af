#include "dcan/weights.hpp"

#include <cmath>

#include "dcan/errors.hpp"
#include "dcan/rng.hpp"

namespace dcan {

void ModelConfig::validate() const {
    if (d == 0 || heads == 0) throw ConfigError("model: d and heads must be positive");
    if (d % heads != 0) throw ConfigError("model: heads (" + std::to_string(heads) + ") must divide d (" +
                                          std::to_string(d) + ")");
    if (k_traits == 0) throw ConfigError("model: k_traits must be positive");
    if (dims.v == 0 || dims.a == 0 || dims.t == 0) throw ConfigError("model: feature dims must be positive");
}

nlohmann::json ModelConfig::to_json() const {
    return {{"dims", {{"v", dims.v}, {"a", dims.a}, {"t", dims.t}}},
            {"d", d},
            {"heads", heads},
            {"k_traits", k_traits},
            {"use_bacl", use_bacl},
            {"use_facl", use_facl},
            {"facl_residual", facl_residual}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.dims = {j.at("dims").at("v").get<std::size_t>(), j.at("dims").at("a").get<std::size_t>(),
                  j.at("dims").at("t").get<std::size_t>()};
        c.d = j.at("d").get<std::size_t>();
        c.heads = j.at("heads").get<std::size_t>();
        c.k_traits = j.at("k_traits").get<std::size_t>();
        c.use_bacl = j.at("use_bacl").get<bool>();
        c.use_facl = j.at("use_facl").get<bool>();
        c.facl_residual = j.value("facl_residual", false);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

std::uint64_t name_stream(const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : name) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

Tensor gaussian(std::uint64_t seed, const std::string& name, Shape shape, double stddev) {
    Rng rng(derive_seed(seed, name_stream(name)));
    Tensor t(std::move(shape));
    for (double& x : t.data()) x = stddev * rng.normal();
    return t;
}

Tensor matrix(std::uint64_t seed, const std::string& name, std::size_t rows, std::size_t cols) {
    return gaussian(seed, name, {rows, cols}, 1.0 / std::sqrt(static_cast<double>(rows)));
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const std::size_t d = cfg.d;
    ModelParams p;
    p.use_bacl = cfg.use_bacl;
    p.use_facl = cfg.use_facl;
    for (Modality m : kModalities) {
        const std::string tag(modality_name(m));
        const std::size_t i = ModelParams::idx(m);
        p.proj[i] = matrix(seed, "proj." + tag, cfg.dims.of(m), d);
        p.bacl[i].query = matrix(seed, "bacl." + tag + ".query", d, d);
        p.bacl[i].key = matrix(seed, "bacl." + tag + ".key", d, d);
        p.bacl[i].gamma = Tensor({1}, 0.0);
        FaclWeights<Tensor>& f = p.facl[i];
        const std::string fp = "facl." + tag + ".";
        f.query_g = matrix(seed, fp + "query_g", d, d);
        f.key_g = matrix(seed, fp + "key_g", d, d);
        f.query_d = matrix(seed, fp + "query_d", d, d);
        f.key_d = matrix(seed, fp + "key_d", d, d);
        f.out_g = matrix(seed, fp + "out_g", d, d);
        f.out_d = matrix(seed, fp + "out_d", d, d);
    }
    p.audio_attn = gaussian(seed, "audio_attn", {d}, 1.0 / std::sqrt(static_cast<double>(d)));
    p.fusion.query = matrix(seed, "fusion.query", d, d);
    p.fusion.key = matrix(seed, "fusion.key", d, d);
    p.fusion.value = matrix(seed, "fusion.value", d, d);
    p.fusion.output = matrix(seed, "fusion.output", d, d);
    p.head.hidden_w = matrix(seed, "head.hidden_w", d, d);
    p.head.hidden_b = Tensor({d}, 0.0);
    p.head.out_w = matrix(seed, "head.out_w", d, cfg.k_traits);
    p.head.out_b = Tensor({cfg.k_traits}, 0.0);
    return p;
}

ModelWeights<Var> bind(Tape& tape, const ModelParams& params) {
    ModelWeights<Var> w;
    w.use_bacl = params.use_bacl;
    w.use_facl = params.use_facl;
    std::vector<Var> leaves;
    params.visit([&](const std::string&, const Tensor& t) { leaves.push_back(tape.leaf(t)); });
    std::size_t next = 0;
    w.visit([&](const std::string&, Var& v) { v = leaves[next++]; });
    return w;
}

std::vector<std::string> param_names(const ModelParams& params) {
    std::vector<std::string> names;
    params.visit([&](const std::string& n, const Tensor&) { names.push_back(n); });
    return names;
}

std::size_t param_count(const ModelParams& params) {
    std::size_t n = 0;
    params.visit([&](const std::string&, const Tensor& t) { n += t.size(); });
    return n;
}

nlohmann::json params_to_json(const ModelParams& params) {
    nlohmann::json out = nlohmann::json::object();
    params.visit([&](const std::string& n, const Tensor& t) {
        out[n] = {{"shape", t.shape()}, {"data", t.values()}};
    });
    return out;
}

void params_from_json(ModelParams& params, const nlohmann::json& j) {
    params.visit([&](const std::string& n, Tensor& t) {
        if (!j.contains(n)) throw FormatError("checkpoint is missing parameter '" + n + "'");
        try {
            Tensor loaded(j.at(n).at("shape").get<Shape>(), j.at(n).at("data").get<std::vector<double>>());
            if (!t.empty() && loaded.shape() != t.shape()) {
                throw FormatError("parameter '" + n + "' has shape " + shape_string(loaded.shape()) +
                                  ", expected " + shape_string(t.shape()));
            }
            if (!loaded.all_finite()) throw FormatError("parameter '" + n + "' holds non-finite values");
            t = std::move(loaded);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("parameter '" + n + "': " + e.what());
        } catch (const DimensionError& e) {
            throw FormatError("parameter '" + n + "': " + e.what());
        }
    });
}

}  // namespace dcan
