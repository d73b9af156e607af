#include "dcan/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dcan/bacl.hpp"
#include "dcan/errors.hpp"
#include "dcan/facl.hpp"
#include "dcan/kernels.hpp"
#include "dcan/ops.hpp"
#include "dcan/rng.hpp"

namespace dcan {

void DictConfig::validate() const {
    if (text_size == 0) throw ConfigError("dicts: text_size must be positive");
    if (demographic_cap == 0) throw ConfigError("dicts: demographic_cap must be positive");
    if (mediator_size == 0 || global_size == 0) throw ConfigError("dicts: mediator/global sizes must be positive");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("dicts: beta must lie in [0,1]");
    if (text_threshold && !(*text_threshold >= 0.0)) throw ConfigError("dicts: threshold must be non-negative");
    if (kmeans_iter == 0) throw ConfigError("dicts: kmeans_iter must be positive");
}

nlohmann::json DictConfig::to_json() const {
    nlohmann::json j = {{"text_size", text_size},          {"demographic_cap", demographic_cap},
                        {"mediator_size", mediator_size},  {"global_size", global_size},
                        {"beta", beta},                    {"kmeans_iter", kmeans_iter},
                        {"embedding_seed", embedding_seed}};
    j["text_threshold"] = text_threshold ? nlohmann::json(*text_threshold) : nlohmann::json(nullptr);
    return j;
}

DictConfig DictConfig::from_json(const nlohmann::json& j) {
    DictConfig c;
    try {
        c.text_size = j.at("text_size").get<std::size_t>();
        c.demographic_cap = j.at("demographic_cap").get<std::size_t>();
        c.mediator_size = j.at("mediator_size").get<std::size_t>();
        c.global_size = j.at("global_size").get<std::size_t>();
        c.beta = j.at("beta").get<double>();
        c.kmeans_iter = j.at("kmeans_iter").get<std::size_t>();
        c.embedding_seed = j.at("embedding_seed").get<std::uint64_t>();
        if (j.contains("text_threshold") && !j.at("text_threshold").is_null()) {
            c.text_threshold = j.at("text_threshold").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("dictionary config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json DictionarySet::to_json() const {
    nlohmann::json j;
    j["config"] = config.to_json();
    j["train_fingerprint"] = train_fingerprint;
    for (Modality m : kModalities) {
        const std::string tag(modality_name(m));
        j["bacl"][tag] = back(m).to_json();
        j["facl"][tag] = front(m).to_json();
    }
    return j;
}

DictionarySet DictionarySet::from_json(const nlohmann::json& j) {
    DictionarySet s;
    try {
        s.config = DictConfig::from_json(j.at("config"));
        s.train_fingerprint = j.at("train_fingerprint").get<std::string>();
        for (Modality m : kModalities) {
            const std::string tag(modality_name(m));
            s.bacl[static_cast<std::size_t>(m)] = ConfounderDictionary::from_json(j.at("bacl").at(tag));
            s.facl[static_cast<std::size_t>(m)] = FrontDoorDictionaries::from_json(j.at("facl").at(tag));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("dictionary set: ") + e.what());
    }
    return s;
}

std::string sample_fingerprint(const Dataset& ds, std::span<const std::size_t> indices) {
    std::vector<std::string> ids;
    ids.reserve(indices.size());
    for (std::size_t i : indices) ids.push_back(ds.samples.at(i).id);
    std::sort(ids.begin(), ids.end());
    std::uint64_t h = 1469598103934665603ULL;
    for (const std::string& id : ids) {
        for (unsigned char ch : id) {
            h ^= ch;
            h *= 1099511628211ULL;
        }
        h ^= 0xff;
        h *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%zu:%016llx", ids.size(), static_cast<unsigned long long>(h));
    return buf;
}

namespace {

Tensor matmul_values(const Tensor& a, const Tensor& b) {
    Tensor c({a.rows(), b.cols()});
    kernels::omp::gemm(kernels::Trans::no, kernels::Trans::no, {a.rows(), b.cols(), a.cols()}, a.data(), b.data(),
                       c.data(), false);
    return c;
}

Tensor gather_features(const Dataset& ds, std::span<const std::size_t> indices, Modality m) {
    const std::size_t dm = ds.header.dims.of(m);
    Tensor out({indices.size(), dm});
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const Tensor& f = ds.samples.at(indices[r]).features(m);
        std::copy(f.data().begin(), f.data().end(), out.row(r).begin());
    }
    return out;
}

bool has_tokens(const Dataset& ds, std::span<const std::size_t> indices) {
    return std::any_of(indices.begin(), indices.end(),
                       [&](std::size_t i) { return ds.samples.at(i).tokens.has_value(); });
}

}  // namespace

DictionarySet build_dictionaries(const Dataset& ds, std::span<const std::size_t> train, const ModelParams& init,
                                 const DictConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (train.empty()) throw ConfigError("cannot build dictionaries from an empty training split");
    const std::size_t d = init.proj[0].cols();
    DictionarySet s;
    s.config = cfg;
    s.train_fingerprint = sample_fingerprint(ds, train);
    const Cardinalities& cards = ds.header.cards;

    s.back(Modality::visual) = ConfounderDictionary::demographic(Modality::visual, cards, d, cfg.beta, cfg.demographic_cap);
    s.back(Modality::audio) = ConfounderDictionary::demographic(Modality::audio, cards, d, cfg.beta, cfg.demographic_cap);
    if (has_tokens(ds, train)) {
        Corpus corpus;
        corpus.reserve(train.size());
        for (std::size_t i : train) {
            const Sample& smp = ds.samples.at(i);
            corpus.push_back({smp.tokens.value_or(std::vector<std::string>{}), demographic_labels(smp.demo, cards)});
        }
        const std::vector<int> labels = all_demographic_labels(cards);
        const std::uint64_t eseed = cfg.embedding_seed;
        s.back(Modality::text) = build_text_dictionary(
            corpus, labels, [&](const std::string& w) { return hash_embedding(w, d, eseed); }, cfg.text_threshold,
            cfg.text_size);
    } else {
        s.back(Modality::text) = ConfounderDictionary::demographic(Modality::text, cards, d, cfg.beta, cfg.demographic_cap);
    }

    s.facl = build_frontdoor_set(ds, train, init, cfg, seed);
    return s;
}

std::array<FrontDoorDictionaries, 3> build_frontdoor_set(const Dataset& ds, std::span<const std::size_t> train,
                                                         const ModelParams& params, const DictConfig& cfg,
                                                         std::uint64_t seed) {
    const std::size_t m_size = std::min(cfg.mediator_size, train.size());
    const std::size_t n_size = std::min(cfg.global_size, train.size());
    std::array<FrontDoorDictionaries, 3> out;
    for (Modality m : kModalities) {
        const std::size_t i = ModelParams::idx(m);
        const Tensor projected = matmul_values(gather_features(ds, train, m), params.proj[i]);
        out[i] = build_frontdoor_dicts(projected, m_size, n_size, derive_seed(seed, 0xfac1 + i), cfg.kmeans_iter);
    }
    return out;
}

Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
    if (indices.empty()) throw ContractError("empty batch");
    Batch b;
    for (Modality m : kModalities) b.inputs[static_cast<std::size_t>(m)] = gather_features(ds, indices, m);
    const std::size_t k = ds.header.k_traits;
    b.labels = Tensor({indices.size(), k});
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const Sample& s = ds.samples.at(indices[r]);
        std::copy(s.label.data().begin(), s.label.data().end(), b.labels.row(r).begin());
        b.demo.push_back(s.demo);
    }
    return b;
}

Var project(Var input, Var proj) { return matmul(input, proj); }

Var fuse(Var u_v, Var u_a, Var u_t, const FusionWeights<Var>& w, std::size_t heads) {
    const Shape& s = u_v.shape();
    if (s.size() != 2 || u_a.shape() != s || u_t.shape() != s) {
        throw DimensionError("fuse: modality features must share shape [B x d]");
    }
    const std::size_t batch = s[0];
    const std::size_t d = s[1];
    if (heads == 0 || d % heads != 0) throw DimensionError("fuse: heads must divide d");
    const std::size_t dh = d / heads;

    const Var s_vt = mul(u_t, cosine_similarity(u_v, u_t));
    const Var s_va = mul(u_a, cosine_similarity(u_v, u_a));
    const Var parts[] = {u_v, s_vt, s_va};
    const Var tokens = interleave_rows(parts);  // [B*3 x d]

    const Var q = matmul(tokens, w.query);
    const Var k = matmul(tokens, w.key);
    const Var v = matmul(tokens, w.value);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Var> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const Var qh = reshape(slice_cols(q, h * dh, dh), {batch, 3, dh});
        const Var kh = reshape(slice_cols(k, h * dh, dh), {batch, 3, dh});
        const Var vh = reshape(slice_cols(v, h * dh, dh), {batch, 3, dh});
        const Var attn = softmax(scale(bmm(qh, transpose(kh)), inv_sqrt));
        outs.push_back(reshape(bmm(attn, vh), {batch * 3, dh}));
    }
    const Var merged = heads == 1 ? outs.front() : concat_cols(outs);
    return add(tokens, matmul(merged, w.output));
}

Var predict(Var tokens, const HeadWeights<Var>& w) {
    const Var pooled = group_mean_rows(tokens, 3);
    const Var hidden = relu(add(matmul(pooled, w.hidden_w), w.hidden_b));
    return sigmoid(add(matmul(hidden, w.out_w), w.out_b));
}

Var forward(Tape& tape, const ModelWeights<Var>& w, const ModelConfig& cfg, const DictionarySet& dicts,
            const Batch& batch) {
    Var u[3];
    for (Modality m : kModalities) {
        const std::size_t i = ModelParams::idx(m);
        Var x = project(tape.constant(batch.input(m)), w.proj[i]);
        if (cfg.use_bacl) x = backdoor_adjust(x, dicts.back(m), w.bacl[i]);
        if (cfg.use_facl) x = frontdoor_adjust(x, dicts.front(m), w.facl[i], cfg.facl_residual);
        u[i] = x;
    }
    const Var tokens = fuse(u[ModelParams::idx(Modality::visual)], u[ModelParams::idx(Modality::audio)],
                            u[ModelParams::idx(Modality::text)], w.fusion, cfg.heads);
    return predict(tokens, w.head);
}

Var mse_loss(Var pred, const Tensor& labels) {
    if (pred.shape() != labels.shape() || labels.rank() != 2) {
        throw DimensionError("loss: predictions " + shape_string(pred.shape()) + " vs labels " +
                             shape_string(labels.shape()));
    }
    const Var diff = sub(pred, pred.tape()->constant(labels));
    return scale(squared_norm(diff), 1.0 / static_cast<double>(labels.rows()));
}

Var l2_penalty(const ModelWeights<Var>& w) {
    Var total;
    w.visit([&](const std::string&, const Var& v) {
        const Var n = squared_norm(v);
        total = total.valid() ? add(total, n) : n;
    });
    return total;
}

Var loss(Var pred, const Tensor& labels, const ModelWeights<Var>& w, double lambda) {
    const Var data = mse_loss(pred, labels);
    if (lambda == 0.0) return data;
    return add(data, scale(l2_penalty(w), lambda));
}

Tensor infer(const ModelParams& params, const ModelConfig& cfg, const DictionarySet& dicts, const Batch& batch) {
    Tape tape;
    const ModelWeights<Var> w = bind(tape, params);
    return forward(tape, w, cfg, dicts, batch).value();
}

void update_dictionaries(DictionarySet& dicts, const ModelParams& params, const Batch& batch) {
    for (Modality m : kModalities) {
        ConfounderDictionary& dict = dicts.back(m);
        if (!dict.is_demographic()) continue;
        std::vector<std::size_t> rows;
        rows.reserve(batch.size());
        for (const Demographics& demo : batch.demo) rows.push_back(dict.row_of(demo));
        const Tensor x = matmul_values(batch.input(m), params.proj[ModelParams::idx(m)]);
        const auto protos = m == Modality::audio ? batch_prototype_audio(x, rows, params.audio_attn)
                                                 : batch_prototype_visual(x, rows);
        for (const auto& [row, proto] : protos) dict.ema_update(row, proto.data());
    }
}

}  // namespace dcan
