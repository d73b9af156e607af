#include "dcan/train.hpp"

#include <algorithm>
#include <numeric>

#include <spdlog/spdlog.h>

#include "dcan/errors.hpp"
#include "dcan/rng.hpp"

namespace dcan {

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
    if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
    if (!(weight_decay >= 0.0) || !(l2 >= 0.0)) throw ConfigError("train: weight_decay and l2 must be non-negative");
    if (epochs == 0) throw ConfigError("train: epochs must be positive");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"batch_size", batch_size}, {"lr", lr},     {"weight_decay", weight_decay}, {"l2", l2},
            {"epochs", epochs},         {"seed", seed}, {"keep_best", keep_best},
            {"facl_rebuild_interval", facl_rebuild_interval}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.batch_size = j.at("batch_size").get<std::size_t>();
        c.lr = j.at("lr").get<double>();
        c.weight_decay = j.at("weight_decay").get<double>();
        c.l2 = j.at("l2").get<double>();
        c.epochs = j.at("epochs").get<std::size_t>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.keep_best = j.value("keep_best", true);
        c.facl_rebuild_interval = j.value("facl_rebuild_interval", std::size_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json history_to_json(const std::vector<EpochRecord>& history) {
    nlohmann::json out = nlohmann::json::array();
    for (const EpochRecord& r : history) {
        out.push_back({{"epoch", r.epoch},
                       {"train_loss", r.train_loss},
                       {"val_loss", r.val_loss ? nlohmann::json(*r.val_loss) : nlohmann::json(nullptr)},
                       {"lr", r.lr}});
    }
    return out;
}

Tensor predict_samples(const Dataset& ds, std::span<const std::size_t> indices, const ModelParams& params,
                       const ModelConfig& model, const DictionarySet& dicts, std::size_t chunk) {
    if (indices.empty()) return Tensor();
    const std::size_t k = model.k_traits;
    Tensor out({indices.size(), k});
    for (std::size_t start = 0; start < indices.size(); start += chunk) {
        const std::size_t n = std::min(chunk, indices.size() - start);
        const Batch b = make_batch(ds, indices.subspan(start, n));
        const Tensor y = infer(params, model, dicts, b);
        std::copy(y.data().begin(), y.data().end(), out.data().begin() + static_cast<long>(start * k));
    }
    return out;
}

double mse_on(const Dataset& ds, std::span<const std::size_t> indices, const ModelParams& params,
              const ModelConfig& model, const DictionarySet& dicts) {
    if (indices.empty()) throw ContractError("mse over an empty sample set");
    const Tensor pred = predict_samples(ds, indices, params, model, dicts);
    double total = 0.0;
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const Tensor& y = ds.samples[indices[r]].label;
        for (std::size_t j = 0; j < y.size(); ++j) {
            const double e = pred(r, j) - y[j];
            total += e * e;
        }
    }
    return total / static_cast<double>(indices.size());
}

TrainResult train(const Dataset& ds, const Split& split, const ModelConfig& model, const TrainConfig& cfg,
                  DictionarySet dicts) {
    cfg.validate();
    model.validate();
    if (split.train.empty()) throw ConfigError("train split is empty");
    if (model.k_traits != ds.header.k_traits) throw DimensionError("model k_traits does not match the dataset");
    if (dicts.train_fingerprint != sample_fingerprint(ds, split.train)) {
        throw LeakageError("dictionaries were not built from this training split (fingerprint " +
                           dicts.train_fingerprint + ", expected " + sample_fingerprint(ds, split.train) + ")");
    }

    TrainResult res;
    res.params = init_params(model, cfg.seed);
    res.dicts = std::move(dicts);
    Rng rng(derive_seed(cfg.seed, 0x7a1));

    std::vector<std::size_t> order = split.train;
    const std::size_t n = order.size();
    const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = steps_per_epoch * cfg.epochs;

    std::vector<Tensor*> slots;
    res.params.visit([&](const std::string&, Tensor& t) { slots.push_back(&t); });

    std::optional<double> best_val;
    ModelParams best_params;
    DictionarySet best_dicts;
    AdamState best_opt;
    std::size_t step = 0;
    std::vector<Tensor> grads(slots.size());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (model.use_facl && cfg.facl_rebuild_interval > 0 && epoch > 0 && epoch % cfg.facl_rebuild_interval == 0) {
            res.dicts.facl = build_frontdoor_set(ds, split.train, res.params, res.dicts.config,
                                                 derive_seed(cfg.seed, 0xfac0 + epoch));
        }
        rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        double lr = cfg.lr;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t b = std::min(cfg.batch_size, n - start);
            const Batch batch = make_batch(ds, std::span<const std::size_t>(order).subspan(start, b));
            if (model.use_bacl) update_dictionaries(res.dicts, res.params, batch);

            Tape tape;
            const ModelWeights<Var> w = bind(tape, res.params);
            const Var pred = forward(tape, w, model, res.dicts, batch);
            const Var objective = loss(pred, batch.labels, w, cfg.l2);
            const Gradients g = tape.grad(objective);
            std::size_t i = 0;
            w.visit([&](const std::string&, const Var& v) { grads[i++] = g.of(v); });

            lr = cosine_lr(step, total_steps, cfg.lr);
            adamw_step(slots, grads, res.optimizer, lr, cfg.weight_decay);
            loss_sum += objective.value()[0];
            ++step;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(steps_per_epoch);
        rec.lr = lr;
        if (!split.val.empty()) rec.val_loss = mse_on(ds, split.val, res.params, model, res.dicts);
        spdlog::debug("epoch {} train {:.6f} val {}", epoch, rec.train_loss,
                      rec.val_loss ? std::to_string(*rec.val_loss) : "n/a");
        res.history.push_back(rec);

        if (cfg.keep_best && rec.val_loss && (!best_val || *rec.val_loss < *best_val)) {
            best_val = rec.val_loss;
            best_params = res.params;
            best_dicts = res.dicts;
            best_opt = res.optimizer;
            res.best_epoch = epoch;
        }
    }
    if (best_val) {
        res.params = std::move(best_params);
        res.dicts = std::move(best_dicts);
        res.optimizer = std::move(best_opt);
    } else {
        res.best_epoch = cfg.epochs - 1;
    }
    res.rng_state = rng.state();
    return res;
}

}  // namespace dcan
