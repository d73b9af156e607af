#include "dcan/checkpoint.hpp"

#include <fstream>

#include "dcan/errors.hpp"

namespace dcan {

Checkpoint make_checkpoint(const ModelConfig& model, const TrainConfig& train, TrainResult result) {
    Checkpoint ck;
    ck.model = model;
    ck.train = train;
    ck.params = std::move(result.params);
    ck.dicts = std::move(result.dicts);
    ck.optimizer = std::move(result.optimizer);
    ck.rng_state = std::move(result.rng_state);
    ck.history = std::move(result.history);
    ck.best_epoch = result.best_epoch;
    return ck;
}

nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["config"] = {{"model", ck.model.to_json()}, {"train", ck.train.to_json()}};
    j["params"] = params_to_json(ck.params);
    j["dicts"] = ck.dicts.to_json();
    j["dict_source"] = {{"path", ck.dict_source ? nlohmann::json(*ck.dict_source) : nlohmann::json(nullptr)},
                        {"hash", ck.dict_source_hash ? nlohmann::json(*ck.dict_source_hash) : nlohmann::json(nullptr)}};
    j["optimizer"] = ck.optimizer.to_json();
    j["rng_state"] = ck.rng_state;
    j["history"] = history_to_json(ck.history);
    j["best_epoch"] = ck.best_epoch;
    return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    Checkpoint ck;
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat) {
            throw FormatError("unsupported checkpoint format '" + j.at("format").get<std::string>() + "'");
        }
        ck.model = ModelConfig::from_json(j.at("config").at("model"));
        ck.train = TrainConfig::from_json(j.at("config").at("train"));
        ck.params.use_bacl = ck.model.use_bacl;
        ck.params.use_facl = ck.model.use_facl;
        params_from_json(ck.params, j.at("params"));
        ck.dicts = DictionarySet::from_json(j.at("dicts"));
        const auto& src = j.at("dict_source");
        if (!src.at("path").is_null()) ck.dict_source = src.at("path").get<std::string>();
        if (!src.at("hash").is_null()) ck.dict_source_hash = src.at("hash").get<std::string>();
        ck.optimizer = AdamState::from_json(j.at("optimizer"));
        ck.rng_state = j.at("rng_state").get<std::string>();
        for (const auto& r : j.at("history")) {
            EpochRecord rec;
            rec.epoch = r.at("epoch").get<std::size_t>();
            rec.train_loss = r.at("train_loss").get<double>();
            if (!r.at("val_loss").is_null()) rec.val_loss = r.at("val_loss").get<double>();
            rec.lr = r.at("lr").get<double>();
            ck.history.push_back(rec);
        }
        ck.best_epoch = j.at("best_epoch").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed checkpoint: ") + e.what());
    }
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write checkpoint '" + path.string() + "'");
    out << checkpoint_to_json(ck).dump() << '\n';
    if (!out) throw ConfigError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PrerequisiteError("checkpoint '" + path.string() + "' not found; run `dcan train` first");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace dcan
