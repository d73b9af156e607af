#include "dcan/commands.hpp"

#include "dcan/checkpoint.hpp"
#include "dcan/errors.hpp"
#include "dcan/manifest.hpp"

namespace dcan {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig resolve_run_config(const CommandOptions& opts) {
    RunConfig cfg = opts.config ? load_run_config(*opts.config) : RunConfig{};
    if (opts.seed) {
        cfg.seed = opts.seed;
        if (cfg.scm) cfg.scm->seed = *opts.seed;
    }
    if (opts.out) cfg.out_dir = *opts.out;
    if (opts.dataset) cfg.dataset_path = opts.dataset->string();
    cfg.validate();
    return cfg;
}

namespace {

inline constexpr const char* kDictsFormat = "dcan-dicts/1";

fs::path dataset_path(const RunConfig& cfg) {
    return cfg.dataset_path ? fs::path(*cfg.dataset_path) : cfg.out_dir / artifact::dataset;
}

Dataset require_dataset(const RunConfig& cfg) {
    const fs::path p = dataset_path(cfg);
    if (!fs::exists(p)) {
        throw PrerequisiteError("dataset '" + p.string() +
                                "' not found; run `dcan generate` first or pass --dataset / set [data] path");
    }
    return load_dataset(p);
}

json require_json(const fs::path& p, const std::string& step) {
    if (!fs::exists(p)) throw PrerequisiteError("'" + p.string() + "' not found; run `dcan " + step + "` first");
    try {
        return json::parse(read_file(p));
    } catch (const json::exception& e) {
        throw FormatError(p.string() + ": " + e.what());
    }
}

ModelConfig model_for(const RunConfig& cfg, const Dataset& ds) {
    ModelConfig m = cfg.model;
    m.dims = ds.header.dims;
    m.k_traits = ds.header.k_traits;
    m.validate();
    return m;
}

json split_to_json(const Split& s) {
    return {{"train", s.train},
            {"val", s.val},
            {"test", s.test},
            {"held_out_group", s.held_out_group ? json(*s.held_out_group) : json(nullptr)}};
}

Split split_from_json(const json& j, std::size_t n) {
    Split s;
    try {
        s.train = j.at("train").get<std::vector<std::size_t>>();
        s.val = j.at("val").get<std::vector<std::size_t>>();
        s.test = j.at("test").get<std::vector<std::size_t>>();
        if (!j.at("held_out_group").is_null()) s.held_out_group = j.at("held_out_group").get<int>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("split: ") + e.what());
    }
    for (const auto* part : {&s.train, &s.val, &s.test}) {
        for (std::size_t i : *part) {
            if (i >= n) throw FormatError("split index " + std::to_string(i) + " outside the dataset");
        }
    }
    return s;
}

// Writes `content`, validates it with `check`, and records it.
template <class Check>
void emit(CommandResult& res, Manifest& m, const fs::path& path, const std::string& content, Check check) {
    write_file(path, content);
    check(path);
    res.artifacts.push_back(path);
    m.outputs.push_back(artifact_ref(path));
}

void emit_json(CommandResult& res, Manifest& m, const fs::path& path, const json& j) {
    emit(res, m, path, j.dump(2) + "\n", [](const fs::path& p) {
        if (!json::accept(read_file(p))) throw FormatError("'" + p.string() + "' is not valid JSON");
    });
}

void emit_text(CommandResult& res, Manifest& m, const fs::path& path, const std::string& text) {
    emit(res, m, path, text, [&](const fs::path& p) {
        if (read_file(p) != text) throw Error("'" + p.string() + "' did not read back identically");
    });
}

void finish(CommandResult& res, const Manifest& m, const RunConfig& cfg) {
    const fs::path p = cfg.out_dir / (m.command + ".manifest.json");
    write_manifest(m, p);
    res.artifacts.push_back(p);
}

Manifest manifest_for(const std::string& command, const RunConfig& cfg) {
    Manifest m;
    m.command = command;
    m.config = cfg.to_json();
    m.seed = cfg.run_seed();
    return m;
}

}  // namespace

CommandResult cmd_generate(const RunConfig& cfg) {
    if (!cfg.scm) throw ConfigError("generate needs an [scm] section");
    cfg.scm->validate();
    Manifest m = manifest_for("generate", cfg);
    CommandResult res;
    const Dataset ds = generate_scm(*cfg.scm);
    const fs::path out = cfg.out_dir / artifact::dataset;
    emit(res, m, out, serialize_dataset(ds), [&](const fs::path& p) {
        if (!(load_dataset(p) == ds)) throw Error("'" + p.string() + "' did not read back identically");
    });
    finish(res, m, cfg);
    res.summary = "wrote " + std::to_string(ds.size()) + " samples to " + out.string();
    return res;
}

CommandResult cmd_build_dicts(const RunConfig& cfg) {
    const Dataset ds = require_dataset(cfg);
    Manifest m = manifest_for("build-dicts", cfg);
    m.inputs.push_back(artifact_ref(dataset_path(cfg)));
    const ModelConfig model = model_for(cfg, ds);
    const Split split = make_split(ds, cfg.split, cfg.run_seed());
    const DictionarySet dicts =
        build_dictionaries(ds, split.train, init_params(model, cfg.run_seed()), cfg.dicts, cfg.run_seed());

    json j;
    j["format"] = kDictsFormat;
    j["dataset_hash"] = m.inputs.front().hash;
    j["seed"] = cfg.run_seed();
    j["d"] = model.d;
    j["split"] = split_to_json(split);
    j["dicts"] = dicts.to_json();
    CommandResult res;
    const fs::path out = cfg.out_dir / artifact::dicts;
    emit(res, m, out, j.dump() + "\n", [](const fs::path& p) {
        (void)DictionarySet::from_json(json::parse(read_file(p)).at("dicts"));
    });
    finish(res, m, cfg);
    res.summary = "dictionaries from " + std::to_string(split.train.size()) + " training samples written to " +
                  out.string();
    return res;
}

CommandResult cmd_train(const RunConfig& cfg) {
    const fs::path dicts_path = cfg.out_dir / artifact::dicts;
    const json dj = require_json(dicts_path, "build-dicts");
    const Dataset ds = require_dataset(cfg);
    Manifest m = manifest_for("train", cfg);
    m.inputs.push_back(artifact_ref(dataset_path(cfg)));
    m.inputs.push_back(artifact_ref(dicts_path));
    if (dj.value("format", "") != kDictsFormat) throw FormatError(dicts_path.string() + ": not a dictionary artifact");
    if (dj.at("dataset_hash").get<std::string>() != m.inputs.front().hash) {
        throw PrerequisiteError("dataset changed since the dictionaries were built; rerun `dcan build-dicts`");
    }
    const ModelConfig model = model_for(cfg, ds);
    if (dj.at("d").get<std::size_t>() != model.d || dj.at("seed").get<std::uint64_t>() != cfg.run_seed()) {
        throw PrerequisiteError("dictionaries were built with a different seed or latent width; rerun `dcan build-dicts`");
    }
    const Split split = split_from_json(dj.at("split"), ds.size());
    DictionarySet dicts = DictionarySet::from_json(dj.at("dicts"));

    TrainConfig tc = cfg.train;
    tc.seed = cfg.run_seed();
    TrainResult trained = train(ds, split, model, tc, std::move(dicts));
    Checkpoint ck = make_checkpoint(model, tc, std::move(trained));
    // Relative to the checkpoint's directory, so the artifact does not depend on where the run lives.
    ck.dict_source = dicts_path.lexically_relative(cfg.out_dir).generic_string();
    ck.dict_source_hash = m.inputs.back().hash;

    CommandResult res;
    const fs::path out = cfg.out_dir / artifact::checkpoint;
    emit(res, m, out, checkpoint_to_json(ck).dump() + "\n", [](const fs::path& p) { (void)load_checkpoint(p); });
    finish(res, m, cfg);
    const EpochRecord& best = ck.history.at(ck.best_epoch);
    res.summary = "trained " + std::to_string(ck.history.size()) + " epochs; best epoch " +
                  std::to_string(ck.best_epoch) + " (train loss " + std::to_string(best.train_loss) +
                  (best.val_loss ? ", val mse " + std::to_string(*best.val_loss) : std::string()) + ")";
    return res;
}

CommandResult cmd_eval(const RunConfig& cfg, const std::optional<fs::path>& checkpoint) {
    const fs::path ck_path = checkpoint ? *checkpoint : cfg.out_dir / artifact::checkpoint;
    if (!fs::exists(ck_path)) {
        throw PrerequisiteError("checkpoint '" + ck_path.string() + "' not found; run `dcan train` first");
    }
    const Checkpoint ck = load_checkpoint(ck_path);
    if (!ck.dict_source) throw PrerequisiteError("checkpoint does not reference a dictionary artifact");
    const fs::path source = *ck.dict_source;
    const fs::path dicts_path = source.is_absolute() ? source : ck_path.parent_path() / source;
    const json dj = require_json(dicts_path, "build-dicts");
    if (file_hash(dicts_path) != ck.dict_source_hash.value_or("")) {
        throw PrerequisiteError("'" + dicts_path.string() + "' changed since training; rerun `dcan train`");
    }
    const Dataset ds = require_dataset(cfg);
    Manifest m = manifest_for("eval", cfg);
    m.inputs.push_back(artifact_ref(dataset_path(cfg)));
    m.inputs.push_back(artifact_ref(dicts_path));
    m.inputs.push_back(artifact_ref(ck_path));
    if (dj.at("dataset_hash").get<std::string>() != m.inputs.front().hash) {
        throw PrerequisiteError("dataset differs from the one the checkpoint was trained on");
    }
    const Split split = split_from_json(dj.at("split"), ds.size());
    if (split.test.empty()) throw ConfigError("the split has no test samples to evaluate");

    const Tensor pred = predict_samples(ds, split.test, ck.params, ck.model, ck.dicts);
    Tensor labels({split.test.size(), ck.model.k_traits});
    std::vector<Demographics> demo;
    for (std::size_t r = 0; r < split.test.size(); ++r) {
        const Sample& s = ds.samples[split.test[r]];
        for (std::size_t k = 0; k < ck.model.k_traits; ++k) labels(r, k) = s.label[k];
        demo.push_back(s.demo);
    }
    const FairnessReport report = evaluate_predictions(pred, labels, demo, ds.header.cards, cfg.tau);

    CommandResult res;
    emit_json(res, m, cfg.out_dir / artifact::report_json, report_to_json(report));
    emit_text(res, m, cfg.out_dir / artifact::report_text, report_table(report));
    emit_text(res, m, cfg.out_dir / artifact::report_csv, report_group_csv(report));
    finish(res, m, cfg);
    res.summary = report_table(report);
    return res;
}

CommandResult cmd_ablate(const RunConfig& cfg) {
    const Dataset ds = require_dataset(cfg);
    Manifest m = manifest_for("ablate", cfg);
    m.inputs.push_back(artifact_ref(dataset_path(cfg)));
    ExperimentConfig e = cfg.experiment();
    e.model = model_for(cfg, ds);
    const AblationTable table = run_ablation(ds, e);

    CommandResult res;
    emit_json(res, m, cfg.out_dir / artifact::ablation_json, ablation_to_json(table));
    const std::string text = ablation_table_text(table);
    emit_text(res, m, cfg.out_dir / artifact::ablation_text, text);
    finish(res, m, cfg);
    res.summary = text;
    return res;
}

CommandResult cmd_ood(const RunConfig& cfg) {
    const Dataset ds = require_dataset(cfg);
    Manifest m = manifest_for("ood", cfg);
    m.inputs.push_back(artifact_ref(dataset_path(cfg)));
    ExperimentConfig e = cfg.experiment();
    e.model = model_for(cfg, ds);
    std::vector<OodResult> results;
    for (SplitKind k : cfg.ood_strategies) {
        SplitStrategy s = cfg.split;
        s.kind = k;
        if (cfg.split.kind != k) s.held_out.reset();
        results.push_back(run_ood(ds, e, s));
    }

    CommandResult res;
    emit_json(res, m, cfg.out_dir / artifact::ood_json, ood_to_json(results));
    const std::string text = ood_table_text(results);
    emit_text(res, m, cfg.out_dir / artifact::ood_text, text);
    finish(res, m, cfg);
    res.summary = text;
    return res;
}

}  // namespace dcan
