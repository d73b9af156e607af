#include <cstdlib>
#include <iostream>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "dcan/commands.hpp"
#include "dcan/errors.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kPrerequisite = 3 };

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("dcan");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("DCAN_LOG")) {
        const auto level = spdlog::level::from_str(env);
        if (level == spdlog::level::off && std::string(env) != "off") {
            spdlog::warn("DCAN_LOG='{}' is not a log level; using info", env);
        } else {
            spdlog::set_level(level);
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"Causally debiased multimodal trait regression: data generation, dictionaries, training, evaluation"};
    app.footer(dcan::run_config_reference() +
               "\nEnvironment: DCAN_LOG=trace|debug|info|warn|error|off (default info)\n"
               "Exit codes: 0 success, 1 failure, 2 configuration error, 3 missing prerequisite artifact\n");
    app.require_subcommand(1);

    dcan::CommandOptions opts;
    std::string config, out, dataset, checkpoint;
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "Run configuration file (TOML subset)")->check(CLI::ExistingFile);
        sub->add_option("--out", out, "Output directory (overrides 'out')");
        sub->add_option("--seed", seed, "Run seed (overrides 'seed')");
        sub->add_option("--dataset", dataset, "Dataset file (overrides [data] path)");
    };

    auto* gen = app.add_subcommand("generate", "Write a synthetic dataset from [scm]");
    auto* dicts = app.add_subcommand("build-dicts", "Split the dataset and build dictionaries from the train split");
    auto* trn = app.add_subcommand("train", "Train from the dictionary artifact and write a checkpoint");
    auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
    auto* abl = app.add_subcommand("ablate", "Train and evaluate the four ablation variants");
    auto* ood = app.add_subcommand("ood", "Hold out demographic groups and report per-trait accuracy");
    for (CLI::App* sub : {gen, dicts, trn, evl, abl, ood}) add_common(sub);
    evl->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate (default <out>/checkpoint.json)");

    CLI11_PARSE(app, argc, argv);

    CLI::App* sub = app.get_subcommands().front();
    if (!config.empty()) opts.config = config;
    if (!out.empty()) opts.out = out;
    if (sub->count("--seed") > 0) opts.seed = seed;
    if (!dataset.empty()) opts.dataset = dataset;
    if (!checkpoint.empty()) opts.checkpoint = checkpoint;

    try {
        const dcan::RunConfig cfg = dcan::resolve_run_config(opts);
        dcan::CommandResult res;
        const std::string name = sub->get_name();
        if (name == "generate") res = dcan::cmd_generate(cfg);
        else if (name == "build-dicts") res = dcan::cmd_build_dicts(cfg);
        else if (name == "train") res = dcan::cmd_train(cfg);
        else if (name == "eval") res = dcan::cmd_eval(cfg, opts.checkpoint);
        else if (name == "ablate") res = dcan::cmd_ablate(cfg);
        else res = dcan::cmd_ood(cfg);
        std::cout << res.summary;
        if (!res.summary.empty() && res.summary.back() != '\n') std::cout << '\n';
        for (const auto& p : res.artifacts) spdlog::info("wrote {}", p.string());
        return kOk;
    } catch (const dcan::PrerequisiteError& e) {
        spdlog::error("{}", e.what());
        return kPrerequisite;
    } catch (const dcan::ConfigError& e) {
        spdlog::error("{}", e.what());
        return kConfig;
    } catch (const dcan::FormatError& e) {
        spdlog::error("{}", e.what());
        return kConfig;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kFailure;
    }
}
