#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "fmanet/cli.hpp"
#include "fmanet/common.hpp"

using namespace fmanet;

int main(int argc, char** argv) {
    CLI::App app{"FGDF video restoration toolkit: data generation, two-stage training, "
                 "evaluation, FGDF ablation and kernel/flow dumps"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, stage = "pretrain-d", ckpt;
    std::optional<uint64_t> seed;
    int sample_id = 0;
    bool oracle = false;

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    gen->add_option("--config", config_path, "config file")->required();
    gen->add_option("--out", out_dir, "output dataset directory")->required();
    gen->add_option("--seed", seed, "seed override");

    auto* train = app.add_subcommand("train", "run one training stage");
    train->add_option("--config", config_path, "config file")->required();
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--out", out_dir, "run directory")->required();
    train->add_option("--stage", stage, "pretrain-d | joint")->required();
    train->add_option("--seed", seed, "seed override");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("checkpoint", ckpt, "checkpoint base path (without .bin)")->required();
    eval->add_option("--data", data_dir, "dataset directory")->required();
    eval->add_option("--out", out_dir, "output directory for metrics.csv")->required();
    eval->add_flag("--oracle", oracle, "score ground truth against itself (pipeline sanity)");

    auto* ablate = app.add_subcommand("ablate-fgdf", "FGDF vs conventional filtering sweep");
    ablate->add_option("--config", config_path, "config file")->required();
    ablate->add_option("--data", data_dir, "dataset directory")->required();
    ablate->add_option("--out", out_dir, "output directory")->required();
    ablate->add_option("--seed", seed, "seed override");

    auto* dump = app.add_subcommand("dump", "dump kernels, flows and warped features");
    dump->add_option("checkpoint", ckpt, "checkpoint base path")->required();
    dump->add_option("sample", sample_id, "sample id")->required();
    dump->add_option("--data", data_dir, "dataset directory")->required();
    dump->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) cli::cmd_gen(config_path, out_dir, seed);
        else if (train->parsed()) {
            cli::Stage st;
            if (stage == "pretrain-d") st = cli::Stage::PretrainD;
            else if (stage == "joint") st = cli::Stage::Joint;
            else throw ConfigError("unknown stage '" + stage + "' (use pretrain-d or joint)");
            cli::cmd_train(config_path, data_dir, out_dir, st, seed);
        } else if (eval->parsed()) cli::cmd_eval(ckpt, data_dir, out_dir, oracle);
        else if (ablate->parsed()) cli::cmd_ablate_fgdf(config_path, data_dir, out_dir, seed);
        else if (dump->parsed()) cli::cmd_dump(ckpt, sample_id, data_dir, out_dir);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const CheckpointError& e) {
        std::fprintf(stderr, "checkpoint error: %s\n", e.what());
        return 3;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
