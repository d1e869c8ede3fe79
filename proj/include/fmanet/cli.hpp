#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fmanet/config.hpp"
#include "fmanet/fmanet.hpp"
#include "fmanet/losses.hpp"
#include "fmanet/synthdata.hpp"

namespace fmanet::cli {

enum class Stage { PretrainD, Joint };

struct Dataset {
    std::vector<ManifestEntry> manifest;
    std::vector<SynthSample> samples;
};

Dataset load_dataset(const std::string& data_dir);

struct TrainOptions {
    bool zero_flows = false;  // conventional-filtering ablation arm
};

// Runs one training stage and writes checkpoint + loss CSV + config snapshot
// into out_dir. Returns the per-iteration loss rows.
std::vector<LossBreakdown> train_stage(FmaNet& net, const Dataset& ds, const Config& cfg,
                                       Stage stage, const std::string& out_dir,
                                       const TrainOptions& opts = {});

struct EvalRow {
    std::string id;       // sample id, "bin" or "all"
    std::string network;  // d | r | sharp_r | sharp_in | bicubic
    double bin_lo = 0.0, bin_hi = 0.0;
    double psnr = 0.0, ssim = 0.0, tof = 0.0;
};

// Per-sample metrics for Net^D reconstructions and Net^R restorations, plus
// sharpness and bicubic baselines, with per-bin and overall aggregates.
// oracle=true scores the ground truth against itself (pipeline sanity).
std::vector<EvalRow> evaluate(FmaNet& net, const Dataset& ds, const Config& cfg, bool oracle,
                              const TrainOptions& opts = {});

void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows);

// command entry points (exceptions map to exit codes in the launcher)
void cmd_gen(const std::string& config_path, const std::string& out_dir,
             std::optional<uint64_t> seed);
void cmd_train(const std::string& config_path, const std::string& data_dir,
               const std::string& out_dir, Stage stage, std::optional<uint64_t> seed);
void cmd_eval(const std::string& ckpt_base, const std::string& data_dir,
              const std::string& out_dir, bool oracle);
void cmd_ablate_fgdf(const std::string& config_path, const std::string& data_dir,
                     const std::string& out_dir, std::optional<uint64_t> seed);
void cmd_dump(const std::string& ckpt_base, int sample_id, const std::string& data_dir,
              const std::string& out_dir);

}  // namespace fmanet::cli
