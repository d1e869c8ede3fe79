#include "fmanet/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "fmanet/adam.hpp"
#include "fmanet/checkpoint.hpp"
#include "fmanet/common.hpp"
#include "fmanet/image_io.hpp"
#include "fmanet/metrics.hpp"
#include "fmanet/rng.hpp"
#include "fmanet/tensor_io.hpp"

namespace fmanet::cli {

namespace fs = std::filesystem;

namespace {

std::string fmtv(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// frame window centered at j with clamped indices
Tensor window(const Tensor& seq, int j, int T) {
    std::vector<int> d = seq.dims();
    Tensor out{d};
    const int64_t frame = seq.numel() / T;
    const int N = (T - 1) / 2;
    for (int t = 0; t < T; ++t) {
        const int src = std::clamp(j + t - N, 0, T - 1);
        std::copy(seq.data() + src * frame, seq.data() + (src + 1) * frame, out.data() + t * frame);
    }
    return out;
}

Tensor frame_of(const Tensor& seq, int j) {
    std::vector<int> d(seq.dims().begin() + 1, seq.dims().end());
    const int64_t frame = seq.numel() / seq.dim(0);
    Tensor out{d};
    std::copy(seq.data() + j * frame, seq.data() + (j + 1) * frame, out.data());
    return out;
}

LossInputs sample_inputs(ad::Tape& tape, const SynthSample& s, int T) {
    const int N = (T - 1) / 2;
    LossInputs in;
    in.X = tape.constant(s.X);
    in.Y = tape.constant(s.Y);
    in.Xc = tape.constant(frame_of(s.X, N));
    in.Yc = tape.constant(frame_of(s.Y, N));
    in.fgt = tape.constant(s.f_gt);
    in.XSharp = tape.constant(s.XSharp);
    return in;
}

double lr_at(const Config& cfg, int iter, int total) {
    // halved at 70%, 85% and 95% of the stage
    double lr = cfg.lr;
    const double frac = total > 0 ? static_cast<double>(iter) / total : 0.0;
    if (frac >= 0.70) lr *= 0.5;
    if (frac >= 0.85) lr *= 0.5;
    if (frac >= 0.95) lr *= 0.5;
    return lr;
}

void write_loss_csv(const std::string& path, const std::vector<LossBreakdown>& rows,
                    const std::vector<double>& lrs) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write loss csv: " + path);
    os << "iter,lr,recon,warp,flow,ta,coupled,total\n";
    for (size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        os << i << "," << fmtv(lrs[i]) << "," << fmtv(r.recon) << "," << fmtv(r.warp) << ","
           << fmtv(r.flow) << "," << fmtv(r.ta) << "," << fmtv(r.coupled) << "," << fmtv(r.total)
           << "\n";
    }
}

void write_run_files(const std::string& out_dir, const Config& cfg) {
    std::ofstream cf(out_dir + "/config.cfg");
    if (!cf) throw DataError("cannot write config snapshot: " + out_dir + "/config.cfg");
    cf << config_to_text(cfg);
    std::ofstream rf(out_dir + "/run.txt");
    rf << "tool=fmanet\nversion=0.1.0\n";
}

}  // namespace

Dataset load_dataset(const std::string& data_dir) {
    Dataset ds;
    ds.manifest = read_manifest(data_dir);
    if (ds.manifest.empty()) throw DataError("dataset is empty: " + data_dir);
    ds.samples.reserve(ds.manifest.size());
    for (const auto& e : ds.manifest) ds.samples.push_back(load_sample(data_dir + "/" + e.dir));
    return ds;
}

std::vector<LossBreakdown> train_stage(FmaNet& net, const Dataset& ds, const Config& cfg,
                                       Stage stage, const std::string& out_dir,
                                       const TrainOptions& opts) {
    fm_check(!ds.samples.empty(), "train_stage: empty dataset");
    const int iters = stage == Stage::PretrainD ? cfg.pretrain_iterations : cfg.iterations;
    const int T = cfg.T;
    ForwardOptions fwd;
    fwd.zero_flows = opts.zero_flows;

    AdamState adam;
    Rng picker(mix_seed(cfg.seed, stage == Stage::PretrainD ? 0xD0ULL : 0x10ULL));
    std::vector<LossBreakdown> rows;
    std::vector<double> lrs;
    rows.reserve(static_cast<size_t>(iters));

    for (int it = 0; it < iters; ++it) {
        ad::Tape tape;
        ad::Value total;
        LossBreakdown bd_acc;
        for (int b = 0; b < cfg.batch; ++b) {
            const int idx = picker.uniform_int(static_cast<int>(ds.samples.size()));
            const SynthSample& s = ds.samples[static_cast<size_t>(idx)];
            LossInputs in = sample_inputs(tape, s, T);
            NetDOutput d = net.netD_forward(tape, in.X, in.Y, fwd);
            auto [lossD, bdD] = losses::loss_D(tape, d, in, cfg);
            ad::Value sample_loss;
            LossBreakdown bd;
            if (stage == Stage::PretrainD) {
                sample_loss = lossD;
                bd = bdD;
            } else {
                NetROutput r = net.netR_forward(tape, in.X, d, fwd);
                auto [lossT, bdT] = losses::loss_total(tape, r, lossD, bdD, in, cfg);
                sample_loss = lossT;
                bd = bdT;
            }
            total = b == 0 ? sample_loss : total + sample_loss;
            bd_acc.recon += bd.recon;
            bd_acc.warp += bd.warp;
            bd_acc.flow += bd.flow;
            bd_acc.ta += bd.ta;
            bd_acc.coupled += bd.coupled;
            bd_acc.total += bd.total;
            bd_acc.w_warp = bd.w_warp;
            bd_acc.w_flow = bd.w_flow;
            bd_acc.w_ta = bd.w_ta;
            bd_acc.w_coupled = bd.w_coupled;
        }
        if (cfg.batch > 1) {
            total = ad::scale(total, 1.0 / cfg.batch);
            const double inv = 1.0 / cfg.batch;
            bd_acc.recon *= inv;
            bd_acc.warp *= inv;
            bd_acc.flow *= inv;
            bd_acc.ta *= inv;
            bd_acc.coupled *= inv;
            bd_acc.total *= inv;
        }
        tape.backward(total);
        auto grads = net.params().collect_grads(tape);
        const double lr = lr_at(cfg, it, iters);
        adam_step(net.params().values(), grads, adam, lr);
        rows.push_back(bd_acc);
        lrs.push_back(lr);
    }

    if (iters == 0) {
        // materialize parameters so a 0-iteration run still checkpoints the
        // initialization
        ad::Tape tape;
        const SynthSample& s = ds.samples[0];
        LossInputs in = sample_inputs(tape, s, T);
        NetDOutput d = net.netD_forward(tape, in.X, in.Y, fwd);
        if (stage == Stage::Joint) net.netR_forward(tape, in.X, d, fwd);
    }

    fs::create_directories(out_dir);
    const std::string base =
        out_dir + (stage == Stage::PretrainD ? "/checkpoint_d" : "/checkpoint_joint");
    save_checkpoint(base, net.params().values());
    std::ofstream cf(base + ".cfg");
    cf << config_to_text(cfg);
    write_loss_csv(out_dir + (stage == Stage::PretrainD ? "/loss_d.csv" : "/loss_total.csv"), rows,
                   lrs);
    write_run_files(out_dir, cfg);
    return rows;
}

std::vector<EvalRow> evaluate(FmaNet& net, const Dataset& ds, const Config& cfg, bool oracle,
                              const TrainOptions& opts) {
    const int T = cfg.T, N = cfg.N();
    ForwardOptions fwd;
    fwd.zero_flows = opts.zero_flows;
    std::vector<EvalRow> rows;

    for (size_t si = 0; si < ds.samples.size(); ++si) {
        const SynthSample& s = ds.samples[si];
        const ManifestEntry& e = ds.manifest[si];
        Tensor Xhat{s.X.dims()}, Yhat{s.Y.dims()};
        Tensor sharpR;
        if (oracle) {
            Xhat = s.X.clone();
            Yhat = s.Y.clone();
            sharpR = s.XSharp.clone();
        } else {
            for (int j = 0; j < T; ++j) {
                ad::Tape tape;
                ad::Value Xw = tape.constant(window(s.X, j, T));
                ad::Value Yw = tape.constant(window(s.Y, j, T));
                NetDOutput d = net.netD_forward(tape, Xw, Yw, fwd);
                NetROutput r = net.netR_forward(tape, Xw, d, fwd);
                const int64_t lr_frame = s.X.numel() / T;
                const int64_t hr_frame = s.Y.numel() / T;
                std::copy(d.Xc_hat.val().data(), d.Xc_hat.val().data() + lr_frame,
                          Xhat.data() + j * lr_frame);
                std::copy(r.Yc_hat.val().data(), r.Yc_hat.val().data() + hr_frame,
                          Yhat.data() + j * hr_frame);
                if (j == N) sharpR = r.XSharpR.val().clone();
            }
        }

        auto seq_psnr = [T](const Tensor& a, const Tensor& b) {
            double acc = 0.0;
            for (int j = 0; j < T; ++j) acc += metrics::psnr(frame_of(a, j), frame_of(b, j));
            return acc / T;
        };
        auto seq_ssim = [T](const Tensor& a, const Tensor& b) {
            double acc = 0.0;
            for (int j = 0; j < T; ++j) acc += metrics::ssim(frame_of(a, j), frame_of(b, j));
            return acc / T;
        };

        EvalRow rd{std::to_string(e.id), "d", e.bin_lo, e.bin_hi, seq_psnr(Xhat, s.X),
                   seq_ssim(Xhat, s.X), metrics::tof(Xhat, s.X)};
        EvalRow rr{std::to_string(e.id), "r", e.bin_lo, e.bin_hi, seq_psnr(Yhat, s.Y),
                   seq_ssim(Yhat, s.Y), metrics::tof(Yhat, s.Y)};
        rows.push_back(rd);
        rows.push_back(rr);

        // anchored-feature sharpness and reference baselines
        EvalRow rs{std::to_string(e.id), "sharp_r", e.bin_lo, e.bin_hi,
                   seq_psnr(sharpR, s.XSharp), seq_ssim(sharpR, s.XSharp),
                   metrics::tof(sharpR, s.XSharp)};
        rows.push_back(rs);
        EvalRow ri{std::to_string(e.id), "sharp_in", e.bin_lo, e.bin_hi, seq_psnr(s.X, s.XSharp),
                   seq_ssim(s.X, s.XSharp), metrics::tof(s.X, s.XSharp)};
        rows.push_back(ri);

        Tensor bic{s.Y.dims()};
        const int64_t hr_frame = s.Y.numel() / T;
        for (int j = 0; j < T; ++j) {
            Tensor up = ops::bicubic_resize(frame_of(s.X, j), s.Y.dim(1), s.Y.dim(2));
            std::copy(up.data(), up.data() + hr_frame, bic.data() + j * hr_frame);
        }
        EvalRow rb{std::to_string(e.id), "bicubic", e.bin_lo, e.bin_hi, seq_psnr(bic, s.Y),
                   seq_ssim(bic, s.Y), metrics::tof(bic, s.Y)};
        rows.push_back(rb);
    }

    // per-bin and overall aggregates (order-fixed mean of the sample rows)
    std::vector<std::pair<double, double>> bins;
    for (const auto& e : ds.manifest) {
        std::pair<double, double> b{e.bin_lo, e.bin_hi};
        if (std::find(bins.begin(), bins.end(), b) == bins.end()) bins.push_back(b);
    }
    const char* nets[] = {"d", "r", "sharp_r", "sharp_in", "bicubic"};
    std::vector<EvalRow> aggs;
    for (const auto& [lo, hi] : bins)
        for (const char* nw : nets) {
            EvalRow agg{"bin", nw, lo, hi, 0, 0, 0};
            int cnt = 0;
            for (const auto& r : rows)
                if (r.network == nw && r.bin_lo == lo && r.bin_hi == hi && r.id != "bin") {
                    agg.psnr += r.psnr;
                    agg.ssim += r.ssim;
                    agg.tof += r.tof;
                    ++cnt;
                }
            if (cnt == 0) continue;
            agg.psnr /= cnt;
            agg.ssim /= cnt;
            agg.tof /= cnt;
            aggs.push_back(agg);
        }
    for (const char* nw : nets) {
        EvalRow agg{"all", nw, 0, std::numeric_limits<double>::infinity(), 0, 0, 0};
        int cnt = 0;
        for (const auto& r : rows)
            if (r.network == nw) {
                agg.psnr += r.psnr;
                agg.ssim += r.ssim;
                agg.tof += r.tof;
                ++cnt;
            }
        if (cnt == 0) continue;
        agg.psnr /= cnt;
        agg.ssim /= cnt;
        agg.tof /= cnt;
        aggs.push_back(agg);
    }
    rows.insert(rows.end(), aggs.begin(), aggs.end());
    return rows;
}

void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write metrics csv: " + path);
    os << "id,network,bin_lo,bin_hi,psnr,ssim,tof\n";
    for (const auto& r : rows) {
        os << r.id << "," << r.network << "," << fmtv(r.bin_lo) << ",";
        if (std::isinf(r.bin_hi)) os << "inf";
        else os << fmtv(r.bin_hi);
        os << "," << fmtv(r.psnr) << "," << fmtv(r.ssim) << "," << fmtv(r.tof) << "\n";
    }
}

void cmd_gen(const std::string& config_path, const std::string& out_dir,
             std::optional<uint64_t> seed) {
    Config cfg = parse_config_file(config_path);
    if (seed) {
        cfg.seed = *seed;
        cfg.validate();
    }
    const fs::path parent = fs::path(out_dir).parent_path();
    if (!parent.empty() && !fs::is_directory(parent))
        throw ConfigError("out_dir parent does not exist: " + parent.string());
    make_dataset(cfg, out_dir);
}

void cmd_train(const std::string& config_path, const std::string& data_dir,
               const std::string& out_dir, Stage stage, std::optional<uint64_t> seed) {
    Config cfg = parse_config_file(config_path);
    if (seed) {
        cfg.seed = *seed;
        cfg.validate();
    }
    Dataset ds = load_dataset(data_dir);
    fs::create_directories(out_dir);

    FmaNet net(cfg);
    if (stage == Stage::Joint) {
        std::string base = cfg.pretrain_checkpoint.empty() ? out_dir + "/checkpoint_d"
                                                           : cfg.pretrain_checkpoint;
        if (!checkpoint_exists(base))
            throw CheckpointError("joint stage requires a pretrain-d checkpoint, none at: " + base);
        net.params().load(load_checkpoint(base), /*frozen=*/false);
    }
    train_stage(net, ds, cfg, stage, out_dir);
}

namespace {

FmaNet load_model(const std::string& ckpt_base, Config& cfg_out) {
    if (!checkpoint_exists(ckpt_base)) throw CheckpointError("no checkpoint at: " + ckpt_base);
    std::ifstream cf(ckpt_base + ".cfg");
    if (!cf) throw CheckpointError("missing checkpoint config sidecar: " + ckpt_base + ".cfg");
    std::stringstream buf;
    buf << cf.rdbuf();
    try {
        cfg_out = parse_config_text(buf.str());
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("bad checkpoint config sidecar: ") + e.what());
    }
    FmaNet net(cfg_out);
    net.params().load(load_checkpoint(ckpt_base), /*frozen=*/true);
    return net;
}

}  // namespace

void cmd_eval(const std::string& ckpt_base, const std::string& data_dir,
              const std::string& out_dir, bool oracle) {
    Config cfg;
    FmaNet net = load_model(ckpt_base, cfg);
    Dataset ds = load_dataset(data_dir);
    if (ds.samples[0].X.dim(0) != cfg.T)
        throw CheckpointError("dataset frame count " + std::to_string(ds.samples[0].X.dim(0)) +
                              " does not match checkpoint config T=" + std::to_string(cfg.T));
    fs::create_directories(out_dir);
    auto rows = evaluate(net, ds, cfg, oracle);
    write_eval_csv(out_dir + "/metrics.csv", rows);
}

void cmd_ablate_fgdf(const std::string& config_path, const std::string& data_dir,
                     const std::string& out_dir, std::optional<uint64_t> seed) {
    Config cfg = parse_config_file(config_path);
    if (seed) {
        cfg.seed = *seed;
        cfg.validate();
    }
    Dataset ds = load_dataset(data_dir);
    fs::create_directories(out_dir);

    // operator-level reduction check: zero flows turn the FGDF path into
    // conventional dynamic filtering, bit for bit
    {
        const SynthSample& s = ds.samples[0];
        Tensor f0{s.f_gt.dims()};
        for (int t = 0; t < f0.dim(0); ++t)
            for (int h = 0; h < f0.dim(1); ++h)
                for (int w = 0; w < f0.dim(2); ++w) f0.at(t, h, w, 2) = 1.0;
        Tensor a = ops::fgdf_downsample(s.Y, f0, s.K_gt, cfg.s);
        Tensor b = ops::dyn_filter_strided(s.Y, s.K_gt, cfg.s);
        for (int64_t i = 0; i < a.numel(); ++i)
            fm_check(a[i] == b[i], "zero-flow FGDF does not reduce to conventional filtering");
        std::fprintf(stderr, "ablate-fgdf: zero-flow reduction check passed\n");
    }

    std::ofstream grid(out_dir + "/ablation.csv");
    if (!grid) throw DataError("cannot write ablation csv: " + out_dir + "/ablation.csv");
    grid << "k_d,fgdf,network,bin_lo,bin_hi,psnr,tof\n";

    for (int kd : cfg.ablate_kd_set) {
        for (int flag = 1; flag >= 0; --flag) {
            Config vc = cfg;
            vc.k_d = kd;
            vc.lambda2 = cfg.ablate_lambda2;
            vc.pretrain_iterations = cfg.ablate_pretrain_iterations;
            vc.iterations = cfg.ablate_joint_iterations;
            vc.validate();

            TrainOptions topts;
            topts.zero_flows = flag == 0;
            const std::string run_dir =
                out_dir + "/kd" + std::to_string(kd) + "_fgdf" + std::to_string(flag);
            fs::create_directories(run_dir);

            FmaNet net(vc);
            train_stage(net, ds, vc, Stage::PretrainD, run_dir, topts);
            train_stage(net, ds, vc, Stage::Joint, run_dir, topts);
            auto rows = evaluate(net, ds, vc, false, topts);
            write_eval_csv(run_dir + "/metrics.csv", rows);

            for (const auto& r : rows) {
                if (r.id != "bin" || (r.network != "d" && r.network != "r")) continue;
                grid << kd << "," << flag << "," << r.network << "," << fmtv(r.bin_lo) << ",";
                if (std::isinf(r.bin_hi)) grid << "inf";
                else grid << fmtv(r.bin_hi);
                grid << "," << fmtv(r.psnr) << "," << fmtv(r.tof) << "\n";
            }
        }
    }
}

void cmd_dump(const std::string& ckpt_base, int sample_id, const std::string& data_dir,
              const std::string& out_dir) {
    Config cfg;
    FmaNet net = load_model(ckpt_base, cfg);
    auto manifest = read_manifest(data_dir);
    const ManifestEntry* entry = nullptr;
    for (const auto& e : manifest)
        if (e.id == sample_id) entry = &e;
    if (!entry) throw DataError("unknown sample id " + std::to_string(sample_id));
    SynthSample s = load_sample(data_dir + "/" + entry->dir);
    fs::create_directories(out_dir);

    ad::Tape tape;
    ad::Value X = tape.constant(s.X);
    ad::Value Y = tape.constant(s.Y);
    NetDOutput d = net.netD_forward(tape, X, Y);
    NetROutput r = net.netR_forward(tape, X, d);

    write_tensor(out_dir + "/fY.fgdt", d.fY.val());
    write_tensor(out_dir + "/fX.fgdt", r.fX.val());
    write_tensor(out_dir + "/KD.fgdt", d.KD.val());
    write_tensor(out_dir + "/KR.fgdt", r.KR.val());

    const int T = cfg.T;
    auto dump_flow_grids = [&](const Tensor& f, const std::string& tag) {
        std::vector<Tensor> u, v, m;
        for (int t = 0; t < T; ++t) {
            Tensor ft = ops::slice(f, 0, t, 1).reshaped({f.dim(1), f.dim(2), 3});
            u.push_back(ops::slice(ft, 2, 0, 1).reshaped({f.dim(1), f.dim(2)}));
            v.push_back(ops::slice(ft, 2, 1, 1).reshaped({f.dim(1), f.dim(2)}));
            m.push_back(ops::slice(ft, 2, 2, 1).reshaped({f.dim(1), f.dim(2)}));
        }
        write_pgm(out_dir + "/" + tag + "_u.pgm", tile_grid(u, T));
        write_pgm(out_dir + "/" + tag + "_v.pgm", tile_grid(v, T));
        write_pgm(out_dir + "/" + tag + "_mask.pgm", tile_grid(m, T));
    };
    dump_flow_grids(d.fY.val(), "fY");
    dump_flow_grids(r.fX.val(), "fX");

    // kernel grids: the per-pixel kernel at every 8th position, tiled per frame
    auto dump_kernel_grid = [&](const Tensor& K, const std::string& tag) {
        const int H = K.dim(1), W = K.dim(2);
        const int ksq = K.dim(3);
        const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(ksq))));
        const int step = std::max(1, H / 8);
        for (int t = 0; t < T; ++t) {
            std::vector<Tensor> tiles;
            int cols = 0;
            for (int h = 0; h < H; h += step) {
                cols = 0;
                for (int w = 0; w < W; w += step) {
                    Tensor tile{{k, k}};
                    for (int i = 0; i < ksq; ++i) tile[i] = K.at(t, h, w, i);
                    tiles.push_back(tile);
                    ++cols;
                }
            }
            write_pgm(out_dir + "/" + tag + "_t" + std::to_string(t) + ".pgm",
                      tile_grid(tiles, cols));
        }
    };
    dump_kernel_grid(d.KD.val(), "KD");
    dump_kernel_grid(r.KR.val(), "KR");

    // warped-feature channel grids, one per FRMA step and network
    auto dump_fw = [&](const std::vector<ad::Value>& steps, const std::string& tag) {
        for (size_t i = 0; i < steps.size(); ++i) {
            const Tensor& fw = steps[i].val();
            std::vector<Tensor> tiles;
            for (int c = 0; c < fw.dim(2); ++c)
                tiles.push_back(ops::slice(fw, 2, c, 1).reshaped({fw.dim(0), fw.dim(1)}));
            write_pgm(out_dir + "/" + tag + "_step" + std::to_string(i) + ".pgm",
                      tile_grid(tiles, std::max(1, fw.dim(2) / 4)));
            write_tensor(out_dir + "/" + tag + "_step" + std::to_string(i) + ".fgdt", fw);
        }
    };
    dump_fw(d.Fw_steps, "Fw_d");
    dump_fw(r.Fw_steps, "Fw_r");
}

}  // namespace fmanet::cli
