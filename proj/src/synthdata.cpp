#include "fmanet/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "fmanet/common.hpp"
#include "fmanet/dynfilter.hpp"
#include "fmanet/rng.hpp"
#include "fmanet/tensor_io.hpp"

namespace fmanet {

namespace fs = std::filesystem;

double SceneModel::texture(int channel, double y, double x) const {
    const auto& ws = waves[static_cast<size_t>(channel)];
    double v = 0.5;
    for (const auto& w : ws) v += w.amp * std::sin(w.kx * x + w.ky * y + w.phase);
    return v;
}

void SceneModel::velocity(double y, double x, double& vx, double& vy) const {
    vx = vx0 + axx * (x - cx) + axy * (y - cy) + sx_amp * std::sin(skx * x + sky * y + sphase);
    vy = vy0 + ayx * (x - cx) + ayy * (y - cy) + sy_amp * std::sin(skx2 * x + sky2 * y + sphase2);
}

double SceneModel::frame_value(int channel, int tau, double y, double x) const {
    double vx, vy;
    velocity(y, x, vx, vy);
    return texture(channel, y - tau * vy, x - tau * vx);
}

void SceneModel::flow_between(int tau_a, int tau_b, double y, double x, double& u, double& v) const {
    // texture coordinate seen at p in frame tau_a
    double vx, vy;
    velocity(y, x, vx, vy);
    const double ux = x - tau_a * vx, uy = y - tau_a * vy;
    // solve q - tau_b * velocity(q) = (ux, uy); the field is a contraction
    double qx = x, qy = y;
    for (int it = 0; it < 200; ++it) {
        double wx, wy;
        velocity(qy, qx, wx, wy);
        const double nx = ux + tau_b * wx, ny = uy + tau_b * wy;
        const double d = std::fabs(nx - qx) + std::fabs(ny - qy);
        qx = nx;
        qy = ny;
        if (d < 1e-13) break;
    }
    u = qx - x;
    v = qy - y;
}

SceneData generate_scene(uint64_t seed, int H, int W, int T, int s, double motion_mag_target) {
    fm_check(motion_mag_target >= 0.0, "generate_scene: motion target must be >= 0, got ",
             motion_mag_target);
    fm_check(T % 2 == 1, "generate_scene: T must be odd, got ", T);
    Rng rng(mix_seed(seed, 0x5ce9eULL));
    const int sH = H * s, sW = W * s;
    const int N = (T - 1) / 2;

    SceneModel m;
    m.waves.resize(3);
    const int n_waves = 20;
    for (int c = 0; c < 3; ++c) {
        double amp_total = 0.0;
        std::vector<double> amps(n_waves);
        for (int i = 0; i < n_waves; ++i) {
            amps[static_cast<size_t>(i)] = rng.uniform(0.2, 1.0);
            amp_total += amps[static_cast<size_t>(i)];
        }
        for (int i = 0; i < n_waves; ++i) {
            SceneModel::Wave w;
            // wavelengths between ~4 px and ~half the image
            const double freq = rng.uniform(2.0 / sH, 0.25);
            const double theta = rng.uniform(0.0, 6.283185307179586);
            w.kx = 6.283185307179586 * freq * std::cos(theta);
            w.ky = 6.283185307179586 * freq * std::sin(theta);
            w.phase = rng.uniform(0.0, 6.283185307179586);
            w.amp = 0.45 * amps[static_cast<size_t>(i)] / amp_total;
            m.waves[static_cast<size_t>(c)].push_back(w);
        }
    }

    m.cx = 0.5 * (sW - 1);
    m.cy = 0.5 * (sH - 1);
    if (motion_mag_target > 0.0) {
        const double dir = rng.uniform(0.0, 6.283185307179586);
        m.vx0 = motion_mag_target * std::cos(dir);
        m.vy0 = motion_mag_target * std::sin(dir);
        // gentle spatial variation; gradients stay well below the
        // fixed-point contraction limit
        const double mod = 0.25 * std::min(motion_mag_target, 8.0);
        m.sx_amp = mod * rng.uniform(0.5, 1.0);
        m.sy_amp = mod * rng.uniform(0.5, 1.0);
        const double wl = rng.uniform(48.0, 96.0);
        double th = rng.uniform(0.0, 6.283185307179586);
        m.skx = 6.283185307179586 / wl * std::cos(th);
        m.sky = 6.283185307179586 / wl * std::sin(th);
        m.sphase = rng.uniform(0.0, 6.283185307179586);
        th = rng.uniform(0.0, 6.283185307179586);
        m.skx2 = 6.283185307179586 / wl * std::cos(th);
        m.sky2 = 6.283185307179586 / wl * std::sin(th);
        m.sphase2 = rng.uniform(0.0, 6.283185307179586);
        const double g = 0.04 / std::max(1.0, static_cast<double>(sW) / 64.0);
        m.axx = rng.uniform(-g, g);
        m.axy = rng.uniform(-g, g);
        m.ayx = rng.uniform(-g, g);
        m.ayy = rng.uniform(-g, g);

        // rescale so the mean speed over the LR anchor grid hits the target exactly
        const int a = (s - 1) / 2;
        double mean = 0.0;
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                double vx, vy;
                m.velocity(s * h + a, s * w + a, vx, vy);
                mean += std::hypot(vx, vy);
            }
        mean /= static_cast<double>(H) * W;
        if (mean > 0.0) {
            const double k = motion_mag_target / mean;
            m.vx0 *= k;
            m.vy0 *= k;
            m.sx_amp *= k;
            m.sy_amp *= k;
            m.axx *= k;
            m.axy *= k;
            m.ayx *= k;
            m.ayy *= k;
        }
    }

    SceneData out;
    out.model = m;
    out.Y = Tensor{{T, sH, sW, 3}};
    for (int t = 0; t < T; ++t) {
        const int tau = t - N;
        for (int y = 0; y < sH; ++y)
            for (int x = 0; x < sW; ++x)
                for (int c = 0; c < 3; ++c) out.Y.at(t, y, x, c) = m.frame_value(c, tau, y, x);
    }

    out.f_gt = Tensor{{T, H, W, 3}};
    const int a = (s - 1) / 2;
    double mean_speed = 0.0;
    for (int t = 0; t < T; ++t) {
        const int tau = t - N;
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                double u = 0.0, v = 0.0;
                if (tau != 0) m.flow_between(0, tau, s * h + a, s * w + a, u, v);
                out.f_gt.at(t, h, w, 0) = u / s;
                out.f_gt.at(t, h, w, 1) = v / s;
                out.f_gt.at(t, h, w, 2) = 1.0;
            }
    }
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
            double vx, vy;
            m.velocity(s * h + a, s * w + a, vx, vy);
            mean_speed += std::hypot(vx, vy);
        }
    out.motion_mag = mean_speed / (static_cast<double>(H) * W);
    return out;
}

namespace {

// normalized line kernel along (uy, ux), taps at integer multiples splatted
// bilinearly; total mass 1/T per frame
void line_kernel(double* dst, int k_d, double uy, double ux, int taps_half, double inv_T) {
    const int r = k_d / 2;
    std::vector<double> buf(static_cast<size_t>(k_d * k_d), 0.0);
    double total = 0.0;
    for (int j = -taps_half; j <= taps_half; ++j) {
        const double dy = j * uy, dx = j * ux;
        const int y0 = static_cast<int>(std::floor(dy)), x0 = static_cast<int>(std::floor(dx));
        const double fy = dy - y0, fx = dx - x0;
        const double w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx, w10 = fy * (1 - fx), w11 = fy * fx;
        const int ys[2] = {y0 + r, y0 + r + 1};
        const int xs[2] = {x0 + r, x0 + r + 1};
        const double ws[2][2] = {{w00, w01}, {w10, w11}};
        for (int iy = 0; iy < 2; ++iy)
            for (int ix = 0; ix < 2; ++ix) {
                if (ws[iy][ix] <= 0.0) continue;
                fm_check(ys[iy] >= 0 && ys[iy] < k_d && xs[ix] >= 0 && xs[ix] < k_d,
                         "line kernel tap outside the kernel grid");
                buf[static_cast<size_t>(ys[iy] * k_d + xs[ix])] += ws[iy][ix];
                total += ws[iy][ix];
            }
    }
    for (int i = 0; i < k_d * k_d; ++i) dst[i] = buf[static_cast<size_t>(i)] / total * inv_T;
}

}  // namespace

std::pair<Tensor, Tensor> synthesize_blur(const SceneData& scene, int s, double blur_len, int k_d) {
    fm_check(k_d % 2 == 1, "synthesize_blur: k_d must be odd, got ", k_d);
    fm_check(blur_len >= 0.0 && blur_len <= std::floor(k_d / 2.0), "synthesize_blur: blur_len ",
             blur_len, " exceeds kernel reach ", k_d / 2);
    const SceneModel& m = scene.model;
    const Tensor& Y = scene.Y;
    const int T = Y.dim(0), sH = Y.dim(1), sW = Y.dim(2);
    const int H = sH / s, W = sW / s;
    const int N = (T - 1) / 2;
    const int taps_half = static_cast<int>(std::floor(blur_len + 1e-9));
    const int a = (s - 1) / 2;

    Tensor K_gt{{T, H, W, k_d * k_d}};
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
            double vx, vy;
            m.velocity(s * h + a, s * w + a, vx, vy);
            const double speed = std::hypot(vx, vy);
            double ux = 1.0, uy = 0.0;  // horizontal fallback for static pixels
            if (speed > 1e-9) {
                ux = vx / speed;
                uy = vy / speed;
            }
            double* k0 = K_gt.data() + (static_cast<int64_t>(h) * W + w) * k_d * k_d;
            line_kernel(k0, k_d, uy, ux, taps_half, 1.0 / T);
            for (int t = 1; t < T; ++t) {
                double* kt = K_gt.data() + ((static_cast<int64_t>(t) * H + h) * W + w) * k_d * k_d;
                std::copy(k0, k0 + k_d * k_d, kt);
            }
        }

    // each output frame gets the Eq.-7 forward model on its own clamped window
    Tensor X{{T, H, W, 3}};
    const int64_t hr_frame = static_cast<int64_t>(sH) * sW * 3;
    for (int j = 0; j < T; ++j) {
        Tensor Y_win{{T, sH, sW, 3}};
        Tensor f_win{{T, H, W, 3}};
        for (int t = 0; t < T; ++t) {
            const int src = std::clamp(j + t - N, 0, T - 1);
            std::copy(Y.data() + src * hr_frame, Y.data() + (src + 1) * hr_frame,
                      Y_win.data() + t * hr_frame);
            if (j == N) {
                // the center window is exactly (Y, f_gt)
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w)
                        for (int c = 0; c < 3; ++c) f_win.at(t, h, w, c) = scene.f_gt.at(t, h, w, c);
            } else {
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w) {
                        double u = 0.0, v = 0.0;
                        if (src != j) m.flow_between(j - N, src - N, s * h + a, s * w + a, u, v);
                        f_win.at(t, h, w, 0) = u / s;
                        f_win.at(t, h, w, 1) = v / s;
                        f_win.at(t, h, w, 2) = 1.0;
                    }
            }
        }
        Tensor Xj = ops::fgdf_downsample(Y_win, f_win, K_gt, s);
        std::copy(Xj.data(), Xj.data() + Xj.numel(), X.data() + static_cast<int64_t>(j) * H * W * 3);
    }
    return {X, K_gt};
}

Tensor bicubic_downsample(const Tensor& Y, int s) {
    fm_check(Y.rank() == 4, "bicubic_downsample: expected TxHxWxC, got ", Y.shape_str());
    fm_check(s >= 1, "bicubic_downsample: scale must be >= 1, got ", s);
    fm_check(Y.dim(1) % s == 0 && Y.dim(2) % s == 0, "bicubic_downsample: dims ", Y.shape_str(),
             " not divisible by s=", s);
    const int T = Y.dim(0), H = Y.dim(1) / s, W = Y.dim(2) / s, C = Y.dim(3);
    Tensor out{{T, H, W, C}};
    const int64_t frame = static_cast<int64_t>(H) * W * C;
    for (int t = 0; t < T; ++t) {
        Tensor yt = ops::slice(Y, 0, t, 1).reshaped({Y.dim(1), Y.dim(2), C});
        Tensor lt = ops::bicubic_resize(yt, H, W);
        std::copy(lt.data(), lt.data() + frame, out.data() + t * frame);
    }
    return out;
}

SynthSample make_sample(uint64_t seed, const Config& cfg, double motion_mag_target) {
    SceneData scene = generate_scene(seed, cfg.H, cfg.W, cfg.T, cfg.s, motion_mag_target);
    SynthSample s;
    s.Y = scene.Y;
    s.f_gt = scene.f_gt;
    s.motion_mag = scene.motion_mag;
    auto [X, K] = synthesize_blur(scene, cfg.s, cfg.blur_len, cfg.k_d);
    s.X = X;
    s.K_gt = K;
    s.XSharp = bicubic_downsample(scene.Y, cfg.s);
    return s;
}

namespace {

std::string fmtv(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string manifest_path(const std::string& data_dir) { return data_dir + "/manifest.csv"; }

std::vector<ManifestEntry> make_dataset(const Config& cfg, const std::string& out_dir) {
    std::error_code ec;
    fs::create_directory(out_dir, ec);
    if (!fs::is_directory(out_dir)) throw DataError("cannot create dataset directory: " + out_dir);

    std::vector<ManifestEntry> manifest;
    int id = 0;
    for (size_t b = 0; b < cfg.bins.size(); ++b) {
        const MotionBin& bin = cfg.bins[b];
        const double hi_eff = std::isinf(bin.hi) ? (bin.lo > 0.0 ? 1.5 * bin.lo : 10.0) : bin.hi;
        for (int i = 0; i < cfg.samples_per_bin; ++i) {
            const uint64_t seed = mix_seed(cfg.seed, static_cast<uint64_t>(b) * 1000003ULL +
                                                         static_cast<uint64_t>(i));
            Rng rng(mix_seed(seed, 0x7a96ULL));
            const double target = rng.uniform(bin.lo, hi_eff);
            SynthSample s = make_sample(seed, cfg, target);

            char name[32];
            std::snprintf(name, sizeof(name), "s%04d", id);
            const std::string dir = out_dir + "/" + name;
            fs::create_directory(dir, ec);
            if (!fs::is_directory(dir)) throw DataError("cannot create sample directory: " + dir);
            write_tensor(dir + "/y.fgdt", s.Y);
            write_tensor(dir + "/x.fgdt", s.X);
            write_tensor(dir + "/xsharp.fgdt", s.XSharp);
            write_tensor(dir + "/fgt.fgdt", s.f_gt);
            write_tensor(dir + "/kgt.fgdt", s.K_gt);

            ManifestEntry e;
            e.id = id;
            e.seed = seed;
            e.bin_lo = bin.lo;
            e.bin_hi = bin.hi;
            e.motion_mag = s.motion_mag;
            e.dir = name;
            manifest.push_back(e);
            ++id;
        }
    }

    std::ofstream man(manifest_path(out_dir));
    if (!man) throw DataError("cannot write manifest: " + manifest_path(out_dir));
    man << "id,seed,bin_lo,bin_hi,motion_mag,dir\n";
    for (const auto& e : manifest) {
        man << e.id << "," << e.seed << "," << fmtv(e.bin_lo) << ",";
        if (std::isinf(e.bin_hi)) man << "inf";
        else man << fmtv(e.bin_hi);
        man << "," << fmtv(e.motion_mag) << "," << e.dir << "\n";
    }
    return manifest;
}

SynthSample load_sample(const std::string& dir) {
    SynthSample s;
    s.Y = read_tensor(dir + "/y.fgdt");
    s.X = read_tensor(dir + "/x.fgdt");
    s.XSharp = read_tensor(dir + "/xsharp.fgdt");
    s.f_gt = read_tensor(dir + "/fgt.fgdt");
    s.K_gt = read_tensor(dir + "/kgt.fgdt");
    return s;
}

std::vector<ManifestEntry> read_manifest(const std::string& data_dir) {
    std::ifstream man(manifest_path(data_dir));
    if (!man) throw DataError("missing dataset manifest: " + manifest_path(data_dir));
    std::vector<ManifestEntry> out;
    std::string line;
    std::getline(man, line);
    while (std::getline(man, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f[6];
        for (int i = 0; i < 6; ++i)
            if (!std::getline(ss, f[i], ',')) throw DataError("malformed manifest row: " + line);
        ManifestEntry e;
        e.id = std::stoi(f[0]);
        e.seed = std::stoull(f[1]);
        e.bin_lo = std::stod(f[2]);
        e.bin_hi = f[3] == "inf" ? std::numeric_limits<double>::infinity() : std::stod(f[3]);
        e.motion_mag = std::stod(f[4]);
        e.dir = f[5];
        out.push_back(e);
    }
    return out;
}

}  // namespace fmanet
