#pragma once

#include <string>
#include <vector>

#include "fmanet/config.hpp"
#include "fmanet/tensor.hpp"

namespace fmanet {

// Closed-form scene: band-limited textures advected by a smooth velocity
// field. Frames and ground-truth flows are evaluated analytically, so there
// is no resampling error anywhere in the ground truth.
struct SceneModel {
    struct Wave {
        double kx, ky, phase, amp;
    };
    std::vector<std::vector<Wave>> waves;  // one wave set per color channel

    // velocity in HR px/frame: constant + affine + sinusoidal modulation
    double vx0 = 0.0, vy0 = 0.0;
    double axx = 0.0, axy = 0.0, ayx = 0.0, ayy = 0.0;  // affine gradients about the center
    double cx = 0.0, cy = 0.0;                          // affine center
    double sx_amp = 0.0, sy_amp = 0.0;
    double skx = 0.0, sky = 0.0, sphase = 0.0;
    double skx2 = 0.0, sky2 = 0.0, sphase2 = 0.0;

    double texture(int channel, double y, double x) const;
    void velocity(double y, double x, double& vx, double& vy) const;

    // frame at offset tau from the center: texture evaluated at the
    // velocity-displaced coordinate
    double frame_value(int channel, int tau, double y, double x) const;

    // flow placed at pixel p of frame tau_a such that backward-warping frame
    // tau_b by it reproduces frame tau_a (solved to fixed-point tolerance)
    void flow_between(int tau_a, int tau_b, double y, double x, double& u, double& v) const;
};

struct SceneData {
    SceneModel model;
    Tensor Y;     // T x sH x sW x 3
    Tensor f_gt;  // T x H x W x 3, flow from the center frame, LR units, masks 1
    double motion_mag = 0.0;  // mean |velocity| over the LR anchor grid, HR px/frame
};

struct SynthSample {
    Tensor Y;        // T x sH x sW x 3
    Tensor X;        // T x H x W x 3 blurry LR
    Tensor XSharp;   // T x H x W x 3 bicubic-downsampled Y
    Tensor f_gt;     // T x H x W x 3
    Tensor K_gt;     // T x H x W x k_d^2, per-frame sums 1/T
    double motion_mag = 0.0;
};

struct ManifestEntry {
    int id = 0;
    uint64_t seed = 0;
    double bin_lo = 0.0, bin_hi = 0.0;
    double motion_mag = 0.0;
    std::string dir;
};

SceneData generate_scene(uint64_t seed, int H, int W, int T, int s, double motion_mag_target);

// line blur along the local motion direction; every frame of X is produced
// by fgdf_downsample on its own (clamped) window, the center one on exactly
// (Y, f_gt, K_gt)
std::pair<Tensor, Tensor> synthesize_blur(const SceneData& scene, int s, double blur_len, int k_d);

Tensor bicubic_downsample(const Tensor& Y, int s);  // per-frame Catmull-Rom resize

SynthSample make_sample(uint64_t seed, const Config& cfg, double motion_mag_target);

std::vector<ManifestEntry> make_dataset(const Config& cfg, const std::string& out_dir);

SynthSample load_sample(const std::string& dir);
std::vector<ManifestEntry> read_manifest(const std::string& data_dir);
std::string manifest_path(const std::string& data_dir);

}  // namespace fmanet
