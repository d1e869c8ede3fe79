#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fmanet/dynfilter.hpp"
#include "test_util.hpp"

using namespace fmanet;
using testutil::max_fd_error;
using testutil::probe;
using testutil::rand_tensor;

namespace {

// flow 0, mask 1
Tensor id_flow(int T, int H, int W) {
    Tensor f{{T, H, W, 3}};
    for (int t = 0; t < T; ++t)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) f.at(t, h, w, 2) = 1.0;
    return f;
}

Tensor delta_kernels(int T, int H, int W, int k, double weight) {
    Tensor F = Tensor::zeros({T, H, W, k * k});
    for (int t = 0; t < T; ++t)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) F.at(t, h, w, (k / 2) * k + k / 2) = weight;
    return F;
}

}  // namespace

TEST_CASE("dynamic_filter_image identity and constants") {
    Rng rng(1);
    Tensor x = rand_tensor(rng, {5, 5});
    Tensor F = delta_kernels(1, 5, 5, 3, 1.0);
    CHECK(testutil::max_abs_diff(ops::dynamic_filter_image(x, F), x) == 0.0);

    Tensor c = Tensor::full({4, 4}, 3.25);
    Tensor Fu = Tensor::full({1, 4, 4, 9}, 1.0 / 9.0);
    Tensor y = ops::dynamic_filter_image(c, Fu);
    for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(3.25).epsilon(1e-15));

    CHECK_THROWS(ops::dynamic_filter_image(x, Tensor::zeros({1, 5, 5, 16})));  // even kernel
}

TEST_CASE("dynamic filter matches brute-force loops") {
    Rng rng(2);
    Tensor x = rand_tensor(rng, {5, 5});
    Tensor F = rand_tensor(rng, {1, 5, 5, 9});
    Tensor x1 = x.reshaped({1, 5, 5});
    CHECK(testutil::max_abs_diff(ops::dynamic_filter_image(x, F),
                                 testutil::oracle_dyn_video(x1, F)) < 1e-12);

    Tensor xv = rand_tensor(rng, {3, 5, 5});
    Tensor Fv = rand_tensor(rng, {3, 5, 5, 9});
    CHECK(testutil::max_abs_diff(ops::dynamic_filter_video(xv, Fv),
                                 testutil::oracle_dyn_video(xv, Fv)) < 1e-12);
}

TEST_CASE("T=1 video filtering degenerates to image filtering") {
    Rng rng(3);
    Tensor x = rand_tensor(rng, {1, 4, 6});
    Tensor F = rand_tensor(rng, {1, 4, 6, 9});
    CHECK(testutil::max_abs_diff(ops::dynamic_filter_video(x, F),
                                 ops::dynamic_filter_image(x.reshaped({4, 6}), F)) == 0.0);
}

TEST_CASE("temporal delta average of a static sequence returns the center frame") {
    Rng rng(4);
    Tensor frame = rand_tensor(rng, {5, 5});
    Tensor x{{3, 5, 5}};
    for (int t = 0; t < 3; ++t)
        for (int h = 0; h < 5; ++h)
            for (int w = 0; w < 5; ++w) x.at(t, h, w) = frame.at(h, w);
    Tensor F = delta_kernels(3, 5, 5, 3, 1.0 / 3.0);
    Tensor y = ops::dynamic_filter_video(x, F);
    CHECK(testutil::max_abs_diff(y, frame) < 1e-15);
}

TEST_CASE("fgdf reduces to conventional filtering at zero flow, bit for bit") {
    Rng rng(5);
    for (int rep = 0; rep < 5; ++rep) {
        const int T = 1 + 2 * rng.uniform_int(2);
        const int H = 3 + rng.uniform_int(4), W = 3 + rng.uniform_int(4);
        const int k = 1 + 2 * rng.uniform_int(3);
        Tensor x = rand_tensor(rng, {T, H, W});
        Tensor F = rand_tensor(rng, {T, H, W, k * k});
        Tensor a = ops::fgdf(x, id_flow(T, H, W), F);
        Tensor b = ops::dynamic_filter_video(x, F);
        CHECK(testutil::max_abs_diff(a, b) == 0.0);
    }
}

TEST_CASE("integer alignment cancels the shift") {
    Rng rng(6);
    const int H = 12, W = 12;
    Tensor center = rand_tensor(rng, {H, W});
    const int vx = 3;
    Tensor x{{3, H, W}};
    Tensor f = id_flow(3, H, W);
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
            x.at(1, h, w) = center.at(h, w);
            // frame at offset tau shifted by tau*vx along W (replicate border)
            x.at(0, h, w) = center.at(h, testutil::clampi(w + vx, 0, W - 1));
            x.at(2, h, w) = center.at(h, testutil::clampi(w - vx, 0, W - 1));
        }
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
            f.at(0, h, w, 0) = -vx;
            f.at(2, h, w, 0) = vx;
        }
    Tensor F = delta_kernels(3, H, W, 3, 1.0 / 3.0);
    Tensor y = ops::fgdf(x, f, F);
    for (int h = 0; h < H; ++h)
        for (int w = vx; w < W - vx; ++w)
            CHECK(std::fabs(y.at(h, w) - center.at(h, w)) < 1e-14);
}

TEST_CASE("fgdf matches the warp-then-filter oracle") {
    Rng rng(7);
    Tensor x = rand_tensor(rng, {3, 6, 6});
    Tensor f = rand_tensor(rng, {3, 6, 6, 3}, -1.5, 1.5);
    Tensor F = rand_tensor(rng, {3, 6, 6, 9});
    CHECK(testutil::max_abs_diff(ops::fgdf(x, f, F), testutil::oracle_fgdf(x, f, F)) < 1e-12);
}

TEST_CASE("fgdf_downsample") {
    Rng rng(8);
    SUBCASE("s=1 is exactly fgdf") {
        Tensor x = rand_tensor(rng, {3, 6, 6});
        Tensor f = rand_tensor(rng, {3, 6, 6, 3}, -1.0, 1.0);
        Tensor F = rand_tensor(rng, {3, 6, 6, 9});
        CHECK(testutil::max_abs_diff(ops::fgdf_downsample(x, f, F, 1), ops::fgdf(x, f, F)) == 0.0);
    }
    SUBCASE("normalized kernels preserve constants") {
        const int T = 3, H = 4, W = 4, s = 2, k = 5;
        Tensor Y = Tensor::full({T, s * H, s * W}, 0.6);
        Tensor f = id_flow(T, H, W);
        Tensor F = Tensor::full({T, H, W, k * k}, 1.0 / (T * k * k));
        Tensor y = ops::fgdf_downsample(Y, f, F, s);
        for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(0.6).epsilon(1e-14));
    }
    SUBCASE("random instance vs strided loop oracle") {
        Tensor Y = rand_tensor(rng, {3, 8, 8});
        Tensor f = rand_tensor(rng, {3, 4, 4, 3}, -1.0, 1.0);
        Tensor F = rand_tensor(rng, {3, 4, 4, 9});
        CHECK(testutil::max_abs_diff(ops::fgdf_downsample(Y, f, F, 2),
                                     testutil::oracle_fgdf_downsample(Y, f, F, 2)) < 1e-12);
    }
    SUBCASE("odd HR dims rejected") {
        Tensor Y = rand_tensor(rng, {3, 7, 8});
        Tensor f = rand_tensor(rng, {3, 3, 4, 3});
        Tensor F = rand_tensor(rng, {3, 3, 4, 9});
        CHECK_THROWS(ops::fgdf_downsample(Y, f, F, 2));
    }
}

TEST_CASE("fgdf_upsample") {
    Rng rng(9);
    SUBCASE("s=1 with temporal delta on a static sequence returns the center frame") {
        Tensor frame = rand_tensor(rng, {4, 4});
        Tensor x{{3, 4, 4}};
        for (int t = 0; t < 3; ++t)
            for (int h = 0; h < 4; ++h)
                for (int w = 0; w < 4; ++w) x.at(t, h, w) = frame.at(h, w);
        Tensor KR = delta_kernels(3, 4, 4, 5, 1.0 / 3.0);
        Tensor y = ops::fgdf_upsample(x, id_flow(3, 4, 4), KR, 1);
        CHECK(testutil::max_abs_diff(y, frame) < 1e-15);
    }
    SUBCASE("group-normalized kernels preserve constants") {
        const int T = 3, H = 4, W = 4, s = 2, k = 5;
        Tensor x = Tensor::full({T, H, W}, -0.35);
        Tensor raw = rand_tensor(rng, {T, H, W, s * s * k * k});
        Tensor KR = ops::normalize_restoration(raw, s);
        Tensor f = rand_tensor(rng, {T, H, W, 3}, -2.0, 2.0);
        for (int t = 0; t < T; ++t)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) f.at(t, h, w, 2) = 1.0;
        Tensor y = ops::fgdf_upsample(x, f, KR, s);
        for (int64_t i = 0; i < y.numel(); ++i)
            CHECK(y[i] == doctest::Approx(-0.35).epsilon(1e-12));
    }
    SUBCASE("random instance vs loop oracle") {
        Tensor x = rand_tensor(rng, {3, 4, 4});
        Tensor f = rand_tensor(rng, {3, 4, 4, 3}, -1.0, 1.0);
        Tensor KR = rand_tensor(rng, {3, 4, 4, 4 * 9});
        CHECK(testutil::max_abs_diff(ops::fgdf_upsample(x, f, KR, 2),
                                     testutil::oracle_fgdf_upsample(x, f, KR, 2)) < 1e-12);
    }
}

TEST_CASE("kernel normalizations") {
    SUBCASE("sigmoid normalization values") {
        Tensor z = Tensor::zeros({1, 1, 1, 1});
        CHECK(ops::normalize_degradation(z)[0] == doctest::Approx(0.5));
        Tensor l3 = Tensor::full({1, 1, 1, 1}, std::log(3.0));
        CHECK(ops::normalize_degradation(l3)[0] == doctest::Approx(0.75));
        Tensor big = Tensor::full({1, 1, 1, 1}, 60.0);
        CHECK(ops::normalize_degradation(big)[0] <= 1.0);
        CHECK(ops::normalize_degradation(big)[0] > 0.999999);
        Rng rng(10);
        Tensor r = rand_tensor(rng, {2, 3, 3, 9}, -30.0, 30.0);
        Tensor s = ops::normalize_degradation(r);
        for (int64_t i = 0; i < s.numel(); ++i) {
            CHECK(s[i] > 0.0);
            CHECK(s[i] < 1.0);
        }
    }
    SUBCASE("group normalization sums to one") {
        Tensor zeros = Tensor::zeros({3, 2, 2, 4 * 9});
        Tensor out = ops::normalize_restoration(zeros, 2);
        for (int64_t i = 0; i < out.numel(); ++i)
            CHECK(out[i] == doctest::Approx(1.0 / 27.0).epsilon(1e-15));

        // toy group of 3: [1,2,3] -> [-2/3, 1/3, 4/3]
        Tensor raw = Tensor::from({3, 1, 1, 1}, {1.0, 2.0, 3.0});
        Tensor toy = ops::normalize_restoration(raw, 1);
        CHECK(toy[0] == doctest::Approx(-2.0 / 3.0));
        CHECK(toy[1] == doctest::Approx(1.0 / 3.0));
        CHECK(toy[2] == doctest::Approx(4.0 / 3.0));

        Rng rng(11);
        Tensor r = rand_tensor(rng, {3, 4, 4, 4 * 25}, -5.0, 5.0);
        Tensor n = ops::normalize_restoration(r, 2);
        for (int h = 0; h < 4; ++h)
            for (int w = 0; w < 4; ++w)
                for (int phase = 0; phase < 4; ++phase) {
                    double sum = 0.0;
                    for (int t = 0; t < 3; ++t)
                        for (int ki = 0; ki < 25; ++ki) sum += n.at(t, h, w, phase * 25 + ki);
                    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
                }
    }
}

TEST_CASE("motion robustness: aligned small kernels survive shifts that defeat fixed windows") {
    Rng rng(12);
    const int H = 32, W = 32, k = 5;
    Tensor center = rand_tensor(rng, {H, W});
    for (int shift : {0, 2, 4, 8}) {
        Tensor x{{3, H, W}};
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                x.at(1, h, w) = center.at(h, w);
                x.at(0, h, w) = center.at(h, testutil::clampi(w + shift, 0, W - 1));
                x.at(2, h, w) = center.at(h, testutil::clampi(w - shift, 0, W - 1));
            }
        // flow-guided: exact flows, temporal-delta kernels
        Tensor f = id_flow(3, H, W);
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                f.at(0, h, w, 0) = -shift;
                f.at(2, h, w, 0) = shift;
            }
        Tensor Fd = delta_kernels(3, H, W, k, 1.0 / 3.0);
        Tensor y_fgdf = ops::fgdf(x, f, Fd);

        // conventional: the best a fixed window can do is a shifted delta tap
        const int r = k / 2;
        const int reach = std::min(shift, r);
        Tensor Fc = Tensor::zeros({3, H, W, k * k});
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                Fc.at(1, h, w, r * k + r) = 1.0 / 3.0;
                Fc.at(0, h, w, r * k + r - reach) = 1.0 / 3.0;
                Fc.at(2, h, w, r * k + r + reach) = 1.0 / 3.0;
            }
        Tensor y_conv = ops::dynamic_filter_video(x, Fc);

        const int margin = shift + k;
        double err_fgdf = 0.0, err_conv = 0.0;
        for (int h = margin; h < H - margin; ++h)
            for (int w = margin; w < W - margin; ++w) {
                err_fgdf = std::max(err_fgdf, std::fabs(y_fgdf.at(h, w) - center.at(h, w)));
                err_conv = std::max(err_conv, std::fabs(y_conv.at(h, w) - center.at(h, w)));
            }
        CHECK(err_fgdf < 1e-10);
        if (shift <= r) CHECK(err_conv < 1e-10);
        else CHECK(err_conv > 1e-3);
    }
}

TEST_CASE("finite differences through every filtering operator") {
    Rng rng(13);
    SUBCASE("dynamic_filter_image") {
        Tensor x = rand_tensor(rng, {4, 4});
        Tensor F = rand_tensor(rng, {1, 4, 4, 9});
        CHECK(max_fd_error({x, F}, [](ad::Tape&, std::vector<ad::Value>& in) {
                  return probe(ad::dynamic_filter_image(in[0], in[1]));
              }) < 1e-4);
    }
    SUBCASE("dynamic_filter_video") {
        Tensor x = rand_tensor(rng, {2, 4, 4});
        Tensor F = rand_tensor(rng, {2, 4, 4, 9});
        CHECK(max_fd_error({x, F}, [](ad::Tape&, std::vector<ad::Value>& in) {
                  return probe(ad::dynamic_filter_video(in[0], in[1]));
              }) < 1e-4);
    }
    SUBCASE("fgdf") {
        Tensor x = rand_tensor(rng, {2, 4, 4});
        Tensor f{{2, 4, 4, 3}};
        for (int64_t i = 0; i < f.numel(); ++i) f[i] = (rng.uniform_int(3) - 1) + 0.3;
        Tensor F = rand_tensor(rng, {2, 4, 4, 9});
        CHECK(max_fd_error({x, f, F}, [](ad::Tape&, std::vector<ad::Value>& in) {
                  return probe(ad::fgdf(in[0], in[1], in[2]));
              }) < 1e-4);
    }
    SUBCASE("fgdf_downsample") {
        Tensor Y = rand_tensor(rng, {2, 6, 6});
        Tensor f{{2, 3, 3, 3}};
        for (int64_t i = 0; i < f.numel(); ++i) f[i] = (rng.uniform_int(3) - 1) + 0.15;
        Tensor F = rand_tensor(rng, {2, 3, 3, 9});
        CHECK(max_fd_error({Y, f, F}, [](ad::Tape&, std::vector<ad::Value>& in) {
                  return probe(ad::fgdf_downsample(in[0], in[1], in[2], 2));
              }) < 1e-4);
    }
    SUBCASE("fgdf_upsample") {
        Tensor X = rand_tensor(rng, {2, 4, 4});
        Tensor f{{2, 4, 4, 3}};
        for (int64_t i = 0; i < f.numel(); ++i) f[i] = (rng.uniform_int(3) - 1) + 0.3;
        Tensor KR = rand_tensor(rng, {2, 4, 4, 4 * 9});
        CHECK(max_fd_error({X, f, KR}, [](ad::Tape&, std::vector<ad::Value>& in) {
                  return probe(ad::fgdf_upsample(in[0], in[1], in[2], 2));
              }) < 1e-4);
    }
    SUBCASE("normalize_restoration") {
        Tensor raw = rand_tensor(rng, {2, 2, 2, 4 * 9});
        CHECK(max_fd_error({raw}, [](ad::Tape&, std::vector<ad::Value>& in) {
                  return probe(ad::normalize_restoration(in[0], 2));
              }) < 1e-4);
    }
}
