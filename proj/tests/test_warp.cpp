#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fmanet/warp.hpp"
#include "test_util.hpp"

using namespace fmanet;
using testutil::max_fd_error;
using testutil::probe;
using testutil::rand_tensor;

TEST_CASE("identity warp is exact") {
    Rng rng(1);
    Tensor x = rand_tensor(rng, {5, 6, 3});
    Tensor flow = Tensor::zeros({5, 6, 2});
    Tensor mask = Tensor::full({5, 6, 1}, 1.0);
    CHECK(testutil::max_abs_diff(ops::backward_warp(x, flow, mask), x) == 0.0);
}

TEST_CASE("integer shift with clamp at the edge") {
    Tensor x = Tensor::from({1, 4, 1}, {1.0, 2.0, 3.0, 4.0});  // [a,b,c,d]
    Tensor flow{{1, 4, 2}};
    for (int w = 0; w < 4; ++w) flow.at(0, w, 0) = 1.0;  // +1 along W
    Tensor mask = Tensor::full({1, 4, 1}, 1.0);
    Tensor y = ops::backward_warp(x, flow, mask);
    CHECK(y.at(0, 0, 0) == 2.0);
    CHECK(y.at(0, 1, 0) == 3.0);
    CHECK(y.at(0, 2, 0) == 4.0);
    CHECK(y.at(0, 3, 0) == 4.0);
}

TEST_CASE("half-pixel bilinear value") {
    Tensor x = Tensor::from({1, 2, 1}, {0.0, 2.0});
    Tensor flow{{1, 2, 2}};
    flow.at(0, 0, 0) = 0.5;
    Tensor mask = Tensor::full({1, 2, 1}, 1.0);
    Tensor y = ops::backward_warp(x, flow, mask);
    CHECK(y.at(0, 0, 0) == doctest::Approx(1.0));
}

TEST_CASE("warp agrees with the direct oracle and rejects bad shapes") {
    Rng rng(2);
    Tensor x = rand_tensor(rng, {6, 5, 2});
    Tensor flow = rand_tensor(rng, {6, 5, 2}, -2.0, 2.0);
    Tensor mask = rand_tensor(rng, {6, 5, 1}, 0.0, 1.0);
    CHECK(testutil::max_abs_diff(ops::backward_warp(x, flow, mask),
                                 testutil::oracle_warp(x, flow, mask)) < 1e-14);
    CHECK_THROWS(ops::backward_warp(x, rand_tensor(rng, {6, 5, 3}), mask));
    CHECK_THROWS(ops::backward_warp(x, flow, rand_tensor(rng, {5, 5, 1})));
}

TEST_CASE("warp output stays inside the masked input range") {
    Rng rng(3);
    Tensor x = rand_tensor(rng, {6, 6, 1}, -2.0, 3.0);
    Tensor flow = rand_tensor(rng, {6, 6, 2}, -4.0, 4.0);
    Tensor mask = rand_tensor(rng, {6, 6, 1}, 0.0, 1.0);
    Tensor y = ops::backward_warp(x, flow, mask);
    double xmin = x[0], xmax = x[0];
    for (int64_t i = 0; i < x.numel(); ++i) {
        xmin = std::min(xmin, x[i]);
        xmax = std::max(xmax, x[i]);
    }
    for (int64_t i = 0; i < y.numel(); ++i) {
        CHECK(y[i] >= std::min(xmin, 0.0) - 1e-12);
        CHECK(y[i] <= std::max(xmax, 0.0) + 1e-12);
    }
}

TEST_CASE("warp gradients match finite differences away from integer kinks") {
    Rng rng(4);
    Tensor x = rand_tensor(rng, {4, 4, 2});
    Tensor flow{{4, 4, 2}};
    for (int64_t i = 0; i < flow.numel(); ++i)
        flow[i] = (rng.uniform_int(3) - 1) + 0.3;  // fractional offsets off the lattice
    Tensor mask = rand_tensor(rng, {4, 4, 1}, 0.1, 0.9);
    const double err = max_fd_error({x, flow, mask}, [](ad::Tape&, std::vector<ad::Value>& in) {
        return probe(ad::backward_warp(in[0], in[1], in[2]));
    });
    CHECK(err < 1e-4);
}

TEST_CASE("warp_sequence aggregation") {
    Rng rng(5);
    const int T = 3, H = 4, W = 4, C = 2;
    Tensor x = rand_tensor(rng, {T, H, W, C});

    SUBCASE("zero flow unit mask is identity") {
        for (int n : {1, 2}) {
            Tensor f{{T, H, W, 3 * n}};
            for (int t = 0; t < T; ++t)
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w)
                        for (int j = 0; j < n; ++j) f.at(t, h, w, 3 * j + 2) = 1.0;
            CHECK(testutil::max_abs_diff(ops::warp_sequence(x, f, n, WarpAggregate::Mean), x) == 0.0);
        }
    }
    SUBCASE("n=1 reduces to per-frame backward_warp") {
        Tensor f = rand_tensor(rng, {T, H, W, 3}, -1.0, 1.0);
        Tensor mean1 = ops::warp_sequence(x, f, 1, WarpAggregate::Mean);
        Tensor direct = ops::warp_frames(x, f);
        CHECK(testutil::max_abs_diff(mean1, direct) == 0.0);
    }
    SUBCASE("n=2 with identical pairs equals n=1") {
        Tensor f1 = rand_tensor(rng, {T, H, W, 3}, -1.0, 1.0);
        Tensor f2{{T, H, W, 6}};
        for (int t = 0; t < T; ++t)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w)
                    for (int c = 0; c < 3; ++c) {
                        f2.at(t, h, w, c) = f1.at(t, h, w, c);
                        f2.at(t, h, w, 3 + c) = f1.at(t, h, w, c);
                    }
        Tensor a = ops::warp_sequence(x, f2, 2, WarpAggregate::Mean);
        Tensor b = ops::warp_sequence(x, f1, 1, WarpAggregate::Mean);
        CHECK(testutil::max_abs_diff(a, b) == 0.0);
    }
    SUBCASE("n=0 rejected") {
        Tensor f = rand_tensor(rng, {T, H, W, 3});
        CHECK_THROWS(ops::warp_sequence(x, f, 0, WarpAggregate::Mean));
    }
    SUBCASE("concat keeps every hypothesis") {
        Tensor f = rand_tensor(rng, {T, H, W, 6}, -1.0, 1.0);
        Tensor cat = ops::warp_sequence(x, f, 2, WarpAggregate::Concat);
        CHECK(cat.dims() == std::vector<int>{T, H, W, 2 * C});
    }
    SUBCASE("tape version matches the plain kernel") {
        Tensor f = rand_tensor(rng, {T, H, W, 6}, -1.0, 1.0);
        ad::Tape tape;
        ad::Value vx = tape.constant(x), vf = tape.constant(f);
        Tensor tape_mean = ad::warp_sequence(vx, vf, 2, WarpAggregate::Mean).val();
        CHECK(testutil::max_abs_diff(tape_mean, ops::warp_sequence(x, f, 2, WarpAggregate::Mean)) ==
              0.0);
    }
    SUBCASE("gradients through the n-pair warp") {
        Tensor xs = rand_tensor(rng, {2, 3, 3, 1});
        Tensor f{{2, 3, 3, 6}};
        for (int64_t i = 0; i < f.numel(); ++i) f[i] = (rng.uniform_int(3) - 1) + 0.3;
        const double err = max_fd_error({xs, f}, [](ad::Tape&, std::vector<ad::Value>& in) {
            return probe(ad::warp_sequence(in[0], in[1], 2, WarpAggregate::Concat));
        });
        CHECK(err < 1e-4);
    }
}
