#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fmanet/adam.hpp"
#include "fmanet/autodiff.hpp"
#include "fmanet/ops.hpp"
#include "test_util.hpp"

using namespace fmanet;
using testutil::max_fd_error;
using testutil::probe;
using testutil::rand_tensor;

TEST_CASE("conv2d constant preservation and identity kernel") {
    Tensor x = Tensor::full({4, 4, 1}, 1.0);
    Tensor w = Tensor::full({3, 3, 1, 1}, 1.0 / 9.0);
    Tensor b = Tensor::zeros({1});
    Tensor y = ops::conv2d(x, w, b);
    for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(1.0).epsilon(1e-15));

    Rng rng(1);
    Tensor x2 = rand_tensor(rng, {5, 4, 2});
    Tensor wd = Tensor::zeros({3, 3, 2, 2});
    wd.at(1, 1, 0, 0) = 1.0;
    wd.at(1, 1, 1, 1) = 1.0;
    Tensor y2 = ops::conv2d(x2, wd, Tensor::zeros({2}));
    CHECK(testutil::max_abs_diff(y2, x2) == 0.0);
}

TEST_CASE("conv2d matches the six-loop oracle") {
    Rng rng(2);
    Tensor x = rand_tensor(rng, {5, 5, 2});
    Tensor w = rand_tensor(rng, {3, 3, 2, 3});
    Tensor b = rand_tensor(rng, {3});
    CHECK(testutil::max_abs_diff(ops::conv2d(x, w, b), testutil::oracle_conv2d(x, w, b)) < 1e-12);
    CHECK_THROWS(ops::conv2d(x, rand_tensor(rng, {3, 3, 4, 2}), b));
    CHECK_THROWS(ops::conv2d(x, rand_tensor(rng, {2, 2, 2, 3}), b));
}

TEST_CASE("conv3d identity, constants and loop oracle") {
    Rng rng(3);
    Tensor x = rand_tensor(rng, {3, 4, 4, 2});
    Tensor wd = Tensor::zeros({3, 3, 3, 2, 2});
    wd.at(1, 1, 1, 0, 0) = 1.0;
    wd.at(1, 1, 1, 1, 1) = 1.0;
    CHECK(testutil::max_abs_diff(ops::conv3d(x, wd, Tensor::zeros({2})), x) == 0.0);

    Tensor xc = Tensor::full({2, 3, 3, 1}, 2.5);
    Tensor wu = Tensor::full({3, 3, 3, 1, 1}, 1.0 / 27.0);
    Tensor yc = ops::conv3d(xc, wu, Tensor::zeros({1}));
    for (int64_t i = 0; i < yc.numel(); ++i) CHECK(yc[i] == doctest::Approx(2.5).epsilon(1e-15));

    Tensor w = rand_tensor(rng, {3, 3, 3, 2, 2});
    Tensor b = rand_tensor(rng, {2});
    CHECK(testutil::max_abs_diff(ops::conv3d(x, w, b), testutil::oracle_conv3d(x, w, b)) < 1e-12);
}

TEST_CASE("pixel shuffle layout and round trip") {
    Tensor x = Tensor::from({1, 1, 4}, {1, 2, 3, 4});
    Tensor y = ops::pixel_shuffle(x, 2);
    CHECK(y.dims() == std::vector<int>{2, 2, 1});
    CHECK(y.at(0, 0, 0) == 1);
    CHECK(y.at(0, 1, 0) == 2);
    CHECK(y.at(1, 0, 0) == 3);
    CHECK(y.at(1, 1, 0) == 4);

    Rng rng(4);
    Tensor a = rand_tensor(rng, {3, 3, 8});
    CHECK(testutil::max_abs_diff(ops::pixel_unshuffle(ops::pixel_shuffle(a, 2), 2), a) == 0.0);
    CHECK(testutil::max_abs_diff(ops::pixel_shuffle(a, 1), a) == 0.0);
    CHECK_THROWS(ops::pixel_shuffle(rand_tensor(rng, {2, 2, 3}), 2));
}

TEST_CASE("bilinear upsample convention") {
    Tensor row = Tensor::from({1, 2, 1}, {0.0, 1.0});
    Tensor up = ops::bilinear_upsample(row, 2);
    CHECK(up.at(0, 0, 0) == doctest::Approx(0.0));
    CHECK(up.at(0, 1, 0) == doctest::Approx(0.25));
    CHECK(up.at(0, 2, 0) == doctest::Approx(0.75));
    CHECK(up.at(0, 3, 0) == doctest::Approx(1.0));

    Tensor c = Tensor::full({3, 3, 2}, 0.7);
    Tensor uc = ops::bilinear_upsample(c, 3);
    for (int64_t i = 0; i < uc.numel(); ++i) CHECK(uc[i] == doctest::Approx(0.7).epsilon(1e-15));
    Rng rng(5);
    Tensor a = rand_tensor(rng, {3, 4, 2});
    CHECK(testutil::max_abs_diff(ops::bilinear_upsample(a, 1), a) == 0.0);
    CHECK_THROWS(ops::bilinear_upsample(a, 0));
}

TEST_CASE("gradient engine basics") {
    ad::Tape tape;
    Tensor xv = Tensor::from({2}, {1.0, 2.0});
    ad::Value x = tape.leaf(xv, true);

    SUBCASE("sum gives all-ones") {
        tape.backward(ad::sum(x));
        Tensor g = tape.grad(x);
        CHECK(g[0] == 1.0);
        CHECK(g[1] == 1.0);
    }
    SUBCASE("sum of squares") {
        tape.backward(ad::sum(x * x));
        Tensor g = tape.grad(x);
        CHECK(g[0] == doctest::Approx(2.0));
        CHECK(g[1] == doctest::Approx(4.0));
    }
    SUBCASE("non-scalar loss rejected") { CHECK_THROWS(tape.backward(x * x)); }
    SUBCASE("grad map covers trainable leaves") {
        auto gm = ad::grad(tape, ad::sum(x * x));
        CHECK(gm.size() == 1);
        CHECK(gm.begin()->first == x.id);
    }
}

TEST_CASE("finite differences for elementary operators") {
    Rng rng(6);
    auto unary = [&](const char* name, auto opfn, double lo = -1.0, double hi = 1.0) {
        Tensor x = rand_tensor(rng, {3, 4}, lo, hi);
        const double err = max_fd_error({x}, [&](ad::Tape&, std::vector<ad::Value>& in) {
            return probe(opfn(in[0]));
        });
        INFO(name);
        CHECK(err < 1e-4);
    };
    unary("sigmoid", [](ad::Value v) { return ad::sigmoid(v); });
    unary("gelu", [](ad::Value v) { return ad::gelu(v); });
    unary("abs", [](ad::Value v) { return ad::absval(v); }, 0.2, 1.0);
    unary("mean", [](ad::Value v) { return ad::mean(v); });
    unary("softmax", [](ad::Value v) { return ad::softmax_rows(v); });

    Tensor a = rand_tensor(rng, {3, 2}), b = rand_tensor(rng, {2, 4});
    CHECK(max_fd_error({a, b}, [](ad::Tape&, std::vector<ad::Value>& in) {
              return probe(ad::matmul(in[0], in[1]));
          }) < 1e-4);

    Tensor x = rand_tensor(rng, {4, 3, 2});
    Tensor w = rand_tensor(rng, {3, 3, 2, 2});
    Tensor bias = rand_tensor(rng, {2});
    CHECK(max_fd_error({x, w, bias}, [](ad::Tape&, std::vector<ad::Value>& in) {
              return probe(ad::conv2d(in[0], in[1], in[2]));
          }) < 1e-4);

    Tensor x3 = rand_tensor(rng, {2, 3, 3, 2});
    Tensor w3 = rand_tensor(rng, {3, 3, 3, 2, 2});
    CHECK(max_fd_error({x3, w3, bias}, [](ad::Tape&, std::vector<ad::Value>& in) {
              return probe(ad::conv3d(in[0], in[1], in[2]));
          }) < 1e-4);

    Tensor up = rand_tensor(rng, {3, 3, 2});
    CHECK(max_fd_error({up}, [](ad::Tape&, std::vector<ad::Value>& in) {
              return probe(ad::bilinear_upsample(in[0], 2));
          }) < 1e-4);

    Tensor ps = rand_tensor(rng, {2, 2, 8});
    CHECK(max_fd_error({ps}, [](ad::Tape&, std::vector<ad::Value>& in) {
              return probe(ad::pixel_shuffle(in[0], 2));
          }) < 1e-4);

    Tensor c1 = rand_tensor(rng, {2, 3, 2, 2}), c2 = rand_tensor(rng, {2, 3, 2, 3});
    CHECK(max_fd_error({c1, c2}, [](ad::Tape&, std::vector<ad::Value>& in) {
              return probe(ad::fold_time(ad::concat({in[0], in[1]}, 3)));
          }) < 1e-4);

    Tensor rv = rand_tensor(rng, {4, 3, 2});
    CHECK(max_fd_error({rv}, [](ad::Tape&, std::vector<ad::Value>& in) {
              return probe(ad::slice(ad::repeat_time(in[0], 3), 0, 1, 2));
          }) < 1e-4);
}

TEST_CASE("forward operators keep finite inputs finite") {
    Rng rng(11);
    Tensor x = rand_tensor(rng, {3, 4, 4, 2}, -50.0, 50.0);
    CHECK(ops::sigmoid(x).all_finite());
    CHECK(ops::gelu(x).all_finite());
    CHECK(ops::conv3d(x, rand_tensor(rng, {3, 3, 3, 2, 2}), rand_tensor(rng, {2})).all_finite());
    CHECK(ops::fold_time(x).all_finite());
}

TEST_CASE("adam update examples") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        std::map<std::string, Tensor> params{{"p", Tensor::from({2}, {0.5, -0.25})}};
        std::map<std::string, Tensor> grads{{"p", Tensor::zeros({2})}};
        AdamState st;
        adam_step(params, grads, st, 0.1);
        CHECK(params["p"][0] == 0.5);
        CHECK(params["p"][1] == -0.25);
    }
    SUBCASE("single scalar step") {
        std::map<std::string, Tensor> params{{"p", Tensor::scalar(0.0)}};
        std::map<std::string, Tensor> grads{{"p", Tensor::scalar(1.0)}};
        AdamState st;
        adam_step(params, grads, st, 0.1);
        // m_hat = 1, v_hat = 1 -> p = -lr / (1 + eps)
        CHECK(params["p"][0] == doctest::Approx(-0.09999999).epsilon(1e-9));
    }
    SUBCASE("same seed, bit-identical trajectories") {
        auto run = [] {
            Rng rng(9);
            std::map<std::string, Tensor> params{{"w", testutil::rand_tensor(rng, {8})}};
            AdamState st;
            for (int i = 0; i < 50; ++i) {
                std::map<std::string, Tensor> grads;
                Tensor g{{8}};
                for (int j = 0; j < 8; ++j) g[j] = rng.normal();
                grads.emplace("w", g);
                adam_step(params, grads, st, 1e-3);
            }
            return params["w"];
        };
        Tensor a = run(), b = run();
        for (int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
    }
}
