#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <sstream>

#include "fmanet/rng.hpp"
#include "fmanet/tensor.hpp"
#include "fmanet/tensor_io.hpp"

using namespace fmanet;

TEST_CASE("tensor shape and data invariants") {
    Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.numel() == 6);
    CHECK(t.at(1, 2) == 6);
    CHECK(t.all_finite());
    CHECK_THROWS(Tensor::from({2, 2}, {1.0}));
    CHECK_THROWS(Tensor::zeros({0, 3}));
    CHECK_THROWS((void)Tensor::zeros({2, 2}).reshaped({3}));

    Tensor r = t.reshaped({3, 2});
    CHECK(r.at(0, 1) == 2);  // same buffer, row-major
    Tensor c = t.clone();
    c.at(0, 0) = 99;
    CHECK(t.at(0, 0) == 1);
}

TEST_CASE("tensor file golden layout") {
    Tensor t = Tensor::from({1, 2}, {1.0, -2.5});
    std::ostringstream os(std::ios::binary);
    write_tensor(os, t, Dtype::F64);
    const std::string bytes = os.str();
    // magic, version u32, rank u32, dims u64 each, dtype u32, payload
    REQUIRE(bytes.size() == 4 + 4 + 4 + 16 + 4 + 16);
    CHECK(std::memcmp(bytes.data(), "FGDT", 4) == 0);
    uint32_t version, rank, dtype;
    uint64_t d0, d1;
    std::memcpy(&version, bytes.data() + 4, 4);
    std::memcpy(&rank, bytes.data() + 8, 4);
    std::memcpy(&d0, bytes.data() + 12, 8);
    std::memcpy(&d1, bytes.data() + 20, 8);
    std::memcpy(&dtype, bytes.data() + 28, 4);
    CHECK(version == 1);
    CHECK(rank == 2);
    CHECK(d0 == 1);
    CHECK(d1 == 2);
    CHECK(dtype == 1);
    double payload[2];
    std::memcpy(payload, bytes.data() + 32, 16);
    CHECK(payload[0] == 1.0);
    CHECK(payload[1] == -2.5);
}

TEST_CASE("tensor file round trips") {
    Rng rng(3);
    Tensor t{{3, 4, 2}};
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal();

    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    write_tensor(ss, t, Dtype::F64);
    Tensor back = read_tensor(ss);
    CHECK(back.dims() == t.dims());
    for (int64_t i = 0; i < t.numel(); ++i) CHECK(back[i] == t[i]);

    std::stringstream s2(std::ios::in | std::ios::out | std::ios::binary);
    write_tensor(s2, t, Dtype::F32);
    Tensor b2 = read_tensor(s2);
    for (int64_t i = 0; i < t.numel(); ++i)
        CHECK(b2[i] == doctest::Approx(t[i]).epsilon(1e-6));

    std::stringstream bad(std::ios::in | std::ios::out | std::ios::binary);
    bad << "NOPE";
    CHECK_THROWS_AS((void)read_tensor(bad), DataError);
}

TEST_CASE("rng streams are reproducible and truncated normal stays in range") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    Rng r(7);
    for (int i = 0; i < 1000; ++i) {
        const double z = r.truncated_normal(0.02);
        CHECK(std::fabs(z) <= 0.04);
    }
}
