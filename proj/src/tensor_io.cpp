#include "fmanet/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "fmanet/common.hpp"

namespace fmanet {

namespace {

const char kMagic[4] = {'F', 'G', 'D', 'T'};
const uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
    // target platforms are little-endian; layout is pinned by the golden-bytes test
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError("tensor file truncated");
    return v;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t, Dtype dtype) {
    fm_check(t.defined(), "write_tensor: undefined tensor");
    os.write(kMagic, 4);
    put<uint32_t>(os, kVersion);
    put<uint32_t>(os, static_cast<uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) put<uint64_t>(os, static_cast<uint64_t>(t.dim(i)));
    put<uint32_t>(os, static_cast<uint32_t>(dtype));
    const int64_t n = t.numel();
    if (dtype == Dtype::F64) {
        os.write(reinterpret_cast<const char*>(t.data()), n * static_cast<int64_t>(sizeof(double)));
    } else {
        std::vector<float> buf(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) buf[static_cast<size_t>(i)] = static_cast<float>(t[i]);
        os.write(reinterpret_cast<const char*>(buf.data()), n * static_cast<int64_t>(sizeof(float)));
    }
}

void write_tensor(const std::string& path, const Tensor& t, Dtype dtype) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for write: " + path);
    write_tensor(os, t, dtype);
    if (!os) throw DataError("write failed: " + path);
}

Tensor read_tensor(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw DataError("bad tensor file magic");
    const uint32_t version = get<uint32_t>(is);
    if (version != kVersion) throw DataError("unsupported tensor file version " + std::to_string(version));
    const uint32_t rank = get<uint32_t>(is);
    if (rank == 0 || rank > 8) throw DataError("bad tensor rank " + std::to_string(rank));
    std::vector<int> dims(rank);
    int64_t n = 1;
    for (auto& d : dims) {
        const uint64_t v = get<uint64_t>(is);
        if (v == 0 || v > (1u << 30)) throw DataError("bad tensor dim");
        d = static_cast<int>(v);
        n *= d;
    }
    const uint32_t dtype = get<uint32_t>(is);
    Tensor t{dims};
    if (dtype == static_cast<uint32_t>(Dtype::F64)) {
        is.read(reinterpret_cast<char*>(t.data()), n * static_cast<int64_t>(sizeof(double)));
    } else if (dtype == static_cast<uint32_t>(Dtype::F32)) {
        std::vector<float> buf(static_cast<size_t>(n));
        is.read(reinterpret_cast<char*>(buf.data()), n * static_cast<int64_t>(sizeof(float)));
        for (int64_t i = 0; i < n; ++i) t[i] = static_cast<double>(buf[static_cast<size_t>(i)]);
    } else {
        throw DataError("bad dtype tag " + std::to_string(dtype));
    }
    if (!is) throw DataError("tensor file truncated");
    return t;
}

Tensor read_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open tensor file: " + path);
    return read_tensor(is);
}

}  // namespace fmanet
