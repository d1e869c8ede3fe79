#pragma once

#include <iosfwd>
#include <string>

#include "fmanet/tensor.hpp"

namespace fmanet {

// Binary tensor file: magic "FGDT", version u32, rank u32, dims (u64 each),
// dtype tag u32 (0 = f32, 1 = f64), little-endian payload.
enum class Dtype : uint32_t { F32 = 0, F64 = 1 };

void write_tensor(std::ostream& os, const Tensor& t, Dtype dtype = Dtype::F64);
void write_tensor(const std::string& path, const Tensor& t, Dtype dtype = Dtype::F64);

Tensor read_tensor(std::istream& is);
Tensor read_tensor(const std::string& path);

}  // namespace fmanet
