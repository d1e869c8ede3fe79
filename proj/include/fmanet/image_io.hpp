#pragma once

#include <string>
#include <vector>

#include "fmanet/tensor.hpp"

namespace fmanet {

// 8-bit PGM with min-max normalization to the full range (flat images map to 0)
void write_pgm(const std::string& path, const Tensor& img);

// tile HxW images into a grid with a 1-px separator, row-major
Tensor tile_grid(const std::vector<Tensor>& tiles, int cols);

}  // namespace fmanet
