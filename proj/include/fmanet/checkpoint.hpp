#pragma once

#include <map>
#include <string>

#include "fmanet/tensor.hpp"

namespace fmanet {

// A checkpoint is <base>.bin (concatenated binary tensor records) plus
// <base>.manifest.csv with one "name,shape,offset" row per tensor.
void save_checkpoint(const std::string& base, const std::map<std::string, Tensor>& params);
std::map<std::string, Tensor> load_checkpoint(const std::string& base);
bool checkpoint_exists(const std::string& base);

}  // namespace fmanet
