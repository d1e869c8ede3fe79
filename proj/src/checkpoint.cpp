#include "fmanet/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fmanet/common.hpp"
#include "fmanet/tensor_io.hpp"

namespace fmanet {

void save_checkpoint(const std::string& base, const std::map<std::string, Tensor>& params) {
    std::ofstream bin(base + ".bin", std::ios::binary);
    if (!bin) throw DataError("cannot write checkpoint: " + base + ".bin");
    std::ofstream man(base + ".manifest.csv");
    if (!man) throw DataError("cannot write checkpoint manifest: " + base + ".manifest.csv");
    man << "name,shape,offset\n";
    for (const auto& [name, t] : params) {
        man << name << "," << t.shape_str() << "," << bin.tellp() << "\n";
        write_tensor(bin, t, Dtype::F64);
    }
    if (!bin || !man) throw DataError("checkpoint write failed: " + base);
}

std::map<std::string, Tensor> load_checkpoint(const std::string& base) {
    std::ifstream man(base + ".manifest.csv");
    if (!man) throw CheckpointError("missing checkpoint manifest: " + base + ".manifest.csv");
    std::ifstream bin(base + ".bin", std::ios::binary);
    if (!bin) throw CheckpointError("missing checkpoint data: " + base + ".bin");

    std::map<std::string, Tensor> out;
    std::string line;
    std::getline(man, line);  // header
    while (std::getline(man, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string name, shape, offset;
        if (!std::getline(ss, name, ',') || !std::getline(ss, shape, ',') || !std::getline(ss, offset))
            throw CheckpointError("malformed checkpoint manifest row: " + line);
        bin.seekg(std::stoll(offset));
        try {
            out.emplace(name, read_tensor(bin));
        } catch (const DataError& e) {
            throw CheckpointError("corrupt checkpoint record '" + name + "': " + e.what());
        }
    }
    if (out.empty()) throw CheckpointError("checkpoint is empty: " + base);
    return out;
}

bool checkpoint_exists(const std::string& base) {
    return std::filesystem::exists(base + ".bin") && std::filesystem::exists(base + ".manifest.csv");
}

}  // namespace fmanet
