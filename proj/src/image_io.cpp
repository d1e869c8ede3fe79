#include "fmanet/image_io.hpp"

#include <algorithm>
#include <fstream>

#include "fmanet/common.hpp"

namespace fmanet {

void write_pgm(const std::string& path, const Tensor& img) {
    fm_check(img.rank() == 2, "write_pgm: expected HxW image, got ", img.shape_str());
    const int H = img.dim(0), W = img.dim(1);
    double lo = img[0], hi = img[0];
    for (int64_t i = 0; i < img.numel(); ++i) {
        lo = std::min(lo, img[i]);
        hi = std::max(hi, img[i]);
    }
    const double span = hi - lo;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write image: " + path);
    os << "P5\n" << W << " " << H << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(W));
    for (int h = 0; h < H; ++h) {
        for (int w = 0; w < W; ++w) {
            const double v = span > 0.0 ? (img.at(h, w) - lo) / span : 0.0;
            row[static_cast<size_t>(w)] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        os.write(reinterpret_cast<const char*>(row.data()), W);
    }
    if (!os) throw DataError("image write failed: " + path);
}

Tensor tile_grid(const std::vector<Tensor>& tiles, int cols) {
    fm_check(!tiles.empty(), "tile_grid: no tiles");
    fm_check(cols >= 1, "tile_grid: cols must be >= 1");
    const int th = tiles[0].dim(0), tw = tiles[0].dim(1);
    for (const auto& t : tiles)
        fm_check(t.rank() == 2 && t.dim(0) == th && t.dim(1) == tw, "tile_grid: mixed tile shapes");
    const int rows = (static_cast<int>(tiles.size()) + cols - 1) / cols;
    Tensor grid{{rows * (th + 1) - 1, cols * (tw + 1) - 1}};
    for (size_t i = 0; i < tiles.size(); ++i) {
        const int r = static_cast<int>(i) / cols, c = static_cast<int>(i) % cols;
        for (int y = 0; y < th; ++y)
            for (int x = 0; x < tw; ++x)
                grid.at(r * (th + 1) + y, c * (tw + 1) + x) = tiles[i].at(y, x);
    }
    return grid;
}

}  // namespace fmanet
