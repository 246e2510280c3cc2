#pragma once

#include "frametwin/splat.hpp"

namespace frametwin::detail {

// Per-splat data shared by the forward rasterizer and its reverse sweep.
struct PreparedSplat {
    Vec2 mean;
    Mat2 inv;        // cov2d^-1
    double alpha;
    double q_max;    // support_sigma^2
    int x0, x1, y0, y1;
    int index;       // position in the depth-sorted input list
};

struct TileGrid {
    static constexpr int kTile = 16;
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<int>> bins;  // indices into `prepared`, depth order
};

/// Sorts splats front to back (stable on depth ties), inverts covariances,
/// computes support bounds, and bins splats into tiles. Non-invertible
/// covariances are skipped and counted.
std::vector<PreparedSplat> prepare_splats(const Camera& cam,
                                          std::vector<Splat2D>& splats,
                                          const RasterConfig& cfg, TileGrid& grid,
                                          int* skipped = nullptr);

/// Front-to-back compositing over the tile grid. Both the plain renderer
/// and the recording pipeline go through this exact routine so their
/// images agree bit for bit.
ImageF composite_forward(const Camera& cam,
                         const std::vector<PreparedSplat>& prepared,
                         const TileGrid& grid, const RasterConfig& cfg);

}  // namespace frametwin::detail
