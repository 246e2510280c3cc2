#pragma once

#include <optional>

#include "frametwin/bezier.hpp"
#include "frametwin/field.hpp"

namespace frametwin {

struct Camera {
    int width = 0, height = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    Mat4 world_to_cam = Mat4::Identity();

    Mat3 rotation() const { return world_to_cam.topLeftCorner<3, 3>(); }
    Vec3 translation() const { return world_to_cam.topRightCorner<3, 1>(); }
};

struct AnchoredKernel {
    int edge = 0, slot = 0;
    Vec3 mean = Vec3::Zero();
    BishopFrame frame;
    double sigma_t = 0, sigma_n = 0, sigma_b = 0;
    double alpha = 1.0;
};

struct Splat2D {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    double depth = 0;
    double alpha = 1.0;
    int edge = 0, slot = 0;
};

struct ImageF {
    int width = 0, height = 0;
    std::vector<double> intensities;  // row-major, [0,1]

    ImageF() = default;
    ImageF(int w, int h) : width(w), height(h), intensities(static_cast<std::size_t>(w) * h, 0.0) {}
    double& at(int x, int y) { return intensities[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return intensities[static_cast<std::size_t>(y) * width + x]; }
};

struct RasterConfig {
    double support_sigma = 3.0;     // kernel evaluated inside this many sigmas
    double cov_eps = 0.3;           // px^2 regularization added to cov2d
    double min_transmittance = 1e-4;
    double near_plane = 1e-3;       // camera-space z cull
    // Optional cap on per-splat compositing weight. Optimized opacities are
    // sigmoid-parameterized and stay strictly below 1 on their own.
    double alpha_clamp = 1.0;
};

/// K kernels at u_j = (j+0.5)/K with chord-length axial scale; cross
/// sections are isotropic with the per-kernel thickness tau.
std::vector<AnchoredKernel> anchor_kernels(const BezierCurve& curve, int K,
                                           const std::vector<double>& tau,
                                           const std::vector<double>& alpha,
                                           int edge_index = 0);

/// Sigma = F S^2 F^T with S = diag(sigma_t, sigma_n, sigma_b).
Mat3 covariance(const BishopFrame& frame, double sigma_t, double sigma_n,
                double sigma_b);

/// EWA-style perspective projection of one kernel; nullopt when culled
/// (behind the near plane or support entirely off-image).
std::optional<Splat2D> project_kernel(const Camera& cam, const AnchoredKernel& kernel,
                                      const RasterConfig& cfg = {});

/// Front-to-back alpha compositing of depth-sorted splats; emitted
/// intensity per kernel is 1 (white struts on black).
ImageF rasterize(const Camera& cam, std::vector<Splat2D> splats,
                 const RasterConfig& cfg = {});

/// Renders a set of curves with given per-kernel thickness/opacity.
ImageF render_curves(const std::vector<BezierCurve>& curves,
                     const std::vector<std::vector<double>>& tau,
                     const std::vector<std::vector<double>>& alpha,
                     const Camera& cam, int K, const RasterConfig& cfg = {});

/// Full forward pipeline for one view: deform samples by the field, refit,
/// anchor kernels, project, rasterize. Non-recording twin render path; the
/// recording variant lives in pipeline.hpp.
ImageF render_view(const std::vector<BezierCurve>& curves,
                   const std::vector<std::vector<double>>& tau,
                   const std::vector<std::vector<double>>& alpha,
                   const MlpParams& field, const Camera& cam, int K, int m,
                   const RasterConfig& cfg = {});

}  // namespace frametwin
