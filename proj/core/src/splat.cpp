#include "frametwin/splat.hpp"

#include <algorithm>
#include <cmath>

#include "frametwin/detail/raster_common.hpp"

namespace frametwin {

std::vector<AnchoredKernel> anchor_kernels(const BezierCurve& curve, int K,
                                           const std::vector<double>& tau,
                                           const std::vector<double>& alpha,
                                           int edge_index) {
    if (K < 1) throw invalid_argument_error("anchor_kernels: K must be >= 1");
    if (tau.size() != static_cast<std::size_t>(K) || alpha.size() != static_cast<std::size_t>(K))
        throw invalid_argument_error("anchor_kernels: tau/alpha length != K");

    std::vector<double> params(K);
    for (int j = 0; j < K; ++j) params[j] = (j + 0.5) / K;
    std::vector<BishopFrame> frames = bishop_frames(curve, params);

    std::vector<AnchoredKernel> kernels(K);
    const double half = 0.5 / K;
    for (int j = 0; j < K; ++j) {
        AnchoredKernel& g = kernels[j];
        g.edge = edge_index;
        g.slot = j;
        g.mean = curve.eval(params[j]);
        g.frame = frames[j];
        double hi = std::min(1.0, params[j] + half);
        double lo = std::max(0.0, params[j] - half);
        g.sigma_t = (curve.eval(hi) - curve.eval(lo)).norm();
        g.sigma_n = g.sigma_b = tau[j];
        g.alpha = alpha[j];
    }
    return kernels;
}

Mat3 covariance(const BishopFrame& frame, double sigma_t, double sigma_n,
                double sigma_b) {
    if (sigma_t <= 0 || sigma_n <= 0 || sigma_b <= 0)
        throw invalid_argument_error("covariance: sigmas must be positive");
    Mat3 F;
    F.col(0) = frame.t;
    F.col(1) = frame.n;
    F.col(2) = frame.b;
    if ((F * F.transpose() - Mat3::Identity()).norm() > 1e-6)
        throw invalid_argument_error("covariance: frame is not orthonormal");
    Vec3 s2(sigma_t * sigma_t, sigma_n * sigma_n, sigma_b * sigma_b);
    return F * s2.asDiagonal() * F.transpose();
}

std::optional<Splat2D> project_kernel(const Camera& cam, const AnchoredKernel& kernel,
                                      const RasterConfig& cfg) {
    Mat3 R = cam.rotation();
    Vec3 mc = R * kernel.mean + cam.translation();
    if (mc.z() <= cfg.near_plane) return std::nullopt;

    const double z = mc.z();
    Splat2D s;
    s.mean2d = Vec2(cam.fx * mc.x() / z + cam.cx, cam.fy * mc.y() / z + cam.cy);
    s.depth = z;
    s.alpha = kernel.alpha;
    s.edge = kernel.edge;
    s.slot = kernel.slot;

    Eigen::Matrix<double, 2, 3> J;
    J << cam.fx / z, 0, -cam.fx * mc.x() / (z * z),
         0, cam.fy / z, -cam.fy * mc.y() / (z * z);

    Mat3 sigma = covariance(kernel.frame, kernel.sigma_t, kernel.sigma_n, kernel.sigma_b);
    Mat3 V = R * sigma * R.transpose();
    s.cov2d = J * V * J.transpose() + cfg.cov_eps * Mat2::Identity();

    // Cull splats whose support cannot touch the image.
    double lam_max = 0.5 * (s.cov2d.trace() +
                            std::sqrt(std::max(0.0, s.cov2d.trace() * s.cov2d.trace() -
                                                        4.0 * s.cov2d.determinant())));
    double r = cfg.support_sigma * std::sqrt(std::max(0.0, lam_max));
    if (s.mean2d.x() + r < 0 || s.mean2d.x() - r > cam.width - 1 ||
        s.mean2d.y() + r < 0 || s.mean2d.y() - r > cam.height - 1)
        return std::nullopt;
    return s;
}

namespace detail {

std::vector<PreparedSplat> prepare_splats(const Camera& cam,
                                          std::vector<Splat2D>& splats,
                                          const RasterConfig& cfg, TileGrid& grid,
                                          int* skipped) {
    std::stable_sort(splats.begin(), splats.end(),
                     [](const Splat2D& a, const Splat2D& b) { return a.depth < b.depth; });

    grid.tiles_x = (cam.width + TileGrid::kTile - 1) / TileGrid::kTile;
    grid.tiles_y = (cam.height + TileGrid::kTile - 1) / TileGrid::kTile;
    grid.bins.assign(static_cast<std::size_t>(grid.tiles_x) * grid.tiles_y, {});

    std::vector<PreparedSplat> prepared;
    prepared.reserve(splats.size());
    for (std::size_t i = 0; i < splats.size(); ++i) {
        const Splat2D& s = splats[i];
        double det = s.cov2d.determinant();
        if (!(det > 0.0) || !(s.cov2d.trace() > 0.0)) {
            if (skipped) ++*skipped;
            continue;
        }
        PreparedSplat p;
        p.mean = s.mean2d;
        p.inv = s.cov2d.inverse();
        p.alpha = s.alpha;
        p.q_max = cfg.support_sigma * cfg.support_sigma;
        p.index = static_cast<int>(i);
        double lam_max = 0.5 * (s.cov2d.trace() +
                                std::sqrt(std::max(0.0, s.cov2d.trace() * s.cov2d.trace() - 4.0 * det)));
        double r = cfg.support_sigma * std::sqrt(lam_max);
        p.x0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.x() - r)));
        p.x1 = std::min(cam.width - 1, static_cast<int>(std::floor(s.mean2d.x() + r)));
        p.y0 = std::max(0, static_cast<int>(std::ceil(s.mean2d.y() - r)));
        p.y1 = std::min(cam.height - 1, static_cast<int>(std::floor(s.mean2d.y() + r)));
        if (p.x0 > p.x1 || p.y0 > p.y1) continue;

        int tx0 = p.x0 / TileGrid::kTile, tx1 = p.x1 / TileGrid::kTile;
        int ty0 = p.y0 / TileGrid::kTile, ty1 = p.y1 / TileGrid::kTile;
        int pi = static_cast<int>(prepared.size());
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                grid.bins[static_cast<std::size_t>(ty) * grid.tiles_x + tx].push_back(pi);
        prepared.push_back(p);
    }
    return prepared;
}

ImageF composite_forward(const Camera& cam,
                         const std::vector<PreparedSplat>& prepared,
                         const TileGrid& grid, const RasterConfig& cfg) {
    ImageF img(cam.width, cam.height);
    for (int ty = 0; ty < grid.tiles_y; ++ty) {
        for (int tx = 0; tx < grid.tiles_x; ++tx) {
            const auto& bin = grid.bins[static_cast<std::size_t>(ty) * grid.tiles_x + tx];
            if (bin.empty()) continue;
            int px0 = tx * TileGrid::kTile;
            int py0 = ty * TileGrid::kTile;
            int px1 = std::min(cam.width, px0 + TileGrid::kTile);
            int py1 = std::min(cam.height, py0 + TileGrid::kTile);
            for (int y = py0; y < py1; ++y) {
                for (int x = px0; x < px1; ++x) {
                    double T = 1.0, C = 0.0;
                    for (int pi : bin) {
                        const auto& p = prepared[pi];
                        if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
                        Vec2 d(x - p.mean.x(), y - p.mean.y());
                        double q = d.dot(p.inv * d);
                        if (q > p.q_max) continue;
                        double w = std::min(cfg.alpha_clamp, p.alpha * std::exp(-0.5 * q));
                        C += T * w;
                        T *= 1.0 - w;
                        if (T < cfg.min_transmittance) break;
                    }
                    img.at(x, y) = C;
                }
            }
        }
    }
    return img;
}

}  // namespace detail

ImageF rasterize(const Camera& cam, std::vector<Splat2D> splats,
                 const RasterConfig& cfg) {
    detail::TileGrid grid;
    std::vector<detail::PreparedSplat> prepared =
        detail::prepare_splats(cam, splats, cfg, grid);
    return detail::composite_forward(cam, prepared, grid, cfg);
}

ImageF render_curves(const std::vector<BezierCurve>& curves,
                     const std::vector<std::vector<double>>& tau,
                     const std::vector<std::vector<double>>& alpha,
                     const Camera& cam, int K, const RasterConfig& cfg) {
    std::vector<Splat2D> splats;
    for (std::size_t k = 0; k < curves.size(); ++k) {
        auto kernels = anchor_kernels(curves[k], K, tau[k], alpha[k], static_cast<int>(k));
        for (const auto& g : kernels)
            if (auto s = project_kernel(cam, g, cfg)) splats.push_back(*s);
    }
    return rasterize(cam, std::move(splats), cfg);
}

ImageF render_view(const std::vector<BezierCurve>& curves,
                   const std::vector<std::vector<double>>& tau,
                   const std::vector<std::vector<double>>& alpha,
                   const MlpParams& field, const Camera& cam, int K, int m,
                   const RasterConfig& cfg) {
    std::vector<BezierCurve> deformed(curves.size());
    for (std::size_t k = 0; k < curves.size(); ++k) {
        CurveSamples samples = sample_curve(curves[k], m);
        Eigen::Matrix3Xd pts(3, samples.count());
        for (std::size_t j = 0; j < samples.count(); ++j) pts.col(j) = samples.points[j];
        MlpForward ws;
        mlp_forward(field, pts, ws);
        std::vector<Vec3> displaced(samples.count());
        for (std::size_t j = 0; j < samples.count(); ++j)
            displaced[j] = samples.points[j] + ws.out.col(j);
        deformed[k] = refit_curve(samples, displaced, curves[k].degree);
    }
    return render_curves(deformed, tau, alpha, cam, K, cfg);
}

}  // namespace frametwin
