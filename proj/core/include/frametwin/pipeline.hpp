#pragma once

#include <cmath>

#include "frametwin/detail/raster_common.hpp"
#include "frametwin/splat.hpp"

namespace frametwin {

// Unconstrained parameterizations of per-kernel thickness and opacity.
// Every code path that turns raw parameters into kernel values goes
// through these, so renders of "the same" scene agree bit for bit.
inline double tau_from_raw(double s) { return std::exp(s); }
inline double alpha_from_raw(double a) { return 1.0 / (1.0 + std::exp(-a)); }
inline double raw_from_tau(double tau) { return std::log(tau); }
inline double raw_from_alpha(double alpha) {
    return std::log(alpha / (1.0 - alpha));
}

struct PipelineConfig {
    int degree = 3;
    int m = 64;  // refit samples per edge
    int K = 32;  // kernels per edge
    RasterConfig raster;
};

// Gradients with respect to the optimization variables. tau/alpha live in
// their unconstrained parameterizations (tau = exp(s), alpha = sigmoid(a)).
struct ParamGrads {
    Eigen::VectorXd theta;
    std::vector<Eigen::VectorXd> s;
    std::vector<Eigen::VectorXd> a;

    void add_scaled(const ParamGrads& other, double scale);
};

// Recorded forward state for one edge: everything the reverse sweep needs.
struct EdgeTape {
    Eigen::Matrix3Xd sample_pts;      // 3 x (m+1), planned samples (constant)
    MlpForward mlp;
    Eigen::MatrixXd displaced;        // (m+1) x 3
    Eigen::MatrixXd ctrl;             // (n+1) x 3, refit control points
    Eigen::Matrix3Xd mean;            // 3 x K
    Eigen::Matrix3Xd chord;           // 3 x K, sigma_t chord vectors
    Eigen::VectorXd sigma_t;          // K (floored at kSigmaFloor)
    std::vector<char> sigma_clamped;  // K
    Eigen::Matrix3Xd tangent_raw;     // 3 x K
    std::vector<BishopFrame> frames;  // K
    TransportRecord transport;
    Eigen::VectorXd tau, alpha;       // K
};

struct ViewTape {
    std::vector<Splat2D> splats;  // depth-sorted
    std::vector<detail::PreparedSplat> prepared;
    detail::TileGrid grid;
    ImageF image;
    int skipped = 0;
};

// Full recording of one differentiable render of all views; feeding the
// per-pixel loss adjoints back through it yields d(loss)/d(theta, s, a).
struct SceneTape {
    PipelineConfig cfg;
    Eigen::MatrixXd refit_map;  // (n+1) x (m+1)
    Eigen::MatrixXd basis_mid, basis_chord, basis_der;  // K x (n+1)
    std::vector<EdgeTape> edges;
    std::vector<ViewTape> views;
};

/// Differentiable render of the printed curves under the deformation field
/// for every camera. `s`/`a` are per-edge unconstrained thickness/opacity
/// parameters of length K. Records all intermediates into `tape`.
void pipeline_forward(const std::vector<BezierCurve>& printed_curves,
                      const MlpParams& field,
                      const std::vector<Eigen::VectorXd>& s,
                      const std::vector<Eigen::VectorXd>& a,
                      const std::vector<Camera>& cams, const PipelineConfig& cfg,
                      SceneTape& tape);

/// Reverse sweep: image_adjoints[v](x,y) = d(loss)/d(pixel). Accumulates
/// into `grads` (must be pre-sized and zeroed by the caller).
void pipeline_backward(const MlpParams& field, const std::vector<Camera>& cams,
                       const SceneTape& tape,
                       const std::vector<ImageF>& image_adjoints,
                       ParamGrads& grads);

}  // namespace frametwin
