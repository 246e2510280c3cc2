#pragma once

#include "frametwin/pipeline.hpp"
#include "frametwin/rng.hpp"
#include "frametwin/wireframe.hpp"

namespace frametwin {

struct LossWeights {
    double w_bend = 1e-7;
    double p_exponent = 2.0;
    double fd_step = 0.0;  // <= 0 means 1% of the domain diagonal
    int bend_samples = 4096;
};

struct AdamState {
    Eigen::VectorXd m, v;
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double lr0 = 1.6e-4, lr_min = 1.6e-5, decay = 0.99;
    // Optional per-coordinate multiplier on the shared schedule (empty = 1).
    Eigen::VectorXd lr_scale;

    double lr() const;
    void resize(Eigen::Index n);
};

/// Standard Adam with bias correction; lr(i) = max(lr0*decay^i, lr_min).
void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::VectorXd& grads);

struct LossBreakdown {
    int iteration = 0;
    double l_img = 0, l_bend = 0, l_total = 0, lr = 0;
};

struct TwinConfig {
    int max_iters = 300;
    int window = 20;
    double rel_tol = 1e-4;
    std::uint64_t seed = 0;
    int degree = 3;
    int K = 32;
    int m = 64;
    double bbox_enlarge = 1.1;
    double tau_init = 0.4;      // nominal strut radius, model units
    double alpha_init = 0.995;  // struts assumed fully extruded
    // Thickness/opacity learn through exp/sigmoid reparameterizations whose
    // useful range spans several units; the shared schedule sized for the
    // field would leave them frozen, so they get boosted rates.
    double lr_scale_s = 100.0;
    double lr_scale_a = 400.0;
    RasterConfig raster;
};

/// L1 image loss, summed over views and pixels. If `adjoints` is non-null
/// it receives d(loss)/d(rendered pixel) = sign of the residual.
double loss_img(const std::vector<ImageF>& rendered,
                const std::vector<ImageF>& captured,
                std::vector<ImageF>* adjoints = nullptr);

/// Distance-adaptive weight: (min distance from x to the printed samples)^p.
double gamma_weight(const Vec3& x, const std::vector<Vec3>& printed_pts,
                    double p);

/// Monte Carlo estimate of the weighted bending energy over `domain`:
/// vol * mean of gamma(x) * |FD Laplacian of the field at x|^2, with the
/// 7-point stencil at step weights.fd_step. Gradients with respect to theta
/// accumulate into `grad_theta` when non-null.
double loss_bend(const MlpParams& field, const std::vector<Vec3>& printed_pts,
                 const LossWeights& weights, const Aabb& domain,
                 const CounterRng& rng, std::uint64_t stream,
                 Eigen::VectorXd* grad_theta = nullptr);

LossBreakdown total_loss(double l_img, double l_bend, const LossWeights& weights);

struct TwinResult {
    DigitalTwin twin;
    MlpParams field;
    std::vector<LossBreakdown> trace;
    bool aborted = false;  // non-finite loss; trace holds the last values
};

/// Reconstructs the deformed geometry of the printed part of `graph` from
/// the captured views. Runs the render/backprop/Adam loop from the
/// zero-initialized field until max_iters or the relative change of l_total
/// over `window` iterations drops below rel_tol.
TwinResult construct_twin(const WireframeGraph& graph, const PartialState& partial,
                          const std::vector<Camera>& cams,
                          const std::vector<ImageF>& captured,
                          const TwinConfig& cfg, const LossWeights& weights);

}  // namespace frametwin
