#pragma once

#include <array>

#include "frametwin/rng.hpp"
#include "frametwin/types.hpp"

namespace frametwin {

// Sinusoidal positional encoding. Coordinates are normalized into [-1,1]
// by the model's enlarged bounding box before encoding.
struct EncodingConfig {
    int num_bands = 15;
    bool include_input = true;
    Vec3 bbox_min = Vec3::Constant(-1.0);
    Vec3 bbox_max = Vec3::Constant(1.0);

    int dim() const { return (include_input ? 3 : 0) + 6 * num_bands; }
};

Eigen::VectorXd encode(const Vec3& x, const EncodingConfig& cfg);

// Deformation-field MLP: 8 hidden layers x 256 units, ReLU, with the
// encoding concatenated onto the input of the 5th hidden layer, and a
// linear head to the 3 displacement components.
struct MlpArch {
    static constexpr int kHidden = 8;
    static constexpr int kWidth = 256;
    static constexpr int kSkipLayer = 4;  // 0-based index of the widened layer
    static constexpr int kOut = 3;
};

struct MlpParams {
    EncodingConfig enc;
    std::vector<Eigen::MatrixXd> W;  // kHidden + 1 weight matrices
    std::vector<Eigen::VectorXd> b;

    Eigen::Index param_count() const;
    Eigen::VectorXd flatten() const;
    void set_from_flat(const Eigen::VectorXd& theta);
    bool finite() const;
};

/// Hidden layers get fan-in-scaled uniform init from the seed; the output
/// layer (weights and bias) is exactly zero, so the field starts as the
/// identity deformation.
MlpParams zero_init(std::uint64_t seed, const EncodingConfig& cfg);

/// Stored forward pass for one batch of points (activations kept for the
/// reverse sweep).
struct MlpForward {
    Eigen::MatrixXd enc;                                    // E x N
    std::array<Eigen::MatrixXd, MlpArch::kHidden> hidden;   // post-ReLU, 256 x N
    Eigen::MatrixXd out;                                    // 3 x N
};

/// Batched forward pass; `points` is 3 x N in model units.
void mlp_forward(const MlpParams& params, const Eigen::Matrix3Xd& points,
                 MlpForward& ws);

/// Reverse sweep: accumulates d(scalar)/d(theta) into `grad` (flat layout
/// matching flatten()) given the adjoint of the outputs.
void mlp_backward(const MlpParams& params, const MlpForward& ws,
                  const Eigen::Matrix3Xd& out_adjoint, Eigen::VectorXd& grad);

/// Displacement at a single point.
Vec3 field_eval(const MlpParams& params, const Vec3& x);

/// Analytic Jacobian of the displacement with respect to the input point
/// (diagnostics only; training never needs input gradients).
Mat3 input_jacobian(const MlpParams& params, const Vec3& x);

}  // namespace frametwin
