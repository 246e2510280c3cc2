#pragma once

#include <optional>

#include "frametwin/types.hpp"

namespace frametwin {

/// Bernstein basis polynomial B^n_i(u) = C(n,i) u^i (1-u)^(n-i).
double bernstein(int n, int i, double u);

/// Derivative d/du B^n_i(u).
double bernstein_deriv(int n, int i, double u);

struct BezierCurve {
    int degree = 3;
    std::vector<Vec3> ctrl;  // degree + 1 control points

    Vec3 eval(double u) const;
    Vec3 derivative(double u) const;

    // Straight segment between two points, uniformly parameterized.
    static BezierCurve segment(const Vec3& a, const Vec3& b, int degree = 3);
};

Vec3 eval_curve(const BezierCurve& curve, double u);

struct CurveSamples {
    std::vector<double> params;
    std::vector<Vec3> points;
    std::size_t count() const { return params.size(); }
};

/// Samples u_j = j/m, j = 0..m. Requires m >= degree so a refit of the
/// samples is determined.
CurveSamples sample_curve(const BezierCurve& curve, int m);

struct BishopFrame {
    Vec3 t, n, b;
};

/// Twist-minimizing frames by discrete parallel transport of the normal
/// along the tangent samples. The initial normal projects the global axis
/// least aligned with the first tangent, which keeps the result
/// deterministic and flip-free.
std::vector<BishopFrame> bishop_frames(const BezierCurve& curve,
                                       const std::vector<double>& params);

// Branch decisions and normalizers of one transport run, kept so a reverse
// sweep can replay it exactly.
struct TransportRecord {
    std::vector<double> raw_norm;   // |tangent| after fallback substitution
    std::vector<double> h_norm;     // pre-normalization magnitude of each normal
    std::vector<char> fallback;     // used the binormal-based branch
    std::vector<int> tangent_source;  // index whose raw tangent was used
    int init_axis = 0;
};

/// Frames from raw (unnormalized) tangent vectors. Zero tangents fall back
/// to the nearest valid neighbor; throws degenerate_curve_error when all
/// tangents vanish.
std::vector<BishopFrame> frames_from_tangents(std::vector<Vec3> tangents,
                                              TransportRecord* record = nullptr);

// Normal-equations system for the endpoint-constrained interior solve,
// exposed for inspection in tests.
struct LeastSquaresSystem {
    Eigen::MatrixXd S;               // (n-1) x (n-1), symmetric
    std::vector<Vec3> r;             // n-1 right-hand sides
};

/// Endpoint-constrained least-squares Bezier fit. The full solve reduces to
/// a fixed linear map from the displaced samples to the control points, so
/// the operator is precomputed once per (degree, params) and reused.
class RefitOperator {
  public:
    RefitOperator(int degree, const std::vector<double>& params);

    /// ctrl = M * displaced (applied per coordinate). Endpoints of the
    /// output equal displaced.front() / displaced.back() exactly.
    BezierCurve apply(const std::vector<Vec3>& displaced) const;

    const Eigen::MatrixXd& map() const { return map_; }  // (n+1) x (m+1)
    int degree() const { return degree_; }
    std::size_t sample_count() const { return static_cast<std::size_t>(map_.cols()); }

    LeastSquaresSystem system(const std::vector<Vec3>& displaced) const;

  private:
    int degree_;
    std::vector<double> params_;
    Eigen::MatrixXd map_;
};

/// One-shot refit of displaced samples (see RefitOperator).
BezierCurve refit_curve(const CurveSamples& samples,
                        const std::vector<Vec3>& displaced, int degree);

/// Bernstein design matrix: rows = params, cols = basis index 0..n.
Eigen::MatrixXd bernstein_matrix(int degree, const std::vector<double>& params);

/// Same but with basis derivatives (for tangents).
Eigen::MatrixXd bernstein_deriv_matrix(int degree, const std::vector<double>& params);

}  // namespace frametwin
