#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace frametwin {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;

// Thrown when inputs violate an operation's preconditions.
struct invalid_argument_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Thrown when a linear system is numerically unsolvable.
struct ill_conditioned_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a curve has no usable tangent anywhere.
struct degenerate_curve_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown on non-finite values reaching a numeric kernel.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Distance query against an empty printed set.
struct undefined_distance_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Aabb {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void expand(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    Vec3 center() const { return 0.5 * (min + max); }
    Vec3 extent() const { return max - min; }
    double diagonal() const { return (max - min).norm(); }
    bool valid() const { return (max.array() >= min.array()).all(); }

    // Grow by a per-side scale factor about the center (1.0 = unchanged).
    Aabb enlarged(double factor) const {
        Aabb out;
        Vec3 c = center();
        Vec3 h = 0.5 * factor * extent();
        out.min = c - h;
        out.max = c + h;
        return out;
    }
};

}  // namespace frametwin
