#pragma once

#include "frametwin/optimize.hpp"

namespace frametwin {

// Analytic stand-ins for physical deformation, chosen so exact expected
// displacements exist for assertions. Units are model units (mm).
struct DeformOracle {
    enum class Kind { none, translate, sag, tip_bend, affine };

    Kind kind = Kind::none;
    Vec3 v = Vec3::Zero();        // translate
    double a = 0.0;               // sag / tip_bend magnitude
    double base_height = 0.0;     // sag reference height
    int axis = 0;                 // tip_bend direction
    Mat3 A = Mat3::Zero();        // affine
    Vec3 t = Vec3::Zero();

    Vec3 displacement(const Vec3& x) const;

    static DeformOracle none();
    static DeformOracle translate(const Vec3& v);
    static DeformOracle sag(double a, double base_height);
    static DeformOracle tip_bend(int axis, double a);
    static DeformOracle affine(const Mat3& A, const Vec3& t);
};

struct GtGeometry {
    std::map<int, BezierCurve> curves;  // printed edges, deformed + refit
    std::map<int, Vec3> vertices;       // printed vertices, displaced
};

struct SceneOptions {
    int n_views = 8;
    int width = 256, height = 256;
    int K = 32, m = 64, degree = 3;
    double tau = 0.4;
    double alpha = 0.995;
    bool noise = false;               // uniform +/- 1/255 pixel noise
    std::vector<int> exclude_edges;   // printed edges omitted from GT images
    RasterConfig raster;
};

struct SceneBundle {
    WireframeGraph graph;
    PrintPlan plan;
    int t = 0;
    std::vector<Camera> cameras;
    std::vector<ImageF> images;
    GtGeometry gt;
    std::uint64_t seed = 0;
};

/// Cameras equally spaced on a circle of radius 2x the bbox diagonal at
/// 30 degrees elevation, looking at the bbox centroid; focal length sized
/// so the bbox spans ~70% of the image height.
std::vector<Camera> make_cameras(int n, const Aabb& bbox, int width, int height);

/// Displaces dense samples of every printed edge by the oracle and refits.
GtGeometry apply_oracle(const WireframeGraph& graph, const PartialState& partial,
                        const DeformOracle& oracle, int m = 64, int degree = 3);

/// Ground-truth scene after batches 1..t: oracle-deformed printed geometry
/// rendered from n_views virtual cameras.
SceneBundle generate_scene(const WireframeGraph& graph, const PrintPlan& plan,
                           int t, const DeformOracle& oracle, std::uint64_t seed,
                           const SceneOptions& opts = {});

/// Symmetric Chamfer distance between two point sets.
double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

/// Dense samples (m per edge) of a set of curves.
std::vector<Vec3> curve_points(const std::map<int, BezierCurve>& curves, int m = 64);

/// E_max: max over dense samples of the deviation between matching edges.
double max_displacement(const std::map<int, BezierCurve>& twin,
                        const std::map<int, BezierCurve>& planned, int m = 64);

struct RoundRecord {
    int round = 0;
    std::vector<LossBreakdown> trace;
    double chamfer_twin_gt = 0;
    double chamfer_planned_gt = 0;
    double e_max = 0;
    std::vector<ImageF> images;   // that round's captured views
    WireframeGraph working_plan;  // snapshot after blending
};

struct RunReport {
    std::vector<RoundRecord> rounds;
    bool aborted = false;
};

struct AdaptiveConfig {
    TwinConfig twin;
    LossWeights weights;
    SceneOptions scene;
};

/// Closed-loop printing simulation: per round, the physical world deforms
/// the printed geometry by that round's oracle (accumulating), the twin is
/// reconstructed from rendered views, and the unprinted struts are blended
/// onto it to update the working plan.
RunReport adaptive_sim(const WireframeGraph& graph, const PrintPlan& plan,
                       const std::vector<DeformOracle>& oracles,
                       const AdaptiveConfig& cfg);

}  // namespace frametwin
