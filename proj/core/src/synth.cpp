#include "frametwin/synth.hpp"

#include <algorithm>
#include <cmath>

namespace frametwin {

Vec3 DeformOracle::displacement(const Vec3& x) const {
    switch (kind) {
        case Kind::none:
            return Vec3::Zero();
        case Kind::translate:
            return v;
        case Kind::sag: {
            double dz = x.z() - base_height;
            return Vec3(0, 0, -a * dz * dz);
        }
        case Kind::tip_bend:
            return a * x.z() * x.z() * Vec3::Unit(axis);
        case Kind::affine:
            return A * x + t;
    }
    return Vec3::Zero();
}

DeformOracle DeformOracle::none() { return {}; }

DeformOracle DeformOracle::translate(const Vec3& v) {
    DeformOracle o;
    o.kind = Kind::translate;
    o.v = v;
    return o;
}

DeformOracle DeformOracle::sag(double a, double base_height) {
    DeformOracle o;
    o.kind = Kind::sag;
    o.a = a;
    o.base_height = base_height;
    return o;
}

DeformOracle DeformOracle::tip_bend(int axis, double a) {
    if (axis < 0 || axis > 2) throw invalid_argument_error("tip_bend: axis out of range");
    DeformOracle o;
    o.kind = Kind::tip_bend;
    o.axis = axis;
    o.a = a;
    return o;
}

DeformOracle DeformOracle::affine(const Mat3& A, const Vec3& t) {
    DeformOracle o;
    o.kind = Kind::affine;
    o.A = A;
    o.t = t;
    return o;
}

std::vector<Camera> make_cameras(int n, const Aabb& bbox, int width, int height) {
    if (n < 1) throw invalid_argument_error("make_cameras: need at least one view");
    if (!bbox.valid() || bbox.diagonal() <= 0)
        throw invalid_argument_error("make_cameras: degenerate bounding box");

    const Vec3 c = bbox.center();
    const double diag = bbox.diagonal();
    const double radius = 2.0 * diag;
    const double elev = M_PI / 6.0;

    std::vector<Camera> cams(n);
    for (int i = 0; i < n; ++i) {
        double az = 2.0 * M_PI * i / n;
        Vec3 pos = c + radius * Vec3(std::cos(az) * std::cos(elev),
                                     std::sin(az) * std::cos(elev), std::sin(elev));
        Vec3 fwd = (c - pos).normalized();
        Vec3 up(0, 0, 1);
        Vec3 right = fwd.cross(up);
        if (right.norm() < 1e-9) right = fwd.cross(Vec3(0, 1, 0));
        right.normalize();
        Vec3 down = fwd.cross(right);

        Camera& cam = cams[i];
        cam.width = width;
        cam.height = height;
        Mat3 R;
        R.row(0) = right.transpose();
        R.row(1) = down.transpose();
        R.row(2) = fwd.transpose();
        cam.world_to_cam.setIdentity();
        cam.world_to_cam.topLeftCorner<3, 3>() = R;
        cam.world_to_cam.topRightCorner<3, 1>() = -R * pos;

        // bbox (diagonal worst case) spans ~70% of the image height
        cam.fy = 0.7 * height * radius / diag;
        cam.fx = cam.fy;
        cam.cx = 0.5 * (width - 1);
        cam.cy = 0.5 * (height - 1);
    }
    return cams;
}

GtGeometry apply_oracle(const WireframeGraph& graph, const PartialState& partial,
                        const DeformOracle& oracle, int m, int degree) {
    GtGeometry gt;
    for (int e : partial.printed_edges) {
        const BezierCurve& c = graph.edges[e].curve;
        CurveSamples samples = sample_curve(c, m);
        std::vector<Vec3> displaced(samples.count());
        for (std::size_t j = 0; j < samples.count(); ++j)
            displaced[j] = samples.points[j] + oracle.displacement(samples.points[j]);
        gt.curves[e] = refit_curve(samples, displaced, degree > 0 ? degree : c.degree);
    }
    for (int v : partial.printed_vertices)
        gt.vertices[v] = graph.vertices[v] + oracle.displacement(graph.vertices[v]);
    return gt;
}

namespace {

constexpr std::uint64_t kNoiseStreamBase = 0x6e6f6973ull;

std::vector<ImageF> render_gt(const std::map<int, BezierCurve>& curves,
                              const std::vector<int>& exclude,
                              const std::vector<Camera>& cams,
                              const SceneOptions& opts, std::uint64_t seed) {
    std::vector<BezierCurve> visible;
    for (const auto& [e, c] : curves)
        if (std::find(exclude.begin(), exclude.end(), e) == exclude.end())
            visible.push_back(c);

    // Round-trip through the raw parameterization so these targets match a
    // freshly initialized twin render exactly.
    double tau = tau_from_raw(raw_from_tau(opts.tau));
    double alpha = alpha_from_raw(raw_from_alpha(opts.alpha));
    std::vector<std::vector<double>> taus(visible.size(),
                                          std::vector<double>(opts.K, tau));
    std::vector<std::vector<double>> alphas(visible.size(),
                                            std::vector<double>(opts.K, alpha));

    CounterRng rng(seed);
    std::vector<ImageF> images;
    images.reserve(cams.size());
    for (std::size_t i = 0; i < cams.size(); ++i) {
        ImageF img = render_curves(visible, taus, alphas, cams[i], opts.K, opts.raster);
        if (opts.noise) {
            for (std::size_t k = 0; k < img.intensities.size(); ++k) {
                double n = rng.uniform(kNoiseStreamBase + i, k, -1.0 / 255, 1.0 / 255);
                img.intensities[k] = std::clamp(img.intensities[k] + n, 0.0, 1.0);
            }
        }
        images.push_back(std::move(img));
    }
    return images;
}

}  // namespace

SceneBundle generate_scene(const WireframeGraph& graph, const PrintPlan& plan,
                           int t, const DeformOracle& oracle, std::uint64_t seed,
                           const SceneOptions& opts) {
    if (t < 1) throw invalid_argument_error("generate_scene: t must be >= 1");
    SceneBundle b;
    b.graph = graph;
    b.plan = plan;
    b.t = t;
    b.seed = seed;

    PartialState partial = partial_state(plan, t, graph);
    b.gt = apply_oracle(graph, partial, oracle, opts.m, opts.degree);
    b.cameras = make_cameras(opts.n_views, graph.bounds(), opts.width, opts.height);
    b.images = render_gt(b.gt.curves, opts.exclude_edges, b.cameras, opts, seed);
    return b;
}

double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty())
        throw invalid_argument_error("chamfer: empty point set");
    auto one_sided = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
        double sum = 0.0;
        for (const Vec3& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& q : to) best = std::min(best, (p - q).squaredNorm());
            sum += std::sqrt(best);
        }
        return sum / from.size();
    };
    return one_sided(a, b) + one_sided(b, a);
}

std::vector<Vec3> curve_points(const std::map<int, BezierCurve>& curves, int m) {
    std::vector<Vec3> pts;
    pts.reserve(curves.size() * (m + 1));
    for (const auto& [e, c] : curves)
        for (int j = 0; j <= m; ++j) pts.push_back(c.eval(static_cast<double>(j) / m));
    return pts;
}

double max_displacement(const std::map<int, BezierCurve>& twin,
                        const std::map<int, BezierCurve>& planned, int m) {
    double best = 0.0;
    for (const auto& [e, c] : twin) {
        auto it = planned.find(e);
        if (it == planned.end())
            throw invalid_argument_error("max_displacement: edge missing from plan");
        for (int j = 0; j <= m; ++j) {
            double u = static_cast<double>(j) / m;
            best = std::max(best, (c.eval(u) - it->second.eval(u)).norm());
        }
    }
    return best;
}

RunReport adaptive_sim(const WireframeGraph& graph, const PrintPlan& plan,
                       const std::vector<DeformOracle>& oracles,
                       const AdaptiveConfig& cfg) {
    const std::size_t rounds = plan.batches.size();
    if (oracles.size() < rounds)
        throw invalid_argument_error("adaptive_sim: need one oracle per round");

    RunReport rep;
    WireframeGraph working = graph;
    std::map<int, BezierCurve> physical;  // as-printed, oracle-deformed
    std::vector<Camera> cams = make_cameras(cfg.scene.n_views, graph.bounds(),
                                            cfg.scene.width, cfg.scene.height);

    for (std::size_t t = 1; t <= rounds; ++t) {
        PartialState partial = partial_state(plan, static_cast<int>(t), graph);

        // Newly printed struts come off the current working plan, then the
        // simulated world deforms everything printed so far.
        for (int e : plan.batches[t - 1]) physical[e] = working.edges[e].curve;
        for (auto& [e, c] : physical) {
            CurveSamples samples = sample_curve(c, cfg.scene.m);
            std::vector<Vec3> displaced(samples.count());
            for (std::size_t j = 0; j < samples.count(); ++j)
                displaced[j] = samples.points[j] +
                               oracles[t - 1].displacement(samples.points[j]);
            c = refit_curve(samples, displaced, c.degree);
        }

        std::vector<ImageF> images = render_gt(physical, {}, cams, cfg.scene,
                                               cfg.twin.seed + t);
        TwinResult tw = construct_twin(working, partial, cams, images, cfg.twin,
                                       cfg.weights);

        RoundRecord rr;
        rr.round = static_cast<int>(t);
        rr.trace = tw.trace;
        rr.images = images;
        std::vector<Vec3> gt_pts = curve_points(physical, cfg.scene.m);
        std::map<int, BezierCurve> planned_printed;
        for (int e : partial.printed_edges) planned_printed[e] = working.edges[e].curve;
        rr.chamfer_twin_gt = chamfer(curve_points(tw.twin.deformed_edges, cfg.scene.m), gt_pts);
        rr.chamfer_planned_gt = chamfer(curve_points(planned_printed, cfg.scene.m), gt_pts);
        rr.e_max = max_displacement(tw.twin.deformed_edges, planned_printed, cfg.scene.m);

        if (tw.aborted) {
            rr.working_plan = working;
            rep.rounds.push_back(std::move(rr));
            rep.aborted = true;
            break;
        }

        auto disp = [&tw](const Vec3& x) { return field_eval(tw.field, x); };
        std::map<int, BezierCurve> blended =
            blend_targets(disp, tw.twin, partial, working, cfg.scene.m);
        for (const auto& [v, p] : tw.twin.deformed_vertices) working.vertices[v] = p;
        for (const auto& [e, c] : tw.twin.deformed_edges) working.edges[e].curve = c;
        for (const auto& [e, c] : blended) working.edges[e].curve = c;

        rr.working_plan = working;
        rep.rounds.push_back(std::move(rr));
    }
    return rep;
}

}  // namespace frametwin
