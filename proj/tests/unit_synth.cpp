#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "frametwin/synth.hpp"

using namespace frametwin;

namespace {

WireframeGraph vertical_struts() {
    WireframeGraph g;
    g.vertices = {Vec3(0, 0, 0), Vec3(0, 0, 10), Vec3(6, 0, 0), Vec3(6, 0, 10)};
    auto add = [&](int a, int b) {
        WireframeEdge e;
        e.v0 = a;
        e.v1 = b;
        e.curve = BezierCurve::segment(g.vertices[a], g.vertices[b], 3);
        g.edges.push_back(e);
    };
    add(0, 1);
    add(2, 3);
    add(1, 3);  // top rail
    return g;
}

PartialState all_printed(const WireframeGraph& g) {
    PartialState st;
    for (std::size_t e = 0; e < g.edges.size(); ++e)
        st.printed_edges.insert(static_cast<int>(e));
    resolve_vertices(st, g);
    return st;
}

Vec2 project(const Camera& cam, const Vec3& p) {
    Vec3 pc = cam.rotation() * p + cam.translation();
    return Vec2(cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy);
}

}  // namespace

TEST_CASE("deformation oracles") {
    CHECK(DeformOracle::none().displacement(Vec3(1, 2, 3)).norm() == 0.0);
    CHECK((DeformOracle::translate(Vec3(1, -2, 0.5)).displacement(Vec3(9, 9, 9)) -
           Vec3(1, -2, 0.5)).norm() == 0.0);

    DeformOracle sag = DeformOracle::sag(0.05, 0.0);
    CHECK((sag.displacement(Vec3(3, 4, 10)) - Vec3(0, 0, -5)).norm() < 1e-12);
    CHECK(sag.displacement(Vec3(3, 4, 0)).norm() == 0.0);

    DeformOracle bend = DeformOracle::tip_bend(0, 0.01);
    CHECK((bend.displacement(Vec3(0, 0, 10)) - Vec3(1, 0, 0)).norm() < 1e-12);
    CHECK_THROWS_AS(DeformOracle::tip_bend(3, 0.01), invalid_argument_error);

    Mat3 A;
    A << 0.1, 0, 0, 0, 0, 0, 0, 0, 0;
    DeformOracle aff = DeformOracle::affine(A, Vec3(0, 1, 0));
    CHECK((aff.displacement(Vec3(2, 5, 5)) - Vec3(0.2, 1, 0)).norm() < 1e-12);
}

TEST_CASE("virtual camera rig") {
    WireframeGraph g = vertical_struts();
    Aabb box = g.bounds();

    SUBCASE("poses are orthonormal and evenly spaced on the ring") {
        auto cams = make_cameras(8, box, 128, 96);
        REQUIRE(cams.size() == 8);
        const double radius = 2.0 * box.diagonal();
        for (const Camera& cam : cams) {
            Mat3 R = cam.rotation();
            CHECK((R * R.transpose() - Mat3::Identity()).norm() < 1e-12);
            CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-12));
            // camera center sits on the ring at 30 degrees elevation
            Vec3 pos = -R.transpose() * cam.translation();
            CHECK((pos - box.center()).norm() == doctest::Approx(radius).epsilon(1e-12));
            CHECK(pos.z() - box.center().z() ==
                  doctest::Approx(radius * 0.5).epsilon(1e-12));
            CHECK(cam.fy == doctest::Approx(0.7 * 96 * 2.0).epsilon(1e-12));
            CHECK(cam.cx == doctest::Approx(63.5));
            // looking straight at the centroid
            CHECK((project(cam, box.center()) - Vec2(cam.cx, cam.cy)).norm() < 1e-9);
        }
        // all eight azimuths are distinct
        for (int i = 1; i < 8; ++i) {
            Vec3 p0 = -cams[0].rotation().transpose() * cams[0].translation();
            Vec3 pi = -cams[i].rotation().transpose() * cams[i].translation();
            CHECK((p0 - pi).norm() > 0.1 * radius);
        }
    }
    SUBCASE("bad inputs throw") {
        CHECK_THROWS_AS(make_cameras(0, box, 64, 64), invalid_argument_error);
        Aabb degen;
        degen.expand(Vec3(1, 1, 1));
        CHECK_THROWS_AS(make_cameras(4, degen, 64, 64), invalid_argument_error);
        CHECK_THROWS_AS(make_cameras(4, Aabb{}, 64, 64), invalid_argument_error);
    }
}

TEST_CASE("oracle application to the printed subgraph") {
    WireframeGraph g = vertical_struts();
    PartialState st = all_printed(g);

    SUBCASE("identity oracle reproduces the plan") {
        GtGeometry gt = apply_oracle(g, st, DeformOracle::none());
        for (const auto& [e, c] : gt.curves)
            for (int i = 0; i <= 3; ++i)
                CHECK((c.ctrl[i] - g.edges[e].curve.ctrl[i]).norm() < 1e-9);
        for (const auto& [v, p] : gt.vertices)
            CHECK((p - g.vertices[v]).norm() == 0.0);
    }
    SUBCASE("translation shifts control points rigidly") {
        Vec3 d(0.3, -0.1, 0.7);
        GtGeometry gt = apply_oracle(g, st, DeformOracle::translate(d));
        for (const auto& [e, c] : gt.curves)
            for (int i = 0; i <= 3; ++i)
                CHECK((c.ctrl[i] - (g.edges[e].curve.ctrl[i] + d)).norm() < 1e-9);
    }
    SUBCASE("sag drops a vertical strut tip by a z^2 profile") {
        // quadratic in the curve parameter, so the cubic refit is exact
        GtGeometry gt = apply_oracle(g, st, DeformOracle::sag(0.05, 0.0));
        CHECK((gt.curves[0].eval(1.0) - Vec3(0, 0, 5)).norm() < 1e-9);
        CHECK((gt.curves[0].eval(0.5) - Vec3(0, 0, 3.75)).norm() < 1e-9);
        CHECK((gt.vertices[1] - Vec3(0, 0, 5)).norm() < 1e-12);
        CHECK((gt.vertices[0] - Vec3(0, 0, 0)).norm() == 0.0);
    }
    SUBCASE("only printed edges appear") {
        PartialState part;
        part.printed_edges = {1};
        resolve_vertices(part, g);
        GtGeometry gt = apply_oracle(g, part, DeformOracle::none());
        CHECK(gt.curves.size() == 1);
        CHECK(gt.curves.count(1) == 1);
        CHECK(gt.vertices.size() == 2);
    }
}

TEST_CASE("synthetic scene generation") {
    WireframeGraph g = vertical_struts();
    PrintPlan plan;
    plan.batches = {{0, 1}, {2}};
    SceneOptions opts;
    opts.n_views = 2;
    opts.width = opts.height = 64;
    opts.K = 8;
    opts.m = 16;

    SUBCASE("identity oracle reproduces renders of the plan") {
        SceneBundle b = generate_scene(g, plan, 2, DeformOracle::none(), 7, opts);
        REQUIRE(b.images.size() == 2);
        double tau = tau_from_raw(raw_from_tau(opts.tau));
        double alpha = alpha_from_raw(raw_from_alpha(opts.alpha));
        std::vector<BezierCurve> curves;
        for (std::size_t e = 0; e < g.edges.size(); ++e) curves.push_back(g.edges[e].curve);
        std::vector<std::vector<double>> taus(3, std::vector<double>(opts.K, tau));
        std::vector<std::vector<double>> alphas(3, std::vector<double>(opts.K, alpha));
        for (int i = 0; i < 2; ++i) {
            ImageF ref = render_curves(curves, taus, alphas, b.cameras[i], opts.K,
                                       opts.raster);
            double sum = 0;
            for (std::size_t k = 0; k < ref.intensities.size(); ++k) {
                CHECK(std::abs(b.images[i].intensities[k] - ref.intensities[k]) < 1e-9);
                sum += ref.intensities[k];
            }
            CHECK(sum > 0.0);  // the scene is actually visible
        }
    }
    SUBCASE("same seed is bit-identical, different seed is not (with noise)") {
        SceneOptions no = opts;
        no.noise = true;
        SceneBundle b1 = generate_scene(g, plan, 2, DeformOracle::none(), 7, no);
        SceneBundle b2 = generate_scene(g, plan, 2, DeformOracle::none(), 7, no);
        SceneBundle b3 = generate_scene(g, plan, 2, DeformOracle::none(), 8, no);
        bool same = true, differ = false;
        for (int i = 0; i < 2; ++i)
            for (std::size_t k = 0; k < b1.images[i].intensities.size(); ++k) {
                same = same && b1.images[i].intensities[k] == b2.images[i].intensities[k];
                differ = differ || b1.images[i].intensities[k] != b3.images[i].intensities[k];
            }
        CHECK(same);
        CHECK(differ);
        for (const ImageF& img : b1.images)
            for (double v : img.intensities) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
    }
    SUBCASE("excluded edges disappear from the views") {
        SceneOptions ex = opts;
        ex.exclude_edges = {0, 1, 2};
        SceneBundle b = generate_scene(g, plan, 2, DeformOracle::none(), 7, ex);
        for (const ImageF& img : b.images)
            for (double v : img.intensities) CHECK(v == 0.0);
    }
    SUBCASE("t before the first batch throws") {
        CHECK_THROWS_AS(generate_scene(g, plan, 0, DeformOracle::none(), 7, opts),
                        invalid_argument_error);
    }
}

TEST_CASE("chamfer distance") {
    std::vector<Vec3> a = {Vec3(0, 0, 0)};
    CHECK(chamfer(a, a) == 0.0);
    std::vector<Vec3> b = {Vec3(3, 0, 0)};
    CHECK(chamfer(a, b) == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(chamfer(a, b) == chamfer(b, a));
    // asymmetric sets: one_sided(a,b)=0, one_sided(b,a)=(0+3)/2
    std::vector<Vec3> c = {Vec3(0, 0, 0), Vec3(3, 0, 0)};
    CHECK(chamfer(a, c) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK_THROWS_AS(chamfer({}, a), invalid_argument_error);
    CHECK_THROWS_AS(chamfer(a, {}), invalid_argument_error);
}

TEST_CASE("dense curve points and max displacement") {
    WireframeGraph g = vertical_struts();
    std::map<int, BezierCurve> planned, moved;
    for (int e = 0; e < 2; ++e) planned[e] = g.edges[e].curve;
    CHECK(curve_points(planned, 16).size() == 2 * 17);

    moved = planned;
    CHECK(max_displacement(moved, planned) == 0.0);
    for (auto& p : moved[1].ctrl) p += Vec3(0, 0.25, 0);
    CHECK(max_displacement(moved, planned) == doctest::Approx(0.25).epsilon(1e-12));

    std::map<int, BezierCurve> extra = moved;
    extra[9] = g.edges[2].curve;
    CHECK_THROWS_AS(max_displacement(extra, planned), invalid_argument_error);
}

TEST_CASE("adaptive loop with a zero oracle keeps the plan nearly unchanged") {
    WireframeGraph g = vertical_struts();
    PrintPlan plan;
    plan.batches = {{0, 1}, {2}};

    AdaptiveConfig cfg;
    cfg.twin.seed = 3;
    cfg.twin.K = 8;
    cfg.twin.m = 16;
    cfg.twin.max_iters = 2;
    cfg.twin.alpha_init = 0.9;
    cfg.weights.w_bend = 0.0;
    cfg.scene.n_views = 2;
    cfg.scene.width = cfg.scene.height = 48;
    cfg.scene.K = 8;
    cfg.scene.m = 16;
    cfg.scene.alpha = 0.9;

    std::vector<DeformOracle> oracles = {DeformOracle::none(), DeformOracle::none()};
    RunReport rep = adaptive_sim(g, plan, oracles, cfg);

    CHECK(!rep.aborted);
    REQUIRE(rep.rounds.size() == 2);
    for (std::size_t t = 0; t < 2; ++t) {
        const RoundRecord& rr = rep.rounds[t];
        CHECK(rr.round == static_cast<int>(t) + 1);
        CHECK(rr.images.size() == 2);
        CHECK(!rr.trace.empty());
        // nothing deformed, so the plan already matches the ground truth and
        // the twin can only drift by the few optimizer steps it took
        CHECK(rr.chamfer_planned_gt < 1e-6);
        CHECK(rr.chamfer_twin_gt < 0.05);
        CHECK(rr.e_max < 0.05);
        for (std::size_t e = 0; e < g.edges.size(); ++e)
            for (int i = 0; i <= 3; ++i)
                CHECK((rr.working_plan.edges[e].curve.ctrl[i] -
                       g.edges[e].curve.ctrl[i]).norm() < 0.05);
    }

    CHECK_THROWS_AS(adaptive_sim(g, plan, {DeformOracle::none()}, cfg),
                    invalid_argument_error);
}
