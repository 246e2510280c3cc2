#include <benchmark/benchmark.h>

#include "frametwin/optimize.hpp"
#include "frametwin/rng.hpp"
#include "frametwin/synth.hpp"

using namespace frametwin;

namespace {

EncodingConfig enc10() {
    EncodingConfig enc;
    enc.bbox_min = Vec3(0, 0, 0);
    enc.bbox_max = Vec3(10, 10, 10);
    return enc;
}

std::vector<BezierCurve> strut_set(int n) {
    CounterRng rng(3);
    std::vector<BezierCurve> curves;
    for (int i = 0; i < n; ++i) {
        Vec3 a(rng.uniform(0, i, 1, 9), rng.uniform(1, i, 1, 9), rng.uniform(2, i, 1, 9));
        Vec3 b(rng.uniform(3, i, 1, 9), rng.uniform(4, i, 1, 9), rng.uniform(5, i, 1, 9));
        curves.push_back(BezierCurve::segment(a, b, 3));
    }
    return curves;
}

}  // namespace

static void BM_MlpForward(benchmark::State& state) {
    MlpParams f = zero_init(1, enc10());
    const int n = static_cast<int>(state.range(0));
    Eigen::Matrix3Xd pts = Eigen::Matrix3Xd::Random(3, n) * 4.0 +
                           Eigen::Matrix3Xd::Constant(3, n, 5.0);
    MlpForward ws;
    for (auto _ : state) {
        mlp_forward(f, pts, ws);
        benchmark::DoNotOptimize(ws.out);
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_MlpForward)->Arg(65)->Arg(512);

static void BM_MlpBackward(benchmark::State& state) {
    MlpParams f = zero_init(1, enc10());
    const int n = static_cast<int>(state.range(0));
    Eigen::Matrix3Xd pts = Eigen::Matrix3Xd::Random(3, n) * 4.0 +
                           Eigen::Matrix3Xd::Constant(3, n, 5.0);
    MlpForward ws;
    mlp_forward(f, pts, ws);
    Eigen::Matrix3Xd adj = Eigen::Matrix3Xd::Ones(3, n);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(f.param_count());
    for (auto _ : state) {
        grad.setZero();
        mlp_backward(f, ws, adj, grad);
        benchmark::DoNotOptimize(grad);
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_MlpBackward)->Arg(65)->Arg(512);

static void BM_Refit(benchmark::State& state) {
    BezierCurve c = strut_set(1)[0];
    CurveSamples samples = sample_curve(c, 64);
    std::vector<Vec3> displaced = samples.points;
    RefitOperator op(3, samples.params);
    for (auto _ : state) {
        BezierCurve out = op.apply(displaced);
        benchmark::DoNotOptimize(out.ctrl);
    }
}
BENCHMARK(BM_Refit);

static void BM_BishopFrames(benchmark::State& state) {
    BezierCurve c;
    c.degree = 3;
    c.ctrl = {Vec3(2, 0, 0), Vec3(2, 4, 2), Vec3(-2, 4, 4), Vec3(-2, 0, 6)};
    std::vector<double> params(33);
    for (int j = 0; j <= 32; ++j) params[j] = j / 32.0;
    for (auto _ : state) {
        auto frames = bishop_frames(c, params);
        benchmark::DoNotOptimize(frames);
    }
}
BENCHMARK(BM_BishopFrames);

static void BM_Rasterize(benchmark::State& state) {
    const int res = static_cast<int>(state.range(0));
    std::vector<BezierCurve> curves = strut_set(12);
    Aabb box;
    for (const auto& c : curves)
        for (const Vec3& p : c.ctrl) box.expand(p);
    Camera cam = make_cameras(1, box, res, res)[0];
    std::vector<std::vector<double>> tau(12, std::vector<double>(16, 0.4));
    std::vector<std::vector<double>> alpha(12, std::vector<double>(16, 0.99));
    for (auto _ : state) {
        ImageF img = render_curves(curves, tau, alpha, cam, 16, {});
        benchmark::DoNotOptimize(img.intensities);
    }
    state.SetItemsProcessed(state.iterations() * res * res);
}
BENCHMARK(BM_Rasterize)->Arg(128)->Arg(256);

static void BM_PipelineIteration(benchmark::State& state) {
    std::vector<BezierCurve> curves = strut_set(12);
    Aabb box;
    for (const auto& c : curves)
        for (const Vec3& p : c.ctrl) box.expand(p);
    std::vector<Camera> cams = make_cameras(4, box, 128, 128);
    EncodingConfig enc;
    Aabb dom = box.enlarged(1.1);
    enc.bbox_min = dom.min;
    enc.bbox_max = dom.max;
    MlpParams field = zero_init(1, enc);
    PipelineConfig cfg;
    cfg.m = 32;
    cfg.K = 16;
    std::vector<Eigen::VectorXd> s(12, Eigen::VectorXd::Constant(16, raw_from_tau(0.4)));
    std::vector<Eigen::VectorXd> a(12, Eigen::VectorXd::Constant(16, raw_from_alpha(0.99)));
    std::vector<ImageF> captured;
    {
        SceneTape t;
        pipeline_forward(curves, field, s, a, cams, cfg, t);
        for (const auto& vt : t.views) {
            ImageF img = vt.image;
            for (double& v : img.intensities) v = std::min(1.0, v + 0.01);
            captured.push_back(img);
        }
    }
    ParamGrads grads;
    for (auto _ : state) {
        SceneTape tape;
        pipeline_forward(curves, field, s, a, cams, cfg, tape);
        std::vector<ImageF> rendered;
        for (const auto& vt : tape.views) rendered.push_back(vt.image);
        std::vector<ImageF> adj;
        double l = loss_img(rendered, captured, &adj);
        grads.theta = Eigen::VectorXd::Zero(field.param_count());
        grads.s.assign(12, Eigen::VectorXd::Zero(16));
        grads.a.assign(12, Eigen::VectorXd::Zero(16));
        pipeline_backward(field, cams, tape, adj, grads);
        benchmark::DoNotOptimize(l);
        benchmark::DoNotOptimize(grads.theta);
    }
}
BENCHMARK(BM_PipelineIteration);

static void BM_BendLoss(benchmark::State& state) {
    MlpParams f = zero_init(1, enc10());
    Aabb box;
    box.expand(Vec3(0, 0, 0));
    box.expand(Vec3(10, 10, 10));
    std::vector<Vec3> printed;
    for (const auto& c : strut_set(12))
        for (int j = 0; j <= 32; ++j) printed.push_back(c.eval(j / 32.0));
    LossWeights w;
    w.bend_samples = static_cast<int>(state.range(0));
    CounterRng rng(2);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(f.param_count());
    for (auto _ : state) {
        grad.setZero();
        double l = loss_bend(f, printed, w, box, rng, 1, &grad);
        benchmark::DoNotOptimize(l);
    }
    state.SetItemsProcessed(state.iterations() * w.bend_samples);
}
BENCHMARK(BM_BendLoss)->Arg(128)->Arg(1024);

BENCHMARK_MAIN();
