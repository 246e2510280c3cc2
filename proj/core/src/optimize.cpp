#include "frametwin/optimize.hpp"

#include <algorithm>
#include <cmath>

namespace frametwin {

namespace {
constexpr std::uint64_t kBendStreamBase = 0x62656e64ull;  // per-iteration offset
constexpr int kBendChunk = 512;                           // points per MLP batch
}  // namespace

double AdamState::lr() const {
    return std::max(lr0 * std::pow(decay, static_cast<double>(step)), lr_min);
}

void AdamState::resize(Eigen::Index n) {
    m = Eigen::VectorXd::Zero(n);
    v = Eigen::VectorXd::Zero(n);
    step = 0;
}

void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::VectorXd& grads) {
    if (params.size() != state.m.size() || grads.size() != params.size())
        throw invalid_argument_error("adam_step: shape mismatch");
    if (!grads.allFinite())
        throw numeric_error("adam_step: non-finite gradient");

    const double rate = state.lr();
    state.step += 1;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseProduct(grads);
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    Eigen::ArrayXd update =
        (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + state.eps);
    if (state.lr_scale.size() == params.size())
        update *= state.lr_scale.array();
    params.array() -= rate * update;
}

double loss_img(const std::vector<ImageF>& rendered,
                const std::vector<ImageF>& captured,
                std::vector<ImageF>* adjoints) {
    if (rendered.size() != captured.size())
        throw invalid_argument_error("loss_img: view count mismatch");
    if (adjoints) adjoints->assign(rendered.size(), {});
    double total = 0.0;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        const ImageF& r = rendered[i];
        const ImageF& c = captured[i];
        if (r.width != c.width || r.height != c.height)
            throw invalid_argument_error("loss_img: image dimension mismatch");
        ImageF* adj = adjoints ? &(*adjoints)[i] : nullptr;
        if (adj) *adj = ImageF(r.width, r.height);
        for (std::size_t k = 0; k < r.intensities.size(); ++k) {
            double res = r.intensities[k] - c.intensities[k];
            total += std::abs(res);
            if (adj) adj->intensities[k] = (res > 0) - (res < 0);
        }
    }
    return total;
}

double gamma_weight(const Vec3& x, const std::vector<Vec3>& printed_pts,
                    double p) {
    if (p == 0.0) return 1.0;
    if (printed_pts.empty())
        throw undefined_distance_error("gamma: no printed geometry");
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& q : printed_pts) best = std::min(best, (x - q).squaredNorm());
    return std::pow(std::sqrt(best), p);
}

double loss_bend(const MlpParams& field, const std::vector<Vec3>& printed_pts,
                 const LossWeights& weights, const Aabb& domain,
                 const CounterRng& rng, std::uint64_t stream,
                 Eigen::VectorXd* grad_theta) {
    if (weights.bend_samples < 1)
        throw invalid_argument_error("loss_bend: bend_samples must be >= 1");
    const Vec3 ext = domain.extent();
    double h = weights.fd_step > 0 ? weights.fd_step : 0.01 * domain.diagonal();
    if (h <= 0 || h > ext.minCoeff())
        throw invalid_argument_error("loss_bend: fd_step exceeds the domain extent");

    const int N = weights.bend_samples;
    const double vol = ext.prod();
    const double inv_h2 = 1.0 / (h * h);
    double acc = 0.0;

    for (int base = 0; base < N; base += kBendChunk) {
        const int n = std::min(kBendChunk, N - base);
        Eigen::Matrix3Xd pts(3, 7 * n);
        std::vector<double> gam(n);
        for (int i = 0; i < n; ++i) {
            const std::uint64_t idx = static_cast<std::uint64_t>(base + i);
            Vec3 x(rng.uniform(stream, 3 * idx, domain.min.x(), domain.max.x()),
                   rng.uniform(stream, 3 * idx + 1, domain.min.y(), domain.max.y()),
                   rng.uniform(stream, 3 * idx + 2, domain.min.z(), domain.max.z()));
            gam[i] = gamma_weight(x, printed_pts, weights.p_exponent);
            pts.col(7 * i) = x;
            for (int ax = 0; ax < 3; ++ax) {
                pts.col(7 * i + 1 + 2 * ax) = x + h * Vec3::Unit(ax);
                pts.col(7 * i + 2 + 2 * ax) = x - h * Vec3::Unit(ax);
            }
        }
        MlpForward ws;
        mlp_forward(field, pts, ws);
        Eigen::Matrix3Xd adj;
        if (grad_theta) adj = Eigen::Matrix3Xd::Zero(3, 7 * n);
        for (int i = 0; i < n; ++i) {
            Vec3 lap = -6.0 * ws.out.col(7 * i);
            for (int k = 1; k < 7; ++k) lap += ws.out.col(7 * i + k);
            lap *= inv_h2;
            acc += gam[i] * lap.squaredNorm();
            if (grad_theta) {
                Vec3 dlap = (2.0 * gam[i] * vol / N) * lap;
                adj.col(7 * i) = -6.0 * inv_h2 * dlap;
                for (int k = 1; k < 7; ++k) adj.col(7 * i + k) = inv_h2 * dlap;
            }
        }
        if (grad_theta) mlp_backward(field, ws, adj, *grad_theta);
    }
    return vol * acc / N;
}

LossBreakdown total_loss(double l_img, double l_bend, const LossWeights& weights) {
    LossBreakdown b;
    b.l_img = l_img;
    b.l_bend = l_bend;
    b.l_total = l_img + weights.w_bend * l_bend;
    return b;
}

namespace {

struct FlatLayout {
    Eigen::Index n_theta = 0;
    Eigen::Index per_edge = 0;  // K
    std::size_t n_edges = 0;

    Eigen::Index total() const {
        return n_theta + 2 * per_edge * static_cast<Eigen::Index>(n_edges);
    }
    Eigen::Index s_off(std::size_t e) const {
        return n_theta + per_edge * static_cast<Eigen::Index>(e);
    }
    Eigen::Index a_off(std::size_t e) const {
        return n_theta + per_edge * static_cast<Eigen::Index>(n_edges + e);
    }
};

}  // namespace

TwinResult construct_twin(const WireframeGraph& graph, const PartialState& partial,
                          const std::vector<Camera>& cams,
                          const std::vector<ImageF>& captured,
                          const TwinConfig& cfg, const LossWeights& weights) {
    if (partial.empty())
        throw invalid_argument_error("construct_twin: nothing has been printed");
    if (cams.size() != captured.size())
        throw invalid_argument_error("construct_twin: captured images do not match cameras");

    std::vector<int> edge_ids(partial.printed_edges.begin(),
                              partial.printed_edges.end());
    std::vector<BezierCurve> curves;
    std::map<int, BezierCurve> planned;
    for (int e : edge_ids) {
        curves.push_back(graph.edges[e].curve);
        planned[e] = graph.edges[e].curve;
    }

    Aabb domain = graph.bounds().enlarged(cfg.bbox_enlarge);
    EncodingConfig enc;
    enc.bbox_min = domain.min;
    enc.bbox_max = domain.max;

    TwinResult res;
    res.field = zero_init(cfg.seed, enc);

    PipelineConfig pcfg;
    pcfg.degree = cfg.degree;
    pcfg.m = cfg.m;
    pcfg.K = cfg.K;
    pcfg.raster = cfg.raster;

    FlatLayout lay;
    lay.n_theta = res.field.param_count();
    lay.per_edge = cfg.K;
    lay.n_edges = edge_ids.size();

    Eigen::VectorXd x(lay.total());
    x.head(lay.n_theta) = res.field.flatten();
    for (std::size_t e = 0; e < lay.n_edges; ++e) {
        x.segment(lay.s_off(e), cfg.K).setConstant(raw_from_tau(cfg.tau_init));
        x.segment(lay.a_off(e), cfg.K).setConstant(raw_from_alpha(cfg.alpha_init));
    }

    AdamState adam;
    adam.resize(lay.total());
    adam.lr_scale = Eigen::VectorXd::Ones(lay.total());
    for (std::size_t e = 0; e < lay.n_edges; ++e) {
        adam.lr_scale.segment(lay.s_off(e), cfg.K).setConstant(cfg.lr_scale_s);
        adam.lr_scale.segment(lay.a_off(e), cfg.K).setConstant(cfg.lr_scale_a);
    }

    std::vector<Vec3> printed_pts;
    const bool use_bend = weights.w_bend > 0.0;
    if (use_bend && weights.p_exponent > 0.0)
        printed_pts = printed_samples(partial, planned, cfg.m);

    CounterRng rng(cfg.seed);
    std::vector<Eigen::VectorXd> s(lay.n_edges), a(lay.n_edges);
    ParamGrads grads;
    grads.s.resize(lay.n_edges);
    grads.a.resize(lay.n_edges);
    SceneTape tape;

    auto unpack = [&] {
        res.field.set_from_flat(x.head(lay.n_theta));
        for (std::size_t e = 0; e < lay.n_edges; ++e) {
            s[e] = x.segment(lay.s_off(e), cfg.K);
            a[e] = x.segment(lay.a_off(e), cfg.K);
        }
    };

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        unpack();
        tape = SceneTape{};
        pipeline_forward(curves, res.field, s, a, cams, pcfg, tape);

        std::vector<ImageF> rendered;
        rendered.reserve(tape.views.size());
        for (const ViewTape& vt : tape.views) rendered.push_back(vt.image);
        std::vector<ImageF> adjoints;
        double l_img = loss_img(rendered, captured, &adjoints);

        grads.theta = Eigen::VectorXd::Zero(lay.n_theta);
        for (std::size_t e = 0; e < lay.n_edges; ++e) {
            grads.s[e] = Eigen::VectorXd::Zero(cfg.K);
            grads.a[e] = Eigen::VectorXd::Zero(cfg.K);
        }
        pipeline_backward(res.field, cams, tape, adjoints, grads);

        double l_bend = 0.0;
        if (use_bend) {
            Eigen::VectorXd bend_grad = Eigen::VectorXd::Zero(lay.n_theta);
            l_bend = loss_bend(res.field, printed_pts, weights, domain, rng,
                               kBendStreamBase + static_cast<std::uint64_t>(iter),
                               &bend_grad);
            grads.theta += weights.w_bend * bend_grad;
        }

        LossBreakdown bk = total_loss(l_img, l_bend, weights);
        bk.iteration = iter;
        bk.lr = adam.lr();
        res.trace.push_back(bk);

        if (!std::isfinite(bk.l_total)) {
            res.aborted = true;
            break;
        }

        if (iter > cfg.window) {
            double prev = res.trace[iter - 1 - cfg.window].l_total;
            double rel = std::abs(bk.l_total - prev) / std::max(std::abs(prev), 1e-12);
            if (rel < cfg.rel_tol) break;
        }

        Eigen::VectorXd g(lay.total());
        g.head(lay.n_theta) = grads.theta;
        for (std::size_t e = 0; e < lay.n_edges; ++e) {
            g.segment(lay.s_off(e), cfg.K) = grads.s[e];
            g.segment(lay.a_off(e), cfg.K) = grads.a[e];
        }
        adam_step(adam, x, g);
    }

    unpack();
    std::vector<double> refit_params(cfg.m + 1);
    for (int j = 0; j <= cfg.m; ++j) refit_params[j] = static_cast<double>(j) / cfg.m;
    RefitOperator op(cfg.degree, refit_params);
    for (std::size_t e = 0; e < lay.n_edges; ++e) {
        CurveSamples samples = sample_curve(curves[e], cfg.m);
        Eigen::Matrix3Xd pts(3, cfg.m + 1);
        for (int j = 0; j <= cfg.m; ++j) pts.col(j) = samples.points[j];
        MlpForward ws;
        mlp_forward(res.field, pts, ws);
        std::vector<Vec3> displaced(cfg.m + 1);
        for (int j = 0; j <= cfg.m; ++j)
            displaced[j] = samples.points[j] + Vec3(ws.out.col(j));
        res.twin.deformed_edges[edge_ids[e]] = op.apply(displaced);
        std::vector<KernelParam> kp(cfg.K);
        for (int j = 0; j < cfg.K; ++j)
            kp[j] = {tau_from_raw(s[e][j]), alpha_from_raw(a[e][j])};
        res.twin.kernel_params[edge_ids[e]] = std::move(kp);
    }
    for (int v : partial.printed_vertices)
        res.twin.deformed_vertices[v] =
            graph.vertices[v] + field_eval(res.field, graph.vertices[v]);
    return res;
}

}  // namespace frametwin
