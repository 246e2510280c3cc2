// frametwin: reconstruct deformed wireframe geometry from sparse grayscale
// views and simulate the adaptive printing loop around it.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "frametwin/io.hpp"

namespace fs = std::filesystem;
using namespace frametwin;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

std::uint64_t resolve_seed(std::uint64_t flag_seed) {
    if (const char* env = std::getenv("FRAMETWIN_SEED")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0') return v;
        throw invalid_argument_error("FRAMETWIN_SEED is not an integer");
    }
    return flag_seed;
}

DeformOracle parse_oracle(const std::string& spec) {
    auto colon = spec.find(':');
    std::string kind = spec.substr(0, colon);
    std::vector<double> args;
    if (colon != std::string::npos) {
        std::stringstream ss(spec.substr(colon + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) args.push_back(std::stod(tok));
    }
    if (kind == "none") return DeformOracle::none();
    if (kind == "translate") {
        if (args.size() != 3) throw invalid_argument_error("translate needs x,y,z");
        return DeformOracle::translate(Vec3(args[0], args[1], args[2]));
    }
    if (kind == "sag") {
        if (args.empty()) throw invalid_argument_error("sag needs a[,base]");
        return DeformOracle::sag(args[0], args.size() > 1 ? args[1] : 0.0);
    }
    if (kind == "tip_bend") {
        if (args.size() != 2) throw invalid_argument_error("tip_bend needs axis,a");
        return DeformOracle::tip_bend(static_cast<int>(args[0]), args[1]);
    }
    throw invalid_argument_error("unknown deformation: " + spec);
}

void require_valid(const WireframeGraph& graph) {
    ValidationReport rep = validate_graph(graph);
    for (const ValidationIssue& i : rep.issues)
        if (!i.warning) throw io_error("model: " + i.message);
}

struct GenSceneArgs {
    std::string model, plan, out, deform = "none";
    int t = 1, views = 8, res = 256;
    std::uint64_t seed = 0;
    bool noise = false;
    std::vector<int> exclude;
    double tau = 0.4, alpha = 0.995;
};

int cmd_gen_scene(const GenSceneArgs& a) {
    WireframeFile wf = read_wireframe(a.model);
    require_valid(wf.graph);
    PrintPlan plan = read_plan(a.plan);
    std::uint64_t seed = resolve_seed(a.seed);

    SceneOptions opts;
    opts.n_views = a.views;
    opts.width = opts.height = a.res;
    opts.degree = wf.degree;
    opts.noise = a.noise;
    opts.exclude_edges = a.exclude;
    opts.tau = a.tau;
    opts.alpha = a.alpha;
    DeformOracle oracle = parse_oracle(a.deform);
    SceneBundle bundle = generate_scene(wf.graph, plan, a.t, oracle, seed, opts);

    fs::create_directories(a.out);
    fs::path out(a.out);
    write_wireframe(out / "model.json", wf.graph, wf.degree, wf.units);
    write_plan(out / "plan.json", plan);
    write_cameras(out / "cameras.json", bundle.cameras);

    DigitalTwin gt;
    gt.deformed_edges = bundle.gt.curves;
    gt.deformed_vertices = bundle.gt.vertices;
    for (const auto& [e, c] : gt.deformed_edges)
        gt.kernel_params[e] = std::vector<KernelParam>(
            opts.K, {tau_from_raw(raw_from_tau(opts.tau)),
                     alpha_from_raw(raw_from_alpha(opts.alpha))});
    write_twin(out / "gt.json", gt);

    for (std::size_t i = 0; i < bundle.images.size(); ++i)
        write_pgm(out / ("view_" + std::to_string(i) + ".pgm"), bundle.images[i]);

    json manifest;
    manifest["seed"] = seed;
    manifest["t"] = a.t;
    manifest["views"] = a.views;
    manifest["resolution"] = a.res;
    manifest["deform"] = a.deform;
    manifest["noise"] = a.noise;
    manifest["exclude"] = a.exclude;
    manifest["tau"] = a.tau;
    manifest["alpha"] = a.alpha;
    manifest["config_hash"] = config_hash(manifest.dump());
    std::ofstream mf(out / "manifest.json");
    mf << manifest.dump(2) << "\n";
    return 0;
}

struct TwinArgs {
    std::string scene, out;
    int iters = 300, K = 32, m = 64, bend_samples = 4096;
    double wbend = 1e-7, pexp = 2.0, fd_step = 0.0;
    double tau_init = -1.0, alpha_init = -1.0;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 1;
};

int cmd_twin(const TwinArgs& a) {
    fs::path scene(a.scene);
    if (!fs::exists(scene / "manifest.json"))
        throw io_error("not a scene directory: " + a.scene);
    json manifest = json::parse(std::ifstream(scene / "manifest.json"));

    WireframeFile wf = read_wireframe(scene / "model.json");
    require_valid(wf.graph);
    PrintPlan plan = read_plan(scene / "plan.json");
    std::vector<Camera> cams = read_cameras(scene / "cameras.json");
    std::vector<ImageF> captured;
    for (std::size_t i = 0; i < cams.size(); ++i)
        captured.push_back(read_pgm(scene / ("view_" + std::to_string(i) + ".pgm")));

    TwinConfig cfg;
    cfg.max_iters = a.iters;
    cfg.K = a.K;
    cfg.m = a.m;
    cfg.degree = wf.degree;
    cfg.seed = resolve_seed(a.seed_set ? a.seed : manifest.value("seed", 0ull));
    cfg.tau_init = a.tau_init > 0 ? a.tau_init : manifest.value("tau", 0.4);
    cfg.alpha_init = a.alpha_init > 0 ? a.alpha_init : manifest.value("alpha", 0.995);

    LossWeights weights;
    weights.w_bend = a.wbend;
    weights.p_exponent = a.pexp;
    weights.fd_step = a.fd_step;
    weights.bend_samples = a.bend_samples;

    PartialState partial = partial_state(plan, manifest.value("t", 1), wf.graph);
    TwinResult res = construct_twin(wf.graph, partial, cams, captured, cfg, weights);

    fs::create_directories(a.out);
    fs::path out(a.out);
    write_twin(out / "twin.json", res.twin);
    write_trace_csv(out / "trace.csv", res.trace);
    write_checkpoint(out / "checkpoint.bin", out / "checkpoint.json", res.field,
                     cfg.seed);
    if (res.aborted) {
        std::cerr << "twin: non-finite loss, aborted (trace written)\n";
        return kExitNumeric;
    }
    return 0;
}

struct AdaptArgs {
    std::string model, plan, out;
    std::vector<std::string> deform;
    int views = 8, res = 256, iters = 300, K = 32, m = 64, bend_samples = 4096;
    double wbend = 1e-7, pexp = 2.0, tau = 0.4, alpha = 0.995;
    std::uint64_t seed = 0;
    int threads = 1;
};

int cmd_adapt(const AdaptArgs& a) {
    WireframeFile wf = read_wireframe(a.model);
    require_valid(wf.graph);
    PrintPlan plan = read_plan(a.plan);

    AdaptiveConfig cfg;
    cfg.twin.max_iters = a.iters;
    cfg.twin.K = a.K;
    cfg.twin.m = a.m;
    cfg.twin.degree = wf.degree;
    cfg.twin.seed = resolve_seed(a.seed);
    cfg.twin.tau_init = a.tau;
    cfg.twin.alpha_init = a.alpha;
    cfg.weights.w_bend = a.wbend;
    cfg.weights.p_exponent = a.pexp;
    cfg.weights.bend_samples = a.bend_samples;
    cfg.scene.n_views = a.views;
    cfg.scene.width = cfg.scene.height = a.res;
    cfg.scene.K = a.K;
    cfg.scene.m = a.m;
    cfg.scene.degree = wf.degree;
    cfg.scene.tau = a.tau;
    cfg.scene.alpha = a.alpha;

    std::vector<DeformOracle> oracles;
    for (std::size_t t = 0; t < plan.batches.size(); ++t) {
        const std::string& spec =
            a.deform.empty() ? "none"
                             : a.deform[std::min(t, a.deform.size() - 1)];
        oracles.push_back(parse_oracle(spec));
    }

    RunReport report = adaptive_sim(wf.graph, plan, oracles, cfg);

    fs::create_directories(a.out);
    fs::path out(a.out);
    write_report(out / "report.json", report);
    for (const RoundRecord& r : report.rounds) {
        fs::path rdir = out / ("round_" + std::to_string(r.round));
        fs::create_directories(rdir);
        for (std::size_t i = 0; i < r.images.size(); ++i)
            write_pgm(rdir / ("view_" + std::to_string(i) + ".pgm"), r.images[i]);
        write_wireframe(rdir / "plan.json", r.working_plan, wf.degree, wf.units);
    }
    return report.aborted ? kExitNumeric : 0;
}

struct RenderArgs {
    std::string model, twin, cameras, out;
    int view = 0, K = 32, m = 64;
    double tau = 0.4, alpha = 0.995;
};

int cmd_render(const RenderArgs& a) {
    std::vector<Camera> cams = read_cameras(a.cameras);
    if (a.view < 0 || a.view >= static_cast<int>(cams.size()))
        throw io_error("render: view index out of range");

    std::vector<BezierCurve> curves;
    std::vector<std::vector<double>> taus, alphas;
    if (!a.twin.empty()) {
        DigitalTwin twin = read_twin(a.twin);
        for (const auto& [e, c] : twin.deformed_edges) {
            curves.push_back(c);
            const auto& kp = twin.kernel_params.at(e);
            std::vector<double> tv, av;
            for (const KernelParam& k : kp) {
                tv.push_back(k.tau);
                av.push_back(k.alpha);
            }
            taus.push_back(std::move(tv));
            alphas.push_back(std::move(av));
        }
    } else {
        WireframeFile wf = read_wireframe(a.model);
        require_valid(wf.graph);
        double tau = tau_from_raw(raw_from_tau(a.tau));
        double alpha = alpha_from_raw(raw_from_alpha(a.alpha));
        for (const WireframeEdge& e : wf.graph.edges) {
            curves.push_back(e.curve);
            taus.emplace_back(a.K, tau);
            alphas.emplace_back(a.K, alpha);
        }
    }
    ImageF img = render_curves(curves, taus, alphas, cams[a.view], a.K, {});
    write_pgm(a.out, img);
    return 0;
}

struct MetricsArgs {
    std::string twin, gt, model, out;
    int m = 64;
};

int cmd_metrics(const MetricsArgs& a) {
    DigitalTwin twin = read_twin(a.twin);
    DigitalTwin ref = read_twin(a.gt);
    if (twin.deformed_edges.size() != ref.deformed_edges.size())
        throw io_error("metrics: edge count mismatch between twin and reference");
    for (const auto& [e, c] : twin.deformed_edges)
        if (!ref.deformed_edges.count(e))
            throw io_error("metrics: edge " + std::to_string(e) +
                           " missing from reference");

    double ch = chamfer(curve_points(twin.deformed_edges, a.m),
                        curve_points(ref.deformed_edges, a.m));
    double emax = max_displacement(twin.deformed_edges, ref.deformed_edges, a.m);

    Aabb bbox;
    for (const auto& [e, c] : ref.deformed_edges)
        for (const Vec3& p : c.ctrl) bbox.expand(p);

    std::ofstream out(a.out);
    if (!out) throw io_error("cannot write " + a.out);
    char buf[256];
    out << "metric,value\n";
    std::snprintf(buf, sizeof(buf), "chamfer_mm,%.6g\n", ch);
    out << buf;
    std::snprintf(buf, sizeof(buf), "chamfer_norm,%.6g\n", ch / bbox.diagonal());
    out << buf;
    std::snprintf(buf, sizeof(buf), "e_max_mm,%.6g\n", emax);
    out << buf;
    for (const auto& [e, c] : twin.deformed_edges) {
        std::map<int, BezierCurve> one_t{{e, c}};
        std::map<int, BezierCurve> one_r{{e, ref.deformed_edges.at(e)}};
        std::snprintf(buf, sizeof(buf), "edge_%d_e_max_mm,%.6g\n", e,
                      max_displacement(one_t, one_r, a.m));
        out << buf;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deformed-wireframe digital twin toolkit"};
    app.require_subcommand(1);

    GenSceneArgs gs;
    CLI::App* gen = app.add_subcommand("gen-scene", "synthesize a target scene");
    gen->add_option("--model", gs.model)->required();
    gen->add_option("--plan", gs.plan)->required();
    gen->add_option("--t", gs.t)->check(CLI::PositiveNumber);
    gen->add_option("--views", gs.views)->check(CLI::PositiveNumber);
    gen->add_option("--res", gs.res)->check(CLI::PositiveNumber);
    gen->add_option("--deform", gs.deform);
    gen->add_option("--seed", gs.seed);
    gen->add_flag("--noise", gs.noise);
    gen->add_option("--exclude", gs.exclude);
    gen->add_option("--tau", gs.tau);
    gen->add_option("--alpha", gs.alpha);
    gen->add_option("--out", gs.out)->required();

    TwinArgs tw;
    CLI::App* twin = app.add_subcommand("twin", "reconstruct the digital twin");
    twin->add_option("--scene", tw.scene)->required();
    twin->add_option("--out", tw.out)->required();
    twin->add_option("--iters", tw.iters)->check(CLI::PositiveNumber);
    twin->add_option("--K", tw.K)->check(CLI::PositiveNumber);
    twin->add_option("--m", tw.m)->check(CLI::PositiveNumber);
    twin->add_option("--wbend", tw.wbend);
    twin->add_option("--pexp", tw.pexp);
    twin->add_option("--fd-step", tw.fd_step);
    twin->add_option("--bend-samples", tw.bend_samples);
    twin->add_option("--tau-init", tw.tau_init);
    twin->add_option("--alpha-init", tw.alpha_init);
    auto* seed_opt = twin->add_option("--seed", tw.seed);
    twin->add_option("--threads", tw.threads);

    AdaptArgs ad;
    CLI::App* adapt = app.add_subcommand("adapt", "closed-loop printing simulation");
    adapt->add_option("--model", ad.model)->required();
    adapt->add_option("--plan", ad.plan)->required();
    adapt->add_option("--deform", ad.deform);
    adapt->add_option("--views", ad.views)->check(CLI::PositiveNumber);
    adapt->add_option("--res", ad.res)->check(CLI::PositiveNumber);
    adapt->add_option("--iters", ad.iters)->check(CLI::PositiveNumber);
    adapt->add_option("--K", ad.K)->check(CLI::PositiveNumber);
    adapt->add_option("--m", ad.m)->check(CLI::PositiveNumber);
    adapt->add_option("--wbend", ad.wbend);
    adapt->add_option("--pexp", ad.pexp);
    adapt->add_option("--bend-samples", ad.bend_samples);
    adapt->add_option("--tau", ad.tau);
    adapt->add_option("--alpha", ad.alpha);
    adapt->add_option("--seed", ad.seed);
    adapt->add_option("--threads", ad.threads);
    adapt->add_option("--out", ad.out)->required();

    RenderArgs rn;
    CLI::App* render = app.add_subcommand("render", "render a model or twin");
    render->add_option("--model", rn.model);
    render->add_option("--twin", rn.twin);
    render->add_option("--cameras", rn.cameras)->required();
    render->add_option("--view", rn.view);
    render->add_option("--K", rn.K)->check(CLI::PositiveNumber);
    render->add_option("--tau", rn.tau);
    render->add_option("--alpha", rn.alpha);
    render->add_option("--out", rn.out)->required();

    MetricsArgs mt;
    CLI::App* metrics = app.add_subcommand("metrics", "compare a twin to a reference");
    metrics->add_option("--twin", mt.twin)->required();
    metrics->add_option("--ref", mt.gt)->required();
    metrics->add_option("--m", mt.m)->check(CLI::PositiveNumber);
    metrics->add_option("--out", mt.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    tw.seed_set = seed_opt->count() > 0;

    try {
        if (gen->parsed()) return cmd_gen_scene(gs);
        if (twin->parsed()) return cmd_twin(tw);
        if (adapt->parsed()) return cmd_adapt(ad);
        if (render->parsed()) {
            if (rn.model.empty() == rn.twin.empty()) {
                std::cerr << "render: provide exactly one of --model / --twin\n";
                return kExitUsage;
            }
            return cmd_render(rn);
        }
        if (metrics->parsed()) return cmd_metrics(mt);
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const invalid_argument_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ill_conditioned_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const degenerate_curve_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return 0;
}
