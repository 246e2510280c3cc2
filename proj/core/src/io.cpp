#include "frametwin/io.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace frametwin {

using nlohmann::json;

namespace {

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw io_error(path.string() + ": " + e.what());
    }
    return j;
}

// Missing/ill-typed keys surface as json exceptions; fold them into io_error
// so callers see one failure mode for malformed files.
template <typename F>
auto parse_guard(const std::filesystem::path& path, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw io_error(path.string() + ": " + e.what());
    }
}

void save_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3)
        throw io_error(std::string(what) + ": expected [x,y,z]");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json curve_ctrl_to_json(const BezierCurve& c) {
    json a = json::array();
    for (const Vec3& p : c.ctrl) a.push_back(vec3_to_json(p));
    return a;
}

std::vector<Vec3> ctrl_from_json(const json& j, const char* what) {
    if (!j.is_array()) throw io_error(std::string(what) + ": expected control point list");
    std::vector<Vec3> pts;
    for (const auto& p : j) pts.push_back(vec3_from_json(p, what));
    return pts;
}

}  // namespace

WireframeFile read_wireframe(const std::filesystem::path& path) {
    json j = load_json(path);
    return parse_guard(path, [&] {
    WireframeFile f;
    f.units = j.value("units", "mm");
    f.degree = j.value("degree", 3);
    if (f.degree < 1) throw io_error("wireframe: degree must be >= 1");
    if (!j.contains("vertices") || !j.contains("edges"))
        throw io_error("wireframe: missing vertices or edges");
    for (const auto& v : j["vertices"])
        f.graph.vertices.push_back(vec3_from_json(v, "wireframe vertex"));
    for (const auto& ej : j["edges"]) {
        WireframeEdge e;
        if (!ej.contains("v") || !ej["v"].is_array() || ej["v"].size() != 2)
            throw io_error("wireframe edge: expected \"v\":[start,end]");
        e.v0 = ej["v"][0].get<int>();
        e.v1 = ej["v"][1].get<int>();
        if (e.v0 < 0 || e.v1 < 0 ||
            e.v0 >= static_cast<int>(f.graph.vertices.size()) ||
            e.v1 >= static_cast<int>(f.graph.vertices.size()))
            throw io_error("wireframe edge: vertex index out of range");
        if (ej.contains("ctrl")) {
            std::vector<Vec3> pts = ctrl_from_json(ej["ctrl"], "wireframe ctrl");
            if (pts.size() != static_cast<std::size_t>(f.degree) + 1)
                throw io_error("wireframe ctrl: expected degree+1 control points");
            e.curve.degree = f.degree;
            e.curve.ctrl = std::move(pts);
        } else {
            e.curve = BezierCurve::segment(f.graph.vertices[e.v0],
                                           f.graph.vertices[e.v1], f.degree);
        }
        f.graph.edges.push_back(std::move(e));
    }
    return f;
    });
}

void write_wireframe(const std::filesystem::path& path, const WireframeGraph& graph,
                     int degree, const std::string& units) {
    json j;
    j["units"] = units;
    j["degree"] = degree;
    j["vertices"] = json::array();
    for (const Vec3& v : graph.vertices) j["vertices"].push_back(vec3_to_json(v));
    j["edges"] = json::array();
    for (const WireframeEdge& e : graph.edges) {
        json ej;
        ej["v"] = json::array({e.v0, e.v1});
        ej["ctrl"] = curve_ctrl_to_json(e.curve);
        j["edges"].push_back(std::move(ej));
    }
    save_json(path, j);
}

std::vector<Camera> read_cameras(const std::filesystem::path& path) {
    json j = load_json(path);
    if (!j.contains("cameras")) throw io_error("cameras: missing \"cameras\" array");
    return parse_guard(path, [&] {
    std::vector<Camera> cams;
    for (const auto& cj : j["cameras"]) {
        Camera c;
        c.width = cj.at("width").get<int>();
        c.height = cj.at("height").get<int>();
        c.fx = cj.at("fx").get<double>();
        c.fy = cj.at("fy").get<double>();
        c.cx = cj.at("cx").get<double>();
        c.cy = cj.at("cy").get<double>();
        const auto& m = cj.at("world_to_cam");
        if (!m.is_array() || m.size() != 16)
            throw io_error("camera: world_to_cam must hold 16 row-major reals");
        for (int r = 0; r < 4; ++r)
            for (int col = 0; col < 4; ++col)
                c.world_to_cam(r, col) = m[4 * r + col].get<double>();
        cams.push_back(c);
    }
    return cams;
    });
}

void write_cameras(const std::filesystem::path& path, const std::vector<Camera>& cams) {
    json arr = json::array();
    for (const Camera& c : cams) {
        json cj;
        cj["width"] = c.width;
        cj["height"] = c.height;
        cj["fx"] = c.fx;
        cj["fy"] = c.fy;
        cj["cx"] = c.cx;
        cj["cy"] = c.cy;
        json m = json::array();
        for (int r = 0; r < 4; ++r)
            for (int col = 0; col < 4; ++col) m.push_back(c.world_to_cam(r, col));
        cj["world_to_cam"] = std::move(m);
        arr.push_back(std::move(cj));
    }
    save_json(path, json{{"cameras", std::move(arr)}});
}

PrintPlan read_plan(const std::filesystem::path& path) {
    json j = load_json(path);
    if (!j.contains("batches")) throw io_error("plan: missing \"batches\"");
    return parse_guard(path, [&] {
        PrintPlan plan;
        for (const auto& b : j["batches"])
            plan.batches.push_back(b.get<std::vector<int>>());
        return plan;
    });
}

void write_plan(const std::filesystem::path& path, const PrintPlan& plan) {
    save_json(path, json{{"batches", plan.batches}});
}

DigitalTwin read_twin(const std::filesystem::path& path, int degree) {
    json j = load_json(path);
    return parse_guard(path, [&] {
    DigitalTwin twin;
    for (const auto& ej : j.at("edges")) {
        int id = ej.at("id").get<int>();
        BezierCurve c;
        c.ctrl = ctrl_from_json(ej.at("ctrl"), "twin ctrl");
        c.degree = static_cast<int>(c.ctrl.size()) - 1;
        if (c.degree != degree && degree > 0 && ej.contains("ctrl") &&
            static_cast<int>(c.ctrl.size()) != degree + 1)
            throw io_error("twin: control point count does not match degree");
        twin.deformed_edges[id] = std::move(c);
        std::vector<KernelParam> kp;
        const auto& taus = ej.at("tau");
        const auto& alphas = ej.at("alpha");
        if (taus.size() != alphas.size())
            throw io_error("twin: tau/alpha length mismatch");
        for (std::size_t k = 0; k < taus.size(); ++k)
            kp.push_back({taus[k].get<double>(), alphas[k].get<double>()});
        twin.kernel_params[id] = std::move(kp);
    }
    for (const auto& vj : j.at("vertices"))
        twin.deformed_vertices[vj.at("id").get<int>()] =
            vec3_from_json(vj.at("pos"), "twin vertex");
    return twin;
    });
}

void write_twin(const std::filesystem::path& path, const DigitalTwin& twin) {
    json edges = json::array();
    for (const auto& [id, c] : twin.deformed_edges) {
        json ej;
        ej["id"] = id;
        ej["ctrl"] = curve_ctrl_to_json(c);
        json taus = json::array(), alphas = json::array();
        auto it = twin.kernel_params.find(id);
        if (it != twin.kernel_params.end()) {
            for (const KernelParam& kp : it->second) {
                taus.push_back(kp.tau);
                alphas.push_back(kp.alpha);
            }
        }
        ej["tau"] = std::move(taus);
        ej["alpha"] = std::move(alphas);
        edges.push_back(std::move(ej));
    }
    json verts = json::array();
    for (const auto& [id, p] : twin.deformed_vertices)
        verts.push_back(json{{"id", id}, {"pos", vec3_to_json(p)}});
    save_json(path, json{{"edges", std::move(edges)}, {"vertices", std::move(verts)}});
}

void write_pgm(const std::filesystem::path& path, const ImageF& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path.string());
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double v = std::clamp(img.at(x, y), 0.0, 1.0);
            row[x] = static_cast<unsigned char>(std::floor(v * 255.0 + 0.5));
        }
        out.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
}

ImageF read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    in >> magic >> w >> h >> maxv;
    if (magic != "P5" || w <= 0 || h <= 0 || maxv != 255)
        throw io_error(path.string() + ": not an 8-bit binary PGM");
    in.get();  // single whitespace after the header
    ImageF img(w, h);
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (!in) throw io_error(path.string() + ": truncated pixel data");
    for (std::size_t i = 0; i < buf.size(); ++i)
        img.intensities[i] = buf[i] / 255.0;
    return img;
}

void write_trace_csv(const std::filesystem::path& path,
                     const std::vector<LossBreakdown>& trace) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path.string());
    out << "iteration,l_img,l_bend,l_total,lr\n";
    char buf[160];
    for (const LossBreakdown& b : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%.6g,%.6g,%.6g,%.6g\n", b.iteration,
                      b.l_img, b.l_bend, b.l_total, b.lr);
        out << buf;
    }
}

std::vector<LossBreakdown> read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);  // header
    std::vector<LossBreakdown> trace;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        LossBreakdown b;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf", &b.iteration, &b.l_img,
                        &b.l_bend, &b.l_total, &b.lr) != 5)
            throw io_error(path.string() + ": malformed trace row");
        trace.push_back(b);
    }
    return trace;
}

void write_checkpoint(const std::filesystem::path& bin_path,
                      const std::filesystem::path& json_path,
                      const MlpParams& field, std::uint64_t seed) {
    Eigen::VectorXd flat = field.flatten();
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw io_error("cannot write " + bin_path.string());
    bin.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(double)));

    json j;
    j["seed"] = seed;
    j["param_count"] = flat.size();
    j["encoding"] = {{"num_bands", field.enc.num_bands},
                     {"include_input", field.enc.include_input},
                     {"bbox_min", vec3_to_json(field.enc.bbox_min)},
                     {"bbox_max", vec3_to_json(field.enc.bbox_max)}};
    json layers = json::array();
    for (std::size_t l = 0; l < field.W.size(); ++l)
        layers.push_back(json::array({field.W[l].rows(), field.W[l].cols()}));
    j["layers"] = std::move(layers);
    save_json(json_path, j);
}

MlpParams read_checkpoint(const std::filesystem::path& bin_path,
                          const std::filesystem::path& json_path,
                          std::uint64_t* seed) {
    json j = load_json(json_path);
    return parse_guard(json_path, [&] {
    MlpParams field;
    const auto& enc = j.at("encoding");
    field.enc.num_bands = enc.at("num_bands").get<int>();
    field.enc.include_input = enc.at("include_input").get<bool>();
    field.enc.bbox_min = vec3_from_json(enc.at("bbox_min"), "checkpoint bbox_min");
    field.enc.bbox_max = vec3_from_json(enc.at("bbox_max"), "checkpoint bbox_max");
    if (seed) *seed = j.at("seed").get<std::uint64_t>();

    for (const auto& lj : j.at("layers")) {
        Eigen::Index rows = lj[0].get<Eigen::Index>();
        Eigen::Index cols = lj[1].get<Eigen::Index>();
        field.W.emplace_back(Eigen::MatrixXd::Zero(rows, cols));
        field.b.emplace_back(Eigen::VectorXd::Zero(rows));
    }

    Eigen::VectorXd flat(field.param_count());
    if (flat.size() != j.at("param_count").get<Eigen::Index>())
        throw io_error("checkpoint: parameter count mismatch");
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw io_error("cannot open " + bin_path.string());
    bin.read(reinterpret_cast<char*>(flat.data()),
             static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!bin) throw io_error(bin_path.string() + ": truncated checkpoint");
    field.set_from_flat(flat);
    return field;
    });
}

void write_report(const std::filesystem::path& path, const RunReport& report) {
    json rounds = json::array();
    for (const RoundRecord& r : report.rounds) {
        json rj;
        rj["round"] = r.round;
        rj["chamfer_twin_gt"] = r.chamfer_twin_gt;
        rj["chamfer_planned_gt"] = r.chamfer_planned_gt;
        rj["e_max"] = r.e_max;
        json trace = json::array();
        for (const LossBreakdown& b : r.trace)
            trace.push_back(json{{"iteration", b.iteration},
                                 {"l_img", b.l_img},
                                 {"l_bend", b.l_bend},
                                 {"l_total", b.l_total},
                                 {"lr", b.lr}});
        rj["trace"] = std::move(trace);
        rounds.push_back(std::move(rj));
    }
    save_json(path, json{{"aborted", report.aborted}, {"rounds", std::move(rounds)}});
}

std::string config_hash(const std::string& canonical) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace frametwin
