#include "frametwin/wireframe.hpp"

#include <cmath>
#include <sstream>

namespace frametwin {

namespace {
constexpr double kEndpointTol = 1e-9;
}

Aabb WireframeGraph::bounds() const {
    Aabb box;
    for (const auto& v : vertices) box.expand(v);
    for (const auto& e : edges)
        for (const auto& q : e.curve.ctrl) box.expand(q);
    return box;
}

ValidationReport validate_graph(const WireframeGraph& graph) {
    ValidationReport report;
    auto add = [&](bool warning, const std::string& msg) {
        report.issues.push_back({warning, msg});
    };
    if (graph.edges.empty()) add(true, "nothing to print: edge list is empty");

    const int nv = static_cast<int>(graph.vertices.size());
    for (std::size_t k = 0; k < graph.edges.size(); ++k) {
        const auto& e = graph.edges[k];
        std::ostringstream tag;
        tag << "edge " << k;
        if (e.v0 < 0 || e.v0 >= nv || e.v1 < 0 || e.v1 >= nv) {
            add(false, tag.str() + ": vertex index out of range");
            continue;
        }
        if (e.curve.ctrl.size() != static_cast<std::size_t>(e.curve.degree) + 1) {
            add(false, tag.str() + ": control point count != degree+1");
            continue;
        }
        for (const auto& q : e.curve.ctrl)
            if (!q.allFinite()) add(false, tag.str() + ": non-finite control point");
        if ((e.curve.ctrl.front() - graph.vertices[e.v0]).norm() > kEndpointTol)
            add(false, tag.str() + ": endpoint mismatch at start vertex");
        if ((e.curve.ctrl.back() - graph.vertices[e.v1]).norm() > kEndpointTol)
            add(false, tag.str() + ": endpoint mismatch at end vertex");
        if ((graph.vertices[e.v0] - graph.vertices[e.v1]).norm() < kEndpointTol &&
            e.v0 != e.v1)
            add(false, tag.str() + ": zero-length edge");
        if (e.v0 == e.v1) add(false, tag.str() + ": zero-length edge (self loop)");
    }
    for (std::size_t v = 0; v < graph.vertices.size(); ++v)
        if (!graph.vertices[v].allFinite()) {
            std::ostringstream tag;
            tag << "vertex " << v << ": non-finite position";
            add(false, tag.str());
        }
    return report;
}

PartialState partial_state(const PrintPlan& plan, int t) {
    if (t < 0 || t > static_cast<int>(plan.batches.size()))
        throw invalid_argument_error("partial_state: t out of range");
    PartialState st;
    for (int b = 0; b < t; ++b)
        for (int e : plan.batches[b]) st.printed_edges.insert(e);
    return st;
}

// Callers fill printed_vertices from the graph.
void resolve_vertices(PartialState& st, const WireframeGraph& graph) {
    st.printed_vertices.clear();
    for (int e : st.printed_edges) {
        st.printed_vertices.insert(graph.edges[e].v0);
        st.printed_vertices.insert(graph.edges[e].v1);
    }
}

PartialState partial_state(const PrintPlan& plan, int t, const WireframeGraph& graph) {
    PartialState st = partial_state(plan, t);
    resolve_vertices(st, graph);
    return st;
}

std::vector<Vec3> printed_samples(const PartialState& partial,
                                  const std::map<int, BezierCurve>& curves, int m) {
    std::vector<Vec3> pts;
    pts.reserve(partial.printed_edges.size() * (m + 1));
    for (int e : partial.printed_edges) {
        const BezierCurve& c = curves.at(e);
        for (int j = 0; j <= m; ++j) pts.push_back(c.eval(static_cast<double>(j) / m));
    }
    return pts;
}

double min_dist_to_printed(const Vec3& x, const PartialState& partial,
                           const std::map<int, BezierCurve>& curves, int m) {
    if (partial.empty())
        throw undefined_distance_error("min_dist_to_printed: printed set is empty");
    double best = std::numeric_limits<double>::infinity();
    for (int e : partial.printed_edges) {
        const BezierCurve& c = curves.at(e);
        for (int j = 0; j <= m; ++j) {
            double d = (x - c.eval(static_cast<double>(j) / m)).norm();
            if (d < best) best = d;
        }
    }
    return best;
}

std::map<int, BezierCurve> blend_targets(
    const std::function<Vec3(const Vec3&)>& displacement,
    const DigitalTwin& twin, const PartialState& partial,
    const WireframeGraph& graph, int m) {
    (void)twin;
    std::map<int, BezierCurve> out;
    for (std::size_t k = 0; k < graph.edges.size(); ++k) {
        const int ek = static_cast<int>(k);
        if (partial.printed_edges.count(ek)) continue;
        const auto& edge = graph.edges[k];
        const bool s_in = partial.vertex_printed(edge.v0);
        const bool e_in = partial.vertex_printed(edge.v1);
        if (!s_in && !e_in) {
            out[ek] = edge.curve;
            continue;
        }
        CurveSamples samples = sample_curve(edge.curve, m);
        std::vector<Vec3> blended(samples.count());
        for (std::size_t j = 0; j < samples.count(); ++j) {
            const Vec3& p = samples.points[j];
            double w;
            if (s_in && e_in) {
                w = 1.0;  // full deformed-position map
            } else {
                // Blend weight 1 at the printed end, 0 at the free end,
                // regardless of stored orientation.
                w = e_in ? samples.params[j] : 1.0 - samples.params[j];
            }
            blended[j] = p + w * displacement(p);
        }
        out[ek] = refit_curve(samples, blended, edge.curve.degree);
    }
    return out;
}

}  // namespace frametwin
