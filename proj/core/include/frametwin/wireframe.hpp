#pragma once

#include <functional>
#include <map>
#include <set>

#include "frametwin/bezier.hpp"

namespace frametwin {

struct WireframeEdge {
    int v0 = -1, v1 = -1;   // vertex indices; curve runs v0 -> v1
    BezierCurve curve;
};

struct WireframeGraph {
    std::vector<Vec3> vertices;
    std::vector<WireframeEdge> edges;

    Aabb bounds() const;
};

struct PrintPlan {
    std::vector<std::vector<int>> batches;  // edge indices per batch
};

struct PartialState {
    std::set<int> printed_edges;
    std::set<int> printed_vertices;

    bool vertex_printed(int v) const { return printed_vertices.count(v) != 0; }
    bool empty() const { return printed_edges.empty(); }
};

// Per-kernel thickness/opacity pair.
struct KernelParam {
    double tau = 0.0;
    double alpha = 1.0;
};

struct DigitalTwin {
    std::map<int, BezierCurve> deformed_edges;      // edge index -> c*_k
    std::map<int, Vec3> deformed_vertices;          // vertex index -> v*
    std::map<int, std::vector<KernelParam>> kernel_params;
};

struct ValidationIssue {
    bool warning = false;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const {
        for (const auto& i : issues)
            if (!i.warning) return false;
        return true;
    }
};

/// Checks graph invariants; never throws, all violations are reported with
/// the offending index.
ValidationReport validate_graph(const WireframeGraph& graph);

/// Printed state after batches 1..t of the plan (t = 0 gives the empty state).
PartialState partial_state(const PrintPlan& plan, int t);

/// Derives printed_vertices from printed_edges.
void resolve_vertices(PartialState& st, const WireframeGraph& graph);

/// As above, with printed_vertices resolved against the graph.
PartialState partial_state(const PrintPlan& plan, int t, const WireframeGraph& graph);

/// Minimum distance from x to dense samples (m per edge) of the printed
/// curves. `curves` maps each printed edge index to its current geometry.
double min_dist_to_printed(const Vec3& x, const PartialState& partial,
                           const std::map<int, BezierCurve>& curves, int m = 64);

/// Dense sample cloud of the printed curves, for repeated distance queries.
std::vector<Vec3> printed_samples(const PartialState& partial,
                                  const std::map<int, BezierCurve>& curves, int m = 64);

/// Three-case adaptive blending of unprinted struts onto the deformed
/// printed structure. `displacement` is the optimized deformation field
/// d(p); the deformed-position map is p + d(p). Returns the updated curves
/// for unprinted edges only.
std::map<int, BezierCurve> blend_targets(
    const std::function<Vec3(const Vec3&)>& displacement,
    const DigitalTwin& twin, const PartialState& partial,
    const WireframeGraph& graph, int m = 64);

}  // namespace frametwin
