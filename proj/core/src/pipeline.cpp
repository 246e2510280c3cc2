#include "frametwin/pipeline.hpp"

#include <cmath>

namespace frametwin {

namespace {
constexpr double kSigmaFloor = 1e-9;
}

void ParamGrads::add_scaled(const ParamGrads& other, double scale) {
    theta += scale * other.theta;
    for (std::size_t e = 0; e < s.size(); ++e) {
        s[e] += scale * other.s[e];
        a[e] += scale * other.a[e];
    }
}

void pipeline_forward(const std::vector<BezierCurve>& printed_curves,
                      const MlpParams& field,
                      const std::vector<Eigen::VectorXd>& s,
                      const std::vector<Eigen::VectorXd>& a,
                      const std::vector<Camera>& cams, const PipelineConfig& cfg,
                      SceneTape& tape) {
    const int n = cfg.degree, m = cfg.m, K = cfg.K;
    tape.cfg = cfg;

    std::vector<double> refit_params(m + 1);
    for (int j = 0; j <= m; ++j) refit_params[j] = static_cast<double>(j) / m;
    RefitOperator op(n, refit_params);
    tape.refit_map = op.map();

    std::vector<double> u_mid(K), u_hi(K), u_lo(K);
    const double half = 0.5 / K;
    for (int j = 0; j < K; ++j) {
        u_mid[j] = (j + 0.5) / K;
        u_hi[j] = std::min(1.0, u_mid[j] + half);
        u_lo[j] = std::max(0.0, u_mid[j] - half);
    }
    tape.basis_mid = bernstein_matrix(n, u_mid);
    tape.basis_chord = bernstein_matrix(n, u_hi) - bernstein_matrix(n, u_lo);
    tape.basis_der = bernstein_deriv_matrix(n, u_mid);

    const std::size_t E = printed_curves.size();
    tape.edges.assign(E, {});
    for (std::size_t e = 0; e < E; ++e) {
        EdgeTape& et = tape.edges[e];
        CurveSamples samples = sample_curve(printed_curves[e], m);
        et.sample_pts.resize(3, m + 1);
        for (int j = 0; j <= m; ++j) et.sample_pts.col(j) = samples.points[j];

        mlp_forward(field, et.sample_pts, et.mlp);
        std::vector<Vec3> displaced(m + 1);
        et.displaced.resize(m + 1, 3);
        for (int j = 0; j <= m; ++j) {
            displaced[j] = samples.points[j] + Vec3(et.mlp.out.col(j));
            et.displaced.row(j) = displaced[j].transpose();
        }

        // Same arithmetic as the plain render path (refit + pointwise
        // curve evaluation), so the recorded forward is bit-identical to
        // render_view on the same inputs.
        BezierCurve cstar = op.apply(displaced);
        et.ctrl.resize(n + 1, 3);
        for (int i = 0; i <= n; ++i) et.ctrl.row(i) = cstar.ctrl[i].transpose();

        et.mean.resize(3, K);
        et.chord.resize(3, K);
        et.sigma_t.resize(K);
        et.sigma_clamped.assign(K, 0);
        et.tangent_raw.resize(3, K);
        std::vector<Vec3> tangents(K);
        for (int j = 0; j < K; ++j) {
            et.mean.col(j) = cstar.eval(u_mid[j]);
            Vec3 chord = cstar.eval(u_hi[j]) - cstar.eval(u_lo[j]);
            et.chord.col(j) = chord;
            double st = chord.norm();
            if (st < kSigmaFloor) {
                st = kSigmaFloor;
                et.sigma_clamped[j] = 1;
            }
            et.sigma_t[j] = st;
            tangents[j] = cstar.derivative(u_mid[j]);
            et.tangent_raw.col(j) = tangents[j];
        }
        et.frames = frames_from_tangents(tangents, &et.transport);
        et.tau.resize(K);
        et.alpha.resize(K);
        for (int j = 0; j < K; ++j) {
            et.tau[j] = tau_from_raw(s[e][j]);
            et.alpha[j] = alpha_from_raw(a[e][j]);
        }
    }

    tape.views.assign(cams.size(), {});
    for (std::size_t v = 0; v < cams.size(); ++v) {
        ViewTape& vt = tape.views[v];
        for (std::size_t e = 0; e < E; ++e) {
            const EdgeTape& et = tape.edges[e];
            for (int j = 0; j < K; ++j) {
                AnchoredKernel g;
                g.edge = static_cast<int>(e);
                g.slot = j;
                g.mean = et.mean.col(j);
                g.frame = et.frames[j];
                g.sigma_t = et.sigma_t[j];
                g.sigma_n = g.sigma_b = et.tau[j];
                g.alpha = et.alpha[j];
                if (auto sp = project_kernel(cams[v], g, cfg.raster))
                    vt.splats.push_back(*sp);
            }
        }
        vt.prepared = detail::prepare_splats(cams[v], vt.splats, cfg.raster,
                                             vt.grid, &vt.skipped);
        vt.image = detail::composite_forward(cams[v], vt.prepared, vt.grid, cfg.raster);
    }
}

void pipeline_backward(const MlpParams& field, const std::vector<Camera>& cams,
                       const SceneTape& tape,
                       const std::vector<ImageF>& image_adjoints,
                       ParamGrads& grads) {
    const int K = tape.cfg.K;
    const RasterConfig& rc = tape.cfg.raster;
    const std::size_t E = tape.edges.size();

    struct EdgeAdj {
        Eigen::Matrix3Xd mean, t, n, b;
        Eigen::VectorXd sigma, tau, alpha;
    };
    std::vector<EdgeAdj> eadj(E);
    for (auto& ea : eadj) {
        ea.mean = Eigen::Matrix3Xd::Zero(3, K);
        ea.t = Eigen::Matrix3Xd::Zero(3, K);
        ea.n = Eigen::Matrix3Xd::Zero(3, K);
        ea.b = Eigen::Matrix3Xd::Zero(3, K);
        ea.sigma = Eigen::VectorXd::Zero(K);
        ea.tau = Eigen::VectorXd::Zero(K);
        ea.alpha = Eigen::VectorXd::Zero(K);
    }

    for (std::size_t v = 0; v < tape.views.size(); ++v) {
        const ViewTape& vt = tape.views[v];
        const Camera& cam = cams[v];
        const ImageF& adj = image_adjoints[v];

        std::vector<Vec2> d_mean2d(vt.prepared.size(), Vec2::Zero());
        std::vector<Mat2> d_cov2d(vt.prepared.size(), Mat2::Zero());
        std::vector<double> d_alpha2d(vt.prepared.size(), 0.0);

        // Replays the forward compositing traversal; the suffix of the
        // per-pixel contribution sum comes from the stored image.
        for (int ty = 0; ty < vt.grid.tiles_y; ++ty) {
            for (int tx = 0; tx < vt.grid.tiles_x; ++tx) {
                const auto& bin =
                    vt.grid.bins[static_cast<std::size_t>(ty) * vt.grid.tiles_x + tx];
                if (bin.empty()) continue;
                int px0 = tx * detail::TileGrid::kTile;
                int py0 = ty * detail::TileGrid::kTile;
                int px1 = std::min(cam.width, px0 + detail::TileGrid::kTile);
                int py1 = std::min(cam.height, py0 + detail::TileGrid::kTile);
                for (int y = py0; y < py1; ++y) {
                    for (int x = px0; x < px1; ++x) {
                        double av = adj.at(x, y);
                        if (av == 0.0) continue;
                        double c_total = vt.image.at(x, y);
                        double T = 1.0, c_pref = 0.0;
                        for (int pi : bin) {
                            const auto& p = vt.prepared[pi];
                            if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) continue;
                            Vec2 d(x - p.mean.x(), y - p.mean.y());
                            double q = d.dot(p.inv * d);
                            if (q > p.q_max) continue;
                            double g = std::exp(-0.5 * q);
                            double w_raw = p.alpha * g;
                            double w = std::min(rc.alpha_clamp, w_raw);
                            c_pref += T * w;
                            if (w_raw < rc.alpha_clamp && w < 1.0) {
                                double dCdw = T - (c_total - c_pref) / (1.0 - w);
                                double dw = av * dCdw;
                                d_alpha2d[pi] += dw * g;
                                double dq = -0.5 * dw * w_raw;
                                Vec2 md = p.inv * d;
                                d_mean2d[pi] -= 2.0 * dq * md;
                                d_cov2d[pi] -= dq * md * md.transpose();
                            }
                            T *= 1.0 - w;
                            if (T < rc.min_transmittance) break;
                        }
                    }
                }
            }
        }

        const Mat3 R = cam.rotation();
        const Vec3 tr = cam.translation();
        for (std::size_t pi = 0; pi < vt.prepared.size(); ++pi) {
            const Splat2D& sp = vt.splats[vt.prepared[pi].index];
            const EdgeTape& et = tape.edges[sp.edge];
            EdgeAdj& ea = eadj[sp.edge];
            const int j = sp.slot;

            const Vec3 mu = et.mean.col(j);
            const Vec3 mc = R * mu + tr;
            const double z = mc.z();

            Eigen::Matrix<double, 2, 3> J;
            J << cam.fx / z, 0, -cam.fx * mc.x() / (z * z),
                 0, cam.fy / z, -cam.fy * mc.y() / (z * z);

            Mat3 F;
            F.col(0) = et.frames[j].t;
            F.col(1) = et.frames[j].n;
            F.col(2) = et.frames[j].b;
            const double st = et.sigma_t[j], ta = et.tau[j];
            Vec3 s2(st * st, ta * ta, ta * ta);
            Mat3 sigma = F * s2.asDiagonal() * F.transpose();
            Mat3 V = R * sigma * R.transpose();

            const Mat2& G2 = d_cov2d[pi];
            Mat3 dV = J.transpose() * G2 * J;
            Eigen::Matrix<double, 2, 3> dJ = (G2 + G2.transpose()) * J * V;
            Mat3 dSigma = R.transpose() * dV * R;
            Mat3 dF = (dSigma + dSigma.transpose()) * F * s2.asDiagonal();
            Mat3 core = F.transpose() * dSigma * F;
            ea.sigma[j] += 2.0 * st * core(0, 0);
            ea.tau[j] += 2.0 * ta * (core(1, 1) + core(2, 2));
            ea.t.col(j) += dF.col(0);
            ea.n.col(j) += dF.col(1);
            ea.b.col(j) += dF.col(2);

            const Vec2& du = d_mean2d[pi];
            Vec3 dmc(du.x() * cam.fx / z, du.y() * cam.fy / z,
                     -du.x() * cam.fx * mc.x() / (z * z) -
                         du.y() * cam.fy * mc.y() / (z * z));
            dmc.x() += dJ(0, 2) * (-cam.fx / (z * z));
            dmc.y() += dJ(1, 2) * (-cam.fy / (z * z));
            dmc.z() += dJ(0, 0) * (-cam.fx / (z * z)) + dJ(1, 1) * (-cam.fy / (z * z)) +
                       dJ(0, 2) * (2.0 * cam.fx * mc.x() / (z * z * z)) +
                       dJ(1, 2) * (2.0 * cam.fy * mc.y() / (z * z * z));

            ea.mean.col(j) += R.transpose() * dmc;
            ea.alpha[j] += d_alpha2d[pi];
        }
    }

    // Per-edge chain back to control points, then through the refit to the
    // MLP.
    for (std::size_t e = 0; e < E; ++e) {
        const EdgeTape& et = tape.edges[e];
        EdgeAdj& ea = eadj[e];
        const int n = tape.cfg.degree;

        grads.s[e].array() += ea.tau.array() * et.tau.array();
        grads.a[e].array() +=
            ea.alpha.array() * et.alpha.array() * (1.0 - et.alpha.array());

        Eigen::MatrixXd dQ = Eigen::MatrixXd::Zero(n + 1, 3);

        // Axial scale: sigma_t = |chord| (floored).
        for (int j = 0; j < K; ++j) {
            if (et.sigma_clamped[j] || ea.sigma[j] == 0.0) continue;
            Vec3 dchord = (ea.sigma[j] / et.sigma_t[j]) * et.chord.col(j);
            dQ += tape.basis_chord.row(j).transpose() * dchord.transpose();
        }

        // Reverse parallel transport.
        const TransportRecord& rec = et.transport;
        for (int j = K - 1; j >= 1; --j) {
            const Vec3 t = et.frames[j].t;
            const Vec3 nn = et.frames[j].n;
            ea.t.col(j) += nn.cross(Vec3(ea.b.col(j)));
            ea.n.col(j) += Vec3(ea.b.col(j)).cross(t);
            Vec3 dn = ea.n.col(j);
            Vec3 dh = (dn - nn.dot(dn) * nn) / rec.h_norm[j];
            if (!rec.fallback[j]) {
                const Vec3 np = et.frames[j - 1].n;
                ea.n.col(j - 1) += dh - t.dot(dh) * t;
                ea.t.col(j) += -t.dot(dh) * np - np.dot(t) * dh;
            } else {
                const Vec3 bp = et.frames[j - 1].b;
                ea.b.col(j - 1) += t.cross(dh);
                ea.t.col(j) += dh.cross(bp);
            }
        }
        {
            const Vec3 t0 = et.frames[0].t;
            const Vec3 n0 = et.frames[0].n;
            ea.t.col(0) += n0.cross(Vec3(ea.b.col(0)));
            ea.n.col(0) += Vec3(ea.b.col(0)).cross(t0);
            Vec3 dn = ea.n.col(0);
            Vec3 dh = (dn - n0.dot(dn) * n0) / rec.h_norm[0];
            Vec3 axis = Vec3::Unit(rec.init_axis);
            ea.t.col(0) += -t0.dot(dh) * axis - axis.dot(t0) * dh;
        }

        // Tangent normalization (fallback routes to the source tangent).
        Eigen::Matrix3Xd d_raw = Eigen::Matrix3Xd::Zero(3, K);
        for (int j = 0; j < K; ++j) {
            const Vec3 t = et.frames[j].t;
            Vec3 dt = ea.t.col(j);
            d_raw.col(rec.tangent_source[j]) += (dt - t.dot(dt) * t) / rec.raw_norm[j];
        }
        dQ += tape.basis_der.transpose() * d_raw.transpose();
        dQ += tape.basis_mid.transpose() * ea.mean.transpose();

        Eigen::MatrixXd dY = tape.refit_map.transpose() * dQ;  // (m+1) x 3
        mlp_backward(field, et.mlp, dY.transpose(), grads.theta);
    }
}

}  // namespace frametwin
