#include "frametwin/field.hpp"

#include <cmath>

namespace frametwin {

namespace {

constexpr double kPi = 3.14159265358979323846;

int layer_in_dim(const EncodingConfig& enc, int layer) {
    if (layer == 0) return enc.dim();
    if (layer == MlpArch::kSkipLayer) return MlpArch::kWidth + enc.dim();
    return MlpArch::kWidth;
}

int layer_out_dim(int layer) {
    return (layer == MlpArch::kHidden) ? MlpArch::kOut : MlpArch::kWidth;
}

Eigen::Matrix3Xd normalize_points(const EncodingConfig& enc,
                                  const Eigen::Matrix3Xd& points) {
    Eigen::Matrix3Xd out(3, points.cols());
    for (int c = 0; c < 3; ++c) {
        double lo = enc.bbox_min[c], hi = enc.bbox_max[c];
        double scale = (hi > lo) ? 2.0 / (hi - lo) : 0.0;
        out.row(c) = scale * (points.row(c).array() - lo) - (hi > lo ? 1.0 : 0.0);
    }
    return out;
}

void encode_batch(const EncodingConfig& enc, const Eigen::Matrix3Xd& xn,
                  Eigen::MatrixXd& E) {
    const auto N = xn.cols();
    E.resize(enc.dim(), N);
    int row = 0;
    if (enc.include_input) {
        E.topRows(3) = xn;
        row = 3;
    }
    for (int l = 0; l < enc.num_bands; ++l) {
        double f = std::ldexp(kPi, l);  // 2^l * pi
        E.middleRows(row, 3) = (f * xn.array()).sin();
        E.middleRows(row + 3, 3) = (f * xn.array()).cos();
        row += 6;
    }
}

}  // namespace

Eigen::VectorXd encode(const Vec3& x, const EncodingConfig& cfg) {
    Eigen::Matrix3Xd pts(3, 1);
    pts.col(0) = x;
    Eigen::MatrixXd E;
    encode_batch(cfg, normalize_points(cfg, pts), E);
    return E.col(0);
}

Eigen::Index MlpParams::param_count() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
    return n;
}

Eigen::VectorXd MlpParams::flatten() const {
    Eigen::VectorXd theta(param_count());
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
        theta.segment(off, W[l].size()) = Eigen::Map<const Eigen::VectorXd>(W[l].data(), W[l].size());
        off += W[l].size();
        theta.segment(off, b[l].size()) = b[l];
        off += b[l].size();
    }
    return theta;
}

void MlpParams::set_from_flat(const Eigen::VectorXd& theta) {
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
        Eigen::Map<Eigen::VectorXd>(W[l].data(), W[l].size()) = theta.segment(off, W[l].size());
        off += W[l].size();
        b[l] = theta.segment(off, b[l].size());
        off += b[l].size();
    }
}

bool MlpParams::finite() const {
    for (std::size_t l = 0; l < W.size(); ++l)
        if (!W[l].allFinite() || !b[l].allFinite()) return false;
    return true;
}

MlpParams zero_init(std::uint64_t seed, const EncodingConfig& cfg) {
    MlpParams p;
    p.enc = cfg;
    p.W.resize(MlpArch::kHidden + 1);
    p.b.resize(MlpArch::kHidden + 1);
    CounterRng rng(seed);
    for (int l = 0; l <= MlpArch::kHidden; ++l) {
        int rows = layer_out_dim(l);
        int cols = layer_in_dim(cfg, l);
        p.W[l].resize(rows, cols);
        p.b[l] = Eigen::VectorXd::Zero(rows);
        if (l == MlpArch::kHidden) {
            p.W[l].setZero();  // zero output everywhere at start
            continue;
        }
        double bound = std::sqrt(6.0 / cols);
        for (Eigen::Index i = 0; i < p.W[l].size(); ++i)
            p.W[l].data()[i] = bound * (2.0 * rng.uniform(l, i) - 1.0);
    }
    return p;
}

void mlp_forward(const MlpParams& params, const Eigen::Matrix3Xd& points,
                 MlpForward& ws) {
    if (!params.finite()) throw numeric_error("mlp_forward: non-finite parameters");
    const auto N = points.cols();
    encode_batch(params.enc, normalize_points(params.enc, points), ws.enc);

    const int E = params.enc.dim();
    for (int l = 0; l < MlpArch::kHidden; ++l) {
        Eigen::MatrixXd& h = ws.hidden[l];
        if (l == 0) {
            h.noalias() = params.W[0] * ws.enc;
        } else if (l == MlpArch::kSkipLayer) {
            h.noalias() = params.W[l].leftCols(MlpArch::kWidth) * ws.hidden[l - 1];
            h.noalias() += params.W[l].rightCols(E) * ws.enc;
        } else {
            h.noalias() = params.W[l] * ws.hidden[l - 1];
        }
        h.colwise() += params.b[l];
        h = h.cwiseMax(0.0);
    }
    ws.out.noalias() = params.W[MlpArch::kHidden] * ws.hidden[MlpArch::kHidden - 1];
    ws.out.colwise() += params.b[MlpArch::kHidden];
}

void mlp_backward(const MlpParams& params, const MlpForward& ws,
                  const Eigen::Matrix3Xd& out_adjoint, Eigen::VectorXd& grad) {
    const int E = params.enc.dim();
    Eigen::Index off = grad.size();
    auto grad_W = [&](int l) {
        Eigen::Index sz = params.W[l].size() + params.b[l].size();
        off -= sz;
        return Eigen::Map<Eigen::MatrixXd>(grad.data() + off, params.W[l].rows(),
                                           params.W[l].cols());
    };
    auto grad_b = [&](int l) {
        return Eigen::Map<Eigen::VectorXd>(
            grad.data() + off + params.W[l].size(), params.b[l].size());
    };

    // Output layer.
    {
        auto gW = grad_W(MlpArch::kHidden);
        gW.noalias() += out_adjoint * ws.hidden[MlpArch::kHidden - 1].transpose();
        grad_b(MlpArch::kHidden) += out_adjoint.rowwise().sum();
    }
    Eigen::MatrixXd G = params.W[MlpArch::kHidden].transpose() * out_adjoint;

    for (int l = MlpArch::kHidden - 1; l >= 0; --l) {
        // ReLU subgradient: zero where the activation clamped.
        G.array() *= (ws.hidden[l].array() > 0.0).cast<double>();
        auto gW = grad_W(l);
        if (l == 0) {
            gW.noalias() += G * ws.enc.transpose();
        } else if (l == MlpArch::kSkipLayer) {
            gW.leftCols(MlpArch::kWidth).noalias() += G * ws.hidden[l - 1].transpose();
            gW.rightCols(E).noalias() += G * ws.enc.transpose();
        } else {
            gW.noalias() += G * ws.hidden[l - 1].transpose();
        }
        grad_b(l) += G.rowwise().sum();
        if (l > 0) {
            if (l == MlpArch::kSkipLayer)
                G = params.W[l].leftCols(MlpArch::kWidth).transpose() * G;
            else
                G = params.W[l].transpose() * G;
        }
    }
}

Vec3 field_eval(const MlpParams& params, const Vec3& x) {
    Eigen::Matrix3Xd pts(3, 1);
    pts.col(0) = x;
    MlpForward ws;
    mlp_forward(params, pts, ws);
    return ws.out.col(0);
}

Mat3 input_jacobian(const MlpParams& params, const Vec3& x) {
    Eigen::Matrix3Xd pts(3, 1);
    pts.col(0) = x;
    MlpForward ws;
    mlp_forward(params, pts, ws);

    const EncodingConfig& enc = params.enc;
    const int E = enc.dim();
    Eigen::Matrix3Xd xn = normalize_points(enc, pts);

    // d(encoding)/d(x), including the bbox normalization scale.
    Eigen::MatrixXd Menc = Eigen::MatrixXd::Zero(E, 3);
    Vec3 scale;
    for (int c = 0; c < 3; ++c) {
        double lo = enc.bbox_min[c], hi = enc.bbox_max[c];
        scale[c] = (hi > lo) ? 2.0 / (hi - lo) : 0.0;
    }
    int row = 0;
    if (enc.include_input) {
        for (int c = 0; c < 3; ++c) Menc(c, c) = scale[c];
        row = 3;
    }
    for (int l = 0; l < enc.num_bands; ++l) {
        double f = std::ldexp(kPi, l);
        for (int c = 0; c < 3; ++c) {
            Menc(row + c, c) = f * std::cos(f * xn(c, 0)) * scale[c];
            Menc(row + 3 + c, c) = -f * std::sin(f * xn(c, 0)) * scale[c];
        }
        row += 6;
    }

    Eigen::MatrixXd M;
    for (int l = 0; l < MlpArch::kHidden; ++l) {
        Eigen::MatrixXd Z;
        if (l == 0) {
            Z.noalias() = params.W[0] * Menc;
        } else if (l == MlpArch::kSkipLayer) {
            Z.noalias() = params.W[l].leftCols(MlpArch::kWidth) * M;
            Z.noalias() += params.W[l].rightCols(E) * Menc;
        } else {
            Z.noalias() = params.W[l] * M;
        }
        Z.array().colwise() *= (ws.hidden[l].col(0).array() > 0.0).cast<double>();
        M = std::move(Z);
    }
    return params.W[MlpArch::kHidden] * M;
}

}  // namespace frametwin
