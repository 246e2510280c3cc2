#include "frametwin/bezier.hpp"

#include <cmath>

namespace frametwin {

namespace {

double binomial(int n, int i) {
    double c = 1.0;
    for (int k = 1; k <= i; ++k) c = c * (n - i + k) / k;
    return c;
}

constexpr double kZeroTangent = 1e-9;

}  // namespace

double bernstein(int n, int i, double u) {
    if (n < 0 || i < 0 || i > n) throw invalid_argument_error("bernstein: index out of range");
    if (u < 0.0 || u > 1.0) throw invalid_argument_error("bernstein: u outside [0,1]");
    return binomial(n, i) * std::pow(u, i) * std::pow(1.0 - u, n - i);
}

double bernstein_deriv(int n, int i, double u) {
    if (n < 0 || i < 0 || i > n) throw invalid_argument_error("bernstein_deriv: index out of range");
    if (u < 0.0 || u > 1.0) throw invalid_argument_error("bernstein_deriv: u outside [0,1]");
    double lower = (i > 0) ? bernstein(n - 1, i - 1, u) : 0.0;
    double upper = (i < n) ? bernstein(n - 1, i, u) : 0.0;
    return n * (lower - upper);
}

Vec3 BezierCurve::eval(double u) const {
    if (u < 0.0 || u > 1.0) throw invalid_argument_error("eval_curve: u outside [0,1]");
    Vec3 p = Vec3::Zero();
    for (int i = 0; i <= degree; ++i) p += bernstein(degree, i, u) * ctrl[i];
    return p;
}

Vec3 BezierCurve::derivative(double u) const {
    Vec3 d = Vec3::Zero();
    for (int i = 0; i <= degree; ++i) d += bernstein_deriv(degree, i, u) * ctrl[i];
    return d;
}

BezierCurve BezierCurve::segment(const Vec3& a, const Vec3& b, int degree) {
    BezierCurve c;
    c.degree = degree;
    c.ctrl.resize(degree + 1);
    for (int i = 0; i <= degree; ++i) {
        double u = static_cast<double>(i) / degree;
        c.ctrl[i] = (1.0 - u) * a + u * b;
    }
    return c;
}

Vec3 eval_curve(const BezierCurve& curve, double u) { return curve.eval(u); }

CurveSamples sample_curve(const BezierCurve& curve, int m) {
    if (m < curve.degree) throw invalid_argument_error("sample_curve: m < degree leaves refit underdetermined");
    CurveSamples s;
    s.params.resize(m + 1);
    s.points.resize(m + 1);
    for (int j = 0; j <= m; ++j) {
        s.params[j] = static_cast<double>(j) / m;
        s.points[j] = curve.eval(s.params[j]);
    }
    return s;
}

std::vector<BishopFrame> frames_from_tangents(std::vector<Vec3> tangents,
                                              TransportRecord* record) {
    const std::size_t n = tangents.size();
    std::vector<bool> valid(n);
    std::vector<int> source(n);
    bool any_valid = false;
    for (std::size_t j = 0; j < n; ++j) {
        valid[j] = tangents[j].norm() >= kZeroTangent;
        source[j] = static_cast<int>(j);
        any_valid |= valid[j];
    }
    if (!any_valid) throw degenerate_curve_error("frames_from_tangents: all tangents vanish");

    // Zero-tangent fallback: reuse the nearest valid neighbor.
    for (std::size_t j = 0; j < n; ++j) {
        if (valid[j]) continue;
        for (std::size_t off = 1; off < n; ++off) {
            if (j >= off && valid[j - off]) {
                tangents[j] = tangents[j - off];
                source[j] = static_cast<int>(j - off);
                break;
            }
            if (j + off < n && valid[j + off]) {
                tangents[j] = tangents[j + off];
                source[j] = static_cast<int>(j + off);
                break;
            }
        }
    }

    std::vector<BishopFrame> frames(n);
    if (record) {
        record->raw_norm.resize(n);
        record->h_norm.resize(n);
        record->fallback.assign(n, 0);
        record->tangent_source = source;
    }
    for (std::size_t j = 0; j < n; ++j) {
        double nn = tangents[j].norm();
        if (record) record->raw_norm[j] = nn;
        frames[j].t = tangents[j] / nn;
    }

    // Initial normal: project the global axis least aligned with t0.
    {
        const Vec3& t0 = frames[0].t;
        int axis = 0;
        double best = std::abs(t0.x());
        if (std::abs(t0.y()) < best) { best = std::abs(t0.y()); axis = 1; }
        if (std::abs(t0.z()) < best) { axis = 2; }
        Vec3 e = Vec3::Unit(axis);
        Vec3 h = e - e.dot(t0) * t0;
        double hn = h.norm();
        frames[0].n = h / hn;
        frames[0].b = t0.cross(frames[0].n);
        if (record) {
            record->init_axis = axis;
            record->h_norm[0] = hn;
        }
    }

    // Discrete parallel transport of the normal.
    for (std::size_t j = 1; j < n; ++j) {
        const Vec3& t = frames[j].t;
        Vec3 h = frames[j - 1].n - frames[j - 1].n.dot(t) * t;
        bool fb = h.norm() < 1e-6;
        if (fb) h = frames[j - 1].b.cross(t);
        double hn = h.norm();
        frames[j].n = h / hn;
        frames[j].b = t.cross(frames[j].n);
        if (record) {
            record->fallback[j] = fb ? 1 : 0;
            record->h_norm[j] = hn;
        }
    }
    return frames;
}

std::vector<BishopFrame> bishop_frames(const BezierCurve& curve,
                                       const std::vector<double>& params) {
    std::vector<Vec3> tangents(params.size());
    for (std::size_t j = 0; j < params.size(); ++j) tangents[j] = curve.derivative(params[j]);
    return frames_from_tangents(std::move(tangents));
}

Eigen::MatrixXd bernstein_matrix(int degree, const std::vector<double>& params) {
    Eigen::MatrixXd B(params.size(), degree + 1);
    for (std::size_t j = 0; j < params.size(); ++j)
        for (int i = 0; i <= degree; ++i) B(j, i) = bernstein(degree, i, params[j]);
    return B;
}

Eigen::MatrixXd bernstein_deriv_matrix(int degree, const std::vector<double>& params) {
    Eigen::MatrixXd B(params.size(), degree + 1);
    for (std::size_t j = 0; j < params.size(); ++j)
        for (int i = 0; i <= degree; ++i) B(j, i) = bernstein_deriv(degree, i, params[j]);
    return B;
}

RefitOperator::RefitOperator(int degree, const std::vector<double>& params)
    : degree_(degree), params_(params) {
    const int n = degree;
    const auto mp1 = static_cast<Eigen::Index>(params.size());
    if (mp1 < n + 1) throw invalid_argument_error("refit: need at least degree+1 samples");

    Eigen::MatrixXd B = bernstein_matrix(n, params);
    Eigen::MatrixXd Bint = B.middleCols(1, n - 1);      // (m+1) x (n-1)
    Eigen::VectorXd B0 = B.col(0);
    Eigen::VectorXd Bn = B.col(n);

    Eigen::MatrixXd S = Bint.transpose() * Bint;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    Eigen::VectorXd d = ldlt.vectorD();
    double dmax = d.cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || dmax <= 0.0 || d.minCoeff() <= 1e-12 * dmax)
        throw ill_conditioned_error("refit: normal equations are singular");

    // ctrl = map * displaced: first/last rows pin the endpoints, interior
    // rows are the constrained least-squares solve.
    map_ = Eigen::MatrixXd::Zero(n + 1, mp1);
    map_(0, 0) = 1.0;
    map_(n, mp1 - 1) = 1.0;
    Eigen::MatrixXd rhs = Bint.transpose();             // (n-1) x (m+1)
    rhs.col(0) -= (Bint.transpose() * B0);
    rhs.col(mp1 - 1) -= (Bint.transpose() * Bn);
    map_.middleRows(1, n - 1) = ldlt.solve(rhs);
}

BezierCurve RefitOperator::apply(const std::vector<Vec3>& displaced) const {
    if (displaced.size() != sample_count())
        throw invalid_argument_error("refit: sample count mismatch");
    Eigen::MatrixXd Y(displaced.size(), 3);
    for (std::size_t j = 0; j < displaced.size(); ++j) Y.row(j) = displaced[j].transpose();
    Eigen::MatrixXd Q = map_ * Y;
    BezierCurve out;
    out.degree = degree_;
    out.ctrl.resize(degree_ + 1);
    for (int i = 0; i <= degree_; ++i) out.ctrl[i] = Q.row(i).transpose();
    return out;
}

LeastSquaresSystem RefitOperator::system(const std::vector<Vec3>& displaced) const {
    const int n = degree_;
    Eigen::MatrixXd B = bernstein_matrix(n, params_);
    Eigen::MatrixXd Bint = B.middleCols(1, n - 1);
    LeastSquaresSystem sys;
    sys.S = Bint.transpose() * Bint;
    sys.r.assign(n - 1, Vec3::Zero());
    const Vec3& q0 = displaced.front();
    const Vec3& qn = displaced.back();
    for (std::size_t j = 0; j < displaced.size(); ++j) {
        Vec3 res = displaced[j] - B(j, 0) * q0 - B(j, n) * qn;
        for (int b = 1; b < n; ++b) sys.r[b - 1] += B(j, b) * res;
    }
    return sys;
}

BezierCurve refit_curve(const CurveSamples& samples,
                        const std::vector<Vec3>& displaced, int degree) {
    if (displaced.size() != samples.count())
        throw invalid_argument_error("refit_curve: displaced count != sample count");
    RefitOperator op(degree, samples.params);
    return op.apply(displaced);
}

}  // namespace frametwin
