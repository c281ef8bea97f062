#include "curvcone/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace curvcone {

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

// Quintic smoothstep on [0, 1], clamped outside.
double smooth5(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}
double smooth5_d(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    double y = x * (1.0 - x);
    return 30.0 * y * y;
}
double smooth5_dd(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
}
constexpr double kSmoothSlope = 1.875;  // max of smooth5_d

double sq_norm_g(const Vec& df, const Mat& g) { return df.dot(g.ldlt().solve(df)); }

Riemann4 coord_wedge(const Mat& a, const Mat& b) {
    Mat as = 0.5 * (a + a.transpose()), bs = 0.5 * (b + b.transpose());
    return to_riemann(kulkarni_wedge(SymmetricForm(as), SymmetricForm(bs)));
}

Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

Vec unit_vector(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Vec v(n);
    do {
        for (int i = 0; i < n; ++i) v(i) = nd(rng);
    } while (v.norm() < 1e-6);
    return v.normalized();
}

std::vector<double> log_grid(double lo, double hi, int count) {
    std::vector<double> out;
    if (count <= 1 || !(hi > lo)) {
        out.push_back(lo);
        return out;
    }
    double a = std::log(lo), b = std::log(hi);
    for (int i = 0; i < count; ++i) out.push_back(std::exp(a + (b - a) * i / (count - 1)));
    return out;
}

double simpson(const std::function<double(double)>& f, double a, double b) {
    return (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
}

// Integral of smooth5 over [0, t].
double smooth5_int(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 0.5 + (t - 1.0);
    return t * t * t * t * (2.5 + t * (-3.0 + t));
}

// Growth-rate profile: smooth5 up over [0, e], 1, smooth5 down over [1 - e, 1].
double plateau(double x, double e) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return std::min(smooth5(x / e), smooth5((1.0 - x) / e));
}
double plateau_int(double x, double e) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0 - e;
    if (x <= e) return e * smooth5_int(x / e);
    if (x <= 1.0 - e) return 0.5 * e + (x - e);
    return (1.0 - e) - e * smooth5_int((1.0 - x) / e);
}

// beta on the ramp: G(beta) = G1 plateau_int(x) / (1 - e), G(b) = (1/2) log(b (2 - tau) / ((2 - b) tau)).
double ramp_beta(const AlphaProfile& ap, double x) {
    double G1 = 0.5 * std::log((2.0 - ap.tau) / ap.tau);
    double y = G1 * plateau_int(x, ap.ramp_edge) / (1.0 - ap.ramp_edge);
    double z = std::exp(2.0 * y + std::log(ap.tau / (2.0 - ap.tau)));
    return 2.0 * z / (1.0 + z);
}

// Initial ramp and the beta ramp shape; s_a and gamma are left to the caller.
}  // namespace

AlphaProfile alpha_shape(double c, double tau, double r0, double r1) {
    if (!(c > 0.0) || !std::isfinite(c)) throw InputError("c must be positive");
    if (!(tau > 0.0) || tau > 1.0) throw InputError("tau must lie in (0, 1]");
    if (!(r1 > 0.0) || !(r0 > r1)) throw InputError("need 0 < r1 < r0");
    AlphaProfile ap;
    ap.c = c;
    ap.tau = tau;
    ap.r0 = r0;
    ap.r1 = r1;
    int K = AlphaProfile::kCells;
    ap.initial_log.assign(K + 1, 0.0);
    auto integrand = [&ap](double t) { return ap.alpha(t) / t; };
    for (int j = 0; j < K; ++j) {
        double a = r0 - (r0 - r1) * (j + 1) / K, b = r0 - (r0 - r1) * j / K;
        ap.initial_log[j + 1] = ap.initial_log[j] + simpson(integrand, a, b);
    }
    ap.delta = r1 * std::exp(ap.initial_log[K]);
    double G1 = 0.5 * std::log((2.0 - tau) / tau);
    ap.s_len = G1 / ((1.0 - ap.ramp_edge) * ap.kappa);
    ap.ramp_int.assign(K + 1, 0.0);
    if (ap.s_len > 0.0) {
        auto b = [&ap](double s) { return ramp_beta(ap, s / ap.s_len); };
        for (int j = 0; j < K; ++j)
            ap.ramp_int[j + 1] = ap.ramp_int[j] + simpson(b, ap.s_len * j / K, ap.s_len * (j + 1) / K);
    }
    return ap;
}

namespace {

// int_0^s beta.
double beta_integral(const AlphaProfile& ap, double s) {
    double out = ap.tau * std::min(s, ap.s_a);
    if (s <= ap.s_a) return out;
    int K = AlphaProfile::kCells;
    double w = std::min(s, ap.s2) - ap.s_a;
    if (ap.s_len > 0.0) {
        double pos = w / ap.s_len * K;
        int j = std::clamp(static_cast<int>(pos), 0, K - 1);
        double a = ap.s_len * j / K;
        auto b = [&ap](double t) { return ramp_beta(ap, t / ap.s_len); };
        out += ap.ramp_int[j] + simpson(b, a, w);
    }
    if (s > ap.s2) out += s - ap.s2;
    return out;
}

}  // namespace

Jet Jet::constant(int n, double c) { return {c, Vec::Zero(n), Mat::Zero(n, n)}; }

Jet operator+(const Jet& a, const Jet& b) { return {a.v + b.v, a.d + b.d, a.dd + b.dd}; }
Jet operator-(const Jet& a, const Jet& b) { return {a.v - b.v, a.d - b.d, a.dd - b.dd}; }
Jet operator*(const Jet& a, const Jet& b) {
    Mat cross = a.d * b.d.transpose();
    return {a.v * b.v, a.v * b.d + b.v * a.d, a.v * b.dd + b.v * a.dd + cross + cross.transpose()};
}
Jet operator*(double s, const Jet& a) { return {s * a.v, s * a.d, s * a.dd}; }
Jet operator+(double s, const Jet& a) { return {s + a.v, a.d, a.dd}; }

Jet compose(double g0, double g1, double g2, const Jet& a) {
    return {g0, g1 * a.d, g1 * a.dd + g2 * (a.d * a.d.transpose())};
}
Jet jet_log(const Jet& a) {
    if (!(a.v > 0.0)) throw InputError("log of a non-positive jet");
    return compose(std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v), a);
}
Jet jet_exp(const Jet& a) {
    double e = std::exp(a.v);
    return compose(e, e, e, a);
}
Jet jet_sqrt(const Jet& a) {
    if (!(a.v > 0.0)) throw InputError("sqrt of a non-positive jet");
    double s = std::sqrt(a.v);
    return compose(s, 0.5 / s, -0.25 / (s * a.v), a);
}
Jet radial_jet(const Vec& x) {
    double r = x.norm();
    if (!(r > 0.0)) throw InputError("radial jet at the origin");
    Vec nu = x / r;
    int n = static_cast<int>(x.size());
    return {r, nu, (Mat::Identity(n, n) - nu * nu.transpose()) / r};
}

PointGeometry point_geometry_fd(const ChartMetric& c, const Vec& x, const FdOptions& opt) {
    return {c.metric(x), christoffel_fd(c, x, c.h_fd), chart_curvature_coords(c, x, opt)};
}

Vec conformal_gradient(const Jet& sigma, const Jet& f, const PointGeometry& g) {
    if (!(sigma.v > 0.0)) throw InputError("sigma must be positive");
    return g.g.ldlt().solve(f.d) / (sigma.v * sigma.v);
}

Vec conformal_connection(const Jet& sigma, const Vec& X, const Vec& Y, const PointGeometry& g) {
    if (!(sigma.v > 0.0)) throw InputError("sigma must be positive");
    int n = static_cast<int>(X.size());
    Vec out(n);
    for (int k = 0; k < n; ++k) out(k) = X.dot(g.gamma[k] * Y);
    Vec grad_sigma = g.g.ldlt().solve(sigma.d);
    double gxy = X.dot(g.g * Y);
    out += (sigma.d.dot(X) * Y + sigma.d.dot(Y) * X - gxy * grad_sigma) / sigma.v;
    return out;
}

Mat conformal_hessian(const Jet& sigma, const Jet& f, const PointGeometry& g) {
    if (!(sigma.v > 0.0)) throw InputError("sigma must be positive");
    int n = static_cast<int>(f.d.size());
    Mat h = f.dd;
    for (int k = 0; k < n; ++k) h -= f.d(k) * g.gamma[k];
    Vec grad_f = g.g.ldlt().solve(f.d);
    Mat sym = sigma.d * f.d.transpose();
    h += (sigma.d.dot(grad_f) * g.g - sym - sym.transpose()) / sigma.v;
    return symmetrized(h);
}

Riemann4 conformal_curvature_radial(const Profile1D& w, const Jet& f, const PointGeometry& g) {
    double w0 = w.w(f.v);
    if (!(w0 > 0.0)) throw InputError("w <= 0 at f = " + fmt(f.v));
    double a = w.dw(f.v) / w0;
    double b = w.ddw(f.v) / w0 - 2.0 * a * a;
    int n = static_cast<int>(f.d.size());
    Mat hess = f.dd;
    for (int k = 0; k < n; ++k) hess -= f.d(k) * g.gamma[k];
    hess = symmetrized(hess);
    double df2 = sq_norm_g(f.d, g.g);
    Riemann4 out = g.R - a * coord_wedge(g.g, 2.0 * hess + a * df2 * g.g) -
                   2.0 * b * coord_wedge(g.g, f.d * f.d.transpose());
    return (w0 * w0) * out;
}

CurvatureOperator conformally_flat_operator(const Jet& log_psi, const Mat& F) {
    int n = static_cast<int>(log_psi.d.size());
    Mat T = log_psi.dd - log_psi.d * log_psi.d.transpose() +
            0.5 * log_psi.d.squaredNorm() * Mat::Identity(n, n);
    Mat TF = symmetrized(F.transpose() * T * F);
    return (-2.0 * std::exp(-2.0 * log_psi.v)) *
           kulkarni_wedge(SymmetricForm::identity(n), SymmetricForm(TF));
}

FlatteningFactor FlatteningFactor::round_sphere(int n) {
    if (n < 2) throw InputError("sphere chart needs n >= 2");
    FlatteningFactor ff;
    ff.n = n;
    ff.name = "sphere";
    // Unit sphere in stereographic coordinates scaled by 2: g = (4 / (4 + |x|^2))^2 dx^2.
    ff.radius = 2.0;
    ff.chart.dim = n;
    ff.chart.g = [n](const Vec& x) {
        double s = 4.0 / (4.0 + x.squaredNorm());
        return Mat(s * s * Mat::Identity(n, n));
    };
    ff.chart.lo = Vec::Constant(n, -2.0);
    ff.chart.hi = Vec::Constant(n, 2.0);
    ff.v = [n](const Vec& x) {
        return Jet{1.0 + 0.25 * x.squaredNorm(), 0.5 * x, 0.5 * Mat::Identity(n, n)};
    };
    return ff;
}

FlatteningFactor FlatteningFactor::flat(int n) {
    if (n < 2) throw InputError("flat chart needs n >= 2");
    FlatteningFactor ff;
    ff.n = n;
    ff.name = "flat";
    ff.radius = 1.0;
    ff.chart.dim = n;
    ff.chart.g = [n](const Vec&) { return Mat(Mat::Identity(n, n)); };
    ff.chart.lo = Vec::Constant(n, -1.0);
    ff.chart.hi = Vec::Constant(n, 1.0);
    ff.v = [n](const Vec&) { return Jet::constant(n, 1.0); };
    return ff;
}

void FlatteningFactor::validate(int samples, double tol, std::uint64_t seed) const {
    if (!v || !chart.g) throw InputError("flattening factor is incomplete");
    Jet v0 = v(Vec::Zero(n));
    if (std::abs(v0.v - 1.0) > 1e-14) throw InputError("v(0) = " + fmt(v0.v) + ", expected 1");
    ChartMetric flat_chart = chart;
    auto g = chart.g;
    auto vf = v;
    flat_chart.g = [g, vf](const Vec& x) {
        double s = vf(x).v;
        return Mat(s * s * g(x));
    };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int i = 0; i < samples; ++i) {
        Vec x = unit_vector(n, sample_seed(seed, i)) * (0.9 * radius * std::pow(ud(rng), 1.0 / n));
        double vx = v(x).v;
        if (vx < 0.5 || vx > 2.0) throw InputError("v = " + fmt(vx) + " outside [1/2, 2]");
        Riemann4 R = chart_curvature_fd(flat_chart, x, {true});
        double m = R.max_abs_diff(Riemann4(n));
        if (m > tol) throw InputError("v^2 g is not flat: FD curvature " + fmt(m) + " at |x| = " + fmt(x.norm()));
    }
}

FlatteningFactor parse_chart(const std::string& text, int n) {
    if (text == "sphere" || text == "round") return FlatteningFactor::round_sphere(n);
    if (text == "flat") return FlatteningFactor::flat(n);
    throw InputError("unknown chart '" + text + "' (expected sphere or flat)");
}

double cutoff(double t) { return smooth5(2.0 * (1.0 - t)); }
double cutoff_d(double t) { return -2.0 * smooth5_d(2.0 * (1.0 - t)); }
double cutoff_dd(double t) { return 4.0 * smooth5_dd(2.0 * (1.0 - t)); }

Jet CutoffProfile::phi(const Vec& x) const {
    int n = static_cast<int>(x.size());
    if (!(lambda > 0.0)) throw InputError("lambda must be positive");
    double r = x.norm();
    if (r <= 0.5 * lambda) return Jet::constant(n, 1.0);
    if (r >= lambda) return Jet::constant(n, 0.0);
    double t = r / lambda;
    return compose(cutoff(t), cutoff_d(t) / lambda, cutoff_dd(t) / (lambda * lambda), radial_jet(x));
}

namespace {
// 1 + phi (v^2 - 1).
Jet blend_square(const CutoffProfile& cp, const FlatteningFactor& ff, const Vec& x) {
    Jet v = ff.v(x);
    Jet w = v * v;
    w.v -= 1.0;
    return 1.0 + cp.phi(x) * w;
}
}  // namespace

Jet CutoffProfile::v_lambda(const FlatteningFactor& ff, const Vec& x) const { return jet_sqrt(blend_square(*this, ff, x)); }

Jet CutoffProfile::log_q(const FlatteningFactor& ff, const Vec& x) const {
    return 0.5 * jet_log(blend_square(*this, ff, x)) - jet_log(ff.v(x));
}

Jet CutoffProfile::q(const FlatteningFactor& ff, const Vec& x) const { return jet_exp(log_q(ff, x)); }

double AlphaProfile::beta(double s) const {
    if (s <= s_a) return tau;
    if (s >= s2) return 1.0;
    return ramp_beta(*this, (s - s_a) / s_len);
}

double AlphaProfile::dbeta(double s) const {
    if (s <= s_a || s >= s2) return 0.0;
    double G1 = 0.5 * std::log((2.0 - tau) / tau);
    double x = (s - s_a) / s_len;
    double b = ramp_beta(*this, x);
    return G1 * plateau(x, ramp_edge) / ((1.0 - ramp_edge) * s_len) * b * (2.0 - b);
}

double AlphaProfile::alpha(double r) const {
    if (r >= r0) return 0.0;
    if (r >= r1) {
        double x = (r0 - r) / (r0 - r1);
        return tau * smooth5((x - 0.125) * 4.0 / 3.0);
    }
    return beta(c * std::log(r1 / r));
}

double AlphaProfile::dalpha(double r) const {
    if (r >= r0) return 0.0;
    if (r >= r1) {
        double x = (r0 - r) / (r0 - r1);
        return -tau * smooth5_d((x - 0.125) * 4.0 / 3.0) * (4.0 / 3.0) / (r0 - r1);
    }
    return -c / r * dbeta(c * std::log(r1 / r));
}

double AlphaProfile::log_u(double r) const {
    if (!(r > 0.0)) throw InputError("log u needs r > 0");
    if (r >= r0) return 0.0;
    int K = kCells;
    if (r >= r1) {
        double pos = (r0 - r) / (r0 - r1) * K;
        int j = std::clamp(static_cast<int>(pos), 0, K - 1);
        double rj = r0 - (r0 - r1) * j / K;
        return initial_log[j] + simpson([this](double t) { return alpha(t) / t; }, r, rj);
    }
    if (r <= r2) return log_gamma - std::log(r);
    return initial_log[K] + beta_integral(*this, c * std::log(r1 / r)) / c;
}

Jet AlphaProfile::log_u_jet(const Vec& x) const {
    Jet rj = radial_jet(x);
    double r = rj.v, a = alpha(r);
    return compose(log_u(r), -a / r, (-dalpha(r) + a / r) / r, rj);
}

double AlphaProfile::log_gamma_max() const {
    double deficit = s_len - ramp_int.back();
    return std::log(delta) - deficit / c;
}

double AlphaProfile::slope_residual(int nodes) const {
    double worst = std::numeric_limits<double>::infinity();
    double s_hi = s2 + 2.0 * c;
    for (int i = 0; i < nodes; ++i) {
        double s = s_hi * i / (nodes - 1);
        double r = r1 * std::exp(-s / c);
        double a = alpha(r);
        worst = std::min(worst, (dalpha(r) + c * a * (2.0 - a) / r) * r / c);
    }
    return worst;
}

double AlphaProfile::log_derivative_residual(int nodes) const {
    std::vector<double> radii;
    int K = kCells;
    int stride = std::max(1, K / nodes);
    for (int j = stride; j < K; j += stride) radii.push_back(r0 - (r0 - r1) * j / K);
    double s_hi = s2 + 2.0 * c;
    for (int i = 1; i <= nodes; ++i) radii.push_back(r1 * std::exp(-s_hi * i / nodes / c));
    double worst = 0.0;
    for (double r : radii) {
        double h = 1e-5 * r;
        double d = (log_u(r + h) - log_u(r - h)) / (2.0 * h);
        worst = std::max(worst, std::abs(d * r + alpha(r)));
    }
    return worst;
}

AlphaProfile build_alpha(double c, double tau, double r0, double r1, double gamma_target) {
    if (!(gamma_target > 0.0)) throw InputError("gamma must be positive");
    return build_alpha_log(c, tau, r0, r1, std::log(gamma_target));
}

AlphaProfile build_alpha_log(double c, double tau, double r0, double r1, double log_gamma_target) {
    AlphaProfile ap = alpha_shape(c, tau, r0, r1);
    if (!std::isfinite(log_gamma_target)) throw InputError("log gamma must be finite");
    double lmax = ap.log_gamma_max();
    if (ap.s_len == 0.0) {
        if (std::abs(log_gamma_target - std::log(ap.delta)) > 1e-12)
            throw InputError("tau = 1 only reaches gamma = delta = " + fmt(ap.delta));
        ap.s_a = 0.0;
    } else {
        if (log_gamma_target > lmax + 1e-12)
            throw InputError("gamma = exp(" + fmt(log_gamma_target) + ") out of range (0, exp(" + fmt(lmax) +
                             ")]; delta = " + fmt(ap.delta));
        double deficit = ap.s_len - ap.ramp_int.back();
        ap.s_a = std::max(0.0, (c * (std::log(ap.delta) - log_gamma_target) - deficit) / (1.0 - tau));
    }
    ap.s2 = ap.s_a + ap.s_len;
    double log_r2 = std::log(r1) - ap.s2 / c;
    ap.r2 = std::exp(log_r2);
    if (!(ap.r2 > std::numeric_limits<double>::min()))
        throw InputError("r2 = exp(" + fmt(log_r2) + ") is below double range");
    ap.log_gamma = log_r2 + ap.initial_log[AlphaProfile::kCells] + beta_integral(ap, ap.s2) / c;
    ap.gamma = std::exp(ap.log_gamma);
    if (std::abs(ap.log_gamma - log_gamma_target) > 1e-8)
        throw InvariantError("log gamma " + fmt(ap.log_gamma) + " misses the target " + fmt(log_gamma_target));
    return ap;
}

Mat radial_frame(const Vec& nu) {
    int n = static_cast<int>(nu.size());
    Vec u = nu.normalized();
    Vec w = u;
    w(n - 1) -= 1.0;
    Mat F = Mat::Identity(n, n);
    if (w.norm() > 1e-14) F -= 2.0 * w * w.transpose() / w.squaredNorm();
    return F;
}

namespace {

// Jets below are taken in y = x / rs, so derivatives carry factors rs and rs^2.
Jet scale_jet(const Jet& j, double rs) { return {j.v, rs * j.d, (rs * rs) * j.dd}; }

Jet phi_y(const CutoffProfile& cp, const Vec& x, double rs) {
    int n = static_cast<int>(x.size());
    double r = x.norm(), lam = cp.lambda;
    if (r <= 0.5 * lam) return Jet::constant(n, 1.0);
    if (r >= lam) return Jet::constant(n, 0.0);
    double t = r / lam, k = rs / lam;
    Vec nu = x / r;
    Mat P = nu * nu.transpose();
    return {cutoff(t), cutoff_d(t) * k * nu,
            cutoff_d(t) * k * (rs / r) * (Mat::Identity(n, n) - P) + cutoff_dd(t) * k * k * P};
}

Jet log_q_y(const CutoffProfile& cp, const FlatteningFactor& ff, const Vec& x, double rs) {
    Jet v = scale_jet(ff.v(x), rs);
    Jet w = v * v;
    w.v -= 1.0;
    return 0.5 * jet_log(1.0 + phi_y(cp, x, rs) * w) - jet_log(v);
}

Jet log_u_y(const AlphaProfile& ap, const Vec& nu, double r) {
    int n = static_cast<int>(nu.size());
    double a = ap.alpha(r);
    Mat P = nu * nu.transpose();
    return {ap.log_u(r), -a * nu, -a * (Mat::Identity(n, n) - P) + (a - ap.dalpha(r) * r) * P};
}

// (psi r)^2 times the curvature of psi^2 dx^2, from the y-jet of log psi.
CurvatureOperator scaled_operator(Jet j, const Mat& F) {
    j.v = 0.0;
    return conformally_flat_operator(j, F);
}

}  // namespace

Decomposition decompose_R_D(const FlatteningFactor& ff, const CutoffProfile& cp, const AlphaProfile& ap, const Vec& nu,
                            double r) {
    int n = ff.n;
    if (!(r > 0.0) || r >= ff.radius) throw InputError("r outside (0, chart radius)");
    if (nu.size() != n) throw InputError("normal has the wrong dimension");
    if (!(cp.lambda > 0.0)) throw InputError("lambda must be positive");
    Mat F = radial_frame(nu);
    Vec e = F.col(n - 1);
    Vec x = r * e;
    Jet lv = jet_log(scale_jet(ff.v(x), r));
    Jet lq = log_q_y(cp, ff, x, r);
    Jet lu = log_u_y(ap, e, r);
    Decomposition d;
    d.r = r;
    d.log_u = lu.v;
    d.q = std::exp(lq.v);
    d.alpha = ap.alpha(r);
    d.dalpha = ap.dalpha(r);
    d.RM = scaled_operator(-1.0 * lv, F);
    d.RM_lambda = scaled_operator(lq, F);
    d.RD_direct = scaled_operator(lu + lq, F);

    Vec dq = (d.q / r) * (F.transpose() * lq.d);
    d.dq_norm = dq.norm();
    Vec en = Vec::Unit(n, n - 1);
    Mat P = en * en.transpose();
    Mat B = dq(n - 1) * Mat::Identity(n, n) - (dq * en.transpose() + en * dq.transpose());
    SymmetricForm I = SymmetricForm::identity(n);
    d.E = (1.0 / d.q) * kulkarni_wedge(I, SymmetricForm(symmetrized(B)));

    CurvatureOperator S = model_operator(n - 1, 1.0, n);
    d.RD = d.RM_lambda + (d.alpha * (2.0 - d.alpha)) * S +
           (2.0 * d.dalpha * r) * kulkarni_wedge(I, SymmetricForm(P)) + (2.0 * d.alpha * r) * d.E;
    return d;
}

CurvatureOperator conformal_curvature_fd(const FlatteningFactor& ff, const CutoffProfile& cp, const AlphaProfile* ap,
                                         const Vec& nu, double r) {
    int n = ff.n;
    Mat F = radial_frame(nu);
    Vec xc = r * F.col(n - 1);
    auto log_psi = [&ff, cp, ap](const Vec& x) {
        double lp = cp.log_q(ff, x).v;
        if (ap) lp += ap->log_u(x.norm());
        return lp;
    };
    double lc = log_psi(xc);
    // (psi / psi_c)^2 dy^2 is (psi_c r)^-2 times the metric, so its curvature is already scaled.
    ChartMetric c;
    c.dim = n;
    c.h_fd = 1e-3;
    c.lo = Vec::Constant(n, -0.5);
    c.hi = Vec::Constant(n, 0.5);
    c.g = [log_psi, xc, r, lc, n](const Vec& y) {
        double s = std::exp(log_psi(xc + r * y) - lc);
        return Mat(s * s * Mat::Identity(n, n));
    };
    Riemann4 R = chart_curvature_fd(c, Vec::Zero(n), {true});
    return from_riemann(transform_tensor(R, F), 1e-6);
}

BlendBounds blend_bounds(const FlatteningFactor& ff, const std::vector<double>& lambdas, const BlendGrid& grid) {
    BlendBounds out;
    out.lambdas = lambdas;
    int n = ff.n;
    std::vector<Vec> normals;
    for (int k = 0; k < grid.normals; ++k) normals.push_back(unit_vector(n, sample_seed(grid.seed, k)));

    // Chart-only constants of the dq estimate.
    auto amb = log_grid(1e-3 * ff.radius, 0.99 * ff.radius, grid.radii);
    double sup_dvm2 = 0.0, Cv = 0.0;
    for (double r : amb)
        for (const Vec& nu : normals) {
            Jet v = ff.v(r * nu);
            double v2 = v.v * v.v;
            sup_dvm2 = std::max(sup_dvm2, (2.0 / (v2 * v.v)) * v.d.norm());
            Cv = std::max(Cv, std::abs(1.0 - 1.0 / v2) / r);
        }
    double cphi = kSmoothSlope * 2.0;
    out.dq_bound = 2.0 * (sup_dvm2 + cphi * Cv);
    out.dq_bound_closed = 0.125 * (sup_dvm2 + cphi * Cv);

    AlphaProfile flat_alpha;  // u = 1 everywhere
    flat_alpha.r0 = flat_alpha.r1 = flat_alpha.r2 = 0.0;
    for (double lambda : lambdas) {
        if (!(lambda > 0.0) || lambda >= ff.radius) throw InputError("lambda outside (0, chart radius)");
        CutoffProfile cp{lambda};
        auto inner = log_grid(0.25 * lambda, lambda, grid.radii);
        auto outer = log_grid(1e-3 * lambda, 0.99 * ff.radius, grid.radii);
        int N = static_cast<int>(normals.size());
        auto rm = map_index<double>(
            static_cast<int>(inner.size()) * N,
            [&](int i) {
                Vec x = inner[i / N] * normals[i % N];
                Mat F = radial_frame(normals[i % N]);
                return operator_norm(conformally_flat_operator(cp.log_q(ff, x), F));
            },
            grid.exec);
        struct EQ {
            double e, dq;
        };
        auto eq = map_index<EQ>(
            static_cast<int>(outer.size()) * N,
            [&](int i) {
                double r = outer[i / N];
                Decomposition d = decompose_R_D(ff, cp, flat_alpha, normals[i % N], r);
                return EQ{operator_norm(d.E), d.dq_norm};
            },
            grid.exec);
        double m = 0.0, e = 0.0, dq = 0.0;
        for (double v : rm) m = std::max(m, v);
        for (const EQ& v : eq) {
            e = std::max(e, v.e);
            dq = std::max(dq, v.dq);
        }
        out.sup_RM_lambda.push_back(lambda * m);
        out.sup_E.push_back(e);
        out.sup_dq.push_back(dq);
        out.C1 = std::max(out.C1, e);
        out.C2 = std::max(out.C2, lambda * m);
        if (dq > out.dq_bound * (1.0 + 1e-9)) out.dq_ok = false;
    }
    if (!out.sup_RM_lambda.empty()) {
        size_t largest = std::max_element(lambdas.begin(), lambdas.end()) - lambdas.begin();
        double ref = out.sup_RM_lambda[largest];
        out.C2_stable = out.C2 <= 2.0 * ref * (1.0 + 1e-12);
    }
    return out;
}

double choose_lambda(const LambdaConstants& k) {
    if (!(k.r2 > 0.0) || !std::isfinite(k.r2)) throw InputError("r2 undefined: build the alpha profile first");
    if (!(k.rho > 0.0)) throw InputError("rho must be positive");
    double m = k.r2;
    if (k.sup_RM > 0.0) m = std::min(m, std::sqrt(k.rho / (48.0 * k.sup_RM)));
    if (k.C1 > 0.0) m = std::min(m, k.rho / (6.0 * k.C1));
    if (k.C2 > 0.0) m = std::min(m, k.rho / (48.0 * k.C2));
    return 0.9 * m;
}

std::vector<double> conformal_seams(const AlphaProfile& ap, double lambda) {
    std::vector<double> out = {ap.r0 - (ap.r0 - ap.r1) / 8.0, ap.r0 - 7.0 * (ap.r0 - ap.r1) / 8.0,
                               0.5 * lambda, lambda};
    if (ap.s_len > 0.0) {
        out.push_back(ap.r1 * std::exp(-ap.s_a / ap.c));
        out.push_back(ap.r2);
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

struct AmbientSample {
    double r;
    int normal;
    CurvatureOperator RM;
};

std::vector<Vec> normals_for(int n, int count, std::uint64_t seed) {
    std::vector<Vec> out;
    out.push_back(Vec::Unit(n, n - 1));
    for (int k = 1; k < count; ++k) out.push_back(unit_vector(n, sample_seed(seed, k)));
    return out;
}

}  // namespace

ConformalSetup conformal_setup(const FlatteningFactor& ff, const Condition& c, const ConformalGrid& grid) {
    ff.validate();
    int n = ff.n;
    ConformalSetup k;
    auto normals = normals_for(n, grid.normals, grid.seed);
    auto radii = log_grid(1e-3 * ff.radius, 0.95 * ff.radius, std::max(4, grid.radii / 2));
    int N = static_cast<int>(normals.size());
    auto amb = map_index<CurvatureOperator>(
        static_cast<int>(radii.size()) * N,
        [&](int i) {
            Vec nu = normals[i % N];
            return conformally_flat_operator(-1.0 * jet_log(ff.v(radii[i / N] * nu)), radial_frame(nu));
        },
        grid.exec);

    for (size_t i = 0; i < amb.size(); ++i) {
        const CurvatureOperator& R = amb[i];
        k.sup_RM = std::max(k.sup_RM, operator_norm(R));
        double m = margin(c, R), tol = margin_tolerance(c, R);
        if (!(m > tol))
            throw InputError("ambient pullback fails " + c.name() + " at r = " + fmt(radii[i / N]) + " (margin " +
                             fmt(m) + ")");
        for (double t : {0.5, 0.1, 1e-2, 1e-3}) {
            CurvatureOperator tR = t * R;
            if (!(margin(c, tR) > margin_tolerance(c, tR))) {
                k.star_shaped = false;
                throw InputError(c.name() + " is not star-shaped along the ambient sample at r = " +
                                 fmt(radii[i / N]) + ", t = " + fmt(t));
            }
        }
    }

    CurvatureOperator S = model_operator(n - 1, 1.0, n);
    if (c.convex()) {
        k.rho = inner_cone_rho_convex(c, S).rho;
    } else if (c.kind == ConditionKind::SpectralAlmostPos) {
        k.rho = std::numeric_limits<double>::infinity();
        for (const auto& R : amb) k.rho = std::min(k.rho, cepsilon_delta(c.epsilon, R));
    } else {
        throw InputError("no inner-cone radius for " + c.name());
    }
    if (!(k.rho > 0.0) || !std::isfinite(k.rho)) throw InputError("no positive inner-cone radius");

    double ball = std::numeric_limits<double>::infinity();
    for (const auto& R : amb) ball = std::min(ball, ball_radius(c, R, probe_directions(R, 32, grid.seed)));
    k.eps1 = 0.5 * ball;
    if (!(k.eps1 > 0.0)) throw InputError("ambient curvature has no initial margin");

    double scale = std::min(1.0, ff.radius);
    BlendGrid bg;
    bg.exec = grid.exec;
    k.blend = blend_bounds(ff, {0.1 * scale, 0.05 * scale, 0.025 * scale}, bg);
    k.C1 = k.blend.C1;
    k.C2 = k.blend.C2;

    Vec en = Vec::Unit(n, n - 1);
    double NE = operator_norm(kulkarni_wedge(SymmetricForm::identity(n), SymmetricForm(Mat(en * en.transpose()))));
    k.C = std::max({operator_norm(S), NE, k.C1});
    k.c = 0.9 * (k.rho / 4.0) / NE;
    k.r0 = ff.radius;
    if (k.C1 > 0.0) k.r0 = std::min(k.r0, k.rho / (4.0 * k.C1));
    k.r0 *= 0.9;
    k.r1 = 0.5 * k.r0;
    double bound = 1.0 / (k.r1 * k.r1) + 2.5 / ((k.r0 - k.r1) * k.r1) + 1.0 / k.r1;
    k.tau = std::min(0.9 * k.eps1 / (32.0 * k.C * bound), 0.9);
    AlphaProfile base = alpha_shape(k.c, k.tau, k.r0, k.r1);
    k.delta = base.delta;
    k.log_gamma_max = base.log_gamma_max();
    return k;
}

ConformalReport verify_conformal(const FlatteningFactor& ff, const Condition& c, double gamma_target,
                                 const ConformalGrid& grid) {
    if (!(gamma_target > 0.0)) throw InputError("gamma must be positive");
    return verify_conformal_log(ff, c, std::log(gamma_target), grid);
}

ConformalReport verify_conformal_log(const FlatteningFactor& ff, const Condition& c, double log_gamma_target,
                                     const ConformalGrid& grid) {
    ConformalSetup k = conformal_setup(ff, c, grid);
    int n = ff.n;
    ConformalReport rep;
    rep.chart = ff.name;
    rep.condition = c.name();
    rep.n = n;
    rep.rho = k.rho;
    rep.eps1 = k.eps1;
    rep.radius = ff.radius;
    rep.c = k.c;
    rep.C = k.C;
    rep.C1 = k.C1;
    rep.C2 = k.C2;
    rep.sup_RM = k.sup_RM;
    rep.star_shaped = k.star_shaped;
    rep.alpha = build_alpha_log(k.c, k.tau, k.r0, k.r1, log_gamma_target);
    const AlphaProfile& ap = rep.alpha;
    rep.lambda = choose_lambda({ap.r2, k.rho, k.sup_RM, k.C1, k.C2});
    CutoffProfile cp{rep.lambda};
    rep.slope_residual = ap.slope_residual();
    rep.log_derivative_residual = ap.log_derivative_residual();

    // One log grid per region, so every piece of the construction is sampled.
    double lam = rep.lambda;
    std::vector<std::pair<double, double>> regions = {{0.01 * lam, 0.5 * lam}, {0.5 * lam, lam}, {lam, ap.r2},
                                                      {ap.r2, ap.r1},          {ap.r1, ap.r0},   {ap.r0, 0.95 * ff.radius}};
    int per = std::max(2, grid.radii / static_cast<int>(regions.size()));
    std::vector<double> radii;
    for (auto [lo, hi] : regions) {
        if (!(hi > lo)) continue;
        auto g = log_grid(lo, hi, per);
        radii.insert(radii.end(), g.begin(), g.end());
    }
    auto normals = normals_for(n, grid.normals, sample_seed(grid.seed, 99));
    int N = static_cast<int>(normals.size());
    CurvatureOperator S = model_operator(n - 1, 1.0, n);
    struct Row {
        ConformalSample s;
        double decomposition;
        double end;
    };
    auto rows = map_index<Row>(
        static_cast<int>(radii.size()) * N,
        [&](int i) {
            double r = radii[i / N];
            Decomposition d = decompose_R_D(ff, cp, ap, normals[i % N], r);
            const CurvatureOperator& scaled = d.RD;
            Row row;
            row.s.r = r;
            row.s.normal = i % N;
            row.s.margin = margin(c, scaled);
            row.s.tolerance = margin_tolerance(c, scaled);
            row.s.pass = row.s.margin > row.s.tolerance;
            double denom = std::max(operator_norm(scaled), 1.0);
            row.decomposition = operator_norm(scaled - d.RD_direct) / denom;
            row.end = 0.0;
            if (r < 0.5 * lam) {
                // u q r / gamma, and gamma^2 R_D against the cylinder.
                double lg = d.log_u + std::log(d.q) + std::log(r) - ap.log_gamma;
                row.end = std::max(std::abs(std::expm1(lg)), operator_norm(std::exp(-2.0 * lg) * d.RD - S));
            }
            return row;
        },
        grid.exec);
    rep.min_margin = std::numeric_limits<double>::infinity();
    bool margins_ok = true;
    for (const Row& row : rows) {
        rep.samples.push_back(row.s);
        rep.min_margin = std::min(rep.min_margin, row.s.margin);
        margins_ok = margins_ok && row.s.pass;
        rep.decomposition_deviation = std::max(rep.decomposition_deviation, row.decomposition);
        rep.end_deviation = std::max(rep.end_deviation, row.end);
    }

    // FD cross-check at region midpoints, nudged away from the C^2 seams.
    auto seams = conformal_seams(ap, lam);
    std::vector<double> oracle_r;
    int rcount = static_cast<int>(regions.size());
    for (int j = 0; j < grid.oracle_samples; ++j) {
        auto [lo, hi] = regions[j % rcount];
        if (!(hi > lo)) continue;
        int slot = j / rcount, slots = (grid.oracle_samples + rcount - 1 - j % rcount) / rcount;
        double t = (slot + 0.5) / std::max(1, slots);
        double lr = std::log(lo) + t * (std::log(hi) - std::log(lo));
        for (double sm : seams)
            if (std::abs(lr - std::log(sm)) < 0.02) lr = std::log(sm) + 0.05;
        oracle_r.push_back(std::exp(lr));
    }
    auto dev = map_index<double>(
        static_cast<int>(oracle_r.size()),
        [&](int j) {
            Vec nu = unit_vector(n, sample_seed(grid.seed, 1000 + j));
            Decomposition d = decompose_R_D(ff, cp, ap, nu, oracle_r[j]);
            CurvatureOperator fd = conformal_curvature_fd(ff, cp, &ap, nu, oracle_r[j]);
            return operator_norm(d.RD - fd) / std::max(operator_norm(d.RD), 1.0);
        },
        grid.exec);
    for (double v : dev) rep.oracle_deviation = std::max(rep.oracle_deviation, v);

    rep.pass = margins_ok && rep.star_shaped && rep.oracle_deviation <= grid.oracle_tol &&
               rep.decomposition_deviation <= 1e-8 && rep.end_deviation <= 1e-10 && rep.slope_residual >= -1e-12 &&
               rep.log_derivative_residual <= 1e-8;
    return rep;
}

}  // namespace curvcone
