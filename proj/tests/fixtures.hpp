#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "curvcone/bending.hpp"
#include "curvcone/conditions.hpp"
#include "curvcone/conformal.hpp"
#include "gen.hpp"

// Fixtures shared by the unit tests and the acceptance runner.
namespace fx {

using namespace curvcone;

inline std::vector<double> log_grid(double lo, double hi, int count) {
    std::vector<double> g;
    for (int i = 0; i < count; ++i) g.push_back(lo * std::pow(hi / lo, double(i) / (count - 1)));
    return g;
}

inline Vec last_axis(int d) {
    Vec e = Vec::Zero(d);
    e(d - 1) = 1.0;
    return e;
}

inline std::vector<Condition> all_conditions() {
    return {Condition::scal_positive(),          Condition::pic(),
            Condition::p_curvature(1),           Condition::sec_almost_nonneg(0.1),
            Condition::spectral_almost_pos(0.5), Condition::operator_positive()};
}

// Nonnegative operator with unit norm: positive mix of rotated sphere models.
inline CurvatureOperator random_nonneg(int n) {
    CurvatureOperator s = CurvatureOperator::zero(n);
    for (int k = 0; k < 3; ++k) s += gen::uniform(0.1, 1.0) * act(gen::orthogonal(n), model_operator(gen::dim(2, n), 1.0, n));
    return (1.0 / operator_norm(s)) * s;
}

// Point of the profile away from seams and above min_log_r.
inline ProfilePoint random_point(const AngleProfile& p, std::mt19937_64& g, double min_log_r = -600.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (;;) {
        int seg = std::min(static_cast<int>(u(g) * p.size()), p.size() - 1);
        ProfilePoint pt{seg, u(g) * p.segments[seg].u_len};
        if (p.seam_distance(pt) > 0.01 && p.log_r(pt) > min_log_r) return pt;
    }
}

// f(x) = a.x + x^T B x / 2 + c sin(k.x), with its jet.
struct SmoothField {
    Vec a, k;
    Mat B;
    double c = 0.0;

    static SmoothField random(int n, double scale) {
        SmoothField f;
        f.a = scale * gen::gaussian_vec(n);
        f.k = gen::gaussian_vec(n);
        f.B = scale * gen::symmetric(n);
        f.c = scale * gen::uniform(-1.0, 1.0);
        return f;
    }
    double value(const Vec& x) const { return a.dot(x) + 0.5 * x.dot(B * x) + c * std::sin(k.dot(x)); }
    Jet jet(const Vec& x) const {
        double t = k.dot(x);
        return {value(x), a + B * x + c * std::cos(t) * k, B - c * std::sin(t) * k * k.transpose()};
    }
};

inline ChartMetric flat_chart(int n) { return FlatteningFactor::flat(n).chart; }
inline ChartMetric sphere_chart(int n) { return FlatteningFactor::round_sphere(n).chart; }

inline ChartMetric deformed(const ChartMetric& base, std::function<double(const Vec&)> sigma) {
    ChartMetric c = base;
    auto g = base.g;
    c.g = [g, sigma](const Vec& x) {
        double s = sigma(x);
        return Mat(s * s * g(x));
    };
    return c;
}

struct Fixture {
    ChartMetric base;
    SmoothField f, h;  // sigma = exp(h)
    Vec x;
};

inline Fixture fixture(int i) {
    int n = 2 + i % 3;
    Fixture fx{i % 2 ? sphere_chart(n) : flat_chart(n), SmoothField::random(n, 0.5), SmoothField::random(n, 0.3),
               0.5 * gen::gaussian_vec(n) / std::sqrt(double(n))};
    return fx;
}

inline Jet sigma_jet(const SmoothField& h, const Vec& x) { return jet_exp(h.jet(x)); }

inline double max_abs(const Riemann4& t) { return t.max_abs_diff(Riemann4(t.n())); }

// Christoffel contraction Gamma(X, Y)^k.
inline Vec contract(const std::vector<Mat>& gamma, const Vec& X, const Vec& Y) {
    Vec out(X.size());
    for (int k = 0; k < X.size(); ++k) out(k) = X.dot(gamma[k] * Y);
    return out;
}

// Worst deviation of gradient, connection, Hessian and curvature of sigma^2 g from finite differences.
inline double conformal_fixture_deviation(const Fixture& f) {
    int n = f.base.dim;
    auto h = f.h;
    ChartMetric d = deformed(f.base, [h](const Vec& y) { return std::exp(h.value(y)); });
    PointGeometry g = point_geometry_fd(f.base, f.x);
    Jet s = sigma_jet(f.h, f.x), fj = f.f.jet(f.x);
    double worst = 0.0;

    Vec grad_fd = d.metric(f.x).ldlt().solve(fj.d);
    worst = std::max(worst, (conformal_gradient(s, fj, g) - grad_fd).norm());

    auto gamma = christoffel_fd(d, f.x, 1e-4);
    Vec X = gen::gaussian_vec(n), Y = gen::gaussian_vec(n);
    worst = std::max(worst, (conformal_connection(s, X, Y, g) - contract(gamma, X, Y)).norm());

    Mat hess_fd = fj.dd;
    for (int k = 0; k < n; ++k) hess_fd -= fj.d(k) * gamma[k];
    worst = std::max(worst, (conformal_hessian(s, fj, g) - hess_fd).cwiseAbs().maxCoeff());

    // sigma = w(f) with w(t) = exp(a t + b t^2).
    double a = gen::uniform(-0.5, 0.5), b = gen::uniform(-0.3, 0.3);
    Profile1D w{[a, b](double t) { return std::exp(a * t + b * t * t); },
                [a, b](double t) { return (a + 2 * b * t) * std::exp(a * t + b * t * t); },
                [a, b](double t) { return (std::pow(a + 2 * b * t, 2) + 2 * b) * std::exp(a * t + b * t * t); }};
    auto ff = f.f;
    ChartMetric dw = deformed(f.base, [ff, w](const Vec& y) { return w.w(ff.value(y)); });
    Riemann4 Rfd = chart_curvature_coords(dw, f.x, {true});
    Riemann4 R = conformal_curvature_radial(w, fj, g);
    return std::max(worst, R.max_abs_diff(Rfd) / std::max(1.0, max_abs(Rfd)));
}

}  // namespace fx
