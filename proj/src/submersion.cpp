#include "curvcone/submersion.hpp"

#include <algorithm>
#include <cmath>

namespace curvcone {

namespace {

// The eight index permutations preserving |R| with their signs.
constexpr int kPerm[8][4] = {{0, 1, 2, 3}, {1, 0, 2, 3}, {0, 1, 3, 2}, {1, 0, 3, 2},
                             {2, 3, 0, 1}, {3, 2, 0, 1}, {2, 3, 1, 0}, {3, 2, 1, 0}};
constexpr double kSign[8] = {1, -1, -1, 1, 1, -1, -1, 1};

enum class Pattern { VVVV, VVVH, VVHH, HVHV, HHHV, HHHH };

// Bit m set when slot m is horizontal.
constexpr int kMask[6] = {0b0000, 0b1000, 0b1100, 0b0101, 0b0111, 0b1111};

struct Canonical {
    Pattern pattern;
    int idx[4];
    double sign;
};

Canonical canonicalize(int k, int a, int b, int c, int d) {
    int x[4] = {a, b, c, d};
    for (int p = 0; p < 6; ++p)
        for (int s = 0; s < 8; ++s) {
            int y[4], mask = 0;
            for (int m = 0; m < 4; ++m) {
                y[m] = x[kPerm[s][m]];
                if (y[m] >= k) mask |= 1 << m;
            }
            if (mask == kMask[p]) return {static_cast<Pattern>(p), {y[0], y[1], y[2], y[3]}, kSign[s]};
        }
    throw InvariantError("unreachable index pattern");
}

int count_vertical(int k, int a, int b, int c, int d) { return (a < k) + (b < k) + (c < k) + (d < k); }

struct Terms {
    const SubmersionData& d;
    Vec Tv(int i, int j) const { return d.T[i].col(j); }
    Vec Av(int r, int i) const { return d.A[r].col(i); }
    // <T_i m, A_r j> + <T_j m, A_r i>
    double ta(int i, int j, int m, int r) const { return Tv(i, m).dot(Av(r, j)) + Tv(j, m).dot(Av(r, i)); }
    // <T_j m, T_i l> - <T_i m, T_j l>
    double tt(int i, int j, int m, int l) const { return Tv(j, m).dot(Tv(i, l)) - Tv(i, m).dot(Tv(j, l)); }
    // <A_r j, A_s i> - <A_r i, A_s j>
    double aa(int i, int j, int r, int s) const { return Av(r, j).dot(Av(s, i)) - Av(r, i).dot(Av(s, j)); }
};

template <class F>
Riemann4 fill(int n, const F& component) {
    Riemann4 out(n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int e = 0; e < n; ++e) out(a, b, c, e) = component(a, b, c, e);
    return out;
}

void check_t(double t) {
    if (!(t > 0.0)) throw InputError("t must be positive");
}

Riemann4 constant_curvature(int dim, double kappa) {
    if (dim < 2) return Riemann4(dim);
    return to_riemann(kappa * CurvatureOperator::identity(dim));
}

}  // namespace

void SubmersionData::validate(double tol) const {
    if (k < 1 || k >= n) throw InputError("submersion needs 1 <= k < n");
    if (R_M.n() != n || R_F.n() != k || R_B.n() != n - k) throw InputError("submersion tensors have wrong dimensions");
    if (static_cast<int>(A.size()) != n - k || static_cast<int>(T.size()) != k)
        throw InputError("submersion A/T tables have wrong sizes");
    for (const auto& a : A) {
        if (a.rows() != n || a.cols() != k) throw InputError("A entries must be n x k");
        if (a.topRows(k).cwiseAbs().maxCoeff() > tol) throw InvariantError("A_h v must be horizontal");
    }
    for (int i = 0; i < k; ++i) {
        if (T[i].rows() != n || T[i].cols() != k) throw InputError("T entries must be n x k");
        if (T[i].topRows(k).cwiseAbs().maxCoeff() > tol) throw InvariantError("T_v w must be horizontal");
        for (int j = 0; j < k; ++j)
            if ((T[i].col(j) - T[j].col(i)).cwiseAbs().maxCoeff() > tol) throw InvariantError("T must be symmetric on vertical vectors");
    }
}

SubmersionData hopf_data() {
    SubmersionData d;
    d.n = 3;
    d.k = 1;
    d.R_M = constant_curvature(3, 1.0);
    d.R_F = Riemann4(1);
    d.R_B = constant_curvature(2, 4.0);
    // i(jp) = kp and i(kp) = -jp.
    Mat a1 = Mat::Zero(3, 1), a2 = Mat::Zero(3, 1);
    a1(2, 0) = 1.0;
    a2(1, 0) = -1.0;
    d.A = {a1, a2};
    d.T = {Mat::Zero(3, 1)};
    d.validate();
    return d;
}

SubmersionData product_data(SpaceForm fiber, SpaceForm base) {
    if (fiber.dim < 1 || base.dim < 1) throw InputError("product factors need positive dimension");
    SubmersionData d;
    d.k = fiber.dim;
    d.n = fiber.dim + base.dim;
    if (d.n > kMaxDim) throw InputError("product dimension too large");
    d.R_F = constant_curvature(fiber.dim, fiber.kappa);
    d.R_B = constant_curvature(base.dim, base.kappa);
    Riemann4 rm(d.n);
    for (int a = 0; a < d.n; ++a)
        for (int b = 0; b < d.n; ++b)
            for (int c = 0; c < d.n; ++c)
                for (int e = 0; e < d.n; ++e) {
                    int v = count_vertical(d.k, a, b, c, e);
                    if (v == 4) rm(a, b, c, e) = d.R_F(a, b, c, e);
                    if (v == 0) rm(a, b, c, e) = d.R_B(a - d.k, b - d.k, c - d.k, e - d.k);
                }
    d.R_M = rm;
    d.A.assign(base.dim, Mat::Zero(d.n, d.k));
    d.T.assign(fiber.dim, Mat::Zero(d.n, d.k));
    d.validate();
    return d;
}

Riemann4 variation_curvature(const SubmersionData& d, double t) {
    check_t(t);
    int k = d.k;
    Terms tm{d};
    double t2 = t * t, t4 = t2 * t2;
    return fill(d.n, [&](int a, int b, int c, int e) {
        auto cn = canonicalize(k, a, b, c, e);
        const int* x = cn.idx;
        double rm = d.R_M(x[0], x[1], x[2], x[3]);
        double v = 0.0;
        switch (cn.pattern) {
            case Pattern::VVVV: v = t2 * d.R_F(x[0], x[1], x[2], x[3]) - t4 * tm.tt(x[0], x[1], x[2], x[3]); break;
            case Pattern::VVVH: v = t2 * rm - (t2 - t4) * tm.ta(x[0], x[1], x[2], x[3] - k); break;
            case Pattern::VVHH: v = t2 * rm + (t2 - t4) * tm.aa(x[0], x[1], x[2] - k, x[3] - k); break;
            case Pattern::HVHV:
                v = t2 * rm + (t2 - t4) * tm.Av(x[0] - k, x[3]).dot(tm.Av(x[2] - k, x[1]));
                break;
            case Pattern::HHHV: v = t2 * rm; break;
            case Pattern::HHHH: v = t2 * rm + (1 - t2) * d.R_B(x[0] - k, x[1] - k, x[2] - k, x[3] - k); break;
        }
        return cn.sign * v;
    });
}

Riemann4 rescaled_tensor(const SubmersionData& d, double t) {
    Riemann4 r = variation_curvature(d, t);
    int k = d.k;
    return fill(d.n, [&](int a, int b, int c, int e) { return r(a, b, c, e) / std::pow(t, count_vertical(k, a, b, c, e)); });
}

Riemann4 fiber_tensor(const SubmersionData& d, double t) {
    check_t(t);
    int k = d.k;
    return fill(d.n, [&](int a, int b, int c, int e) {
        return count_vertical(k, a, b, c, e) == 4 ? d.R_F(a, b, c, e) / (t * t) : 0.0;
    });
}

Riemann4 error_tensor(const SubmersionData& d, double t) { return rescaled_tensor(d, t) - fiber_tensor(d, t); }

Riemann4 error_formula(const SubmersionData& d, double t) {
    check_t(t);
    int k = d.k;
    Terms tm{d};
    double t2 = t * t, ti = 1.0 / t;
    return fill(d.n, [&](int a, int b, int c, int e) {
        auto cn = canonicalize(k, a, b, c, e);
        const int* x = cn.idx;
        double rm = d.R_M(x[0], x[1], x[2], x[3]);
        double v = 0.0;
        switch (cn.pattern) {
            case Pattern::VVVV: v = -tm.tt(x[0], x[1], x[2], x[3]); break;
            case Pattern::VVVH: v = ti * rm - (ti - t) * tm.ta(x[0], x[1], x[2], x[3] - k); break;
            case Pattern::VVHH: v = rm + (1 - t2) * tm.aa(x[0], x[1], x[2] - k, x[3] - k); break;
            case Pattern::HVHV: v = rm + (1 - t2) * tm.Av(x[0] - k, x[3]).dot(tm.Av(x[2] - k, x[1])); break;
            case Pattern::HHHV: v = t * rm; break;
            case Pattern::HHHH: v = t2 * rm + (1 - t2) * d.R_B(x[0] - k, x[1] - k, x[2] - k, x[3] - k); break;
        }
        return cn.sign * v;
    });
}

CurvatureOperator pullback_rescaled(const SubmersionData& d, double t) { return from_riemann(rescaled_tensor(d, t)); }

CurvatureOperator error_term(const SubmersionData& d, double t) {
    Riemann4 full = rescaled_tensor(d, t), fiber = fiber_tensor(d, t);
    Riemann4 diff = full - fiber, formula = error_formula(d, t);
    // Relative to the terms that cancel; both grow like 1/t^2.
    double scale = 1.0;
    for (int a = 0; a < d.n; ++a)
        for (int b = 0; b < d.n; ++b)
            scale = std::max({scale, std::abs(formula(a, b, b, a)), std::abs(full(a, b, b, a)), std::abs(fiber(a, b, b, a))});
    if (diff.max_abs_diff(formula) > 1e-10 * scale) throw InvariantError("error term disagrees with its component formulas");
    return from_riemann(diff);
}

RescaleReport find_t_star(const SubmersionData& d, const Condition& c, std::vector<double> grid) {
    if (grid.empty()) throw InputError("t grid is empty");
    for (double t : grid) check_t(t);
    std::sort(grid.begin(), grid.end());
    CurvatureOperator fiber = from_riemann(fiber_tensor(d, 1.0));
    RescaleReport rep;
    rep.fiber_margin = margin(c, fiber);
    rep.hypothesis_strict = rep.fiber_margin > margin_tolerance(c, fiber);
    if (!rep.hypothesis_strict) {
        // C_eps only needs a nonnegative fiber operator; a flat fiber is accepted as a degenerate case.
        bool nonneg = eigenvalues(fiber).minCoeff() >= -1e-12;
        if (c.kind != ConditionKind::SpectralAlmostPos || !nonneg)
            throw InputError("fiber hypothesis fails: margin(c, R_F x R^{n-k}) = " + std::to_string(rep.fiber_margin));
    }
    rep.t = grid;
    rep.t_star = 0.0;
    bool prefix = true;
    for (double t : grid) {
        double m = margin(c, pullback_rescaled(d, t));
        rep.margins.push_back(m);
        rep.error_norms.push_back(operator_norm(error_term(d, t)));
        if (prefix && m > 0.0)
            rep.t_star = t;
        else
            prefix = false;
    }
    size_t half = grid.size() / 2;
    rep.C = 0.0;
    for (size_t i = half; i < grid.size(); ++i) rep.C = std::max(rep.C, grid[i] * rep.error_norms[i]);
    rep.C_validated = true;
    for (size_t i = 0; i < half; ++i)
        if (grid[i] * rep.error_norms[i] > rep.C * (1 + 1e-9) + 1e-12) rep.C_validated = false;
    return rep;
}

namespace {

// Left multiplication by i, j, k on quaternions (q0 + q1 i + q2 j + q3 k).
Mat quaternion_left(int unit) {
    Mat m = Mat::Zero(4, 4);
    if (unit == 1) {
        m(0, 1) = -1, m(1, 0) = 1, m(2, 3) = -1, m(3, 2) = 1;
    } else if (unit == 2) {
        m(0, 2) = -1, m(1, 3) = 1, m(2, 0) = 1, m(3, 1) = -1;
    } else {
        m(0, 3) = -1, m(1, 2) = -1, m(2, 1) = 1, m(3, 0) = 1;
    }
    return m;
}

Vec sphere_point(const Vec& y) {
    double s = 1.0 + y.squaredNorm();
    Vec p(4);
    p(0) = (2.0 - s) / s;
    p.tail(3) = 2.0 * y / s;
    return p;
}

Mat sphere_jacobian(const Vec& y) {
    double s = 1.0 + y.squaredNorm();
    Mat d(4, 3);
    for (int a = 0; a < 3; ++a) {
        d(0, a) = -4.0 * y(a) / (s * s);
        for (int b = 0; b < 3; ++b) d(1 + b, a) = (a == b ? 2.0 / s : 0.0) - 4.0 * y(a) * y(b) / (s * s);
    }
    return d;
}

}  // namespace

BergerChart berger_chart(double t, const Vec& base, double h_fd) {
    check_t(t);
    if (base.size() != 3) throw InputError("Berger chart point must be in R^3");
    Mat li = quaternion_left(1);
    BergerChart out;
    out.chart.dim = 3;
    out.chart.h_fd = h_fd;
    out.chart.g = [t, li](const Vec& y) {
        Mat d = sphere_jacobian(y);
        Vec v = li * sphere_point(y);
        Vec dv = d.transpose() * v;
        Mat g = d.transpose() * d - (1.0 - t * t) * dv * dv.transpose();
        return Mat(0.5 * (g + g.transpose()));
    };
    out.base = base;
    Mat d = sphere_jacobian(base);
    Vec p = sphere_point(base);
    Mat w(4, 3);
    w.col(0) = li * p;
    w.col(1) = quaternion_left(2) * p;
    w.col(2) = quaternion_left(3) * p;
    out.frame = (d.transpose() * d).ldlt().solve(d.transpose() * w);
    return out;
}

Riemann4 berger_curvature_fd(double t, const Vec& base, const FdOptions& opt) {
    auto bc = berger_chart(t, base);
    return transform_tensor(chart_curvature_coords(bc.chart, bc.base, opt), bc.frame);
}

}  // namespace curvcone
