#include "curvcone/bending.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

namespace curvcone {

namespace {

constexpr double kHalfPi = 0.5 * std::numbers::pi;

std::string fmt_double(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

std::vector<double> log_grid(double lo, double hi, int count) {
    std::vector<double> g(count);
    for (int i = 0; i < count; ++i) {
        double f = count == 1 ? 1.0 : static_cast<double>(i) / (count - 1);
        g[i] = std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo)));
    }
    g.back() = hi;
    return g;
}

// Pullback on the frame (e_1, ..., e_{n-1}, c e_n).
CurvatureOperator scale_last(const CurvatureOperator& r, double c) {
    int n = r.n();
    Vec d(biv_count(n));
    for (int p = 0; p < d.size(); ++p) d(p) = biv_pair(p, n).second == n - 1 ? c : 1.0;
    return CurvatureOperator::unchecked(n, d.asDiagonal() * r.mat() * d.asDiagonal());
}

double one_minus_cos(double th) {
    double s = std::sin(0.5 * th);
    return 2.0 * s * s;
}

// r * sff_T on V + H from log r.
Vec tube_sff_scaled(const RotSymModel& m, double r) {
    Vec s(m.n - 1);
    for (int i = 0; i < m.n - 1; ++i) s(i) = i < m.v_dim() ? 1.0 + r * m.a_v(r) : r * m.a_h(r);
    return s;
}

void append_segment(AngleProfile& p, SegmentKind kind, double theta0, double amp, double u_len) {
    double s = 0.0, t = 0.0, log_r = std::log(p.k.r_bar);
    if (!p.segments.empty()) {
        const auto& last = p.segments.back();
        double r0 = std::exp(last.log_r0);
        s = last.s_start + r0 * last.u_len;
        t = last.t_start + r0 * last.tau.back();
        log_r = last.log_r0 + std::log(last.rel_end());
    }
    p.segments.push_back(make_segment(kind, theta0, amp, u_len, s, t, log_r));
}

struct BendPlan {
    AngleProfile profile;  // bends before the last one
    double theta_last;
    double amp_last;
    double log_q_last;  // log(r_end / r_start) of the last bend
};

BendPlan plan_bends(const AngleProfile& p, const BendingConstants& k, const BendOptions& opt) {
    if (p.complete) throw InputError("profile already reaches pi/2");
    if (p.segments.empty()) throw InputError("inductive bend needs the initial-bend profile");
    if (!(k.rho > 0.0) || !(k.C2 > 0.0)) throw InputError("bending constants rho and C2 must be positive");
    if (!(opt.plateau_scale > 0.0)) throw InputError("plateau scale must be positive");
    BendPlan plan{p, 0.0, 0.0, 0.0};
    AngleProfile& out = plan.profile;
    out.k = k;
    double ratio = k.rho / (4.0 * k.C2) * opt.plateau_scale;
    long bound = k.bend_bound();
    const long cap = 5'000'000;
    for (;;) {
        double th = out.segments.back().theta_end();
        double a = ratio * std::sin(th);
        if (!(a > 0.0)) throw InputError("bend plateau is zero (theta0 = 0)");
        if (th + a * kBumpArea >= kHalfPi) {
            plan.theta_last = th;
            plan.amp_last = (kHalfPi - th) / kBumpArea;
            break;
        }
        append_segment(out, SegmentKind::Bump, th, a, kBumpLength);
        out.bends.push_back(out.size() - 1);
        long m = out.bend_count() + 1;
        if (opt.enforce_slope && m > bound) throw InvariantError("bend count exceeds its bound");
        if (m > cap) throw InvariantError("bend count exceeds the iteration cap");
    }
    ProfileSegment last = make_segment(SegmentKind::Bump, plan.theta_last, plan.amp_last, kBumpLength, 0.0, 0.0, 0.0);
    plan.log_q_last = std::log(last.rel_end());
    return plan;
}

void check_slope(const AngleProfile& p) {
    double c = p.k.rho / (2.0 * p.k.C2);
    for (int i = p.initial_segments; i < p.size(); ++i) {
        const auto& seg = p.segments[i];
        double du = seg.u_len / ProfileSegment::kCells;
        for (int j = 0; j <= ProfileSegment::kCells; ++j) {
            double u = j * du;
            double lhs = seg.theta_u(u), rhs = c * std::sin(seg.theta(u)) / seg.rel[j];
            if (lhs > rhs * (1.0 + 1e-12))
                throw InvariantError("slope bound violated in segment " + std::to_string(i) + " at u = " + fmt_double(u));
        }
    }
}

Vec unit_normal(int dim, std::uint64_t seed, int index) {
    if (index == 0) {
        Vec e = Vec::Zero(dim);
        e(dim - 1) = 1.0;
        return e;
    }
    std::mt19937_64 g(sample_seed(seed, static_cast<std::uint64_t>(index)));
    std::normal_distribution<double> nd;
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v(i) = nd(g);
    return v / v.norm();
}

// Moves pt by delta (in units of r at pt) along the profile.
ProfilePoint shift_point(const AngleProfile& p, ProfilePoint pt, double delta) {
    if (p.is_end(pt)) {
        // The end is a cylinder; u there is measured in absolute units.
        return {pt.segment, pt.u + delta * std::exp(p.log_r(pt))};
    }
    const auto* seg = &p.segments[pt.segment];
    double d = delta * seg->rel_at(pt.u);  // in units of r0
    double u = pt.u + d;
    int i = pt.segment;
    while (u > seg->u_len) {
        double rest = (u - seg->u_len) / seg->rel_end();
        ++i;
        if (i >= p.size()) return {p.size(), rest * std::exp(p.end_log_radius())};
        seg = &p.segments[i];
        u = rest;
    }
    while (u < 0.0) {
        if (i == 0) return {0, u};
        --i;
        seg = &p.segments[i];
        u = seg->u_len + u * seg->rel_end();
    }
    return {i, u};
}

// log r of a shifted point; extends the theta = 0 start linearly for s < 0.
double shifted_log_r(const AngleProfile& p, const ProfilePoint& pt) {
    if (!p.is_end(pt) && pt.u < 0.0) return p.segments[0].log_r0 + std::log(1.0 - pt.u);
    return p.log_r(pt);
}

}  // namespace

BendingConstants estimate_constants(const RotSymModel& m, const Condition& c, double r_bar,
                                    const ConstantsOptions& opt) {
    int n = m.n, q = m.v_dim();
    if (q < 2) throw InputError("bending needs codimension at least 3 (n - k - 1 >= 2)");
    if (!(r_bar > 0.0) || !(r_bar < m.r_max)) throw InputError("r_bar outside the model domain (0, r_max)");
    if (opt.radii < 2 || opt.initial_radii < 2) throw InputError("constant grids need at least two radii");
    bool spectral = c.kind == ConditionKind::SpectralAlmostPos;
    if (!c.convex() && !spectral) throw InputError("bending needs a convex condition or SpectralAlmostPos");

    BendingConstants k;
    k.n = n;
    k.k = m.k;
    k.r_bar = r_bar;
    auto radii = log_grid(1e-6 * r_bar, r_bar, opt.radii);
    CurvatureOperator S = model_operator(q, 1.0, n);
    double delta = std::numeric_limits<double>::infinity();
    for (double r : radii) {
        CurvatureOperator scaled = warped_operator_scaled(m, std::log(r));
        double mg = margin(c, scaled), tol = margin_tolerance(c, scaled);
        if (mg < -tol) throw InputError(m.name() + " violates " + c.name() + " at r = " + fmt_double(r));
        if (mg <= tol) k.ambient_boundary = true;
        Riemann4 t = warped_curvature(m, r);
        k.sup_RM = std::max(k.sup_RM, operator_norm(from_riemann(t)));
        for (int a = 0; a < n - 1; ++a)
            for (int b = 0; b < n - 1; ++b)
                for (int e = 0; e < n - 1; ++e) k.C1 = std::max(k.C1, 2.0 * std::abs(t(a, b, e, n - 1)));
        auto ts = tube_sff(m, r);
        double sff = ts.sff.mat().cwiseAbs().maxCoeff(), A = ts.A.mat().cwiseAbs().maxCoeff();
        k.C2 = std::max(k.C2, 2.0 * (r * sff + r * A));
        if (spectral && mg > tol) delta = std::min(delta, cepsilon_delta(c.epsilon, scaled));
    }
    k.L = 2.0 * tube_constant(m, radii);
    k.r_tube = tube_admissible_radius(m, c, radii);
    if (!(k.r_tube > 0.0)) throw InputError("T(r) x R fails " + c.name() + " at the smallest sampled radius");

    if (c.convex()) {
        k.rho = inner_cone_rho_convex(c, S, opt.directions, opt.seed).rho;
    } else {
        // C_eps: rho = delta(R) with |S| = 1; a flat ambient only needs the ball around S.
        if (k.ambient_boundary)
            delta = std::min(delta, 0.9 * ball_radius(c, S, probe_directions(S, opt.directions, opt.seed)));
        k.rho = delta;
    }
    if (!(k.rho > 0.0) || !std::isfinite(k.rho)) throw InputError("no positive inner-cone radius");

    double cap = std::min({1.0, k.r_tube, r_bar});
    if (k.L > 0.0) cap = std::min(cap, k.rho / (4.0 * k.L));
    if (k.sup_RM + k.C1 > 0.0) cap = std::min(cap, 0.5 * std::sqrt(k.rho / (k.sup_RM + k.C1)));
    k.r_S = k.safety * cap;
    k.s0 = r_bar - 0.5 * k.r_S;

    // initial margin over r in [r_S/2, r_bar].
    double eps = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int i = 0; i < opt.initial_radii; ++i) {
        double r = 0.5 * k.r_S + (r_bar - 0.5 * k.r_S) * i / (opt.initial_radii - 1);
        CurvatureOperator rm = from_riemann(warped_curvature(m, r));
        k.sup_RM_initial = std::max(k.sup_RM_initial, operator_norm(rm));
        k.sup_RT_initial = std::max(k.sup_RT_initial, operator_norm(tube_curvature(m, r).RT));
        double b = k.ambient_boundary ? 0.0 : ball_radius(c, rm, probe_directions(rm, opt.directions, opt.seed));
        if (b < eps) {
            eps = b;
            arg = i;
        }
    }
    k.eps1 = 0.5 * eps;
    k.eps1_at_edge = arg == 0 || arg == opt.initial_radii - 1;

    if (k.eps1 > 0.0) {
        auto ok = [&](double th) {
            double s = std::sin(th);
            return s * s * (k.sup_RM_initial + k.sup_RT_initial) < 0.5 * k.eps1 &&
                   one_minus_cos(th) * k.C1 + 2.0 * s / k.r_S * k.C2 < 0.5 * k.eps1;
        };
        double lo = 0.0, hi = k.r_S / 8.0;
        if (ok(hi)) {
            lo = hi;
        } else {
            for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
                double mid = 0.5 * (lo + hi);
                (ok(mid) ? lo : hi) = mid;
            }
        }
        k.theta0 = k.safety * lo;
    }
    return k;
}

AngleProfile initial_bend(const BendingConstants& k) {
    if (!(k.theta0 > 0.0))
        throw InputError("theta0 = 0: the ambient curvature has no initial margin (eps1 = " + fmt_double(k.eps1) + ")");
    if (!(k.r_S > 0.0) || !(k.r_S < k.r_bar)) throw InputError("invalid start radius r_S");
    AngleProfile p;
    p.k = k;
    append_segment(p, SegmentKind::Constant, 0.0, 0.0, (k.r_bar - k.r_S) / k.r_bar);
    append_segment(p, SegmentKind::Ramp, 0.0, k.theta0, 0.25 * k.r_S / std::exp(p.end_log_radius()));
    append_segment(p, SegmentKind::Constant, k.theta0, 0.0, 0.25 * k.r_S / std::exp(p.end_log_radius()));
    p.initial_segments = p.size();
    if (!(std::exp(p.end_log_radius()) > 0.5 * k.r_S)) throw InvariantError("initial bend ended below r_S / 2");
    p.log_r_final = p.end_log_radius();
    return p;
}

double reachable_log_radius(const AngleProfile& p, const BendingConstants& k, const BendOptions& opt) {
    BendPlan plan = plan_bends(p, k, opt);
    return plan.profile.end_log_radius() + plan.log_q_last;
}

AngleProfile inductive_bend(const AngleProfile& p, const BendingConstants& k, double r_target, const BendOptions& opt) {
    if (!(r_target > 0.0)) throw InputError("r_target must be positive");
    return inductive_bend_log(p, k, std::log(r_target), opt);
}

AngleProfile inductive_bend_log(const AngleProfile& p, const BendingConstants& k, double log_r_target,
                                const BendOptions& opt) {
    BendPlan plan = plan_bends(p, k, opt);
    AngleProfile out = std::move(plan.profile);
    double log_rl = out.end_log_radius();
    out.log_r_star = log_rl + plan.log_q_last;
    if (!(log_r_target < out.log_r_star))
        throw InputError("r_target must lie below r* (log r* = " + fmt_double(out.log_r_star) + ")");
    double log_start = log_r_target - plan.log_q_last;
    // Straight pieces, each shrinking r by at most a factor e so that r / r0 never cancels.
    double cos_l = std::cos(plan.theta_last);
    // log r carries an absolute rounding error of a few ulps of |log r|.
    double resolution = 1e-13 * std::max(1.0, std::abs(log_start));
    for (double drop = log_rl - log_start; drop > resolution;) {
        double step = std::min(drop, 1.0);
        append_segment(out, SegmentKind::Constant, plan.theta_last, 0.0, -std::expm1(-step) / cos_l);
        if (out.straight < 0) out.straight = out.size() - 1;
        double next = out.end_log_radius() - log_start;
        if (!(next < drop)) break;
        drop = next;
    }
    append_segment(out, SegmentKind::Bump, plan.theta_last, plan.amp_last, kBumpLength);
    out.bends.push_back(out.size() - 1);
    out.complete = true;
    out.log_r_final = out.end_log_radius();
    if (opt.enforce_slope) {
        check_slope(out);
        if (out.bend_count() > k.bend_bound()) throw InvariantError("bend count exceeds its bound");
    }
    return out;
}

SymmetricForm sff_deformed(double theta, double dtheta, const SymmetricForm& sff_T) {
    int d = sff_T.n();
    Mat m = Mat::Zero(d + 1, d + 1);
    m(0, 0) = -dtheta;
    m.bottomRightCorner(d, d) = std::sin(theta) * sff_T.mat();
    return SymmetricForm(m);
}

DeformedCurvature DeformedCurvature::absolute() const {
    double r = std::exp(log_r);
    if (!(r > 1e-150)) throw InputError("radius too small for unscaled operators");
    double w = 1.0 / (r * r);
    DeformedCurvature out = *this;
    out.RD = w * RD;
    out.RM = w * RM;
    out.RT = w * RT;
    out.E = w * E;
    out.bound = w * bound;
    out.r_dtheta = r_dtheta / r;
    return out;
}

Mat normal_frame_rotation(int n, int k, const Vec& nu) {
    int q = n - k - 1;
    if (nu.size() != n - k) throw InputError("normal direction has the wrong dimension");
    double nn = nu.norm();
    if (!(nn > 0.0)) throw InputError("normal direction must be nonzero");
    Mat Q = Mat::Identity(n, n);
    Vec w = nu.head(q) / nn;
    double wn = w.norm();
    if (wn > 1e-12) {
        Vec v = w / wn;
        v(0) -= 1.0;
        double vn = v.squaredNorm();
        if (vn > 1e-24) Q.topLeftCorner(q, q) -= 2.0 * v * v.transpose() / vn;
    }
    return Q;
}

DeformedCurvature assemble_R_D(const RotSymModel& m, const AngleProfile& p, const Vec& nu, const ProfilePoint& pt) {
    int n = m.n, q = m.v_dim();
    if (p.k.n != n || p.k.k != m.k) throw InputError("profile constants were estimated for another model");
    if (pt.segment < 0 || (pt.segment < p.size() && (pt.u < 0.0 || pt.u > p.segments[pt.segment].u_len)))
        throw InputError("profile point outside its segment");
    DeformedCurvature out;
    out.log_r = p.log_r(pt);
    if (!(out.log_r < std::log(m.r_max))) throw InputError("r(s) outside the model domain");
    out.theta = p.theta(pt);
    out.r_dtheta = p.r_dtheta(pt);
    double r = std::exp(out.log_r);
    double c = std::cos(out.theta), s = std::sin(out.theta);

    CurvatureOperator M = warped_operator_scaled(m, out.log_r);
    CurvatureOperator T = tube_operator_scaled(m, out.log_r);
    SymmetricForm sd = sff_deformed(out.theta, out.r_dtheta, SymmetricForm::diagonal(tube_sff_scaled(m, r)));
    // Move gamma' from the first slot to the last.
    Mat perm = Mat::Zero(n, n);
    for (int i = 0; i < n - 1; ++i) perm(i, i + 1) = 1.0;
    perm(n - 1, 0) = 1.0;
    SymmetricForm sff(perm * sd.mat() * perm.transpose());
    CurvatureOperator RD = scale_last(M, c) + kulkarni_wedge(sff, sff);
    CurvatureOperator E = RD - (c * c) * M - (s * s) * T;
    out.bound = r * r * c * one_minus_cos(out.theta) * p.k.C1 + out.r_dtheta * s * p.k.C2;
    double e = operator_norm(E);
    if (e > out.bound * (1.0 + 1e-9) + 1e-12 * std::max(1.0, operator_norm(RD)))
        throw InvariantError("curvature error bound violated: |E| = " + fmt_double(e) + " > " + fmt_double(out.bound));
    (void)q;
    Mat Q = normal_frame_rotation(n, m.k, nu);
    out.RD = act(Q, RD);
    out.RM = act(Q, M);
    out.RT = act(Q, T);
    out.E = act(Q, E);
    return out;
}

DeformedCurvature assemble_R_D(const RotSymModel& m, const AngleProfile& p, const Vec& nu, double s) {
    return assemble_R_D(m, p, nu, p.locate(s));
}

Riemann4 graph_curvature_fd(const RotSymModel& m, const AngleProfile& p, const ProfilePoint& pt, const FdOptions& opt,
                            double h_fd) {
    double log_rc = p.log_r(pt);
    if (log_rc < -650.0) throw InputError("radius too small for the graph chart");
    double rc = std::exp(log_rc);
    // Chart of the metric divided by r_c^2, radial coordinate rho = 1 + (s - s_c) / r_c.
    auto radius = [&p, pt, log_rc](double rho) {
        ProfilePoint q = shift_point(p, pt, rho - 1.0);
        return std::exp(shifted_log_r(p, q) - log_rc);
    };
    auto F = [m, radius, rc](double rho) {
        double x = radius(rho);
        return m.f_ratio(x * rc) * x;
    };
    auto H = [m, radius, rc](double rho) { return m.h(radius(rho) * rc) / rc; };
    ModelChart mc = doubly_warped_chart(m.n, m.k, F, H, 1.0, rc, h_fd);
    return chart_curvature_fd(mc.chart, mc.base, opt);
}

BendingReport verify_bend(const RotSymModel& m, const Condition& c, const AngleProfile& p, const VerifyGrid& grid) {
    if (!p.complete) throw InputError("verify_bend needs a complete profile");
    if (grid.per_segment < 2 || grid.normals < 1) throw InputError("verification grid too small");
    int n = m.n, q = m.v_dim();
    BendingReport rep;
    rep.profile = std::make_shared<const AngleProfile>(p);
    rep.model = m.name();
    rep.condition = c.name();
    rep.n = n;
    rep.k = m.k;
    rep.a = m.a;
    rep.oracle_tol = grid.oracle_tol;

    std::vector<ProfilePoint> pts;
    for (int i = 0; i < p.size(); ++i)
        for (int j = 0; j < grid.per_segment; ++j)
            pts.push_back({i, p.segments[i].u_len * j / (grid.per_segment - 1)});
    pts.push_back({p.size(), 0.0});
    std::vector<Vec> normals;
    for (int i = 0; i < grid.normals; ++i) normals.push_back(unit_normal(n - m.k, grid.seed, i));
    CurvatureOperator S = model_operator(q, 1.0, n);
    const auto& k = p.k;

    int count = static_cast<int>(pts.size()) * grid.normals;
    std::vector<std::string> errors(count);
    rep.samples = map_index<BendSample>(
        count,
        [&](int idx) {
            const auto& pt = pts[idx / grid.normals];
            int nu = idx % grid.normals;
            BendSample row{};
            row.segment = pt.segment;
            row.u = pt.u;
            row.normal = nu;
            try {
                DeformedCurvature dc = assemble_R_D(m, p, normals[nu], pt);
                double r = std::exp(dc.log_r), sn = std::sin(dc.theta), cs = std::cos(dc.theta);
                row.s = p.s(pt);
                row.log_r = dc.log_r;
                row.theta = dc.theta;
                row.margin = margin(c, dc.RD);
                row.tolerance = margin_tolerance(c, dc.RD);
                row.e_norm = operator_norm(dc.E);
                row.bound = dc.bound;
                row.bound_ok = row.e_norm <= dc.bound * (1.0 + 1e-9) + 1e-12;
                row.inductive = pt.segment >= p.initial_segments;
                row.cone_ok = true;
                if (row.inductive) {
                    Mat Q = normal_frame_rotation(n, m.k, normals[nu]);
                    CurvatureOperator target = dc.RM + (sn * sn) * act(Q, S);
                    row.cone_distance = operator_norm(dc.RD - target);
                    row.cone_estimate = sn * sn * (r * r * k.sup_RM + k.L * r) +
                                        r * r * cs * one_minus_cos(dc.theta) * k.C1 + dc.r_dtheta * sn * k.C2;
                    row.cone_rhs = k.rho * sn * sn;
                    row.cone_ok = row.cone_distance < row.cone_rhs && row.cone_estimate < row.cone_rhs;
                }
            } catch (const std::exception& e) {
                errors[idx] = e.what();
            }
            return row;
        },
        grid.exec);
    for (const auto& e : errors)
        if (!e.empty()) throw InvariantError("verify_bend: " + e);

    rep.min_margin = std::numeric_limits<double>::infinity();
    bool margins_ok = true;
    for (size_t i = 0; i < rep.samples.size(); ++i) {
        const auto& row = rep.samples[i];
        rep.min_margin = std::min(rep.min_margin, row.margin);
        if (classify(row.margin, row.tolerance) != Verdict::Pass) margins_ok = false;
        if (!row.bound_ok) rep.bounds_ok = false;
        if (!row.cone_ok && rep.cone_ok) {
            rep.cone_ok = false;
            rep.cone_first_failure = static_cast<int>(i);
        }
    }

    // FD oracle at points spread over the profile, away from C^2 seams.
    std::vector<ProfilePoint> opts;
    int ns = std::max(grid.oracle_samples, 0);
    int reach = 0;  // the chart needs r above the double range floor
    while (reach + 1 < p.size() && p.segments[reach + 1].log_r0 > -600.0) ++reach;
    for (int j = 0; j < ns; ++j) {
        int seg = ns == 1 ? 0 : static_cast<int>(std::lround(static_cast<double>(j) * reach / (ns - 1)));
        const auto& sg = p.segments[seg];
        ProfilePoint pt{seg, sg.u_len * (0.3 + 0.4 * j / std::max(ns - 1, 1))};
        for (int tries = 0; tries < 16 && p.seam_distance(pt) < 0.02 * sg.u_len; ++tries)
            pt.u = std::fmod(pt.u + 0.05 * sg.u_len, sg.u_len);
        if (p.log_r(pt) > -650.0) opts.push_back(pt);
    }
    Vec e_last = unit_normal(n - m.k, grid.seed, 0);
    rep.oracle = map_index<OracleSample>(
        static_cast<int>(opts.size()),
        [&](int j) {
            const auto& pt = opts[j];
            Riemann4 fd = graph_curvature_fd(m, p, pt);
            Riemann4 asm_t = to_riemann(assemble_R_D(m, p, e_last, pt).RD);
            double scale = 1.0;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) scale = std::max(scale, std::abs(asm_t(a, b, b, a)));
            return OracleSample{pt.segment, pt.u, p.log_r(pt), fd.max_abs_diff(asm_t) / scale};
        },
        grid.exec);
    for (const auto& o : rep.oracle) rep.oracle_deviation = std::max(rep.oracle_deviation, o.deviation);
    rep.pass = margins_ok && rep.oracle_deviation <= grid.oracle_tol;
    return rep;
}

namespace {

struct Blend {
    double F, dF, ddF, H, dH, ddH;
};

// C-infinity step on [0, 1] with its first two derivatives.
void smooth_step(double x, double& v, double& dv, double& ddv) {
    if (x <= 0.0 || x >= 1.0) {
        v = x <= 0.0 ? 0.0 : 1.0;
        dv = ddv = 0.0;
        return;
    }
    double g = 1.0 / x - 1.0 / (1.0 - x);
    double dg = -1.0 / (x * x) - 1.0 / ((1.0 - x) * (1.0 - x));
    double ddg = 2.0 / (x * x * x) - 2.0 / ((1.0 - x) * (1.0 - x) * (1.0 - x));
    v = 1.0 / (1.0 + std::exp(g));
    double c = std::cosh(0.5 * g);
    double w = 0.25 / (c * c);  // v (1 - v)
    dv = -w * dg;
    ddv = -((1.0 - 2.0 * v) * dv * dg + w * ddg);
}

// Metric dt^2 + F(t)^2 g + H(t)^2 g on T(r) x [0,1]: f -> r and h -> h(0) over t in [1/4, 3/4].
Blend blend_at(const RotSymModel& m, double r, double t) {
    double phi, dphi, ddphi;
    smooth_step(2.0 * (t - 0.25), phi, dphi, ddphi);
    dphi *= 2.0;
    ddphi *= 4.0;
    double f = m.f(r), h = m.h(r), h0 = m.h(0.0);
    return {f + phi * (r - f), dphi * (r - f), ddphi * (r - f), h + phi * (h0 - h), dphi * (h0 - h), ddphi * (h0 - h)};
}

CurvatureOperator blend_operator_scaled(const RotSymModel& m, double r, double t) {
    Blend b = blend_at(m, r, t);
    // Dividing F, H and t by r scales the curvature by r^2.
    return from_riemann(doubly_warped_curvature(m.n, m.k, b.F / r, b.dF, b.ddF * r, b.H / r, b.dH, b.ddH * r));
}

}  // namespace

SmoothEndReport smooth_end(const RotSymModel& m, const Condition& c, double r, const SmoothEndOptions& opt) {
    if (opt.t_points < 2 || opt.angles < 1 || opt.radii < 2) throw InputError("smooth_end grids too small");
    SmoothEndReport rep;
    rep.r = r;
    std::vector<double> ts(opt.t_points);
    for (int i = 0; i < opt.t_points; ++i) ts[i] = static_cast<double>(i) / (opt.t_points - 1);
    auto radii = log_grid(1e-6 * m.r_max, 0.9 * m.r_max, opt.radii);
    for (double rr : radii) {
        bool ok = true;
        for (double t : ts) {
            CurvatureOperator op = blend_operator_scaled(m, rr, t);
            if (classify(margin(c, op), margin_tolerance(c, op)) != Verdict::Pass) ok = false;
        }
        if (!ok) break;
        rep.r_star2 = rr;
    }
    if (!(r > 0.0) || !(r < rep.r_star2)) throw InputError("smooth_end radius must lie in (0, r**), r** = " + fmt_double(rep.r_star2));

    Blend b0 = blend_at(m, r, 0.0), b1 = blend_at(m, r, 1.0);
    rep.end_deviation = std::max({std::abs(b0.F - m.f(r)) / r, std::abs(b0.H - m.h(r)), std::abs(b1.F - r) / r,
                                  std::abs(b1.H - m.h(0.0)), std::abs(b0.dF), std::abs(b1.dF)});

    rep.min_margin = std::numeric_limits<double>::infinity();
    rep.pass = true;
    for (double t : ts) {
        CurvatureOperator exact = blend_operator_scaled(m, r, t);
        Vec ev_exact = eigenvalues(exact);
        std::sort(ev_exact.data(), ev_exact.data() + ev_exact.size());
        for (int a = 0; a < opt.angles; ++a) {
            auto F = [&m, r, t](double rho) { return blend_at(m, r, t + r * (rho - 1.0)).F / r; };
            auto H = [&m, r, t](double rho) { return blend_at(m, r, t + r * (rho - 1.0)).H / r; };
            ModelChart mc = doubly_warped_chart(m.n, m.k, F, H, 1.0, r);
            Vec base = mc.base;
            if (a > 0 && m.v_dim() > 0) {
                // Same t, rotated on the normal sphere.
                base(0) = std::sin(0.15 * a);
                base(m.n - 1) = std::cos(0.15 * a);
            }
            CurvatureOperator fd = from_riemann(chart_curvature_fd(mc.chart, base, FdOptions{true}), 1e-6);
            Vec ev = eigenvalues(fd);
            std::sort(ev.data(), ev.data() + ev.size());
            double dev = (ev - ev_exact).cwiseAbs().maxCoeff() / std::max(1.0, ev_exact.cwiseAbs().maxCoeff());
            double mg = margin(c, fd);
            rep.rows.push_back({t, a, mg, dev});
            rep.min_margin = std::min(rep.min_margin, mg);
            rep.fd_deviation = std::max(rep.fd_deviation, dev);
            if (classify(mg, margin_tolerance(c, fd)) != Verdict::Pass) rep.pass = false;
        }
    }
    if (rep.fd_deviation > opt.fd_tol) rep.pass = false;
    return rep;
}

JoinResult join(const BendingReport& a, const BendingReport& b) {
    if (!a.pass || !b.pass) return {false, "both bends must pass"};
    if (!a.profile || !b.profile || !a.profile->complete || !b.profile->complete)
        return {false, "both profiles must reach pi/2"};
    if (a.n != b.n) return {false, "dimensions differ"};
    if (a.k != b.k) return {false, "cross-section classes differ (k)"};
    if (a.k > 0 && std::abs(a.a - b.a) > 1e-10 * std::max(1.0, std::abs(a.a))) return {false, "cross-section S^k radii differ"};
    double d = std::abs(a.profile->log_r_final - b.profile->log_r_final);
    if (d > 1e-10) return {false, "end radii differ (|log r_a - log r_b| = " + fmt_double(d) + ")"};
    return {true, "ends are isometric cylinders"};
}

}  // namespace curvcone
