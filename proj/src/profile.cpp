#include "curvcone/profile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "curvcone/curvop.hpp"

namespace curvcone {

namespace {

constexpr double kHalfPi = 0.5 * std::numbers::pi;

// Quintic smoothstep and its antiderivative.
double smoothstep(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}
double smoothstep_d(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return 30.0 * x * x * (1.0 - x) * (1.0 - x);
}
double smoothstep_int(double x) {
    x = std::clamp(x, 0.0, 1.0);
    double x4 = x * x * x * x;
    return x4 * (2.5 + x * (-3.0 + x));
}

double simpson(double a, double b, double fa, double fm, double fb) { return (b - a) / 6.0 * (fa + 4.0 * fm + fb); }

}  // namespace

long BendingConstants::bend_bound() const {
    if (!(rho > 0.0) || !(theta0 > 0.0)) return std::numeric_limits<long>::max();
    return static_cast<long>(std::ceil((kHalfPi - theta0) * 16.0 * C2 / (rho * std::sin(theta0))));
}

double bump(double u) {
    if (u <= 1.0 / 16 || u >= 7.0 / 16) return 0.0;
    if (u < 1.0 / 8) return smoothstep((u - 1.0 / 16) * 16.0);
    if (u <= 3.0 / 8) return 1.0;
    return smoothstep((7.0 / 16 - u) * 16.0);
}

double bump_integral(double u) {
    if (u <= 1.0 / 16) return 0.0;
    if (u <= 1.0 / 8) return smoothstep_int((u - 1.0 / 16) * 16.0) / 16.0;
    if (u <= 3.0 / 8) return 1.0 / 32 + (u - 1.0 / 8);
    if (u <= 7.0 / 16) return 1.0 / 32 + 0.25 + (0.5 - smoothstep_int((7.0 / 16 - u) * 16.0)) / 16.0;
    return kBumpArea;
}

double ProfileSegment::theta(double u) const {
    u = std::clamp(u, 0.0, u_len);
    switch (kind) {
        case SegmentKind::Constant: return theta0;
        case SegmentKind::Ramp: return theta0 + amp * smoothstep(u / u_len);
        case SegmentKind::Bump: return theta0 + amp * bump_integral(u);
    }
    return theta0;
}

double ProfileSegment::theta_u(double u) const {
    if (u < 0.0 || u > u_len) return 0.0;
    switch (kind) {
        case SegmentKind::Constant: return 0.0;
        case SegmentKind::Ramp: return amp * smoothstep_d(u / u_len) / u_len;
        case SegmentKind::Bump: return amp * bump(u);
    }
    return 0.0;
}

double ProfileSegment::rel_at(double u) const {
    u = std::clamp(u, 0.0, u_len);
    double du = u_len / kCells;
    int j = std::min(static_cast<int>(u / du), kCells - 1);
    double a = j * du;
    auto c = [this](double x) { return std::cos(theta(x)); };
    return rel[j] - simpson(a, u, c(a), c(0.5 * (a + u)), c(u));
}

double ProfileSegment::tau_at(double u) const {
    u = std::clamp(u, 0.0, u_len);
    double du = u_len / kCells;
    int j = std::min(static_cast<int>(u / du), kCells - 1);
    double a = j * du;
    auto sn = [this](double x) { return std::sin(theta(x)); };
    return tau[j] + simpson(a, u, sn(a), sn(0.5 * (a + u)), sn(u));
}

std::vector<double> ProfileSegment::seams() const {
    if (kind == SegmentKind::Bump) return {0.0, 1.0 / 16, 1.0 / 8, 3.0 / 8, 7.0 / 16, u_len};
    return {0.0, u_len};
}

ProfileSegment make_segment(SegmentKind kind, double theta0, double amp, double u_len, double s_start, double t_start,
                            double log_r0) {
    if (!(u_len > 0.0)) throw InputError("profile segment needs positive length");
    ProfileSegment seg;
    seg.kind = kind;
    seg.theta0 = theta0;
    seg.amp = amp;
    seg.u_len = kind == SegmentKind::Bump ? kBumpLength : u_len;
    seg.s_start = s_start;
    seg.t_start = t_start;
    seg.log_r0 = log_r0;
    int nc = ProfileSegment::kCells;
    double du = seg.u_len / nc;
    seg.rel.assign(nc + 1, 1.0);
    seg.tau.assign(nc + 1, 0.0);
    double ca = std::cos(seg.theta(0.0)), sa = std::sin(seg.theta(0.0));
    for (int j = 0; j < nc; ++j) {
        double a = j * du, b = (j + 1) * du, m = 0.5 * (a + b);
        double tm = seg.theta(m), tb = seg.theta(b);
        double cm = std::cos(tm), cb = std::cos(tb), sm = std::sin(tm), sb = std::sin(tb);
        seg.rel[j + 1] = seg.rel[j] - simpson(a, b, ca, cm, cb);
        seg.tau[j + 1] = seg.tau[j] + simpson(a, b, sa, sm, sb);
        ca = cb;
        sa = sb;
    }
    if (!(seg.rel.back() > 0.0)) throw InvariantError("profile radius reached zero inside a segment");
    return seg;
}

double AngleProfile::theta(const ProfilePoint& p) const {
    if (is_end(p)) return complete ? kHalfPi : segments.back().theta_end();
    return segments[p.segment].theta(p.u);
}

double AngleProfile::r_dtheta(const ProfilePoint& p) const {
    if (is_end(p)) return 0.0;
    const auto& seg = segments[p.segment];
    return seg.theta_u(p.u) * seg.rel_at(p.u);
}

double AngleProfile::log_r(const ProfilePoint& p) const {
    if (is_end(p)) return end_log_radius();
    const auto& seg = segments[p.segment];
    return seg.log_r0 + std::log(seg.rel_at(p.u));
}

double AngleProfile::s(const ProfilePoint& p) const {
    if (is_end(p)) return s_end() + p.u;
    const auto& seg = segments[p.segment];
    return seg.s_start + std::exp(seg.log_r0) * p.u;
}

double AngleProfile::t(const ProfilePoint& p) const {
    if (segments.empty()) return 0.0;
    if (is_end(p)) {
        const auto& last = segments.back();
        double t_end = last.t_start + std::exp(last.log_r0) * last.tau.back();
        double th = theta(p);
        return t_end + std::sin(th) * p.u;
    }
    const auto& seg = segments[p.segment];
    return seg.t_start + std::exp(seg.log_r0) * seg.tau_at(p.u);
}

double AngleProfile::seam_distance(const ProfilePoint& p) const {
    if (is_end(p)) return std::numeric_limits<double>::infinity();
    double d = std::numeric_limits<double>::infinity();
    for (double s : segments[p.segment].seams()) d = std::min(d, std::abs(p.u - s));
    return d;
}

ProfilePoint AngleProfile::locate(double s) const {
    if (segments.empty()) throw InputError("empty profile");
    if (s < 0.0) throw InputError("profile parameter must be nonnegative");
    double end = s_end();
    if (s >= end) return {size(), s - end};
    auto it = std::upper_bound(segments.begin(), segments.end(), s,
                               [](double v, const ProfileSegment& seg) { return v < seg.s_start; });
    int i = static_cast<int>(it - segments.begin()) - 1;
    const auto& seg = segments[std::max(i, 0)];
    return {std::max(i, 0), std::clamp((s - seg.s_start) / std::exp(seg.log_r0), 0.0, seg.u_len)};
}

double AngleProfile::dtheta(double s) const {
    auto p = locate(s);
    if (is_end(p)) return 0.0;
    const auto& seg = segments[p.segment];
    return seg.theta_u(p.u) / std::exp(seg.log_r0);
}

double AngleProfile::r(double s) const { return std::exp(log_r(locate(s))); }

double AngleProfile::s_end() const {
    if (segments.empty()) return 0.0;
    const auto& last = segments.back();
    return last.s_start + std::exp(last.log_r0) * last.u_len;
}

double AngleProfile::end_log_radius() const {
    if (segments.empty()) return 0.0;
    const auto& last = segments.back();
    return last.log_r0 + std::log(last.rel_end());
}

std::vector<double> AngleProfile::breakpoints() const {
    std::vector<double> out;
    for (int i = initial_segments; i < size(); ++i) out.push_back(segments[i].s_start);
    out.push_back(s_end());
    return out;
}

}  // namespace curvcone
