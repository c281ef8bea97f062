#pragma once

#include <vector>

namespace curvcone {

struct BendingConstants {
    int n = 0;
    int k = 0;
    double r_bar = 0.0;
    double rho = 0.0;     // inner-cone radius about R_{S^{n-k-1} x R^{k+1}}
    double L = 0.0;       // tube constant
    double r_tube = 0.0;  // tube admissibility radius r_*
    double C1 = 0.0;
    double C2 = 0.0;
    double sup_RM = 0.0;        // sup |R_M| over D(r_bar)
    double sup_RM_initial = 0.0;  // sup |R_M| over r in [r_S/2, r_bar]
    double sup_RT_initial = 0.0;  // sup |R_T| over the same radii
    double eps1 = 0.0;          // initial margin ball radius
    bool eps1_at_edge = false;  // minimum attained at an end of the sampled radii
    bool ambient_boundary = false;
    double r_S = 0.0;
    double theta0 = 0.0;
    double s0 = 0.0;
    double safety = 0.9;

    // ceil((pi/2 - theta0) * 16 C2 / (rho sin theta0))
    long bend_bound() const;
};

enum class SegmentKind { Constant, Ramp, Bump };

// theta on one piece, in the local coordinate u = (s - s_start) / r0 where r0 is the radius at the start.
struct ProfileSegment {
    SegmentKind kind = SegmentKind::Constant;
    double s_start = 0.0;  // absolute arc length; loses resolution once radii are tiny
    double t_start = 0.0;
    double log_r0 = 0.0;
    double u_len = 0.0;
    double theta0 = 0.0;
    double amp = 0.0;         // Ramp: total rise; Bump: d theta/du on the plateau
    std::vector<double> rel;  // r / r0 at the quadrature nodes
    std::vector<double> tau;  // (t - t_start) / r0 at the nodes

    static constexpr int kCells = 512;

    double theta(double u) const;
    double theta_u(double u) const;
    double rel_at(double u) const;
    double tau_at(double u) const;
    double theta_end() const { return theta(u_len); }
    double rel_end() const { return rel.back(); }
    // u positions where theta is only C^2.
    std::vector<double> seams() const;
};

ProfileSegment make_segment(SegmentKind kind, double theta0, double amp, double u_len, double s_start, double t_start,
                            double log_r0);

// Integral of the unit bump over [0, u]; the bump is 0 on [0,1/16], 1 on [1/8,3/8], 0 on [7/16,1/2].
double bump(double u);
double bump_integral(double u);
constexpr double kBumpArea = 5.0 / 16.0;
constexpr double kBumpLength = 0.5;

// Segment index and local coordinate; segment == size() is the cylindrical end.
struct ProfilePoint {
    int segment = 0;
    double u = 0.0;
};

struct AngleProfile {
    BendingConstants k;
    std::vector<ProfileSegment> segments;
    int initial_segments = 0;
    std::vector<int> bends;  // indices of the inductive bump segments
    int straight = -1;       // first inserted straight segment, -1 if none
    double log_r_star = 0.0;
    double log_r_final = 0.0;
    bool complete = false;

    int size() const { return static_cast<int>(segments.size()); }
    int bend_count() const { return static_cast<int>(bends.size()); }
    bool is_end(const ProfilePoint& p) const { return p.segment >= size(); }

    double theta(const ProfilePoint& p) const;
    // r(s) * theta'(s); finite however small r is.
    double r_dtheta(const ProfilePoint& p) const;
    double log_r(const ProfilePoint& p) const;
    double s(const ProfilePoint& p) const;
    double t(const ProfilePoint& p) const;
    // Distance in u to the nearest point where theta is only C^2 (segment ends included).
    double seam_distance(const ProfilePoint& p) const;

    ProfilePoint locate(double s) const;
    double theta(double s) const { return theta(locate(s)); }
    double dtheta(double s) const;
    double r(double s) const;
    double t(double s) const { return t(locate(s)); }
    double s_end() const;
    double end_log_radius() const;
    // s_0, ..., s_m of the inductive bend (approximate doubles).
    std::vector<double> breakpoints() const;
};

}  // namespace curvcone
