#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "curvcone/conditions.hpp"
#include "curvcone/curvop.hpp"
#include "curvcone/geometry.hpp"
#include "curvcone/parallel.hpp"
#include "curvcone/profile.hpp"

namespace curvcone {

struct ConstantsOptions {
    int radii = 96;        // log grid on [1e-6 r_bar, r_bar]
    int initial_radii = 48;  // grid on [r_S/2, r_bar]
    int directions = 64;
    std::uint64_t seed = 17;
};

BendingConstants estimate_constants(const RotSymModel& m, const Condition& c, double r_bar,
                                    const ConstantsOptions& opt = {});

AngleProfile initial_bend(const BendingConstants& k);

struct BendOptions {
    double plateau_scale = 1.0;  // multiplies the bump plateau (values above 1 break the slope bound)
    bool enforce_slope = true;
};

// log r*: radius reached by the bends with no straight segment.
double reachable_log_radius(const AngleProfile& p, const BendingConstants& k, const BendOptions& opt = {});
AngleProfile inductive_bend(const AngleProfile& p, const BendingConstants& k, double r_target,
                            const BendOptions& opt = {});
AngleProfile inductive_bend_log(const AngleProfile& p, const BendingConstants& k, double log_r_target,
                                const BendOptions& opt = {});

// Blocks on span{gamma'} + T T(r) with gamma' first: (-theta'; 0; sin(theta) sff_T).
SymmetricForm sff_deformed(double theta, double dtheta, const SymmetricForm& sff_T);

// Pullbacks at one point of D, all multiplied by r(s)^2; frame (V, H, -gamma').
struct DeformedCurvature {
    double log_r = 0.0;
    double theta = 0.0;
    double r_dtheta = 0.0;
    CurvatureOperator RD;
    CurvatureOperator RM;
    CurvatureOperator RT;
    CurvatureOperator E;
    double bound = 0.0;  // r^2 (cos(1 - cos) C1 + theta' sin C2 / r)

    // Unscaled operators; throws InputError when r underflows.
    DeformedCurvature absolute() const;
};

// Rotation acting on the V block that realizes the frame choice at the normal direction nu.
Mat normal_frame_rotation(int n, int k, const Vec& nu);

// Gauss-equation assembly; asserts the error bound on E.
DeformedCurvature assemble_R_D(const RotSymModel& m, const AngleProfile& p, const Vec& nu, const ProfilePoint& pt);
DeformedCurvature assemble_R_D(const RotSymModel& m, const AngleProfile& p, const Vec& nu, double s);

// FD curvature of ds^2 + f(r(s))^2 g + h(r(s))^2 g around pt, multiplied by r^2, frame (V, H, d/ds).
Riemann4 graph_curvature_fd(const RotSymModel& m, const AngleProfile& p, const ProfilePoint& pt,
                            const FdOptions& opt = {true}, double h_fd = 1e-3);

struct VerifyGrid {
    int per_segment = 9;
    int normals = 2;
    int oracle_samples = 6;
    double oracle_tol = 1e-5;
    std::uint64_t seed = 1;
    Exec exec = Exec::Parallel;
};

struct BendSample {
    int segment;
    double u;
    double s;
    double log_r;
    double theta;
    int normal;
    double margin;  // margin of r^2 R_D
    double tolerance;
    double e_norm;  // r^2 |E|
    double bound;
    bool bound_ok;
    bool inductive;
    double cone_distance;  // r^2 |R_D - (R_M + R_{S(r/sin)})|
    double cone_estimate;  // r^2 times the error-bound chain
    double cone_rhs;       // rho sin^2
    bool cone_ok;
};

struct OracleSample {
    int segment;
    double u;
    double log_r;
    double deviation;
};

struct BendingReport {
    std::shared_ptr<const AngleProfile> profile;
    std::string model;
    std::string condition;
    int n = 0;
    int k = 0;
    double a = 1.0;
    std::vector<BendSample> samples;
    std::vector<OracleSample> oracle;
    double min_margin = 0.0;
    double oracle_deviation = 0.0;
    double oracle_tol = 1e-5;
    bool bounds_ok = true;
    bool cone_ok = true;
    int cone_first_failure = -1;  // index into samples
    bool pass = false;
};

BendingReport verify_bend(const RotSymModel& m, const Condition& c, const AngleProfile& p, const VerifyGrid& grid = {});

struct SmoothEndRow {
    double t;
    int angle;
    double margin;  // margin of r^2 R
    double fd_deviation;
};

struct SmoothEndReport {
    double r = 0.0;
    double r_star2 = 0.0;  // r**
    std::vector<SmoothEndRow> rows;
    double end_deviation = 0.0;  // blend endpoints against the tube and cylinder profiles
    double fd_deviation = 0.0;
    double min_margin = 0.0;
    bool pass = false;
};

struct SmoothEndOptions {
    int t_points = 17;
    int angles = 3;
    int radii = 64;
    double fd_tol = 1e-5;
};

// Blend f -> r (and h -> h(0)) in t over [1/4, 3/4]; checks T(r) x [0,1] with the blended metric.
SmoothEndReport smooth_end(const RotSymModel& m, const Condition& c, double r, const SmoothEndOptions& opt = {});

struct JoinResult {
    bool pass;
    std::string reason;
};

JoinResult join(const BendingReport& a, const BendingReport& b);

}  // namespace curvcone
