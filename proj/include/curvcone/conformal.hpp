#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "curvcone/conditions.hpp"
#include "curvcone/curvop.hpp"
#include "curvcone/geometry.hpp"
#include "curvcone/parallel.hpp"

namespace curvcone {

// Value, gradient and Hessian of a scalar function at one point (coordinate components).
struct Jet {
    double v = 0.0;
    Vec d;
    Mat dd;

    static Jet constant(int n, double c);
};

Jet operator+(const Jet& a, const Jet& b);
Jet operator-(const Jet& a, const Jet& b);
Jet operator*(const Jet& a, const Jet& b);
Jet operator*(double s, const Jet& a);
Jet operator+(double s, const Jet& a);
// g(a) from g, g', g'' evaluated at a.v.
Jet compose(double g0, double g1, double g2, const Jet& a);
Jet jet_log(const Jet& a);
Jet jet_exp(const Jet& a);
Jet jet_sqrt(const Jet& a);
// |x| at x != 0.
Jet radial_jet(const Vec& x);

using Field = std::function<Jet(const Vec&)>;

// Levi-Civita data of a chart metric at one point.
struct PointGeometry {
    Mat g;
    std::vector<Mat> gamma;  // gamma[k](i,j) = Gamma^k_ij
    Riemann4 R;              // coordinate components
};

// Finite-difference geometry (Christoffels by central differences, curvature from chart_curvature_coords).
PointGeometry point_geometry_fd(const ChartMetric& c, const Vec& x, const FdOptions& opt = {true});

// sigma^-2 grad^g f.
Vec conformal_gradient(const Jet& sigma, const Jet& f, const PointGeometry& g);
// nabla^{sigma^2 g}_X Y for coordinate-constant X, Y.
Vec conformal_connection(const Jet& sigma, const Vec& X, const Vec& Y, const PointGeometry& g);
// (2,0) Hessian of f for sigma^2 g.
Mat conformal_hessian(const Jet& sigma, const Jet& f, const PointGeometry& g);

// w and its first two derivatives on the range of f.
struct Profile1D {
    std::function<double(double)> w, dw, ddw;
};
// Curvature of sigma^2 g with sigma = w(f), coordinate components.
Riemann4 conformal_curvature_radial(const Profile1D& w, const Jet& f, const PointGeometry& g);

// Curvature of psi^2 dx^2 in the frame (columns of F) / psi, from the jet of log psi.
CurvatureOperator conformally_flat_operator(const Jet& log_psi, const Mat& F);

// v with v^2 g flat on the coordinate ball of radius `radius` (the flat chart radius eps').
struct FlatteningFactor {
    int n = 0;
    std::string name;
    double radius = 1.0;
    ChartMetric chart;  // g in the flat coordinates
    Field v;

    static FlatteningFactor round_sphere(int n);  // stereographic from radius 2, v = 1 + |x|^2 / 4
    static FlatteningFactor flat(int n);          // v = 1

    // Checks v(0) = 1, 1/2 <= v <= 2 and that v^2 g has FD curvature <= tol at sampled points.
    void validate(int samples = 8, double tol = 1e-6, std::uint64_t seed = 5) const;
};

FlatteningFactor parse_chart(const std::string& text, int n);

// phi = 1 on [0, 1/2], 0 on [1, inf), quintic in between.
double cutoff(double t);
double cutoff_d(double t);
double cutoff_dd(double t);

struct CutoffProfile {
    double lambda = 0.0;

    Jet phi(const Vec& x) const;
    Jet v_lambda(const FlatteningFactor& ff, const Vec& x) const;
    Jet q(const FlatteningFactor& ff, const Vec& x) const;
    Jet log_q(const FlatteningFactor& ff, const Vec& x) const;
};

struct AlphaProfile {
    double c = 0.0;
    double tau = 0.0;
    double r0 = 0.0;
    double r1 = 0.0;
    double r2 = 0.0;
    double s_a = 0.0;    // start of the beta ramp
    double s_len = 0.0;  // length of the beta ramp; s2 = s_a + s_len
    double s2 = 0.0;
    double kappa = 0.95;      // beta' <= kappa beta (2 - beta)
    double ramp_edge = 0.05;  // fraction of the ramp over which the growth rate switches on and off
    double delta = 0.0;       // r1 exp(int_{r1}^{r0} alpha / t)
    double gamma = 0.0;
    double log_gamma = 0.0;  // gamma may underflow
    std::vector<double> initial_log;  // log u on the initial-ramp nodes r0 - (r0 - r1) j / cells
    std::vector<double> ramp_int;   // int_{s_a}^{s} beta on the ramp nodes s_a + s_len j / cells
    static constexpr int kCells = 2048;

    double alpha(double r) const;
    double dalpha(double r) const;
    double beta(double s) const;
    double dbeta(double s) const;
    double log_u(double r) const;
    double u(double r) const { return std::exp(log_u(r)); }
    Jet log_u_jet(const Vec& x) const;
    // Largest gamma that the beta ramp can reach.
    double gamma_max() const { return std::exp(log_gamma_max()); }
    double log_gamma_max() const;
    // Residual of alpha' + c alpha (2 - alpha) / r >= 0 (most negative value) over nodes on (0, r1].
    double slope_residual(int nodes = 4096) const;
    // Max |d log u / dr + alpha / r| * r over initial-ramp nodes and a log grid below r1.
    double log_derivative_residual(int nodes = 512) const;
};

// initial ramp on [r1, r0] with alpha <= tau, then the beta ramp; s_a solves for gamma_target.
// The ramp solves beta' = k(s) beta (2 - beta) with k <= kappa, so it reaches 1 at s2 exactly.
AlphaProfile build_alpha(double c, double tau, double r0, double r1, double gamma_target);
// Initial ramp and the ramp shape only (s_a, s2, r2 and gamma unset); gives delta and gamma_max.
AlphaProfile alpha_shape(double c, double tau, double r0, double r1);
AlphaProfile build_alpha_log(double c, double tau, double r0, double r1, double log_gamma_target);

// Pullbacks of psi^2 dx^2 are stored multiplied by (psi r)^2, so they stay finite as r -> 0.
struct Decomposition {
    double r = 0.0;
    double log_u = 0.0;
    double q = 0.0;
    double alpha = 0.0;
    double dalpha = 0.0;
    CurvatureOperator RD;         // assembled from the decomposition, times (u q r)^2
    CurvatureOperator RD_direct;  // curvature of (u q)^2 dx^2, times (u q r)^2
    CurvatureOperator RM;         // v B pullback of R_(M,g), times (r / v)^2
    CurvatureOperator RM_lambda;  // q^-1 B pullback of R_(M, v_lambda^2 g), times (q r)^2
    CurvatureOperator E;          // E^lambda, unscaled
    double dq_norm = 0.0;
};

// Frame with last column nu completing it by a Householder reflection.
Mat radial_frame(const Vec& nu);

Decomposition decompose_R_D(const FlatteningFactor& ff, const CutoffProfile& cp, const AlphaProfile& ap, const Vec& nu,
                            double r);

// FD curvature of (u q)^2 dx^2 (or of the blended metric alone) at r nu, in the frame of radial_frame(nu),
// times (psi r)^2 at that point.
CurvatureOperator conformal_curvature_fd(const FlatteningFactor& ff, const CutoffProfile& cp, const AlphaProfile* ap,
                                         const Vec& nu, double r);

struct BlendBounds {
    std::vector<double> lambdas;
    std::vector<double> sup_RM_lambda;  // lambda * sup |R^lambda_M| over r <= lambda
    std::vector<double> sup_E;          // sup |E^lambda| over r < radius
    std::vector<double> sup_dq;         // sup |dq| over r < radius
    double C1 = 0.0;
    double C2 = 0.0;
    double dq_bound = 0.0;        // (|dv^-2| + c C) / (2 min q), min q >= 1/4
    double dq_bound_closed = 0.0;  // (|dv^-2| + c C) / 8
    bool C2_stable = true;  // lambda sup |R^lambda_M| stays below twice its value at the largest lambda
    bool dq_ok = true;
};

struct BlendGrid {
    int radii = 48;
    int normals = 6;
    std::uint64_t seed = 3;
    Exec exec = Exec::Parallel;
};

// Fits C1 (E^lambda) and C2 (lambda |R^lambda_M|) over a lambda grid.
BlendBounds blend_bounds(const FlatteningFactor& ff, const std::vector<double>& lambdas, const BlendGrid& grid = {});

struct LambdaConstants {
    double r2 = 0.0;
    double rho = 0.0;
    double sup_RM = 0.0;
    double C1 = 0.0;
    double C2 = 0.0;
};

double choose_lambda(const LambdaConstants& k);

// Radii where the cutoff or alpha is only C^2.
std::vector<double> conformal_seams(const AlphaProfile& ap, double lambda);

struct ConformalSample {
    double r;
    int normal;
    double margin;
    double tolerance;
    bool pass;
};

struct ConformalGrid {
    int radii = 96;
    int normals = 4;
    int oracle_samples = 12;
    double oracle_tol = 1e-5;
    std::uint64_t seed = 7;
    Exec exec = Exec::Parallel;
};

struct ConformalReport {
    std::string chart;
    std::string condition;
    int n = 0;
    double rho = 0.0;
    double eps1 = 0.0;    // initial margin
    double radius = 0.0;  // flat chart radius eps'
    double c = 0.0;
    double C = 0.0;
    double C1 = 0.0;
    double C2 = 0.0;
    double sup_RM = 0.0;
    double lambda = 0.0;
    AlphaProfile alpha;
    std::vector<ConformalSample> samples;
    double min_margin = 0.0;
    double decomposition_deviation = 0.0;  // assembled vs direct
    double oracle_deviation = 0.0;         // assembled vs FD
    double end_deviation = 0.0;            // sigma r / gamma - 1 on r < lambda / 2
    double slope_residual = 0.0;
    double log_derivative_residual = 0.0;
    bool star_shaped = true;
    bool pass = false;
};

// Constants, ramps, margins on a (nu, r) grid, FD cross-check and the cylindrical end check.
ConformalReport verify_conformal(const FlatteningFactor& ff, const Condition& c, double gamma_target,
                                 const ConformalGrid& grid = {});
ConformalReport verify_conformal_log(const FlatteningFactor& ff, const Condition& c, double log_gamma_target,
                                     const ConformalGrid& grid = {});

// Constants and the initial ramp; log_gamma_max is the log of the largest gamma the beta ramp can reach.
struct ConformalSetup {
    double rho = 0.0, eps1 = 0.0, C = 0.0, C1 = 0.0, C2 = 0.0, sup_RM = 0.0, c = 0.0;
    double r0 = 0.0, r1 = 0.0, tau = 0.0, delta = 0.0, log_gamma_max = 0.0;
    bool star_shaped = true;
    BlendBounds blend;
};
ConformalSetup conformal_setup(const FlatteningFactor& ff, const Condition& c, const ConformalGrid& grid = {});

}  // namespace curvcone
