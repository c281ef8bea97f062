#pragma once

#include <functional>
#include <string>
#include <vector>

#include "curvcone/conditions.hpp"
#include "curvcone/curvop.hpp"

namespace curvcone {

enum class ModelKind { FlatPoint, RoundSpherePoint, HyperbolicPoint, Subsphere };

// Rotationally symmetric neighbourhood of N (a point or a totally geodesic subsphere):
// g = dr^2 + f(r)^2 g_{S^{n-k-1}} + h(r)^2 g_{S^k}.
// Frame order everywhere: V (n-k-1 sphere directions), H (k directions along N), radial last.
struct RotSymModel {
    ModelKind kind = ModelKind::FlatPoint;
    int n = 0;
    int k = 0;
    double a = 1.0;
    double r_max = 1.0;

    static RotSymModel flat_point(int n, double r_max = 1.0);
    static RotSymModel round_sphere_point(int n, double a = 1.0);
    static RotSymModel hyperbolic_point(int n, double a = 1.0, double r_max = 0.0);
    static RotSymModel subsphere(int n, int k, double a = 1.0);

    int v_dim() const { return n - k - 1; }
    std::string name() const;
    // Sectional curvature of the (constant curvature) ambient.
    double kappa() const;

    double f(double r) const;
    // f(r) / r, accurate as r -> 0.
    double f_ratio(double r) const;
    double df(double r) const;
    double ddf(double r) const;
    double h(double r) const;
    double dh(double r) const;
    double ddh(double r) const;
    // 1 - f'^2 and 1 - h'^2 without cancellation.
    double one_minus_df2(double r) const;
    double one_minus_dh2(double r) const;

    // f'/f - 1/r, bounded as r -> 0.
    double a_v(double r) const;
    // h'/h; zero when there is no H block.
    double a_h(double r) const;

    void check_radius(double r) const;
};

// Parses flat-point, round-point[:a=..], hyperbolic-point[:a=..,r_max=..], subsphere:k=..[,a=..].
RotSymModel parse_model(const std::string& text, int n);

// Closed-form curvature in the frame (V, H, d/dr).
Riemann4 warped_curvature(const RotSymModel& m, double r);

// r^2 times the operator of warped_curvature, from log r; stays finite when r underflows.
CurvatureOperator warped_operator_scaled(const RotSymModel& m, double log_r);

struct ChartMetric {
    int dim = 0;
    std::function<Mat(const Vec&)> g;
    double h_fd = 1e-4;
    Vec lo, hi;

    // Evaluates g at x and checks symmetry and positive definiteness.
    Mat metric(const Vec& x) const;
};

struct FdOptions {
    bool richardson = false;
};

// Christoffel symbols of the second kind: gamma[l](i,j) = Gamma^l_{ij}, first derivatives by central differences.
std::vector<Mat> christoffel_fd(const ChartMetric& c, const Vec& x, double h);
// Coordinate components R_{ijkl} = g(R(d_i,d_j)d_k, d_l).
Riemann4 chart_curvature_coords(const ChartMetric& c, const Vec& x, const FdOptions& opt = {});
// Columns are the Gram-Schmidt orthonormalization of the coordinate basis with respect to g.
Mat gram_schmidt_frame(const Mat& g);
// Curvature in the Gram-Schmidt frame, symmetrized over the tensor index symmetries.
Riemann4 chart_curvature_fd(const ChartMetric& c, const Vec& x, const FdOptions& opt = {});
// Components t(e_a, e_b, e_c, e_d) for the frame columns e.
Riemann4 transform_tensor(const Riemann4& t, const Mat& e);

// Chart of the model around the base point in which the coordinate axes at `base` are V, H, radial in order.
// Coordinates: (x_1..x_{n-k-1}, z_1..z_k, x_{n-k}); x is Euclidean in the normal directions, z stereographic on S^k.
struct ModelChart {
    ChartMetric chart;
    Vec base;
};
ModelChart warped_chart(const RotSymModel& m, double r, double h_fd = 1e-4);
// Same layout for d rho^2 + F(rho)^2 g_{S^{n-k-1}} + H(rho)^2 g_{S^k} around rho0; the stereographic
// z coordinates are divided by z_scale.
ModelChart doubly_warped_chart(int n, int k, std::function<double(double)> F, std::function<double(double)> H,
                               double rho0, double z_scale = 1.0, double h_fd = 1e-4);
// Curvature of that metric in the frame (V, H, d/d rho) from F, H and their first two derivatives.
Riemann4 doubly_warped_curvature(int n, int k, double F, double dF, double ddF, double H, double dH, double ddH);

struct TubeSff {
    SymmetricForm sff;  // on V + H
    SymmetricForm A;    // sff - (1/r) pi_V
};
TubeSff tube_sff(const RotSymModel& m, double r);

struct TubeReport {
    double r;
    CurvatureOperator RT;  // T(r) x R in the frame (V, H, d/dt)
    CurvatureOperator E;   // RT - model_operator(n-k-1, r, n)
    double L_fit;          // r * |E| at this radius
};
TubeReport tube_curvature(const RotSymModel& m, double r);
// r^2 * RT from log r.
CurvatureOperator tube_operator_scaled(const RotSymModel& m, double log_r);
// Sup of r |E(r)| over the grid.
double tube_constant(const RotSymModel& m, const std::vector<double>& grid);
// Largest grid radius below which every grid radius gives a positive margin for RT; 0 if the smallest fails.
double tube_admissible_radius(const RotSymModel& m, const Condition& c, std::vector<double> grid);

// Operator of the tensor pulled back along the frame columns.
CurvatureOperator pullback(const Frame& b, const Riemann4& t);

}  // namespace curvcone
