#pragma once

#include <vector>

#include "curvcone/conditions.hpp"
#include "curvcone/curvop.hpp"
#include "curvcone/geometry.hpp"

namespace curvcone {

// Pointwise data of a Riemannian submersion in a g_M-orthonormal frame (v_1..v_k, h_1..h_{n-k}).
struct SubmersionData {
    int n = 0;
    int k = 0;
    Riemann4 R_M;           // n-dimensional, frame V + H
    Riemann4 R_F;           // k-dimensional, intrinsic fiber curvature
    Riemann4 R_B;           // (n-k)-dimensional, base curvature pulled back to H
    std::vector<Mat> A;     // A[r].col(i) = A_{h_r} v_i, vectors in R^n (horizontal)
    std::vector<Mat> T;     // T[i].col(j) = T_{v_i} v_j, vectors in R^n (horizontal)

    // Dimensions, horizontality of A and T, symmetry of T.
    void validate(double tol = 1e-12) const;
};

struct SpaceForm {
    int dim;
    double kappa;
};

// S^3 -> S^2(1/2), totally geodesic fibers; frame (V, jp, kp) with V = ip.
SubmersionData hopf_data();
// Riemannian product F x B -> B of constant curvature factors.
SubmersionData product_data(SpaceForm fiber, SpaceForm base);

// (4,0) curvature of g_M^t, components on the unnormalized g_M frame.
Riemann4 variation_curvature(const SubmersionData& d, double t);
// Same components on the g_M^t-orthonormal frame (v_i / t, h_r).
Riemann4 rescaled_tensor(const SubmersionData& d, double t);
// Tensor of F x R^{n-k} with metric t^2 g_F + g_flat on the frame (v_i / t, e).
Riemann4 fiber_tensor(const SubmersionData& d, double t);
// rescaled_tensor - fiber_tensor.
Riemann4 error_tensor(const SubmersionData& d, double t);
// The same difference from the closed component formulas.
Riemann4 error_formula(const SubmersionData& d, double t);

CurvatureOperator pullback_rescaled(const SubmersionData& d, double t);
// Checks error_tensor against error_formula to 1e-10 (relative) before returning.
CurvatureOperator error_term(const SubmersionData& d, double t);

struct RescaleReport {
    std::vector<double> t;
    std::vector<double> margins;
    std::vector<double> error_norms;
    double fiber_margin;
    bool hypothesis_strict;  // fiber operator strictly inside c (otherwise the flat-fiber C_eps case)
    double C;          // max t |E^t| over the coarse (large-t) half of the grid
    bool C_validated;  // t |E^t| <= C on the fine half
    double t_star;     // largest grid t such that every grid t' <= t passes; 0 if none
};

// Grid scan; raises InputError when the fiber hypothesis margin(c, R_F x R^{n-k}) is not positive.
RescaleReport find_t_star(const SubmersionData& d, const Condition& c, std::vector<double> grid);

// Berger sphere (S^3 with the Hopf fibers scaled by t) in a stereographic chart.
struct BergerChart {
    ChartMetric chart;
    Vec base;
    Mat frame;  // coordinate components of V = ip, jp, kp at base
};
BergerChart berger_chart(double t, const Vec& base, double h_fd = 1e-4);
// Finite-difference curvature of the Berger chart on `frame` (compare with variation_curvature(hopf_data(), t)).
Riemann4 berger_curvature_fd(double t, const Vec& base, const FdOptions& opt = {});

}  // namespace curvcone
