#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "curvcone/curvop.hpp"
#include "curvcone/parallel.hpp"

namespace curvcone {

enum class ConditionKind { ScalPositive, PIC, PCurvature, SecAlmostNonneg, SpectralAlmostPos, OperatorPositive };

// Multistart Givens-rotation descent over orthonormal frames.
struct MinimizerConfig {
    int multistarts = 256;
    int max_sweeps = 100;
    double step_tol = 1e-8;
    std::uint64_t seed = 0x5eed;
    Exec exec = Exec::Parallel;
};

struct Condition {
    ConditionKind kind = ConditionKind::ScalPositive;
    int p = 0;
    double epsilon = 0.0;
    MinimizerConfig opt;

    static Condition scal_positive();
    static Condition pic();
    static Condition p_curvature(int p);
    static Condition sec_almost_nonneg(double eps);
    static Condition spectral_almost_pos(double eps);
    static Condition operator_positive();

    // Margin comes from a Grassmannian search rather than a closed form.
    bool sampled() const;
    // Positive set is a convex cone (ScalPositive, PIC, PCurvature, OperatorPositive).
    bool convex() const;
    std::string name() const;
};

// Accepts scal, pic, pcurv:p=2, sec:eps=0.1, spectral:eps=0.5, opos (also the long kind names).
Condition parse_condition(const std::string& text);

double margin(const Condition& c, const CurvatureOperator& r);
// Width of the undecided band around zero.
double margin_tolerance(const Condition& c, const CurvatureOperator& r);

enum class Verdict { Pass, Fail, Boundary };
Verdict classify(double margin, double tol);
const char* verdict_name(Verdict v);

struct FrameMinimum {
    double value;
    Mat frame;  // n x k, orthonormal columns
};

// Minimum sectional curvature over 2-planes.
FrameMinimum min_sectional(const CurvatureOperator& r, const MinimizerConfig& opt);
// Minimum complex sectional curvature over orthonormal 4-frames.
FrameMinimum min_complex_sectional(const CurvatureOperator& r, const MinimizerConfig& opt);
// Minimum over p-planes P of sum_{j != k} R(e_j,e_k,e_k,e_j) on an orthonormal basis of P-perp.
// The returned frame spans P.
FrameMinimum min_p_curvature(const CurvatureOperator& r, int p, const MinimizerConfig& opt);
// Value of the p-curvature sum for the p-plane spanned by the columns of P.
double p_curvature_sum(const CurvatureOperator& r, const Mat& P);

double cepsilon_delta(double eps, const CurvatureOperator& r);

struct RhoEstimate {
    double rho_hat;  // min over directions of the bisected escape radius
    double rho;      // 0.9 * rho_hat
    int directions;
    int worst_direction;
};

// Unit (operator norm) test directions: -I, -s/|s|, eigen-directions of s, coordinate
// sectional directions, then random operators until `count` is reached.
std::vector<CurvatureOperator> probe_directions(const CurvatureOperator& s, int count, std::uint64_t seed);

RhoEstimate inner_cone_rho_convex(const Condition& c, const CurvatureOperator& s, int directions = 64,
                                  std::uint64_t seed = 11);

// Largest radius along which a ball around r (in the given directions) stays inside c.
double ball_radius(const Condition& c, const CurvatureOperator& r, const std::vector<CurvatureOperator>& dirs);

struct ConeSample {
    double t;
    int direction;
    double margin;
};

struct InnerConeCertificate {
    CurvatureOperator s;
    double rho;
    CurvatureOperator base;
    std::vector<ConeSample> log;
    bool pass;
    int witness = -1;  // index into log of the first failing sample
};

InnerConeCertificate certify_inner_cone(const Condition& c, const CurvatureOperator& s, const CurvatureOperator& r,
                                        double rho, int t_points = 29, int directions = 64, std::uint64_t seed = 13);

struct OrbitAverage {
    CurvatureOperator S;
    double lambda;
    double residual;
};

// Monte-Carlo Haar average over O(d+1) acting on the first d+1 coordinates.
OrbitAverage orbit_average(const CurvatureOperator& r, int d, int samples, std::uint64_t seed,
                           Exec exec = Exec::Parallel, int partitions = 64);

}  // namespace curvcone
