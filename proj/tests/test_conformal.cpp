#include <gtest/gtest.h>

#include <cmath>

#include "curvcone/conformal.hpp"
#include "fixtures.hpp"
#include "gen.hpp"

using namespace curvcone;
using namespace fx;

namespace {

struct RunSetup {
    FlatteningFactor ff;
    ConformalSetup k;
    AlphaProfile ap;
    CutoffProfile cp;
};

const RunSetup& sphere4() {
    static RunSetup s = [] {
        RunSetup out{FlatteningFactor::round_sphere(4), {}, {}, {}};
        out.k = conformal_setup(out.ff, Condition::scal_positive());
        out.ap = build_alpha_log(out.k.c, out.k.tau, out.k.r0, out.k.r1, out.k.log_gamma_max - 0.7);
        out.cp.lambda = choose_lambda({out.ap.r2, out.k.rho, out.k.sup_RM, out.k.C1, out.k.C2});
        return out;
    }();
    return s;
}

bool near_seam(const std::vector<double>& seams, double r) {
    for (double s : seams)
        if (std::abs(std::log(r / s)) < 0.02) return true;
    return false;
}

}  // namespace

TEST(Jets, ProductAndCompositionMatchFiniteDifferences) {
    for (int trial = 0; trial < 10; ++trial) {
        int n = gen::dim(2, 4);
        auto f = SmoothField::random(n, 0.5), g = SmoothField::random(n, 0.5);
        Vec x = 0.3 * gen::gaussian_vec(n);
        auto value = [&](const Vec& y) { return std::sqrt(1.0 + std::exp(f.value(y)) * g.value(y) * g.value(y)); };
        Jet j = jet_sqrt(1.0 + jet_exp(f.jet(x)) * g.jet(x) * g.jet(x));
        EXPECT_NEAR(j.v, value(x), 1e-14);
        double h = 1e-4;
        for (int a = 0; a < n; ++a) {
            Vec ea = h * Vec::Unit(n, a);
            EXPECT_NEAR(j.d(a), (value(x + ea) - value(x - ea)) / (2 * h), 1e-7);
            for (int b = 0; b < n; ++b) {
                Vec eb = h * Vec::Unit(n, b);
                double fd = (value(x + ea + eb) - value(x + ea - eb) - value(x - ea + eb) + value(x - ea - eb)) /
                            (4 * h * h);
                EXPECT_NEAR(j.dd(a, b), fd, 1e-5);
            }
        }
    }
}

TEST(Jets, RadialJetRejectsOrigin) { EXPECT_THROW(radial_jet(Vec::Zero(3)), InputError); }

TEST(ConformalChange, SigmaOneIsIdentity) {
    int n = 3;
    ChartMetric c = sphere_chart(n);
    Vec x = Vec::LinSpaced(n, 0.1, 0.4);
    PointGeometry g = point_geometry_fd(c, x);
    auto f = SmoothField::random(n, 0.5);
    Jet one = Jet::constant(n, 1.0), fj = f.jet(x);
    EXPECT_LE((conformal_gradient(one, fj, g) - g.g.ldlt().solve(fj.d)).norm(), 1e-15);
    Vec X = gen::gaussian_vec(n), Y = gen::gaussian_vec(n);
    EXPECT_LE((conformal_connection(one, X, Y, g) - contract(g.gamma, X, Y)).norm(), 1e-14);
    Mat hess = fj.dd;
    for (int k = 0; k < n; ++k) hess -= fj.d(k) * g.gamma[k];
    EXPECT_LE((conformal_hessian(one, fj, g) - 0.5 * (hess + hess.transpose())).norm(), 1e-14);
    Profile1D w{[](double) { return 2.0; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
    Riemann4 R = conformal_curvature_radial(w, fj, g);
    EXPECT_LE(R.max_abs_diff(4.0 * g.R), 1e-14);
}

TEST(ConformalChange, ExponentialOnThePlane) {
    // sigma = e^x on flat R^2 and f = y.
    ChartMetric base = flat_chart(2);
    auto sigma = [](const Vec& p) { return std::exp(p(0)); };
    ChartMetric d = deformed(base, sigma);
    for (double x0 : {-0.4, 0.0, 0.3}) {
        Vec p(2);
        p << x0, 0.2;
        Jet s{std::exp(x0), Vec::Unit(2, 0) * std::exp(x0), Mat::Zero(2, 2)};
        s.dd(0, 0) = std::exp(x0);
        Jet f{0.2, Vec::Unit(2, 1), Mat::Zero(2, 2)};
        Mat hess = conformal_hessian(s, f, point_geometry_fd(base, p));
        auto gamma = christoffel_fd(d, p, 1e-4);
        Mat fd = -f.d(0) * gamma[0] - f.d(1) * gamma[1];
        EXPECT_LE((hess - fd).cwiseAbs().maxCoeff(), 1e-6);
        // Hess f = -(dx dy + dy dx) for this pair.
        EXPECT_NEAR(hess(0, 1), -1.0, 1e-14);
        EXPECT_NEAR(hess(0, 0), 0.0, 1e-14);
    }
}

TEST(ConformalChange, GradientNormScales) {
    for (int i = 0; i < 20; ++i) {
        Fixture fx = fixture(i);
        PointGeometry g = point_geometry_fd(fx.base, fx.x);
        Jet s = sigma_jet(fx.h, fx.x), f = fx.f.jet(fx.x);
        Vec grad = conformal_gradient(s, f, g);
        double lhs = s.v * s.v * grad.dot(g.g * grad);
        double rhs = f.d.dot(g.g.ldlt().solve(f.d)) / (s.v * s.v);
        EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, rhs));
    }
}

// Items 1-4 against finite differences of sigma^2 g on 50 fixtures.
TEST(ConformalChange, FiftyFixturesAgainstFiniteDifferences) {
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) worst = std::max(worst, conformal_fixture_deviation(fixture(i)));
    EXPECT_LE(worst, 1e-5);
}

TEST(ConformalChange, CylinderFromInverseRadius) {
    // (dx^2) / |x|^2 on R^3 minus 0 is the cylinder S^2 x R.
    int n = 3;
    ChartMetric base = flat_chart(n);
    Profile1D w{[](double t) { return 1.0 / t; }, [](double t) { return -1.0 / (t * t); },
                [](double t) { return 2.0 / (t * t * t); }};
    for (int trial = 0; trial < 5; ++trial) {
        Vec x = gen::uniform(0.2, 0.8) * gen::gaussian_vec(n).normalized();
        Jet r = radial_jet(x);
        Riemann4 R = conformal_curvature_radial(w, r, point_geometry_fd(base, x));
        Mat F = radial_frame(x.normalized());
        double s4 = std::pow(1.0 / r.v, 4);
        auto sec = [&](int i, int j) { return R.eval(F.col(i), F.col(j), F.col(j), F.col(i)) / s4; };
        EXPECT_NEAR(sec(0, 1), 1.0, 1e-12);
        EXPECT_NEAR(sec(0, 2), 0.0, 1e-12);
        EXPECT_NEAR(sec(1, 2), 0.0, 1e-12);
    }
}

TEST(ConformalChange, RejectsNonPositive) {
    int n = 2;
    PointGeometry g = point_geometry_fd(flat_chart(n), Vec::Zero(n));
    Jet f = Jet::constant(n, 1.0);
    EXPECT_THROW(conformal_gradient(Jet::constant(n, 0.0), f, g), InputError);
    Profile1D w{[](double) { return -1.0; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
    EXPECT_THROW(conformal_curvature_radial(w, f, g), InputError);
}

TEST(ConformallyFlat, SphereAndShift) {
    for (int n : {3, 4, 5}) {
        auto ff = FlatteningFactor::round_sphere(n);
        for (int trial = 0; trial < 5; ++trial) {
            Vec nu = gen::gaussian_vec(n).normalized();
            double r = gen::uniform(0.01, 1.9);
            CurvatureOperator R = conformally_flat_operator(-1.0 * jet_log(ff.v(r * nu)), radial_frame(nu));
            EXPECT_LE(operator_norm(R - CurvatureOperator::identity(n)), 1e-12);
        }
    }
    // Constant psi: flat.
    Jet c = Jet::constant(3, 0.7);
    EXPECT_LE(operator_norm(conformally_flat_operator(c, Mat::Identity(3, 3))), 1e-15);
}

TEST(Flattening, BuiltInsValidate) {
    for (int n : {2, 4, 5}) {
        auto s = FlatteningFactor::round_sphere(n);
        EXPECT_NO_THROW(s.validate());
        EXPECT_DOUBLE_EQ(s.v(Vec::Zero(n)).v, 1.0);
        EXPECT_NEAR(s.v(s.radius * Vec::Unit(n, 0)).v, 2.0, 1e-15);
        EXPECT_NO_THROW(FlatteningFactor::flat(n).validate());
    }
    EXPECT_EQ(parse_chart("sphere", 4).name, "sphere");
    EXPECT_EQ(parse_chart("flat", 4).name, "flat");
    EXPECT_THROW(parse_chart("torus", 4), InputError);
}

TEST(Flattening, RejectsWrongFactor) {
    auto ff = FlatteningFactor::round_sphere(3);
    ff.v = [](const Vec& x) { return Jet{1.0 + 0.2 * x.squaredNorm(), 0.4 * x, 0.4 * Mat::Identity(3, 3)}; };
    EXPECT_THROW(ff.validate(), InputError);
    auto half = FlatteningFactor::round_sphere(3);
    half.v = [](const Vec& x) { return Jet{0.5 * (1.0 + 0.25 * x.squaredNorm()), 0.25 * x, 0.25 * Mat::Identity(3, 3)}; };
    EXPECT_THROW(half.validate(), InputError);
}

TEST(Cutoff, ShapeAndDerivatives) {
    for (double t : {0.0, 0.2, 0.5}) EXPECT_EQ(cutoff(t), 1.0);
    for (double t : {1.0, 1.5, 7.0}) EXPECT_EQ(cutoff(t), 0.0);
    double prev = 1.0;
    for (int i = 0; i <= 200; ++i) {
        double t = 0.5 + 0.5 * i / 200.0;
        EXPECT_LE(cutoff(t), prev + 1e-15);
        prev = cutoff(t);
        double h = 1e-6;
        EXPECT_NEAR(cutoff_d(t), (cutoff(t + h) - cutoff(t - h)) / (2 * h), 1e-6);
        if (i > 0 && i < 200) EXPECT_NEAR(cutoff_dd(t), (cutoff_d(t + h) - cutoff_d(t - h)) / (2 * h), 1e-5);
    }
    for (double t : {0.5, 1.0}) {
        EXPECT_EQ(cutoff_d(t), 0.0);
        EXPECT_EQ(cutoff_dd(t), 0.0);
    }
}

TEST(Cutoff, BlendBoundsAndRegions) {
    auto ff = FlatteningFactor::round_sphere(4);
    CutoffProfile cp{0.8};
    for (int i = 0; i < 200; ++i) {
        Vec x = gen::uniform(0.0, 1.99) * gen::gaussian_vec(4).normalized();
        double vl = cp.v_lambda(ff, x).v, q = cp.q(ff, x).v;
        EXPECT_GE(vl, 0.5);
        EXPECT_LE(vl, 2.0);
        EXPECT_GE(q, 0.25);
        EXPECT_LE(q, 4.0);
        double r = x.norm();
        if (r <= 0.4) EXPECT_NEAR(vl, ff.v(x).v, 1e-15);
        if (r >= 0.8) EXPECT_EQ(vl, 1.0);
    }
}

TEST(Cutoff, LogQJetMatchesFiniteDifferences) {
    auto ff = FlatteningFactor::round_sphere(3);
    CutoffProfile cp{0.6};
    for (double r : {0.35, 0.45, 0.55}) {
        Vec x = r * Vec(Vec::LinSpaced(3, 1.0, 2.0)).normalized();
        Jet j = cp.log_q(ff, x);
        double h = 1e-5;
        for (int a = 0; a < 3; ++a) {
            Vec e = h * Vec::Unit(3, a);
            double fd = (cp.log_q(ff, x + e).v - cp.log_q(ff, x - e).v) / (2 * h);
            EXPECT_NEAR(j.d(a), fd, 1e-8);
            Vec dfd = (cp.log_q(ff, x + e).d - cp.log_q(ff, x - e).d) / (2 * h);
            EXPECT_LE((j.dd.col(a) - dfd).norm(), 1e-6);
        }
    }
}

TEST(Alpha, ProfileContract) {
    double c = 0.2, tau = 1e-3, r0 = 0.2, r1 = 0.1;
    AlphaProfile base = alpha_shape(c, tau, r0, r1);
    EXPECT_LT(base.gamma_max(), base.delta);
    AlphaProfile ap = build_alpha_log(c, tau, r0, r1, base.log_gamma_max() - 1.0);
    EXPECT_NEAR(ap.log_gamma, base.log_gamma_max() - 1.0, 1e-8);
    EXPECT_EQ(ap.alpha(r0), 0.0);
    EXPECT_EQ(ap.log_u(r0), 0.0);
    for (double f : {1.0, 1.01, 0.999}) EXPECT_EQ(ap.alpha(r1 * f), tau);
    for (double f : {1.0, 0.5, 1e-3, 1e-9}) {
        double r = ap.r2 * f;
        EXPECT_EQ(ap.alpha(r), 1.0);
        EXPECT_NEAR(std::exp(ap.log_u(r) + std::log(r) - ap.log_gamma), 1.0, 1e-8);
    }
    EXPECT_GE(ap.slope_residual(), 0.0);
    EXPECT_LE(ap.log_derivative_residual(), 1e-8);
    for (int i = 0; i <= 400; ++i) {
        double s = ap.s2 * 1.05 * i / 400.0;
        double b = ap.beta(s);
        EXPECT_LE(ap.dbeta(s), 0.95 * b * (2.0 - b) + 1e-15);
        EXPECT_GE(ap.dbeta(s), 0.0);
        double r = r1 + (r0 - r1) * i / 400.0;
        EXPECT_LE(std::abs(ap.dalpha(r)), 2.5 * tau / (r0 - r1) * (1 + 1e-12));
        EXPECT_LE(ap.alpha(r), tau);
    }
}

TEST(Alpha, GammaAgainstQuadrature) {
    // log gamma = log r2 + int_{r2}^{r0} alpha(t) / t dt, integrated in log t.
    AlphaProfile ap = build_alpha_log(0.3, 2e-3, 0.3, 0.15, alpha_shape(0.3, 2e-3, 0.3, 0.15).log_gamma_max() - 2.0);
    double a = std::log(ap.r2), b = std::log(ap.r0);
    int N = 400000;
    double sum = 0.0;
    for (int i = 0; i <= N; ++i) {
        double l = a + (b - a) * i / N;
        double wgt = (i == 0 || i == N) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        sum += wgt * ap.alpha(std::exp(l));
    }
    sum *= (b - a) / (3.0 * N);
    EXPECT_NEAR(ap.log_gamma, a + sum, 1e-8);
}

TEST(Alpha, RandomProfilesHoldTheSlopeInequality) {
    for (int trial = 0; trial < 20; ++trial) {
        double c = gen::uniform(0.02, 0.5), tau = std::exp(gen::uniform(std::log(1e-6), std::log(0.5)));
        double r0 = gen::uniform(0.05, 1.0), r1 = r0 * gen::uniform(0.3, 0.7);
        AlphaProfile base = alpha_shape(c, tau, r0, r1);
        double lg = base.log_gamma_max() - gen::uniform(0.0, 3.0);
        AlphaProfile ap = build_alpha_log(c, tau, r0, r1, lg);
        EXPECT_NEAR(ap.log_gamma, lg, 1e-8);
        EXPECT_GE(ap.slope_residual(512), 0.0);
        EXPECT_LE(ap.log_derivative_residual(128), 1e-8);
    }
}

TEST(Alpha, RangeErrors) {
    AlphaProfile base = alpha_shape(0.2, 1e-3, 0.2, 0.1);
    EXPECT_THROW(build_alpha(0.2, 1e-3, 0.2, 0.1, 1.01 * base.delta), InputError);
    EXPECT_THROW(build_alpha_log(0.2, 1e-3, 0.2, 0.1, base.log_gamma_max() + 0.01), InputError);
    EXPECT_NO_THROW(build_alpha_log(0.2, 1e-3, 0.2, 0.1, base.log_gamma_max()));
    EXPECT_THROW(build_alpha(0.2, 1e-3, 0.2, 0.1, -1.0), InputError);
    EXPECT_THROW(build_alpha(0.2, 0.0, 0.2, 0.1, 1e-3), InputError);
    EXPECT_THROW(build_alpha(0.2, 1e-3, 0.1, 0.2, 1e-3), InputError);
}

TEST(Alpha, TauOneIsDegenerate) {
    // The initial ramp is linear in tau, so delta(1) = delta(1/2)^2 / r1.
    AlphaProfile half = alpha_shape(0.2, 0.5, 0.2, 0.1);
    double delta = half.delta * half.delta / 0.1;
    AlphaProfile ap = build_alpha(0.2, 1.0, 0.2, 0.1, delta);
    EXPECT_EQ(ap.s2, 0.0);
    EXPECT_NEAR(ap.r2, 0.1, 1e-16);
    EXPECT_NEAR(ap.gamma / delta, 1.0, 1e-12);
    EXPECT_THROW(build_alpha(0.2, 1.0, 0.2, 0.1, 0.5 * delta), InputError);
}

TEST(Decomposition, FrameHasNormalLast) {
    for (int trial = 0; trial < 10; ++trial) {
        int n = gen::dim(2, 6);
        Vec nu = gen::gaussian_vec(n).normalized();
        Mat F = radial_frame(nu);
        EXPECT_LE((F.transpose() * F - Mat::Identity(n, n)).norm(), 1e-14);
        EXPECT_LE((F.col(n - 1) - nu).norm(), 1e-14);
    }
    EXPECT_LE((radial_frame(Vec::Unit(3, 2)) - Mat::Identity(3, 3)).norm(), 1e-15);
}

TEST(Decomposition, AgreesWithDirectCurvature) {
    const RunSetup& s = sphere4();
    double worst = 0.0;
    for (int trial = 0; trial < 60; ++trial) {
        double lr = gen::uniform(std::log(0.01 * s.cp.lambda), std::log(1.9));
        Vec nu = gen::gaussian_vec(4).normalized();
        Decomposition d = decompose_R_D(s.ff, s.cp, s.ap, nu, std::exp(lr));
        worst = std::max(worst, operator_norm(d.RD - d.RD_direct) / std::max(1.0, operator_norm(d.RD)));
    }
    EXPECT_LE(worst, 1e-10);
}

TEST(Decomposition, FiniteDifferenceOracle) {
    const RunSetup& s = sphere4();
    auto seams = conformal_seams(s.ap, s.cp.lambda);
    double worst = 0.0;
    int done = 0;
    while (done < 10) {
        double lr = gen::uniform(std::log(0.01 * s.cp.lambda), std::log(1.9));
        double r = std::exp(lr);
        if (near_seam(seams, r)) continue;
        Vec nu = gen::gaussian_vec(4).normalized();
        Decomposition d = decompose_R_D(s.ff, s.cp, s.ap, nu, r);
        CurvatureOperator fd = conformal_curvature_fd(s.ff, s.cp, &s.ap, nu, r);
        worst = std::max(worst, operator_norm(d.RD - fd) / std::max(1.0, operator_norm(d.RD)));
        ++done;
    }
    EXPECT_LE(worst, 1e-5);
}

TEST(Decomposition, FlatAmbientHasNoError) {
    auto ff = FlatteningFactor::flat(4);
    AlphaProfile ap = build_alpha_log(0.2, 0.05, 0.5, 0.25, -8.0);
    CutoffProfile cp{0.5 * ap.r2};
    for (double r : {0.1 * cp.lambda, 0.7 * cp.lambda, 0.3, 0.7}) {
        Decomposition d = decompose_R_D(ff, cp, ap, gen::gaussian_vec(4).normalized(), r);
        EXPECT_EQ(d.q, 1.0);
        EXPECT_EQ(operator_norm(d.E), 0.0);
        EXPECT_EQ(operator_norm(d.RM_lambda), 0.0);
    }
}

TEST(Decomposition, CylinderInsideR2) {
    // alpha = 1, v = 1: gamma^2 R_D is the cylinder operator; scaled by (u r)^2 = gamma^2 that is S itself.
    auto ff = FlatteningFactor::flat(5);
    AlphaProfile ap = build_alpha_log(0.2, 0.05, 0.5, 0.25, -8.0);
    CutoffProfile cp{0.5 * ap.r2};
    CurvatureOperator S = model_operator(4, 1.0, 5);
    for (double f : {0.9, 0.5, 1e-3}) {
        Decomposition d = decompose_R_D(ff, cp, ap, gen::gaussian_vec(5).normalized(), f * ap.r2);
        EXPECT_EQ(d.alpha, 1.0);
        EXPECT_LE(operator_norm(d.RD - S), 1e-12);
        EXPECT_LE(operator_norm(d.RD_direct - S), 1e-12);
    }
}

TEST(Decomposition, RejectsDomain) {
    const RunSetup& s = sphere4();
    EXPECT_THROW(decompose_R_D(s.ff, s.cp, s.ap, Vec::Unit(4, 0), 0.0), InputError);
    EXPECT_THROW(decompose_R_D(s.ff, s.cp, s.ap, Vec::Unit(4, 0), 2.5), InputError);
    EXPECT_THROW(decompose_R_D(s.ff, s.cp, s.ap, Vec::Unit(3, 0), 0.1), InputError);
}

TEST(Blend, SphereBounds) {
    auto ff = FlatteningFactor::round_sphere(4);
    BlendBounds b = blend_bounds(ff, {0.1, 0.05, 0.025});
    EXPECT_TRUE(b.C2_stable);
    EXPECT_TRUE(b.dq_ok);
    EXPECT_GT(b.C2, 0.0);
    double emin = *std::min_element(b.sup_E.begin(), b.sup_E.end());
    EXPECT_LE(b.C1, 1.05 * emin);
    // The 1/8 constant is below the measured sup |dq|.
    EXPECT_GT(*std::max_element(b.sup_dq.begin(), b.sup_dq.end()), b.dq_bound_closed);
}

TEST(Blend, FlatIsZero) {
    BlendBounds b = blend_bounds(FlatteningFactor::flat(4), {0.1, 0.05});
    EXPECT_EQ(b.C1, 0.0);
    EXPECT_EQ(b.C2, 0.0);
}

TEST(Blend, OutsideLambdaIsAmbient) {
    auto ff = FlatteningFactor::round_sphere(4);
    CutoffProfile cp{0.1};
    for (double r : {0.1, 0.15, 1.0}) {
        Vec nu = gen::gaussian_vec(4).normalized();
        Mat F = radial_frame(nu);
        CurvatureOperator a = conformally_flat_operator(cp.log_q(ff, r * nu), F);
        CurvatureOperator b = conformally_flat_operator(-1.0 * jet_log(ff.v(r * nu)), F);
        EXPECT_LE(operator_norm(a - b), 1e-14);
    }
}

TEST(Lambda, Choice) {
    EXPECT_DOUBLE_EQ(choose_lambda({0.01, 0.4, 0.0, 0.0, 0.0}), 0.009);
    EXPECT_THROW(choose_lambda({0.0, 0.4, 1.0, 1.0, 1.0}), InputError);
    EXPECT_THROW(choose_lambda({0.1, 0.0, 1.0, 1.0, 1.0}), InputError);
    for (int trial = 0; trial < 50; ++trial) {
        LambdaConstants k{gen::uniform(1e-3, 1.0), gen::uniform(0.01, 1.0), gen::uniform(0.0, 2.0),
                          gen::uniform(0.0, 2.0), gen::uniform(0.0, 2.0)};
        double l = choose_lambda(k);
        EXPECT_GT(l, 0.0);
        EXPECT_LT(l, k.r2);
        EXPECT_LT(l, std::sqrt(k.rho / (48.0 * k.sup_RM)));
        EXPECT_LT(l, k.rho / (6.0 * k.C1));
        EXPECT_LT(l, k.rho / (48.0 * k.C2));
    }
    const RunSetup& s = sphere4();
    EXPECT_GT(s.cp.lambda, 0.0);
    EXPECT_LT(s.cp.lambda, s.ap.r2);
}

TEST(Verify, RoundScalPasses) {
    auto ff = FlatteningFactor::round_sphere(4);
    ConformalSetup k = conformal_setup(ff, Condition::scal_positive());
    ConformalReport rep = verify_conformal_log(ff, Condition::scal_positive(), k.log_gamma_max - 0.7);
    EXPECT_TRUE(rep.pass);
    EXPECT_GT(rep.min_margin, 0.0);
    EXPECT_LE(rep.oracle_deviation, 1e-5);
    EXPECT_LE(rep.end_deviation, 1e-10);
    EXPECT_LE(rep.decomposition_deviation, 1e-8);
    EXPECT_GE(rep.slope_residual, 0.0);
    EXPECT_LE(rep.log_derivative_residual, 1e-8);
    EXPECT_TRUE(rep.star_shaped);
    EXPECT_NEAR(rep.rho, 0.45, 1e-3);
    EXPECT_NEAR(rep.eps1, 0.5, 1e-6);
}

TEST(Verify, SpectralPasses) {
    auto ff = FlatteningFactor::round_sphere(4);
    auto c = Condition::spectral_almost_pos(0.5);
    ConformalSetup k = conformal_setup(ff, c);
    ConformalReport rep = verify_conformal_log(ff, c, k.log_gamma_max - 0.7);
    EXPECT_TRUE(rep.pass);
    EXPECT_LT(rep.lambda, rep.alpha.r2);
}

TEST(Verify, SerialMatchesParallel) {
    auto ff = FlatteningFactor::round_sphere(4);
    ConformalGrid g;
    g.radii = 24;
    ConformalSetup k = conformal_setup(ff, Condition::scal_positive(), g);
    ConformalReport a = verify_conformal_log(ff, Condition::scal_positive(), k.log_gamma_max - 1.0, g);
    g.exec = Exec::Serial;
    ConformalReport b = verify_conformal_log(ff, Condition::scal_positive(), k.log_gamma_max - 1.0, g);
    ASSERT_EQ(a.samples.size(), b.samples.size());
    for (size_t i = 0; i < a.samples.size(); ++i) EXPECT_EQ(a.samples[i].margin, b.samples[i].margin);
    EXPECT_EQ(a.oracle_deviation, b.oracle_deviation);
}

TEST(Verify, Errors) {
    auto ff = FlatteningFactor::round_sphere(4);
    ConformalSetup k = conformal_setup(ff, Condition::scal_positive());
    EXPECT_THROW(verify_conformal(ff, Condition::scal_positive(), 2.0 * k.delta), InputError);
    EXPECT_THROW(verify_conformal(FlatteningFactor::flat(4), Condition::scal_positive(), 1e-3), InputError);
}
