#include <gtest/gtest.h>

#include <cmath>

#include "curvcone/conditions.hpp"
#include "fixtures.hpp"
#include "gen.hpp"

using namespace curvcone;
using fx::all_conditions;
using fx::random_nonneg;

TEST(Parse, NamesRoundTrip) {
    for (const auto& c : all_conditions()) {
        Condition back = parse_condition(c.name());
        EXPECT_EQ(back.kind, c.kind);
        EXPECT_EQ(back.p, c.p);
        EXPECT_DOUBLE_EQ(back.epsilon, c.epsilon);
    }
    EXPECT_EQ(parse_condition("SpectralAlmostPos:epsilon=0.25").epsilon, 0.25);
}

TEST(Parse, Rejects) {
    EXPECT_THROW(parse_condition("nonsense"), InputError);
    EXPECT_THROW(parse_condition("sec"), InputError);
    EXPECT_THROW(parse_condition("sec:eps=0"), InputError);
    EXPECT_THROW(parse_condition("spectral:eps=-1"), InputError);
    EXPECT_THROW(parse_condition("pcurv"), InputError);
    EXPECT_THROW(parse_condition("pcurv:p=-1"), InputError);
    EXPECT_THROW(parse_condition("pcurv:p=x"), InputError);
    EXPECT_THROW(parse_condition("scal:q=1"), InputError);
}

TEST(Margin, Examples) {
    EXPECT_NEAR(margin(Condition::scal_positive(), model_operator(2, 1, 5)), 1.0, 1e-14);
    EXPECT_NEAR(margin(Condition::spectral_almost_pos(0.5), CurvatureOperator::identity(4)), 1.5, 1e-14);
    auto r = model_operator(3, 1, 5);
    auto c1 = Condition::p_curvature(1), c2 = Condition::p_curvature(2);
    EXPECT_GT(margin(c1, r), margin_tolerance(c1, r));
    EXPECT_LE(std::abs(margin(c2, r)), margin_tolerance(c2, r));
    EXPECT_EQ(classify(margin(c2, r), margin_tolerance(c2, r)), Verdict::Boundary);
}

TEST(Margin, Errors) {
    auto r = CurvatureOperator::identity(4);
    EXPECT_THROW(margin(Condition::p_curvature(3), r), InputError);
    EXPECT_THROW(margin(Condition::pic(), CurvatureOperator::identity(3)), InputError);
    Condition bad = Condition::spectral_almost_pos(0.5);
    bad.epsilon = 0.0;
    EXPECT_THROW(margin(bad, r), InputError);
}

TEST(Margin, SpectralMatchesEigendecomposition) {
    for (int trial = 0; trial < 50; ++trial) {
        auto r = gen::op(gen::dim(3, 6));
        double eps = gen::uniform(0.01, 2.0);
        Eigen::SelfAdjointEigenSolver<Mat> es(r.mat());
        double lmin = es.eigenvalues().minCoeff();
        double norm = es.eigenvalues().cwiseAbs().maxCoeff();
        EXPECT_NEAR(margin(Condition::spectral_almost_pos(eps), r), lmin + eps * norm, 1e-12 * (1 + norm));
        EXPECT_NEAR(margin(Condition::operator_positive(), r), lmin, 1e-12 * (1 + norm));
    }
}

TEST(Minimizer, RoundSphereValues) {
    MinimizerConfig opt;
    opt.multistarts = 16;
    auto I5 = CurvatureOperator::identity(5);
    EXPECT_NEAR(min_sectional(I5, opt).value, 1.0, 1e-12);
    EXPECT_NEAR(min_complex_sectional(I5, opt).value, 4.0, 1e-12);
    for (int p = 0; p <= 3; ++p) EXPECT_NEAR(min_p_curvature(I5, p, opt).value, (5.0 - p) * (4.0 - p), 1e-10);
}

TEST(Minimizer, ProductWithFlatFactor) {
    MinimizerConfig opt;
    opt.multistarts = 32;
    auto r = model_operator(3, 1, 5);
    EXPECT_NEAR(min_sectional(r, opt).value, 0.0, 1e-9);
    EXPECT_NEAR(min_complex_sectional(r, opt).value, 0.0, 1e-9);
}

TEST(Minimizer, NoWorseThanRandomFrames) {
    MinimizerConfig opt;
    opt.multistarts = 32;
    for (int trial = 0; trial < 10; ++trial) {
        int n = gen::dim(4, 6);
        auto r = gen::op(n);
        auto sec = min_sectional(r, opt);
        auto pic = min_complex_sectional(r, opt);
        auto sp = min_p_curvature(r, 1, opt);
        EXPECT_NEAR(sectional(r, sec.frame.col(0), sec.frame.col(1)), sec.value, 1e-10);
        EXPECT_NEAR(complex_sectional(r, Frame(pic.frame)), pic.value, 1e-10);
        EXPECT_NEAR(p_curvature_sum(r, sp.frame), sp.value, 1e-10);
        for (int k = 0; k < 200; ++k) {
            Mat q = gen::orthogonal(n);
            EXPECT_LE(sec.value, sectional(r, q.col(0), q.col(1)) + 1e-10);
            EXPECT_LE(pic.value, complex_sectional(r, Frame(q.leftCols(4))) + 1e-10);
            EXPECT_LE(sp.value, p_curvature_sum(r, q.leftCols(1)) + 1e-10);
        }
        EXPECT_LE(sec.value, r.mat().diagonal().minCoeff() + 1e-12);
    }
}

TEST(Minimizer, PCurvatureSumDirect) {
    // Direct double sum over an orthonormal basis of the complement.
    for (int trial = 0; trial < 20; ++trial) {
        int n = gen::dim(4, 7), p = gen::dim(0, n - 2);
        auto r = gen::op(n);
        Mat q = gen::orthogonal(n);
        double direct = 0.0;
        for (int j = p; j < n; ++j)
            for (int k = p; k < n; ++k)
                if (j != k) direct += sectional(r, q.col(j), q.col(k));
        EXPECT_NEAR(p_curvature_sum(r, q.leftCols(p)), direct, 1e-10);
    }
}

TEST(Minimizer, DeterministicForSeed) {
    MinimizerConfig opt;
    opt.multistarts = 8;
    auto r = gen::op(5);
    auto a = min_complex_sectional(r, opt), b = min_complex_sectional(r, opt);
    EXPECT_EQ(a.value, b.value);
    opt.exec = Exec::Serial;
    EXPECT_EQ(min_complex_sectional(r, opt).value, a.value);
}

TEST(PCurvature, ThresholdTable) {
    for (int n = 5; n <= 7; ++n)
        for (int d = 2; d <= n; ++d)
            for (int p = 0; p <= n - 2; ++p) {
                double m = margin(Condition::p_curvature(p), model_operator(d, 1, n));
                // Precisely (d-p)(d-p-1) when d > p, else 0.
                double expect = d > p ? double(d - p) * (d - p - 1) : 0.0;
                EXPECT_NEAR(m, expect, 1e-6) << n << " " << d << " " << p;
                if (d >= p + 2)
                    EXPECT_GT(m, 1e-3);
                else
                    EXPECT_LE(std::abs(m), 1e-3);
            }
}

TEST(Properties, OrthogonalInvariance) {
    for (const auto& base : all_conditions()) {
        Condition c = base;
        c.opt.multistarts = 64;
        bool sampled = c.sampled();
        int trials = 100;
        for (int t = 0; t < trials; ++t) {
            int n = c.kind == ConditionKind::PIC ? 4 : gen::dim(3, 5);
            auto r = gen::op(n);
            Mat a = gen::orthogonal(n);
            double m0 = margin(c, r), m1 = margin(c, act(a, r));
            EXPECT_NEAR(m0, m1, sampled ? 1e-3 : 1e-6) << c.name();
        }
    }
}

TEST(Properties, PositiveHomogeneity) {
    for (const auto& base : all_conditions()) {
        Condition c = base;
        c.opt.multistarts = 32;
        for (int t = 0; t < 10; ++t) {
            int n = c.kind == ConditionKind::PIC ? 4 : gen::dim(3, 5);
            auto r = gen::op(n);
            double s = gen::uniform(0.1, 10.0);
            double m0 = margin(c, r), m1 = margin(c, s * r);
            double tol = c.sampled() ? 1e-6 * s * (1 + std::abs(m0)) : 1e-12 * s * (1 + std::abs(m0));
            EXPECT_NEAR(m1, s * m0, tol) << c.name();
        }
    }
}

TEST(Properties, ConvexConesClosedUnderSum) {
    for (const auto& base : all_conditions()) {
        if (!base.convex()) continue;
        Condition c = base;
        c.opt.multistarts = 32;
        int found = 0;
        for (int t = 0; t < 400 && found < 20; ++t) {
            int n = c.kind == ConditionKind::PIC ? 4 : gen::dim(3, 5);
            auto shift = gen::uniform(0.0, 3.0) * CurvatureOperator::identity(n);
            auto r1 = gen::op(n) + shift, r2 = gen::op(n) + shift;
            if (margin(c, r1) > 0 && margin(c, r2) > 0) {
                ++found;
                EXPECT_GT(margin(c, r1 + r2), 0.0) << c.name();
            }
        }
        EXPECT_GT(found, 5) << c.name();
    }
}

TEST(Properties, SecAlmostNonnegMatchesDefinition) {
    Condition c = Condition::sec_almost_nonneg(0.2);
    c.opt.multistarts = 32;
    auto r = gen::op(4);
    EXPECT_NEAR(margin(c, r), min_sectional(r, c.opt).value + 0.2 * scal(r), 1e-14);
}

TEST(CEpsilon, IdentityExample) {
    EXPECT_NEAR(cepsilon_delta(1.0, CurvatureOperator::identity(4)), 0.0625, 1e-15);
}

TEST(CEpsilon, BoundaryDegenerates) {
    // Shift a random operator so that lambda_min = -eps(1-1e-9)|r|.
    double eps = 0.3;
    int n = 4;
    auto r0 = gen::op(n);
    Vec lam = eigenvalues(r0);
    double lmin = lam.minCoeff(), lmax = lam.maxCoeff();
    double k = eps * (1 - 1e-9);
    double cshift = -(lmin + k * lmax) / (1 + k);
    auto r = r0 + cshift * CurvatureOperator::identity(n);
    ASSERT_GT(eigenvalues(r).maxCoeff(), -eigenvalues(r).minCoeff());
    double d = cepsilon_delta(eps, r);
    EXPECT_GT(d, 0.0);
    EXPECT_LT(d, 1e-8);
}

TEST(CEpsilon, Errors) {
    auto r = -1.0 * CurvatureOperator::identity(4);
    EXPECT_THROW(cepsilon_delta(0.5, r), InputError);
    EXPECT_THROW(cepsilon_delta(0.0, CurvatureOperator::identity(4)), InputError);
}

TEST(CEpsilon, BruteForceMembership) {
    int failures = 0, checked = 0;
    while (checked < 1000) {
        int n = gen::dim(3, 5);
        double eps = gen::uniform(0.05, 1.0);
        auto r = gen::op(n) + gen::uniform(-0.5, 3.0) * CurvatureOperator::identity(n);
        Condition c = Condition::spectral_almost_pos(eps);
        if (!(margin(c, r) > 0)) continue;
        double delta = cepsilon_delta(eps, r);
        auto S = random_nonneg(n);
        auto T = gen::op(n);
        T = (gen::uniform(0.0, 1.0) / operator_norm(T)) * T;
        double t = std::pow(10.0, gen::uniform(-4.0, 4.0));
        if (margin(c, r + t * S + (t * delta) * T) <= 0) ++failures;
        ++checked;
    }
    EXPECT_EQ(failures, 0);
}

TEST(CEpsilon, CertifierNeverFails) {
    for (int trial = 0; trial < 20; ++trial) {
        int n = gen::dim(3, 5);
        double eps = gen::uniform(0.05, 1.0);
        auto r = gen::op(n) + gen::uniform(0.0, 3.0) * CurvatureOperator::identity(n);
        Condition c = Condition::spectral_almost_pos(eps);
        if (!(margin(c, r) > 0)) continue;
        auto cert = certify_inner_cone(c, random_nonneg(n), r, cepsilon_delta(eps, r), 15, 64, gen::seed());
        EXPECT_TRUE(cert.pass);
    }
}

TEST(Rho, ScalExample) {
    auto c = Condition::scal_positive();
    auto est = inner_cone_rho_convex(c, model_operator(2, 1, 4));
    EXPECT_LE(est.rho_hat, 1.0 / 6.0 + 1e-9);
    EXPECT_NEAR(est.rho_hat, 1.0 / 6.0, 1e-9);
    EXPECT_NEAR(est.rho, 0.9 * est.rho_hat, 1e-15);
    EXPECT_GE(est.directions, 64);
}

TEST(Rho, OperatorPositiveIdentity) {
    auto est = inner_cone_rho_convex(Condition::operator_positive(), CurvatureOperator::identity(4));
    EXPECT_NEAR(est.rho_hat, 1.0, 1e-9);
}

TEST(Rho, Errors) {
    EXPECT_THROW(inner_cone_rho_convex(Condition::scal_positive(), CurvatureOperator::zero(4)), InputError);
    EXPECT_THROW(inner_cone_rho_convex(Condition::operator_positive(), model_operator(3, 1, 4)), InputError);
    EXPECT_THROW(inner_cone_rho_convex(Condition::spectral_almost_pos(0.5), CurvatureOperator::identity(4)),
                 InputError);
}

TEST(Certify, ScalPasses) {
    auto c = Condition::scal_positive();
    auto s = model_operator(3, 1, 5);
    auto est = inner_cone_rho_convex(c, s);
    auto cert = certify_inner_cone(c, s, CurvatureOperator::identity(5), est.rho);
    EXPECT_TRUE(cert.pass);
    EXPECT_EQ(cert.witness, -1);
    for (const auto& row : cert.log) EXPECT_GT(row.margin, 0.0);
    EXPECT_EQ(cert.log.front().t, 0.0);
}

TEST(Certify, OversizedRhoFails) {
    auto c = Condition::scal_positive();
    auto s = model_operator(3, 1, 5);
    auto est = inner_cone_rho_convex(c, s);
    auto cert = certify_inner_cone(c, s, CurvatureOperator::identity(5), 10 * est.rho_hat);
    EXPECT_FALSE(cert.pass);
    ASSERT_GE(cert.witness, 0);
    EXPECT_LE(cert.log[cert.witness].margin, 0.0);
    EXPECT_GT(cert.log.front().margin, 0.0);
}

TEST(Certify, LogSpansGrid) {
    auto c = Condition::operator_positive();
    auto r = 2.0 * CurvatureOperator::identity(4);
    auto s = CurvatureOperator::identity(4);
    auto cert = certify_inner_cone(c, s, r, 0.5, 8, 64, 3);
    double tmin = 1e300, tmax = 0;
    for (const auto& row : cert.log)
        if (row.t > 0) tmin = std::min(tmin, row.t), tmax = std::max(tmax, row.t);
    EXPECT_NEAR(tmin, 2e-3, 1e-15);
    EXPECT_NEAR(tmax, 2e4, 1e-8);
    EXPECT_THROW(certify_inner_cone(c, s, r, 0.0), InputError);
}

TEST(Orbit, ProportionalToNextModel) {
    auto res = orbit_average(model_operator(2, 1, 4), 2, 100000, 7);
    EXPECT_NEAR(res.lambda, 1.0 / 3.0, 5e-3);
    EXPECT_LE(res.residual, 1e-2);
    EXPECT_NEAR(scal(res.S), 1.0, 1e-10);
}

TEST(Orbit, FixedPoint) {
    auto r = model_operator(3, 1, 5);
    auto res = orbit_average(r, 2, 200, 1);
    EXPECT_LT((res.S.mat() - r.mat()).norm(), 1e-12);
    EXPECT_NEAR(res.lambda, 1.0, 1e-12);
    EXPECT_LT(res.residual, 1e-12);
}

TEST(Orbit, SingleSample) {
    auto r = model_operator(2, 1, 4);
    auto res = orbit_average(r, 2, 1, 99);
    Mat a = Mat::Identity(4, 4);
    a.topLeftCorner(3, 3) = haar_orthogonal(3, sample_seed(99, 0));
    EXPECT_LT((res.S.mat() - act(a, r).mat()).norm(), 1e-14);
}

TEST(Orbit, ResidualShrinksWithSamples) {
    double small = 0, large = 0;
    for (std::uint64_t s = 0; s < 4; ++s) {
        small += orbit_average(model_operator(2, 1, 4), 2, 1000, s).residual;
        large += orbit_average(model_operator(2, 1, 4), 2, 100000, s).residual;
    }
    EXPECT_LT(large, small);
}

TEST(Orbit, Errors) {
    EXPECT_THROW(orbit_average(model_operator(4, 1, 5), 2, 10, 1), InputError);
    EXPECT_THROW(orbit_average(model_operator(2, 1, 4), 4, 10, 1), InputError);
    EXPECT_THROW(orbit_average(model_operator(2, 1, 4), 2, 0, 1), InputError);
}
