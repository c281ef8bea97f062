// Acceptance runner: one PASS/FAIL line per criterion, details indented above it.
// Exit status is 0 when every criterion passes, or when --expect-fail lists exactly the failing ones.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "curvcone/bending.hpp"
#include "curvcone/conditions.hpp"
#include "curvcone/conformal.hpp"
#include "curvcone/curvop.hpp"
#include "curvcone/geometry.hpp"
#include "curvcone/submersion.hpp"
#include "fixtures.hpp"
#include "gen.hpp"

using namespace curvcone;
using namespace fx;

namespace {

constexpr double kHalfPi = 0.5 * std::numbers::pi;

struct Log {
    std::vector<std::string> lines;
    bool pass = true;

    // Records one sub-check.
    void check(bool ok, const std::string& what) {
        lines.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
        pass = pass && ok;
    }
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

void algebra(Log& log) {
    double rt = 0, idem = 0, spec = 0;
    for (int trial = 0; trial < 300; ++trial) {
        int n = gen::dim(2, 7);
        CurvatureOperator R = gen::op(n);
        rt = std::max(rt, (from_riemann(to_riemann(R)).mat() - R.mat()).cwiseAbs().maxCoeff());
        CurvatureOperator P = bianchi_project(n, gen::symmetric(biv_count(n)));
        idem = std::max(idem, (bianchi_project(n, P.mat()).mat() - P.mat()).cwiseAbs().maxCoeff());
        spec = std::max(spec, (eigenvalues(act(gen::orthogonal(n), R)) - eigenvalues(R)).cwiseAbs().maxCoeff());
    }
    bool exact = true;
    for (int n = 2; n <= 7; ++n) {
        auto I = SymmetricForm::identity(n);
        exact = exact && kulkarni_wedge(I, I).mat() == CurvatureOperator::identity(n).mat();
    }
    log.check(rt <= 1e-12, fmt("Riemann round trip %.2e <= 1e-12", rt));
    log.check(idem <= 1e-10, fmt("Bianchi projection idempotent %.2e <= 1e-10", idem));
    log.check(spec <= 1e-10, fmt("act preserves the spectrum %.2e <= 1e-10", spec));
    log.check(exact, "kulkarni_wedge(g, g) equals the identity exactly, n = 2..7");
}

void equivariance(Log& log) {
    for (const auto& c : all_conditions()) {
        double tol = c.sampled() ? 1e-3 : 1e-6, worst = 0.0;
        for (int t = 0; t < 100; ++t) {
            int n = c.kind == ConditionKind::PIC ? 4 : gen::dim(3, 5);
            auto r = gen::op(n);
            worst = std::max(worst, std::abs(margin(c, r) - margin(c, act(gen::orthogonal(n), r))));
        }
        log.check(worst <= tol, c.name() + fmt(": max |margin(R) - margin(aR)| %.2e <= %.0e over 100 pairs", worst, tol));
    }
}

void p_curvature_table(Log& log) {
    int mismatched = 0, cases = 0;
    double boundary = 0.0;
    for (int n = 5; n <= 7; ++n)
        for (int d = 2; d <= n; ++d)
            for (int p = 0; p <= n - 2; ++p) {
                double m = margin(Condition::p_curvature(p), model_operator(d, 1, n));
                ++cases;
                bool positive = m > 1e-3;
                if (positive != (d >= p + 2)) ++mismatched;
                if (d == p + 1) boundary = std::max(boundary, std::abs(m));
            }
    log.check(mismatched == 0, "sign of the margin matches d >= p + 2 on " + std::to_string(cases) + " cases (" +
                                   std::to_string(mismatched) + " mismatched)");
    log.check(boundary <= 1e-3, fmt("boundary d = p + 1: max |margin| %.2e <= 1e-3", boundary));
}

void averaging(Log& log) {
    auto res = orbit_average(model_operator(2, 1, 4), 2, 100000, 7);
    double rel = std::abs(res.lambda - 1.0 / 3.0) * 3.0;
    log.check(res.residual <= 1e-2, fmt("residual %.2e <= 1e-2 at 1e5 samples", res.residual));
    log.check(rel <= 0.02, fmt("lambda %.5f within 2%% of 1/3 (%.2e)", res.lambda, rel));
}

void tubes(Log& log) {
    double flat = 0.0;
    for (int n : {4, 5})
        for (double r : log_grid(1e-3, 0.9, 15))
            flat = std::max(flat, tube_curvature(RotSymModel::flat_point(n), r).E.mat().cwiseAbs().maxCoeff());
    log.check(flat <= 1e-12, fmt("flat model max |E| %.2e <= 1e-12", flat));

    auto m = RotSymModel::round_sphere_point(4);
    auto grid = log_grid(1e-3, 1.0, 40);
    double L = tube_constant(m, grid), worst = 0.0;
    for (double r : grid) worst = std::max(worst, r * operator_norm(tube_curvature(m, r).E) / L);
    log.check(std::isfinite(L) && worst <= 1 + 1e-12, fmt("round model r |E(r)| <= L = %.6f on [1e-3, 1] (%.3f)", L, worst));

    double lim = 0.0;
    for (auto md : {RotSymModel::flat_point(5), RotSymModel::round_sphere_point(5), RotSymModel::hyperbolic_point(5),
                    RotSymModel::subsphere(5, 1), RotSymModel::subsphere(5, 3)})
        lim = std::max(lim, tube_sff(md, 1e-6).A.mat().cwiseAbs().maxCoeff());
    log.check(lim <= 1e-4, fmt("remainder A at r = 1e-6 within %.2e <= 1e-4 of its limit 0", lim));
}

AngleProfile full_bend(const RotSymModel& m, const Condition& c, BendingConstants* out = nullptr) {
    BendingConstants k = estimate_constants(m, c, 0.5);
    AngleProfile p1 = initial_bend(k);
    if (out) *out = k;
    return inductive_bend_log(p1, k, reachable_log_radius(p1, k) - 1.0);
}

void graph_oracle(Log& log) {
    for (int n : {4, 5}) {
        auto m = RotSymModel::round_sphere_point(n);
        AngleProfile p = full_bend(m, Condition::scal_positive());
        std::mt19937_64 g(19 + n);
        double worst = 0.0;
        int bound_failures = 0;
        for (int i = 0; i < 100; ++i) {
            auto pt = random_point(p, g);
            Vec nu = gen::gaussian_vec(n);
            auto dc = assemble_R_D(m, p, nu, pt);
            Mat Q = normal_frame_rotation(n, 0, nu);
            auto fdop = act(Q, from_riemann(graph_curvature_fd(m, p, pt), 1e-6));
            worst = std::max(worst,
                             (fdop - dc.RD).mat().cwiseAbs().maxCoeff() / std::max(1.0, operator_norm(dc.RD)));
            if (operator_norm(dc.E) > dc.bound * (1 + 1e-9) + 1e-12) ++bound_failures;
        }
        log.check(worst <= 1e-5, "n = " + std::to_string(n) + fmt(": assembled vs FD %.2e <= 1e-5 at 100 samples", worst));
        log.check(bound_failures == 0, "n = " + std::to_string(n) + ": error bound holds at every sample (" +
                                           std::to_string(bound_failures) + " failures)");
    }
}

BendingReport bend_row(Log& log, const RotSymModel& m, const Condition& c) {
    std::string name = m.name() + " n = " + std::to_string(m.n) + " " + c.name();
    try {
        BendingConstants k;
        AngleProfile p = full_bend(m, c, &k);
        BendingReport rep = verify_bend(m, c, p);
        double theta = p.segments.back().theta_end();
        long bound = k.bend_bound();
        bool ok = rep.pass && p.complete && std::abs(theta - kHalfPi) <= 1e-12 &&
                  static_cast<long>(p.bends.size()) <= bound && rep.min_margin > 0.0;
        std::ostringstream os;
        os << name << ": verdict " << (rep.pass ? "pass" : "fail") << ", theta " << theta << ", bends "
           << p.bends.size() << " <= " << bound << ", min margin " << rep.min_margin;
        log.check(ok, os.str());
        return rep;
    } catch (const InputError& e) {
        log.check(false, name + ": " + e.what());
        return {};
    }
}

void end_to_end(Log& log) {
    for (int n : {4, 5})
        for (const auto& c : {Condition::scal_positive(), Condition::spectral_almost_pos(0.3)})
            for (const auto& m : {RotSymModel::flat_point(n), RotSymModel::round_sphere_point(n)}) bend_row(log, m, c);

    // Two ends bent to a common radius.
    auto m = RotSymModel::round_sphere_point(4);
    auto scal = Condition::scal_positive(), spec = Condition::spectral_almost_pos(0.3);
    auto ka = estimate_constants(m, scal, 0.5), kb = estimate_constants(m, spec, 0.5);
    auto pa = initial_bend(ka), pb = initial_bend(kb);
    double target = std::min(reachable_log_radius(pa, ka), reachable_log_radius(pb, kb)) - 1.0;
    auto ra = verify_bend(m, scal, inductive_bend_log(pa, ka, target));
    auto rb = verify_bend(m, spec, inductive_bend_log(pb, kb, target));
    auto j = join(ra, rb);
    log.check(j.pass, "join of two round n = 4 ends at a common radius" + (j.reason.empty() ? "" : ": " + j.reason));
}

void cepsilon(Log& log) {
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
    log.check(failures == 0, "R + t S + t delta T stays in C_eps: " + std::to_string(failures) + " failures in 1000");
}

void submersions(Log& log) {
    auto h = hopf_data();
    Vec base(3);
    base << 0.3, -0.2, 0.4;
    for (double t : {1.0, 0.5, 0.25}) {
        double dev = berger_curvature_fd(t, base, FdOptions{true}).max_abs_diff(variation_curvature(h, t));
        log.check(dev <= 1e-6, fmt("t = %.2f: formulas vs Berger FD %.2e <= 1e-6", t, dev));
    }
    double id = std::max(variation_curvature(h, 1.0).max_abs_diff(h.R_M), rescaled_tensor(h, 1.0).max_abs_diff(h.R_M));
    log.check(id <= 1e-12, fmt("t = 1 reproduces R_M: %.2e <= 1e-12", id));

    std::vector<double> grid = log_grid(1e-3, 1.0, 24);
    auto rep = find_t_star(h, Condition::spectral_almost_pos(0.5), grid);
    log.check(rep.C_validated, fmt("|E^t| <= C / t on the validation half, C = %.4f", rep.C));
    log.check(rep.t_star > 0.0, fmt("t_star = %.3g > 0 for Hopf, spectral eps = 0.5", rep.t_star));
}

void conformal(Log& log) {
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) worst = std::max(worst, conformal_fixture_deviation(fixture(i)));
    log.check(worst <= 1e-5, fmt("conformal change formulas vs FD on 50 fixtures %.2e <= 1e-5", worst));

    auto ff = FlatteningFactor::round_sphere(4);
    auto c = Condition::scal_positive();
    auto setup = conformal_setup(ff, c);
    auto rep = verify_conformal_log(ff, c, setup.log_gamma_max - 1.0);
    log.check(rep.log_derivative_residual <= 1e-8, fmt("u log-derivative residual %.2e <= 1e-8", rep.log_derivative_residual));
    log.check(rep.slope_residual >= -1e-12, fmt("alpha' + c alpha (2 - alpha) / r >= 0 at all nodes (min %.2e)", rep.slope_residual));
    log.check(rep.oracle_deviation <= 1e-5, fmt("decomposition vs FD %.2e <= 1e-5", rep.oracle_deviation));
    log.check(rep.end_deviation <= 1e-10, fmt("cylindrical end on r < lambda / 2: %.2e <= 1e-10", rep.end_deviation));
    log.check(rep.pass, fmt("round S^4 run for scal: min margin %.3e, lambda %.3e", rep.min_margin, rep.lambda));
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<void(Log&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> only, expect_fail;
    app.add_option("--only", only, "criteria to run");
    app.add_option("--expect-fail", expect_fail, "criteria recorded as unattainable");
    CLI11_PARSE(app, argc, argv);

    std::vector<Criterion> all = {
        {1, "algebra suite", 5, algebra},
        {2, "condition equivariance", 60, equivariance},
        {3, "p-curvature threshold table", 120, p_curvature_table},
        {4, "orbit averaging", 30, averaging},
        {5, "tube and Gauss suite", 30, tubes},
        {6, "graph metric oracle", 120, graph_oracle},
        {7, "end-to-end bend", 300, end_to_end},
        {8, "C_eps membership", 60, cepsilon},
        {9, "submersion suite", 60, submersions},
        {10, "conformal suite", 300, conformal},
    };

    std::set<int> failed;
    for (const auto& c : all) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        Log log;
        auto start = std::chrono::steady_clock::now();
        try {
            c.run(log);
        } catch (const std::exception& e) {
            log.check(false, std::string("exception: ") + e.what());
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log.check(secs < c.budget_s, fmt("runtime %.2f s < %.0f s", secs, c.budget_s));
        for (const auto& l : log.lines) std::printf("    %s\n", l.c_str());
        std::printf("%s %2d %s (%.2f s)\n", log.pass ? "PASS" : "FAIL", c.id, c.name, secs);
        std::fflush(stdout);
        if (!log.pass) failed.insert(c.id);
    }

    std::set<int> expected(expect_fail.begin(), expect_fail.end());
    if (failed.empty()) return 0;
    if (failed == expected) {
        std::printf("failing criteria match the recorded unattainable set\n");
        return 0;
    }
    return 1;
}
