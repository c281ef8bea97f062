#include "curvcone/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace curvcone {

namespace {

constexpr double kPi = std::numbers::pi;

// Rotates columns a,b of the leading k columns of Q by phi.
Mat rotated_frame(const Mat& Q, int k, int a, int b, double phi) {
    Mat f = Q.leftCols(k);
    double c = std::cos(phi), s = std::sin(phi);
    f.col(a) = c * Q.col(a) + s * Q.col(b);
    if (b < k) f.col(b) = -s * Q.col(a) + c * Q.col(b);
    return f;
}

void apply_rotation(Mat& Q, int a, int b, double phi) {
    double c = std::cos(phi), s = std::sin(phi);
    Vec qa = Q.col(a), qb = Q.col(b);
    Q.col(a) = c * qa + s * qb;
    Q.col(b) = -s * qa + c * qb;
}

// Along one Givens angle the objective is a trigonometric polynomial of degree <= 2
// (degree 2 even part only when it is a sum of diagonal operator entries).
// Returns the minimizing angle and the predicted value.
template <class F>
std::pair<double, double> line_minimum(const F& rot, double f0, bool even_only) {
    if (even_only) {
        double f1 = rot(kPi / 4), f2 = rot(kPi / 2);
        double A = 0.5 * (f0 + f2), B = 0.5 * (f0 - f2), C = f1 - A;
        double amp = std::hypot(B, C);
        double phi = 0.5 * (std::atan2(C, B) + kPi);
        if (phi > kPi / 2) phi -= kPi;
        return {phi, A - amp};
    }
    double y[5];
    y[0] = f0;
    for (int j = 1; j < 5; ++j) y[j] = rot(2.0 * kPi * j / 5.0);
    double a0 = 0, a[3] = {0, 0, 0}, b[3] = {0, 0, 0};
    for (int j = 0; j < 5; ++j) {
        double t = 2.0 * kPi * j / 5.0;
        a0 += y[j] / 5.0;
        for (int m = 1; m <= 2; ++m) {
            a[m] += 0.4 * y[j] * std::cos(m * t);
            b[m] += 0.4 * y[j] * std::sin(m * t);
        }
    }
    auto val = [&](double t) { return a0 + a[1] * std::cos(t) + b[1] * std::sin(t) + a[2] * std::cos(2 * t) + b[2] * std::sin(2 * t); };
    double best = 0.0, bv = val(0.0);
    for (int g = 1; g < 48; ++g) {
        double t = 2.0 * kPi * g / 48.0;
        double v = val(t);
        if (v < bv) bv = v, best = t;
    }
    for (int it = 0; it < 8; ++it) {
        double d1 = -a[1] * std::sin(best) + b[1] * std::cos(best) - 2 * a[2] * std::sin(2 * best) + 2 * b[2] * std::cos(2 * best);
        double d2 = -a[1] * std::cos(best) - b[1] * std::sin(best) - 4 * a[2] * std::cos(2 * best) - 4 * b[2] * std::sin(2 * best);
        if (!(d2 > 0.0)) break;
        double next = best - d1 / d2;
        if (val(next) > val(best)) break;
        best = next;
    }
    if (best > kPi) best -= 2.0 * kPi;
    return {best, val(best)};
}

// Coordinate descent over Givens rotations of an orthogonal matrix Q; the objective
// sees the first k columns. `inner` also rotates pairs inside the frame.
template <class F>
double descend(Mat& Q, int k, bool inner, bool even_only, const F& f, const MinimizerConfig& opt) {
    int n = static_cast<int>(Q.rows());
    double val = f(Q.leftCols(k));
    for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
        double max_step = 0.0;
        for (int a = 0; a < k; ++a)
            for (int b = a + 1; b < n; ++b) {
                if (b < k && !inner) continue;
                auto rot = [&](double phi) { return f(rotated_frame(Q, k, a, b, phi)); };
                auto [phi, predicted] = line_minimum(rot, val, even_only);
                if (predicted >= val) continue;
                double trial = rot(phi);
                if (trial < val) {
                    apply_rotation(Q, a, b, phi);
                    val = trial;
                    max_step = std::max(max_step, std::abs(phi));
                }
            }
        if (max_step < opt.step_tol) break;
    }
    return val;
}

template <class F>
FrameMinimum multistart(int n, int k, bool inner, bool even_only, const F& f, const MinimizerConfig& opt) {
    struct Local {
        double v;
        Mat frame;
    };
    auto runs = map_index<Local>(
        opt.multistarts,
        [&](int i) {
            Mat Q = haar_orthogonal(n, sample_seed(opt.seed, static_cast<std::uint64_t>(i)));
            double v = descend(Q, k, inner, even_only, f, opt);
            return Local{v, Q.leftCols(k)};
        },
        opt.exec);
    int best = 0;
    for (int i = 1; i < static_cast<int>(runs.size()); ++i)
        if (runs[i].v < runs[best].v) best = i;
    return {runs[best].v, runs[best].frame};
}

double quad(const Mat& M, const Vec& x, const Vec& y) {
    Vec w = wedge(x, y);
    return w.dot(M * w);
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

// ---- Condition ----

Condition Condition::scal_positive() { return Condition{ConditionKind::ScalPositive, 0, 0.0, {}}; }
Condition Condition::pic() { return Condition{ConditionKind::PIC, 0, 0.0, {}}; }
Condition Condition::operator_positive() { return Condition{ConditionKind::OperatorPositive, 0, 0.0, {}}; }

Condition Condition::p_curvature(int p) {
    if (p < 0) throw InputError("p-curvature needs p >= 0");
    return Condition{ConditionKind::PCurvature, p, 0.0, {}};
}

Condition Condition::sec_almost_nonneg(double eps) {
    if (!(eps > 0.0)) throw InputError("epsilon must be positive");
    return Condition{ConditionKind::SecAlmostNonneg, 0, eps, {}};
}

Condition Condition::spectral_almost_pos(double eps) {
    if (!(eps > 0.0)) throw InputError("epsilon must be positive");
    return Condition{ConditionKind::SpectralAlmostPos, 0, eps, {}};
}

bool Condition::sampled() const {
    return kind == ConditionKind::PIC || kind == ConditionKind::PCurvature || kind == ConditionKind::SecAlmostNonneg;
}

bool Condition::convex() const {
    return kind == ConditionKind::ScalPositive || kind == ConditionKind::PIC || kind == ConditionKind::PCurvature ||
           kind == ConditionKind::OperatorPositive;
}

std::string Condition::name() const {
    switch (kind) {
        case ConditionKind::ScalPositive: return "scal";
        case ConditionKind::PIC: return "pic";
        case ConditionKind::PCurvature: return "pcurv:p=" + std::to_string(p);
        case ConditionKind::SecAlmostNonneg: return "sec:eps=" + fmt_double(epsilon);
        case ConditionKind::SpectralAlmostPos: return "spectral:eps=" + fmt_double(epsilon);
        case ConditionKind::OperatorPositive: return "opos";
    }
    return "?";
}

Condition parse_condition(const std::string& text) {
    std::string head = text, tail;
    if (auto colon = text.find(':'); colon != std::string::npos) {
        head = text.substr(0, colon);
        tail = text.substr(colon + 1);
    }
    double eps = 0.0;
    int p = -1;
    bool have_eps = false;
    std::istringstream ts(tail);
    std::string item;
    while (std::getline(ts, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw InputError("condition parameter needs key=value: " + item);
        std::string key = item.substr(0, eq), value = item.substr(eq + 1);
        try {
            if (key == "eps" || key == "epsilon") {
                eps = std::stod(value);
                have_eps = true;
            } else if (key == "p") {
                p = std::stoi(value);
            } else {
                throw InputError("unknown condition parameter: " + key);
            }
        } catch (const std::logic_error& e) {
            if (dynamic_cast<const InputError*>(&e)) throw;
            throw InputError("bad condition parameter value: " + item);
        }
    }
    auto need_eps = [&]() {
        if (!have_eps) throw InputError("condition " + head + " needs eps=");
        return eps;
    };
    if (head == "scal" || head == "ScalPositive") return Condition::scal_positive();
    if (head == "pic" || head == "PIC") return Condition::pic();
    if (head == "opos" || head == "OperatorPositive") return Condition::operator_positive();
    if (head == "pcurv" || head == "PCurvature") {
        if (p < 0) throw InputError("pcurv needs p=");
        return Condition::p_curvature(p);
    }
    if (head == "sec" || head == "SecAlmostNonneg") return Condition::sec_almost_nonneg(need_eps());
    if (head == "spectral" || head == "SpectralAlmostPos") return Condition::spectral_almost_pos(need_eps());
    throw InputError("unknown condition: " + head);
}

// ---- frame minimizers ----

FrameMinimum min_sectional(const CurvatureOperator& r, const MinimizerConfig& opt) {
    const Mat& M = r.mat();
    auto f = [&](const Mat& F) { return quad(M, F.col(0), F.col(1)); };
    return multistart(r.n(), 2, false, true, f, opt);
}

FrameMinimum min_complex_sectional(const CurvatureOperator& r, const MinimizerConfig& opt) {
    if (r.n() < 4) throw InputError("PIC needs n >= 4");
    const Mat& M = r.mat();
    auto f = [&](const Mat& F) {
        Vec f1 = F.col(0), f2 = F.col(1), f3 = F.col(2), f4 = F.col(3);
        return quad(M, f1, f3) + quad(M, f1, f4) + quad(M, f2, f3) + quad(M, f2, f4) -
               2.0 * wedge(f1, f2).dot(M * wedge(f4, f3));
    };
    return multistart(r.n(), 4, true, false, f, opt);
}

double p_curvature_sum(const CurvatureOperator& r, const Mat& P) {
    const Mat& M = r.mat();
    Mat ric = ricci(r);
    double v = 2.0 * M.trace();
    for (int j = 0; j < P.cols(); ++j) {
        v -= 2.0 * P.col(j).dot(ric * P.col(j));
        for (int k = j + 1; k < P.cols(); ++k) v += 2.0 * quad(M, P.col(j), P.col(k));
    }
    return v;
}

FrameMinimum min_p_curvature(const CurvatureOperator& r, int p, const MinimizerConfig& opt) {
    int n = r.n();
    if (p < 0 || p > n - 2) throw InputError("p-curvature needs 0 <= p <= n-2");
    if (p == 0) return {2.0 * r.mat().trace(), Mat::Zero(n, 0)};
    const Mat& M = r.mat();
    Mat ric = ricci(r);
    double tr2 = 2.0 * M.trace();
    auto f = [&](const Mat& P) {
        double v = tr2;
        for (int j = 0; j < P.cols(); ++j) {
            v -= 2.0 * P.col(j).dot(ric * P.col(j));
            for (int k = j + 1; k < P.cols(); ++k) v += 2.0 * quad(M, P.col(j), P.col(k));
        }
        return v;
    };
    return multistart(n, p, false, true, f, opt);
}

// ---- margins ----

double margin(const Condition& c, const CurvatureOperator& r) {
    switch (c.kind) {
        case ConditionKind::ScalPositive: return scal(r);
        case ConditionKind::OperatorPositive: return eigenvalues(r).minCoeff();
        case ConditionKind::SpectralAlmostPos: {
            if (!(c.epsilon > 0.0)) throw InputError("epsilon must be positive");
            Vec ev = eigenvalues(r);
            return ev.minCoeff() + c.epsilon * ev.cwiseAbs().maxCoeff();
        }
        case ConditionKind::PIC: return min_complex_sectional(r, c.opt).value;
        case ConditionKind::PCurvature: return min_p_curvature(r, c.p, c.opt).value;
        case ConditionKind::SecAlmostNonneg: {
            if (!(c.epsilon > 0.0)) throw InputError("epsilon must be positive");
            return min_sectional(r, c.opt).value + c.epsilon * scal(r);
        }
    }
    throw InputError("unknown condition");
}

double margin_tolerance(const Condition& c, const CurvatureOperator& r) {
    double scale = r.mat().cwiseAbs().maxCoeff() * r.dim();
    return (c.sampled() ? 1e-6 : 1e-12) * scale;
}

Verdict classify(double m, double tol) {
    if (m > tol) return Verdict::Pass;
    if (m < -tol) return Verdict::Fail;
    return Verdict::Boundary;
}

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Fail: return "fail";
        case Verdict::Boundary: return "boundary";
    }
    return "?";
}

// ---- inner cone ----

double cepsilon_delta(double eps, const CurvatureOperator& r) {
    if (!(eps > 0.0)) throw InputError("epsilon must be positive");
    Vec ev = eigenvalues(r);
    double lmin = ev.minCoeff(), norm = ev.cwiseAbs().maxCoeff();
    if (!(lmin + eps * norm > 0.0)) throw InputError("operator is not in C_eps");
    double lower = std::max(0.0, -lmin / norm);
    double eps_prime = 0.5 * (lower + eps);
    return 0.5 * std::min((eps - eps_prime) / ((1.0 + eps) * (1.0 + eps)), eps / (1.0 + eps));
}

std::vector<CurvatureOperator> probe_directions(const CurvatureOperator& s, int count, std::uint64_t seed) {
    int n = s.n(), N = s.dim();
    std::vector<CurvatureOperator> dirs;
    auto push = [&](CurvatureOperator t) {
        double nn = operator_norm(t);
        if (nn > 1e-12) dirs.push_back((1.0 / nn) * t);
    };
    push(-1.0 * CurvatureOperator::identity(n));
    push(-1.0 * s);
    Eigen::SelfAdjointEigenSolver<Mat> es(s.mat());
    for (int k = 0; k < N; ++k) {
        Vec v = es.eigenvectors().col(k);
        Mat vv = v * v.transpose();
        CurvatureOperator t = bianchi_project(n, vv);
        push(-1.0 * t);
        push(t);
    }
    for (int p = 0; p < N; ++p) {
        Mat e = Mat::Zero(N, N);
        e(p, p) = -1.0;
        push(CurvatureOperator::unchecked(n, e));
    }
    for (std::uint64_t k = 0; static_cast<int>(dirs.size()) < count; ++k) push(random_operator(n, sample_seed(seed, k)));
    return dirs;
}

double ball_radius(const Condition& c, const CurvatureOperator& r, const std::vector<CurvatureOperator>& dirs) {
    if (!(margin(c, r) > 0.0)) return 0.0;
    double scale = std::max(operator_norm(r), 1e-300);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : dirs) {
        double lo = 0.0, hi = scale;
        while (margin(c, r + hi * t) > 0.0 && hi < 1e6 * scale) {
            lo = hi;
            hi *= 2.0;
        }
        if (margin(c, r + hi * t) > 0.0) continue;
        for (int it = 0; it < 60 && hi - lo > 1e-12 * hi; ++it) {
            double mid = 0.5 * (lo + hi);
            if (margin(c, r + mid * t) > 0.0)
                lo = mid;
            else
                hi = mid;
        }
        best = std::min(best, lo);
    }
    return best;
}

RhoEstimate inner_cone_rho_convex(const Condition& c, const CurvatureOperator& s, int directions, std::uint64_t seed) {
    if (!c.convex()) throw InputError("inner_cone_rho_convex needs a convex condition");
    double m = margin(c, s);
    if (classify(m, margin_tolerance(c, s)) != Verdict::Pass) throw InputError("operator is not inside the condition");
    auto dirs = probe_directions(s, std::max(directions, 64), seed);
    RhoEstimate est{std::numeric_limits<double>::infinity(), 0.0, static_cast<int>(dirs.size()), -1};
    for (int k = 0; k < static_cast<int>(dirs.size()); ++k) {
        double rk = ball_radius(c, s, {dirs[k]});
        if (rk < est.rho_hat) {
            est.rho_hat = rk;
            est.worst_direction = k;
        }
    }
    est.rho = 0.9 * est.rho_hat;
    return est;
}

InnerConeCertificate certify_inner_cone(const Condition& c, const CurvatureOperator& s, const CurvatureOperator& r,
                                        double rho, int t_points, int directions, std::uint64_t seed) {
    if (!(rho > 0.0)) throw InputError("rho must be positive");
    InnerConeCertificate cert{s, rho, r, {}, true, -1};
    double rn = operator_norm(r), sn = operator_norm(s);
    if (!(sn > 0.0)) throw InputError("s must be nonzero");
    double unit = rn > 0.0 ? rn / sn : 1.0 / sn;
    auto dirs = probe_directions(s, directions, seed);
    double shrink = rho * (1.0 - 1e-9);
    auto record = [&](double t, int dir, double m) {
        cert.log.push_back({t, dir, m});
        if (!(m > 0.0) && cert.pass) {
            cert.pass = false;
            cert.witness = static_cast<int>(cert.log.size()) - 1;
        }
    };
    record(0.0, -1, margin(c, r));
    for (int i = 0; i < t_points; ++i) {
        double e = t_points == 1 ? 0.0 : -3.0 + 7.0 * i / (t_points - 1);
        double t = std::pow(10.0, e) * unit;
        for (int k = 0; k < static_cast<int>(dirs.size()); ++k) record(t, k, margin(c, r + t * (s + shrink * dirs[k])));
    }
    return cert;
}

// ---- orbit average ----

OrbitAverage orbit_average(const CurvatureOperator& r, int d, int samples, std::uint64_t seed, Exec exec, int partitions) {
    int n = r.n();
    if (d < 2 || d + 1 > n) throw InputError("orbit_average needs 2 <= d and d+1 <= n");
    if (samples < 1) throw InputError("orbit_average needs at least one sample");
    BivectorBasis b(n);
    double scale = std::max(1.0, r.mat().cwiseAbs().maxCoeff());
    for (int p = 0; p < b.size(); ++p)
        for (int q = 0; q < b.size(); ++q)
            if ((b.pair(p).second > d || b.pair(q).second > d) && std::abs(r.mat()(p, q)) > 1e-12 * scale)
                throw InputError("operator is not supported on the first d+1 coordinates");
    partitions = std::clamp(partitions, 1, samples);
    auto chunk = map_index<Mat>(
        partitions,
        [&](int c) {
            Mat acc = Mat::Zero(b.size(), b.size());
            int lo = static_cast<int>(static_cast<long long>(samples) * c / partitions);
            int hi = static_cast<int>(static_cast<long long>(samples) * (c + 1) / partitions);
            for (int i = lo; i < hi; ++i) {
                Mat a = Mat::Identity(n, n);
                a.topLeftCorner(d + 1, d + 1) = haar_orthogonal(d + 1, sample_seed(seed, static_cast<std::uint64_t>(i)));
                acc += act(a, r).mat();
            }
            return acc;
        },
        exec);
    Mat sum = Mat::Zero(b.size(), b.size());
    for (const auto& m : chunk) sum += m;
    CurvatureOperator S = CurvatureOperator::unchecked(n, sum / samples);
    Mat target = model_operator(d + 1, 1.0, n).mat();
    double lambda = (S.mat().array() * target.array()).sum() / target.squaredNorm();
    double sn = S.mat().norm();
    double residual = sn > 0.0 ? (S.mat() - lambda * target).norm() / sn : 0.0;
    return {S, lambda, residual};
}

}  // namespace curvcone
