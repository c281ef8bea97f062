#include "curvcone/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace curvcone {

namespace {

constexpr double kPi = std::numbers::pi;

// cot x - 1/x and coth x - 1/x near zero.
double cot_minus_inv(double x) {
    if (std::abs(x) < 1e-2) {
        double x2 = x * x;
        return -x * (1.0 / 3 + x2 * (1.0 / 45 + x2 * (2.0 / 945 + x2 / 4725)));
    }
    return 1.0 / std::tan(x) - 1.0 / x;
}

double coth_minus_inv(double x) {
    if (std::abs(x) < 1e-2) {
        double x2 = x * x;
        return x * (1.0 / 3 - x2 * (1.0 / 45 - x2 * (2.0 / 945 - x2 / 4725)));
    }
    return 1.0 / std::tanh(x) - 1.0 / x;
}

// Index class of frame vector i: 0 = V, 1 = H, 2 = radial.
int block_of(const RotSymModel& m, int i) {
    if (i < m.v_dim()) return 0;
    if (i < m.n - 1) return 1;
    return 2;
}

CurvatureOperator diagonal_operator(int n, const std::function<double(int, int)>& sec) {
    BivectorBasis b(n);
    Mat d = Mat::Zero(b.size(), b.size());
    for (int p = 0; p < b.size(); ++p) {
        auto [i, j] = b.pair(p);
        d(p, p) = sec(i, j);
    }
    return CurvatureOperator::unchecked(n, d);
}

// Zeroes every bivector row/column touching the last index.
Mat drop_last_index(int n, Mat m) {
    BivectorBasis b(n);
    for (int p = 0; p < b.size(); ++p)
        if (b.pair(p).second == n - 1) {
            m.row(p).setZero();
            m.col(p).setZero();
        }
    return m;
}

double parse_number(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw InputError("bad value for " + key + ": " + value);
        return v;
    } catch (const std::logic_error&) {
        throw InputError("bad value for " + key + ": " + value);
    }
}

}  // namespace

// ---- models ----

RotSymModel RotSymModel::flat_point(int n, double r_max) {
    if (n < 2 || n > kMaxDim) throw InputError("model dimension out of range");
    if (!(r_max > 0.0)) throw InputError("r_max must be positive");
    return RotSymModel{ModelKind::FlatPoint, n, 0, 1.0, r_max};
}

RotSymModel RotSymModel::round_sphere_point(int n, double a) {
    if (n < 2 || n > kMaxDim) throw InputError("model dimension out of range");
    if (!(a > 0.0)) throw InputError("radius a must be positive");
    return RotSymModel{ModelKind::RoundSpherePoint, n, 0, a, 0.9 * kPi * a};
}

RotSymModel RotSymModel::hyperbolic_point(int n, double a, double r_max) {
    if (n < 2 || n > kMaxDim) throw InputError("model dimension out of range");
    if (!(a > 0.0)) throw InputError("radius a must be positive");
    if (r_max < 0.0) throw InputError("r_max must be positive");
    return RotSymModel{ModelKind::HyperbolicPoint, n, 0, a, r_max > 0.0 ? r_max : 2.0 * a};
}

RotSymModel RotSymModel::subsphere(int n, int k, double a) {
    if (n < 3 || n > kMaxDim) throw InputError("model dimension out of range");
    if (k < 1 || n - k - 1 < 1) throw InputError("subsphere needs 1 <= k <= n-2");
    if (!(a > 0.0)) throw InputError("radius a must be positive");
    return RotSymModel{ModelKind::Subsphere, n, k, a, 0.45 * kPi * a};
}

std::string RotSymModel::name() const {
    std::ostringstream os;
    switch (kind) {
        case ModelKind::FlatPoint: os << "flat-point"; break;
        case ModelKind::RoundSpherePoint: os << "round-point:a=" << a; break;
        case ModelKind::HyperbolicPoint: os << "hyperbolic-point:a=" << a; break;
        case ModelKind::Subsphere: os << "subsphere:k=" << k << ",a=" << a; break;
    }
    return os.str();
}

double RotSymModel::kappa() const {
    switch (kind) {
        case ModelKind::FlatPoint: return 0.0;
        case ModelKind::HyperbolicPoint: return -1.0 / (a * a);
        default: return 1.0 / (a * a);
    }
}

void RotSymModel::check_radius(double r) const {
    if (!(r > 0.0) || !(r < r_max)) throw InputError("radius outside the model domain (0, r_max)");
}

double RotSymModel::f(double r) const {
    switch (kind) {
        case ModelKind::FlatPoint: return r;
        case ModelKind::HyperbolicPoint: return a * std::sinh(r / a);
        default: return a * std::sin(r / a);
    }
}

double RotSymModel::f_ratio(double r) const {
    if (kind == ModelKind::FlatPoint) return 1.0;
    double x = r / a, x2 = x * x;
    double sgn = kind == ModelKind::HyperbolicPoint ? 1.0 : -1.0;
    if (std::abs(x) < 1e-3) return 1.0 + sgn * x2 / 6.0 * (1.0 + sgn * x2 / 20.0);
    return kind == ModelKind::HyperbolicPoint ? std::sinh(x) / x : std::sin(x) / x;
}

double RotSymModel::df(double r) const {
    switch (kind) {
        case ModelKind::FlatPoint: return 1.0;
        case ModelKind::HyperbolicPoint: return std::cosh(r / a);
        default: return std::cos(r / a);
    }
}

double RotSymModel::ddf(double r) const {
    switch (kind) {
        case ModelKind::FlatPoint: return 0.0;
        case ModelKind::HyperbolicPoint: return std::sinh(r / a) / a;
        default: return -std::sin(r / a) / a;
    }
}

double RotSymModel::h(double r) const { return kind == ModelKind::Subsphere ? a * std::cos(r / a) : 1.0; }
double RotSymModel::dh(double r) const { return kind == ModelKind::Subsphere ? -std::sin(r / a) : 0.0; }
double RotSymModel::ddh(double r) const { return kind == ModelKind::Subsphere ? -std::cos(r / a) / a : 0.0; }

double RotSymModel::one_minus_df2(double r) const {
    switch (kind) {
        case ModelKind::FlatPoint: return 0.0;
        case ModelKind::HyperbolicPoint: return -std::pow(std::sinh(r / a), 2);
        default: return std::pow(std::sin(r / a), 2);
    }
}

double RotSymModel::one_minus_dh2(double r) const {
    return kind == ModelKind::Subsphere ? std::pow(std::cos(r / a), 2) : 1.0;
}

double RotSymModel::a_v(double r) const {
    switch (kind) {
        case ModelKind::FlatPoint: return 0.0;
        case ModelKind::HyperbolicPoint: return coth_minus_inv(r / a) / a;
        default: return cot_minus_inv(r / a) / a;
    }
}

double RotSymModel::a_h(double r) const { return kind == ModelKind::Subsphere ? -std::tan(r / a) / a : 0.0; }

RotSymModel parse_model(const std::string& text, int n) {
    std::string head = text, tail;
    if (auto colon = text.find(':'); colon != std::string::npos) {
        head = text.substr(0, colon);
        tail = text.substr(colon + 1);
    }
    double a = 1.0, r_max = 0.0;
    int k = -1;
    std::istringstream ts(tail);
    std::string item;
    while (std::getline(ts, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw InputError("model parameter needs key=value: " + item);
        std::string key = item.substr(0, eq), value = item.substr(eq + 1);
        if (key == "a")
            a = parse_number(key, value);
        else if (key == "r_max")
            r_max = parse_number(key, value);
        else if (key == "k")
            k = static_cast<int>(parse_number(key, value));
        else if (key == "n")
            n = static_cast<int>(parse_number(key, value));
        else
            throw InputError("unknown model parameter: " + key);
    }
    RotSymModel m;
    if (head == "flat-point" || head == "FlatPoint")
        m = RotSymModel::flat_point(n, r_max > 0.0 ? r_max : 1.0);
    else if (head == "round-point" || head == "RoundSpherePoint")
        m = RotSymModel::round_sphere_point(n, a);
    else if (head == "hyperbolic-point" || head == "HyperbolicPoint")
        m = RotSymModel::hyperbolic_point(n, a, r_max);
    else if (head == "subsphere" || head == "RoundSphereSubsphere") {
        if (k < 0) throw InputError("subsphere needs k=");
        m = RotSymModel::subsphere(n, k, a);
    } else
        throw InputError("unknown model: " + head);
    if (r_max > 0.0 && m.kind != ModelKind::FlatPoint && m.kind != ModelKind::HyperbolicPoint) {
        double first_zero = m.kind == ModelKind::Subsphere ? 0.5 * kPi * a : kPi * a;
        if (r_max >= first_zero) throw InputError("r_max beyond the first zero of f or h");
        m.r_max = r_max;
    }
    return m;
}

// ---- closed-form curvature ----

Riemann4 warped_curvature(const RotSymModel& m, double r) {
    m.check_radius(r);
    double f = m.f(r), df = m.df(r), ddf = m.ddf(r);
    double h = m.h(r), dh = m.dh(r), ddh = m.ddh(r);
    double vv = m.one_minus_df2(r) / (f * f), vr = -ddf / f;
    double hh = m.one_minus_dh2(r) / (h * h), hr = -ddh / h;
    double vh = -df * dh / (f * h);
    auto sec = [&](int i, int j) {
        int bi = block_of(m, i), bj = block_of(m, j);
        if (bi > bj) std::swap(bi, bj);
        if (bi == 0 && bj == 0) return vv;
        if (bi == 0 && bj == 1) return vh;
        if (bi == 0 && bj == 2) return vr;
        if (bi == 1 && bj == 1) return hh;
        return hr;
    };
    return to_riemann(diagonal_operator(m.n, sec));
}

CurvatureOperator warped_operator_scaled(const RotSymModel& m, double log_r) {
    double r = std::exp(log_r);
    if (!(r < m.r_max)) throw InputError("radius outside the model domain (0, r_max)");
    double w = r * r * m.kappa();
    double qf = 1.0 + r * m.a_v(r), qh = r * m.a_h(r);
    auto sec = [&](int i, int j) {
        int bi = block_of(m, i), bj = block_of(m, j);
        if (bi > bj) std::swap(bi, bj);
        if (bi == 0 && bj == 1) return -qf * qh;
        return w;
    };
    return diagonal_operator(m.n, sec);
}

// ---- finite-difference oracle ----

Mat ChartMetric::metric(const Vec& x) const {
    if (x.size() != dim) throw InputError("chart point has wrong dimension");
    Mat m = g(x);
    if (m.rows() != dim || m.cols() != dim) throw InputError("chart metric has wrong shape");
    double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw InputError("chart metric is not symmetric");
    Eigen::LLT<Mat> llt(m);
    if (llt.info() != Eigen::Success) throw InputError("chart metric is not positive definite");
    return m;
}

std::vector<Mat> christoffel_fd(const ChartMetric& c, const Vec& x, double h) {
    int d = c.dim;
    std::vector<Mat> dg(d);
    for (int k = 0; k < d; ++k) {
        Vec xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        dg[k] = (c.metric(xp) - c.metric(xm)) / (2.0 * h);
    }
    Mat ginv = c.metric(x).inverse();
    std::vector<Mat> gamma(d, Mat::Zero(d, d));
    for (int l = 0; l < d; ++l)
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                double s = 0.0;
                for (int m = 0; m < d; ++m) s += ginv(l, m) * (dg[i](m, j) + dg[j](m, i) - dg[m](i, j));
                gamma[l](i, j) = gamma[l](j, i) = 0.5 * s;
            }
    return gamma;
}

namespace {

Riemann4 coords_at_step(const ChartMetric& c, const Vec& x, double h) {
    int d = c.dim;
    auto gamma = christoffel_fd(c, x, h);
    // dgamma[k][l](i,j) = d_k Gamma^l_{ij}
    std::vector<std::vector<Mat>> dgamma(d);
    for (int k = 0; k < d; ++k) {
        Vec xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        auto gp = christoffel_fd(c, xp, h), gm = christoffel_fd(c, xm, h);
        dgamma[k].resize(d);
        for (int l = 0; l < d; ++l) dgamma[k][l] = (gp[l] - gm[l]) / (2.0 * h);
    }
    Mat g = c.metric(x);
    Riemann4 up(d), low(d);
    for (int l = 0; l < d; ++l)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k) {
                    double v = dgamma[i][l](j, k) - dgamma[j][l](i, k);
                    for (int m = 0; m < d; ++m) v += gamma[l](i, m) * gamma[m](j, k) - gamma[l](j, m) * gamma[m](i, k);
                    up(i, j, k, l) = v;  // R^l_{ijk}
                }
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) {
                    double v = 0.0;
                    for (int m = 0; m < d; ++m) v += g(l, m) * up(i, j, k, m);
                    low(i, j, k, l) = v;
                }
    return low;
}

}  // namespace

Riemann4 chart_curvature_coords(const ChartMetric& c, const Vec& x, const FdOptions& opt) {
    double h = c.h_fd;
    if (!(h > 0.0)) throw InputError("finite-difference step must be positive");
    if (c.lo.size() == c.dim && c.hi.size() == c.dim)
        for (int i = 0; i < c.dim; ++i)
            if (x(i) - 2 * h < c.lo(i) || x(i) + 2 * h > c.hi(i)) throw InputError("point too close to the chart boundary");
    Riemann4 coarse = coords_at_step(c, x, h);
    if (!opt.richardson) return coarse;
    Riemann4 fine = coords_at_step(c, x, 0.5 * h);
    return (4.0 / 3.0) * fine - (1.0 / 3.0) * coarse;
}

Mat gram_schmidt_frame(const Mat& g) {
    int d = static_cast<int>(g.rows());
    Mat e = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        Vec v = Vec::Unit(d, i);
        for (int j = 0; j < i; ++j) v -= (e.col(j).dot(g * v)) * e.col(j);
        double nv = std::sqrt(v.dot(g * v));
        if (!(nv > 0.0)) throw InputError("degenerate metric in Gram-Schmidt");
        e.col(i) = v / nv;
    }
    return e;
}

Riemann4 transform_tensor(const Riemann4& t, const Mat& e) {
    int d = t.n(), m = static_cast<int>(e.cols());
    if (e.rows() != d) throw InputError("transform_tensor: dimension mismatch");
    // Contract one slot at a time; buffers are indexed [a][b][c][d] with mixed extents.
    std::vector<double> cur(static_cast<size_t>(d) * d * d * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) cur[((i * d + j) * d + k) * d + l] = t(i, j, k, l);
    int ext[4] = {d, d, d, d};
    for (int slot = 0; slot < 4; ++slot) {
        int next_ext[4] = {ext[0], ext[1], ext[2], ext[3]};
        next_ext[slot] = m;
        std::vector<double> nxt(static_cast<size_t>(next_ext[0]) * next_ext[1] * next_ext[2] * next_ext[3], 0.0);
        int idx[4];
        for (idx[0] = 0; idx[0] < next_ext[0]; ++idx[0])
            for (idx[1] = 0; idx[1] < next_ext[1]; ++idx[1])
                for (idx[2] = 0; idx[2] < next_ext[2]; ++idx[2])
                    for (idx[3] = 0; idx[3] < next_ext[3]; ++idx[3]) {
                        int src[4] = {idx[0], idx[1], idx[2], idx[3]};
                        double s = 0.0;
                        for (int q = 0; q < d; ++q) {
                            src[slot] = q;
                            s += e(q, idx[slot]) * cur[((src[0] * ext[1] + src[1]) * ext[2] + src[2]) * ext[3] + src[3]];
                        }
                        nxt[((idx[0] * next_ext[1] + idx[1]) * next_ext[2] + idx[2]) * next_ext[3] + idx[3]] = s;
                    }
        cur.swap(nxt);
        for (int s = 0; s < 4; ++s) ext[s] = next_ext[s];
    }
    Riemann4 out(m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k)
                for (int l = 0; l < m; ++l) out(i, j, k, l) = cur[((i * m + j) * m + k) * m + l];
    return out;
}

Riemann4 chart_curvature_fd(const ChartMetric& c, const Vec& x, const FdOptions& opt) {
    Riemann4 coords = chart_curvature_coords(c, x, opt);
    return transform_tensor(coords, gram_schmidt_frame(c.metric(x))).symmetrized();
}

ModelChart warped_chart(const RotSymModel& m, double r, double h_fd) {
    m.check_radius(r);
    return doubly_warped_chart(
        m.n, m.k, [m](double rho) { return m.f(rho); }, [m](double rho) { return m.h(rho); }, r, 1.0, h_fd);
}

ModelChart doubly_warped_chart(int n, int k, std::function<double(double)> F, std::function<double(double)> H,
                               double rho0, double z_scale, double h_fd) {
    int q = n - k;
    if (q < 1 || k < 0 || n > kMaxDim) throw InputError("doubly warped chart: bad dimensions");
    if (!(rho0 > 0.0) || !(z_scale > 0.0)) throw InputError("doubly warped chart: rho0 and z_scale must be positive");
    auto metric = [n, k, q, F, H, z_scale](const Vec& y) {
        Vec xs(q);
        for (int i = 0; i < q - 1; ++i) xs(i) = y(i);
        xs(q - 1) = y(n - 1);
        double rho = xs.norm();
        Vec u = xs / rho;
        double w = q > 1 ? F(rho) / rho : 0.0;
        Mat gx = u * u.transpose() + w * w * (Mat::Identity(q, q) - u * u.transpose());
        // Map normal-coordinate slot i to chart slot.
        auto slot = [&](int i) { return i < q - 1 ? i : n - 1; };
        Mat g = Mat::Zero(n, n);
        for (int i = 0; i < q; ++i)
            for (int j = 0; j < q; ++j) g(slot(i), slot(j)) = gx(i, j);
        if (k > 0) {
            double z2 = y.segment(q - 1, k).squaredNorm() * z_scale * z_scale;
            double hz = H(rho) * 2.0 / (1.0 + z2) * z_scale;
            for (int i = 0; i < k; ++i) g(q - 1 + i, q - 1 + i) = hz * hz;
        }
        return g;
    };
    ModelChart out;
    out.base = Vec::Zero(n);
    out.base(n - 1) = rho0;
    out.chart.dim = n;
    out.chart.g = metric;
    out.chart.h_fd = h_fd;
    out.chart.lo = out.base - Vec::Constant(n, 0.5 * rho0);
    out.chart.hi = out.base + Vec::Constant(n, 0.5 * rho0);
    return out;
}

Riemann4 doubly_warped_curvature(int n, int k, double F, double dF, double ddF, double H, double dH, double ddH) {
    int q = n - k - 1;
    if (q < 0 || k < 0 || n < 2 || n > kMaxDim) throw InputError("doubly warped curvature: bad dimensions");
    double vv = (1.0 - dF * dF) / (F * F), vr = -ddF / F;
    double hh = k > 0 ? (1.0 - dH * dH) / (H * H) : 0.0, hr = k > 0 ? -ddH / H : 0.0;
    double vh = k > 0 ? -dF * dH / (F * H) : 0.0;
    auto block = [&](int i) { return i < q ? 0 : (i < n - 1 ? 1 : 2); };
    auto sec = [&](int i, int j) {
        int bi = block(i), bj = block(j);
        if (bi > bj) std::swap(bi, bj);
        if (bi == 0 && bj == 0) return vv;
        if (bi == 0 && bj == 1) return vh;
        if (bi == 0 && bj == 2) return vr;
        if (bi == 1 && bj == 1) return hh;
        return hr;
    };
    return to_riemann(diagonal_operator(n, sec));
}

// ---- tubes ----

TubeSff tube_sff(const RotSymModel& m, double r) {
    m.check_radius(r);
    int d = m.n - 1;
    Vec s(d), a(d);
    for (int i = 0; i < d; ++i) {
        if (i < m.v_dim()) {
            a(i) = m.a_v(r);
            s(i) = 1.0 / r + a(i);
        } else {
            a(i) = s(i) = m.a_h(r);
        }
    }
    return {SymmetricForm::diagonal(s), SymmetricForm::diagonal(a)};
}

namespace {

SymmetricForm pad_form(int n, const Mat& m) {
    Mat s = Mat::Zero(n, n);
    s.topLeftCorner(m.rows(), m.cols()) = m;
    return SymmetricForm(s);
}

CurvatureOperator gauss_tube(int n, const Mat& ambient, const SymmetricForm& sff) {
    SymmetricForm full = pad_form(n, sff.mat());
    return CurvatureOperator::unchecked(n, drop_last_index(n, ambient) + kulkarni_wedge(full, full).mat());
}

}  // namespace

TubeReport tube_curvature(const RotSymModel& m, double r) {
    auto ts = tube_sff(m, r);
    CurvatureOperator ambient = from_riemann(warped_curvature(m, r));
    CurvatureOperator RT = gauss_tube(m.n, ambient.mat(), ts.sff);
    // sff = pi_V / r + A, and kw(pi_V, pi_V) / r^2 is the model; expand so the 1/r^2 terms never cancel.
    SymmetricForm A = pad_form(m.n, ts.A.mat());
    Mat pv = Mat::Zero(m.n, m.n);
    pv.topLeftCorner(m.v_dim(), m.v_dim()).setIdentity();
    SymmetricForm P(pv / r);
    CurvatureOperator E = CurvatureOperator::unchecked(
        m.n, drop_last_index(m.n, ambient.mat()) + 2.0 * kulkarni_wedge(P, A).mat() + kulkarni_wedge(A, A).mat());
    return {r, RT, E, r * operator_norm(E)};
}

CurvatureOperator tube_operator_scaled(const RotSymModel& m, double log_r) {
    double r = std::exp(log_r);
    CurvatureOperator ambient = warped_operator_scaled(m, log_r);
    int d = m.n - 1;
    Vec s(d);
    for (int i = 0; i < d; ++i) s(i) = i < m.v_dim() ? 1.0 + r * m.a_v(r) : r * m.a_h(r);
    return gauss_tube(m.n, ambient.mat(), SymmetricForm::diagonal(s));
}

double tube_constant(const RotSymModel& m, const std::vector<double>& grid) {
    double L = 0.0;
    for (double r : grid) L = std::max(L, tube_curvature(m, r).L_fit);
    return L;
}

double tube_admissible_radius(const RotSymModel& m, const Condition& c, std::vector<double> grid) {
    std::sort(grid.begin(), grid.end());
    double r_star = 0.0;
    for (double r : grid) {
        if (!(margin(c, tube_operator_scaled(m, std::log(r))) > 0.0)) break;
        r_star = r;
    }
    return r_star;
}

CurvatureOperator pullback(const Frame& b, const Riemann4& t) {
    if (b.ambient() != t.n()) throw InputError("pullback: frame and tensor dimensions differ");
    if (b.size() < 2) throw InputError("pullback needs at least two frame vectors");
    return from_riemann(transform_tensor(t, b.cols()));
}

}  // namespace curvcone
