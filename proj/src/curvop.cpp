#include "curvcone/curvop.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace curvcone {

namespace {

void check_dim(int n) {
    if (n < 2 || n > kMaxDim) throw InputError("dimension out of range: " + std::to_string(n));
}

double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

// Component R(i,j,k,l) straight from the operator matrix.
inline double comp(const Mat& m, const BivectorBasis& b, int i, int j, int k, int l) {
    if (i == j || k == l) return 0.0;
    double s = 1.0;
    if (i > j) { std::swap(i, j); s = -s; }
    if (k > l) { std::swap(k, l); s = -s; }
    return -s * m(b.index(i, j), b.index(k, l));
}

Riemann4 tensor_of(int n, const Mat& m) {
    BivectorBasis b(n);
    Riemann4 t(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) t(i, j, k, l) = comp(m, b, i, j, k, l);
    return t;
}

Mat matrix_of(const Riemann4& t) {
    int n = t.n();
    BivectorBasis b(n);
    Mat m(b.size(), b.size());
    for (int p = 0; p < b.size(); ++p) {
        auto [i, j] = b.pair(p);
        for (int q = 0; q < b.size(); ++q) {
            auto [k, l] = b.pair(q);
            m(p, q) = t(i, j, l, k);
        }
    }
    return m;
}

}  // namespace

BivectorBasis::BivectorBasis(int n) : n_(n), lookup_(static_cast<size_t>(n * n), -1) {
    check_dim(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            lookup_[i * n + j] = static_cast<int>(pairs_.size());
            pairs_.emplace_back(i, j);
        }
}

int BivectorBasis::index(int i, int j) const {
    if (i < 0 || j >= n_ || i >= j) throw InputError("bivector index requires 0 <= i < j < n");
    return lookup_[i * n_ + j];
}

std::pair<int, int> BivectorBasis::pair(int k) const {
    if (k < 0 || k >= size()) throw InputError("bivector position out of range");
    return pairs_[k];
}

int biv_count(int n) { return n * (n - 1) / 2; }

int biv_index(int i, int j, int n) {
    if (n < 2 || n > kMaxDim) throw InputError("dimension out of range");
    if (i < 0 || j >= n || i >= j) throw InputError("bivector index requires 0 <= i < j < n");
    // rows before i contribute (n-1) + (n-2) + ... + (n-i)
    return i * n - i * (i + 1) / 2 + (j - i - 1);
}

std::pair<int, int> biv_pair(int k, int n) {
    if (k < 0 || k >= biv_count(n)) throw InputError("bivector position out of range");
    int i = 0;
    while (k >= n - 1 - i) {
        k -= n - 1 - i;
        ++i;
    }
    return {i, i + 1 + k};
}

// ---- Riemann4 ----

Riemann4::Riemann4(int n) : n_(n), c_(static_cast<size_t>(n) * n * n * n, 0.0) {}

double Riemann4::symmetry_residual() const {
    double r = 0.0;
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
            for (int k = 0; k < n_; ++k)
                for (int l = 0; l < n_; ++l) {
                    double v = (*this)(i, j, k, l);
                    r = std::max({r, std::abs(v + (*this)(j, i, k, l)), std::abs(v + (*this)(i, j, l, k)),
                                  std::abs(v - (*this)(k, l, i, j))});
                }
    return r;
}

double Riemann4::bianchi_residual() const {
    double r = 0.0;
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
            for (int k = 0; k < n_; ++k)
                for (int l = 0; l < n_; ++l)
                    r = std::max(r, std::abs((*this)(i, j, k, l) + (*this)(j, k, i, l) + (*this)(k, i, j, l)));
    return r;
}

double Riemann4::max_abs_diff(const Riemann4& o) const {
    if (o.n_ != n_) throw InputError("tensor dimension mismatch");
    double r = 0.0;
    for (size_t q = 0; q < c_.size(); ++q) r = std::max(r, std::abs(c_[q] - o.c_[q]));
    return r;
}

Riemann4 Riemann4::symmetrized() const {
    Riemann4 t(n_);
    const auto& a = *this;
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
            for (int k = 0; k < n_; ++k)
                for (int l = 0; l < n_; ++l)
                    t(i, j, k, l) = (a(i, j, k, l) - a(j, i, k, l) - a(i, j, l, k) + a(j, i, l, k) + a(k, l, i, j) -
                                     a(l, k, i, j) - a(k, l, j, i) + a(l, k, j, i)) /
                                    8.0;
    return t;
}

double Riemann4::eval(const Vec& x, const Vec& y, const Vec& z, const Vec& w) const {
    double s = 0.0;
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) {
            double xy = x(i) * y(j);
            if (xy == 0.0) continue;
            for (int k = 0; k < n_; ++k)
                for (int l = 0; l < n_; ++l) s += xy * z(k) * w(l) * (*this)(i, j, k, l);
        }
    return s;
}

Riemann4& Riemann4::operator+=(const Riemann4& o) {
    if (o.n_ != n_) throw InputError("tensor dimension mismatch");
    for (size_t q = 0; q < c_.size(); ++q) c_[q] += o.c_[q];
    return *this;
}

Riemann4& Riemann4::operator*=(double s) {
    for (auto& v : c_) v *= s;
    return *this;
}

Riemann4 operator+(Riemann4 a, const Riemann4& b) { return a += b; }
Riemann4 operator-(Riemann4 a, const Riemann4& b) { return a += (-1.0) * b; }
Riemann4 operator*(double s, Riemann4 a) { return a *= s; }

// ---- forms and frames ----

SymmetricForm::SymmetricForm(Mat m, double tol) : mat_(std::move(m)) {
    if (mat_.rows() != mat_.cols()) throw InputError("symmetric form must be square");
    if (max_abs(mat_ - mat_.transpose()) > tol * std::max(1.0, max_abs(mat_)))
        throw InvariantError("symmetric form is not symmetric");
}

Frame::Frame(Mat cols, double tol) : cols_(std::move(cols)) {
    if (cols_.cols() > cols_.rows()) throw InputError("frame has more vectors than the ambient dimension");
    Mat gram = cols_.transpose() * cols_;
    if (max_abs(gram - Mat::Identity(gram.rows(), gram.cols())) > tol)
        throw InvariantError("frame is not orthonormal");
}

// ---- operator ----

double bianchi_residual(int n, const Mat& m) {
    BivectorBasis b(n);
    double r = 0.0;
    // Only the totally antisymmetric part can survive, so distinct indices suffice.
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            for (int k = j + 1; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    r = std::max(r, std::abs(comp(m, b, i, j, k, l) + comp(m, b, j, k, i, l) + comp(m, b, k, i, j, l)));
    return r;
}

CurvatureOperator::CurvatureOperator(int n, Mat mat) : n_(n), mat_(std::move(mat)) {
    check_dim(n);
    int N = biv_count(n);
    if (mat_.rows() != N || mat_.cols() != N) throw InputError("operator matrix must be N x N");
    double scale = std::max(1.0, max_abs(mat_));
    if (max_abs(mat_ - mat_.transpose()) > 1e-12 * scale) throw InvariantError("operator matrix is not symmetric");
    if (bianchi_residual(n, mat_) > 1e-10 * scale) throw InvariantError("operator violates the Bianchi identity");
}

CurvatureOperator CurvatureOperator::unchecked(int n, Mat mat) {
    CurvatureOperator r;
    r.n_ = n;
    r.mat_ = std::move(mat);
    return r;
}

CurvatureOperator CurvatureOperator::zero(int n) {
    check_dim(n);
    return unchecked(n, Mat::Zero(biv_count(n), biv_count(n)));
}

CurvatureOperator CurvatureOperator::identity(int n) {
    check_dim(n);
    return unchecked(n, Mat::Identity(biv_count(n), biv_count(n)));
}

double CurvatureOperator::eval(const Vec& x, const Vec& y, const Vec& z, const Vec& w) const {
    return wedge(x, y).dot(mat_ * wedge(w, z));
}

CurvatureOperator& CurvatureOperator::operator+=(const CurvatureOperator& o) {
    if (o.n_ != n_) throw InputError("operator dimension mismatch");
    mat_ += o.mat_;
    return *this;
}

CurvatureOperator& CurvatureOperator::operator-=(const CurvatureOperator& o) {
    if (o.n_ != n_) throw InputError("operator dimension mismatch");
    mat_ -= o.mat_;
    return *this;
}

CurvatureOperator& CurvatureOperator::operator*=(double s) {
    mat_ *= s;
    return *this;
}

CurvatureOperator operator+(CurvatureOperator a, const CurvatureOperator& b) { return a += b; }
CurvatureOperator operator-(CurvatureOperator a, const CurvatureOperator& b) { return a -= b; }
CurvatureOperator operator*(double s, CurvatureOperator a) { return a *= s; }

Vec wedge(const Vec& x, const Vec& y) {
    int n = static_cast<int>(x.size());
    Vec w(biv_count(n));
    int p = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) w(p++) = x(i) * y(j) - x(j) * y(i);
    return w;
}

Mat lambda2(const Mat& a) {
    int m = static_cast<int>(a.rows()), n = static_cast<int>(a.cols());
    Mat l(biv_count(m), biv_count(n));
    int q = 0;
    for (int k = 0; k < n; ++k)
        for (int l2 = k + 1; l2 < n; ++l2) {
            int p = 0;
            for (int i = 0; i < m; ++i)
                for (int j = i + 1; j < m; ++j) l(p++, q) = a(i, k) * a(j, l2) - a(i, l2) * a(j, k);
            ++q;
        }
    return l;
}

Riemann4 to_riemann(const CurvatureOperator& r) { return tensor_of(r.n(), r.mat()); }

CurvatureOperator from_riemann(const Riemann4& t, double tol) {
    double scale = 1.0;
    for (int i = 0; i < t.n(); ++i)
        for (int j = 0; j < t.n(); ++j) scale = std::max(scale, std::abs(t(i, j, j, i)));
    if (t.symmetry_residual() > tol * scale) throw InvariantError("tensor lacks curvature symmetries");
    return CurvatureOperator(t.n(), matrix_of(t));
}

CurvatureOperator bianchi_project(int n, const Mat& m) {
    check_dim(n);
    int N = biv_count(n);
    if (m.rows() != N || m.cols() != N) throw InputError("matrix must be N x N");
    if (max_abs(m - m.transpose()) > 1e-12 * std::max(1.0, max_abs(m)))
        throw InputError("bianchi_project expects a symmetric matrix");
    Mat sym = 0.5 * (m + m.transpose());
    if (n < 4) return CurvatureOperator::unchecked(n, sym);
    Riemann4 t = tensor_of(n, sym);
    Riemann4 out(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l)
                    out(i, j, k, l) = t(i, j, k, l) - (t(i, j, k, l) + t(j, k, i, l) + t(k, i, j, l)) / 3.0;
    Mat res = matrix_of(out);
    return CurvatureOperator::unchecked(n, 0.5 * (res + res.transpose()));
}

CurvatureOperator kulkarni_wedge(const SymmetricForm& a, const SymmetricForm& b) {
    if (a.n() != b.n()) throw InputError("kulkarni_wedge: dimension mismatch");
    int n = a.n();
    BivectorBasis bb(n);
    Mat m(bb.size(), bb.size());
    // mat[(x,y),(w,z)] = (A^B)(x,y,z,w)
    for (int p = 0; p < bb.size(); ++p) {
        auto [x, y] = bb.pair(p);
        for (int q = 0; q < bb.size(); ++q) {
            auto [w, z] = bb.pair(q);
            m(p, q) = 0.5 * (a(x, w) * b(y, z) + a(y, z) * b(x, w) - a(x, z) * b(y, w) - a(y, w) * b(x, z));
        }
    }
    return CurvatureOperator::unchecked(n, 0.5 * (m + m.transpose()));
}

CurvatureOperator act(const Mat& a, const CurvatureOperator& r) {
    if (a.rows() != r.n() || a.cols() != r.n()) throw InputError("act: dimension mismatch");
    if (max_abs(a.transpose() * a - Mat::Identity(r.n(), r.n())) > 1e-10) throw InputError("act: matrix is not orthogonal");
    Mat l = lambda2(a);
    Mat m = l * r.mat() * l.transpose();
    return CurvatureOperator::unchecked(r.n(), 0.5 * (m + m.transpose()));
}

CurvatureOperator model_operator(int d, double radius, int n) {
    check_dim(n);
    if (d < 2 || d > n) throw InputError("model_operator requires 2 <= d <= n");
    if (!(radius > 0.0)) throw InputError("model_operator requires r > 0");
    BivectorBasis b(n);
    Mat m = Mat::Zero(b.size(), b.size());
    double v = 1.0 / (radius * radius);
    for (int p = 0; p < b.size(); ++p) {
        auto [i, j] = b.pair(p);
        if (j < d) m(p, p) = v;
    }
    return CurvatureOperator::unchecked(n, m);
}

CurvatureOperator embed(const CurvatureOperator& r, int n) {
    if (r.n() > n) throw InputError("embed: target dimension too small");
    Mat e = Mat::Zero(n, r.n());
    e.topRows(r.n()).setIdentity();
    Mat l = lambda2(e);
    return CurvatureOperator::unchecked(n, l * r.mat() * l.transpose());
}

double scal(const CurvatureOperator& r) { return r.mat().trace(); }

Mat ricci(const CurvatureOperator& r) {
    int n = r.n();
    BivectorBasis b(n);
    Mat ric = Mat::Zero(n, n);
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            for (int k = 0; k < n; ++k) ric(x, y) += comp(r.mat(), b, x, k, k, y);
    return ric;
}

double sectional(const CurvatureOperator& r, const Vec& x, const Vec& y) {
    Vec w = wedge(x, y);
    double a = w.squaredNorm();
    double scale = x.squaredNorm() * y.squaredNorm();
    if (!(a > 1e-24 * scale) || scale == 0.0) throw InputError("sectional: degenerate plane");
    return w.dot(r.mat() * w) / a;
}

Vec eigenvalues(const CurvatureOperator& r) {
    Eigen::SelfAdjointEigenSolver<Mat> es(r.mat(), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

double operator_norm(const CurvatureOperator& r) { return eigenvalues(r).cwiseAbs().maxCoeff(); }

double frobenius_norm(const CurvatureOperator& r) { return r.mat().norm(); }

double complex_sectional(const CurvatureOperator& r, const Frame& f) {
    if (f.size() != 4 || f.ambient() != r.n()) throw InputError("complex_sectional needs 4 orthonormal vectors in R^n");
    Vec f1 = f.col(0), f2 = f.col(1), f3 = f.col(2), f4 = f.col(3);
    auto sec = [&](const Vec& a, const Vec& b) {
        Vec w = wedge(a, b);
        return w.dot(r.mat() * w);
    };
    return sec(f1, f3) + sec(f1, f4) + sec(f2, f3) + sec(f2, f4) - 2.0 * r.eval(f1, f2, f3, f4);
}

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Mat haar_orthogonal(int n, std::uint64_t seed) {
    if (n < 1) throw InputError("haar_orthogonal: n must be positive");
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat g(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) g(i, j) = normal(gen);
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ();
    Mat rr = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j)
        if (rr(j, j) < 0.0) q.col(j) *= -1.0;
    return q;
}

CurvatureOperator random_operator(int n, std::uint64_t seed) {
    int N = biv_count(n);
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat m(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = i; j < N; ++j) m(i, j) = m(j, i) = normal(gen);
    return bianchi_project(n, m);
}

}  // namespace curvcone
