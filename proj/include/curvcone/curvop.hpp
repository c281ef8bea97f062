#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace curvcone {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvariantError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr int kMaxDim = 12;

// Lexicographic pairs (i,j), i<j, 0-based.
class BivectorBasis {
public:
    explicit BivectorBasis(int n);

    int n() const { return n_; }
    int size() const { return static_cast<int>(pairs_.size()); }
    int index(int i, int j) const;
    std::pair<int, int> pair(int k) const;

private:
    int n_;
    std::vector<std::pair<int, int>> pairs_;
    std::vector<int> lookup_;
};

int biv_count(int n);
int biv_index(int i, int j, int n);
std::pair<int, int> biv_pair(int k, int n);

// (4,0) tensor with R(x,y,y,x) = sec(x,y).
class Riemann4 {
public:
    Riemann4() = default;
    explicit Riemann4(int n);

    int n() const { return n_; }
    double& operator()(int i, int j, int k, int l) { return c_[((i * n_ + j) * n_ + k) * n_ + l]; }
    double operator()(int i, int j, int k, int l) const { return c_[((i * n_ + j) * n_ + k) * n_ + l]; }

    double symmetry_residual() const;
    double bianchi_residual() const;
    double max_abs_diff(const Riemann4& other) const;
    // Average over the eight index symmetries; leaves exact tensors unchanged.
    Riemann4 symmetrized() const;
    // Contraction R(x,y,z,w).
    double eval(const Vec& x, const Vec& y, const Vec& z, const Vec& w) const;

    Riemann4& operator+=(const Riemann4& o);
    Riemann4& operator*=(double s);

private:
    int n_ = 0;
    std::vector<double> c_;
};

Riemann4 operator+(Riemann4 a, const Riemann4& b);
Riemann4 operator-(Riemann4 a, const Riemann4& b);
Riemann4 operator*(double s, Riemann4 a);

class SymmetricForm {
public:
    SymmetricForm() = default;
    explicit SymmetricForm(Mat m, double tol = 1e-12);
    static SymmetricForm identity(int n) { return SymmetricForm(Mat::Identity(n, n)); }
    static SymmetricForm diagonal(const Vec& d) { return SymmetricForm(Mat(d.asDiagonal())); }

    int n() const { return static_cast<int>(mat_.rows()); }
    const Mat& mat() const { return mat_; }
    double operator()(int i, int j) const { return mat_(i, j); }

private:
    Mat mat_;
};

// Columns form an orthonormal family.
class Frame {
public:
    explicit Frame(Mat cols, double tol = 1e-10);
    static Frame standard(int n) { return Frame(Mat::Identity(n, n)); }

    int size() const { return static_cast<int>(cols_.cols()); }
    int ambient() const { return static_cast<int>(cols_.rows()); }
    const Mat& cols() const { return cols_; }
    Vec col(int a) const { return cols_.col(a); }

private:
    Mat cols_;
};

class CurvatureOperator {
public:
    CurvatureOperator() = default;
    // Validates symmetry (1e-12 relative) and the first Bianchi identity (1e-10 relative).
    CurvatureOperator(int n, Mat mat);
    static CurvatureOperator unchecked(int n, Mat mat);
    static CurvatureOperator zero(int n);
    static CurvatureOperator identity(int n);

    int n() const { return n_; }
    int dim() const { return static_cast<int>(mat_.rows()); }
    const Mat& mat() const { return mat_; }

    // R(x,y,z,w) = (x^y)^T M (w^z).
    double eval(const Vec& x, const Vec& y, const Vec& z, const Vec& w) const;

    CurvatureOperator& operator+=(const CurvatureOperator& o);
    CurvatureOperator& operator-=(const CurvatureOperator& o);
    CurvatureOperator& operator*=(double s);

private:
    int n_ = 0;
    Mat mat_;
};

CurvatureOperator operator+(CurvatureOperator a, const CurvatureOperator& b);
CurvatureOperator operator-(CurvatureOperator a, const CurvatureOperator& b);
CurvatureOperator operator*(double s, CurvatureOperator a);

// Coordinates of x^y in the bivector basis.
Vec wedge(const Vec& x, const Vec& y);
// Induced map on bivectors; columns are images of e_i^e_j.
Mat lambda2(const Mat& a);

double bianchi_residual(int n, const Mat& m);

Riemann4 to_riemann(const CurvatureOperator& r);
CurvatureOperator from_riemann(const Riemann4& t, double tol = 1e-12);
CurvatureOperator bianchi_project(int n, const Mat& m);
CurvatureOperator kulkarni_wedge(const SymmetricForm& a, const SymmetricForm& b);
CurvatureOperator act(const Mat& a, const CurvatureOperator& r);
CurvatureOperator model_operator(int d, double radius, int n);
// Zero-pads an operator on R^m to R^n (m <= n) along the first m coordinates.
CurvatureOperator embed(const CurvatureOperator& r, int n);

double scal(const CurvatureOperator& r);
Mat ricci(const CurvatureOperator& r);
double sectional(const CurvatureOperator& r, const Vec& x, const Vec& y);
double operator_norm(const CurvatureOperator& r);
double frobenius_norm(const CurvatureOperator& r);
Vec eigenvalues(const CurvatureOperator& r);
double complex_sectional(const CurvatureOperator& r, const Frame& f);

Mat haar_orthogonal(int n, std::uint64_t seed);
// Deterministic per-index seed for streams of samples.
std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index);

// Random symmetric matrix projected to a curvature operator (Gaussian entries).
CurvatureOperator random_operator(int n, std::uint64_t seed);

}  // namespace curvcone
