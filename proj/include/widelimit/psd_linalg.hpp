#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <utility>
#include <vector>

namespace widelimit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kPsdTol = 1e-10;

// Exactly symmetric square matrix. Construction rejects any asymmetry; use
// symmetrized() to canonicalize a matrix that is symmetric only up to rounding.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(Matrix m);

    static SymMatrix symmetrized(const Matrix& m);
    static SymMatrix zero(Eigen::Index dim) { return SymMatrix(Matrix::Zero(dim, dim)); }
    static SymMatrix identity(Eigen::Index dim) { return SymMatrix(Matrix::Identity(dim, dim)); }

    Eigen::Index dim() const { return m_.rows(); }
    const Matrix& matrix() const { return m_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

private:
    Matrix m_;
};

// Numerically PSD matrix with its eigendecomposition cached. Eigenvalues in
// [-kPsdTol*|A|, 0) are clamped to zero in the cache; the matrix itself is kept.
class PsdMatrix {
public:
    PsdMatrix() = default;

    // Throws NonPsdInput when the smallest eigenvalue is below -kPsdTol*|A|_F.
    static PsdMatrix from(const SymMatrix& a);
    static PsdMatrix from(const Matrix& a) { return from(SymMatrix::symmetrized(a)); }
    // Clamps every negative eigenvalue to zero and rebuilds the matrix.
    static PsdMatrix project(const Matrix& a);

    Eigen::Index dim() const { return m_.dim(); }
    const Matrix& matrix() const { return m_.matrix(); }
    const SymMatrix& sym() const { return m_; }
    const Vector& eigenvalues() const { return evals_; }
    const Matrix& eigenvectors() const { return evecs_; }
    // Smallest computed eigenvalue before clamping.
    double spectral_floor() const { return floor_; }

private:
    SymMatrix m_;
    Vector evals_;
    Matrix evecs_;
    double floor_ = 0.0;
};

// Row-major product index: the last factor varies fastest.
struct IndexShape {
    std::vector<std::size_t> factors;

    std::size_t size() const;
};

PsdMatrix sym_sqrt(const PsdMatrix& a);
Matrix sym_sqrt(const Matrix& a);

struct SpectralFloors {
    double lambda_min;
    // +infinity when every eigenvalue is (numerically) zero.
    double lambda_min_positive;
};

SpectralFloors spectral_floors(const PsdMatrix& a, double tol = kPsdTol);

// tr_S(B) where B lives on (S x T) x (S x T) and shape = {|S|, |T|}.
SymMatrix partial_trace(const SymMatrix& b, const IndexShape& shape);
Matrix partial_trace(const Matrix& b, std::size_t s, std::size_t t);

// A lives on (S x T x S x T) x (S x T x S x T). Returns the matrix on
// (T x T) x (T x T) given by summing the diagonal S pairs on both sides.
Matrix partial_trace_pair(const Matrix& a, std::size_t s, std::size_t t);
PsdMatrix partial_trace_pair(const PsdMatrix& a, std::size_t s, std::size_t t);

// Av = 0 implies Bv = 0, up to tol relative to the norms.
bool dominated_by(const PsdMatrix& b, const PsdMatrix& a, double tol = kPsdTol);

// |A|^2 = A A^T, where |A| = sqrt(A A^T) for a rectangular A viewed as a map.
Matrix abs_square(const Matrix& a);

}  // namespace widelimit
