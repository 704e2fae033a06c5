#include "widelimit/psd_linalg.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "widelimit/errors.hpp"

namespace widelimit {

SymMatrix::SymMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() < 1) throw ShapeMismatch("symmetric matrix must be square and nonempty");
    for (Eigen::Index i = 0; i < m_.rows(); ++i)
        for (Eigen::Index j = 0; j < i; ++j)
            if (m_(i, j) != m_(j, i)) throw ShapeMismatch("matrix is not exactly symmetric");
}

SymMatrix SymMatrix::symmetrized(const Matrix& m) {
    if (m.rows() != m.cols()) throw ShapeMismatch("cannot symmetrize a non-square matrix");
    Matrix s = 0.5 * (m + m.transpose());
    return SymMatrix(std::move(s));
}

PsdMatrix PsdMatrix::from(const SymMatrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(a.matrix());
    PsdMatrix out;
    out.m_ = a;
    out.floor_ = es.eigenvalues()(0);
    double scale = a.matrix().norm();
    if (out.floor_ < -kPsdTol * scale)
        throw NonPsdInput("smallest eigenvalue " + std::to_string(out.floor_) + " is below the PSD tolerance");
    out.evals_ = es.eigenvalues().cwiseMax(0.0);
    out.evecs_ = es.eigenvectors();
    return out;
}

PsdMatrix PsdMatrix::project(const Matrix& a) {
    SymMatrix s = SymMatrix::symmetrized(a);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s.matrix());
    if (es.eigenvalues()(0) >= 0.0) return from(s);
    Vector ev = es.eigenvalues().cwiseMax(0.0);
    Matrix rebuilt = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    return from(SymMatrix::symmetrized(rebuilt));
}

std::size_t IndexShape::size() const {
    std::size_t p = 1;
    for (auto f : factors) p *= f;
    return p;
}

PsdMatrix sym_sqrt(const PsdMatrix& a) {
    Vector r = a.eigenvalues().cwiseSqrt();
    Matrix s = a.eigenvectors() * r.asDiagonal() * a.eigenvectors().transpose();
    return PsdMatrix::from(SymMatrix::symmetrized(s));
}

Matrix sym_sqrt(const Matrix& a) {
    return sym_sqrt(PsdMatrix::from(a)).matrix();
}

SpectralFloors spectral_floors(const PsdMatrix& a, double tol) {
    double cut = tol * a.matrix().norm();
    double lmin = a.spectral_floor();
    if (std::abs(lmin) <= cut) lmin = 0.0;
    double lpos = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < a.eigenvalues().size(); ++i) {
        double v = a.eigenvalues()(i);
        if (v > cut) {
            lpos = v;
            break;
        }
    }
    return {lmin, lpos};
}

Matrix partial_trace(const Matrix& b, std::size_t s, std::size_t t) {
    auto n = static_cast<Eigen::Index>(s * t);
    if (b.rows() != n || b.cols() != n) throw ShapeMismatch("partial_trace: shape does not match");
    auto T = static_cast<Eigen::Index>(t);
    Matrix out = Matrix::Zero(T, T);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(s); ++k) out += b.block(k * T, k * T, T, T);
    return out;
}

SymMatrix partial_trace(const SymMatrix& b, const IndexShape& shape) {
    if (shape.factors.size() != 2) throw ShapeMismatch("partial_trace expects a shape {|S|, |T|}");
    return SymMatrix::symmetrized(partial_trace(b.matrix(), shape.factors[0], shape.factors[1]));
}

Matrix partial_trace_pair(const Matrix& a, std::size_t s, std::size_t t) {
    std::size_t st = s * t;
    auto n = static_cast<Eigen::Index>(st * st);
    if (a.rows() != n || a.cols() != n) throw ShapeMismatch("partial_trace_pair: shape does not match");
    // Index (s1,t1,s2,t2) -> ((s1*t + t1)*s + s2)*t + t2.
    auto idx = [&](std::size_t s1, std::size_t t1, std::size_t s2, std::size_t t2) {
        return static_cast<Eigen::Index>(((s1 * t + t1) * s + s2) * t + t2);
    };
    auto tt = static_cast<Eigen::Index>(t * t);
    Matrix out = Matrix::Zero(tt, tt);
    for (std::size_t t1 = 0; t1 < t; ++t1)
        for (std::size_t t2 = 0; t2 < t; ++t2)
            for (std::size_t u1 = 0; u1 < t; ++u1)
                for (std::size_t u2 = 0; u2 < t; ++u2) {
                    double acc = 0.0;
                    for (std::size_t p = 0; p < s; ++p)
                        for (std::size_t q = 0; q < s; ++q) acc += a(idx(p, t1, p, t2), idx(q, u1, q, u2));
                    out(static_cast<Eigen::Index>(t1 * t + t2), static_cast<Eigen::Index>(u1 * t + u2)) = acc;
                }
    return out;
}

PsdMatrix partial_trace_pair(const PsdMatrix& a, std::size_t s, std::size_t t) {
    return PsdMatrix::project(partial_trace_pair(a.matrix(), s, t));
}

bool dominated_by(const PsdMatrix& b, const PsdMatrix& a, double tol) {
    if (a.dim() != b.dim()) throw ShapeMismatch("dominated_by: dimension mismatch");
    double acut = tol * a.matrix().norm();
    double bcut = tol * b.matrix().norm();
    for (Eigen::Index i = 0; i < a.dim(); ++i) {
        if (a.eigenvalues()(i) > acut) break;
        if ((b.matrix() * a.eigenvectors().col(i)).norm() > bcut) return false;
    }
    return true;
}

Matrix abs_square(const Matrix& a) {
    return a * a.transpose();
}

}  // namespace widelimit
