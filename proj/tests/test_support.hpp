#pragma once

#include <cmath>
#include <random>

#include "widelimit/psd_linalg.hpp"

namespace widelimit::testing {

// Test oracles draw from the standard library generator so they never share
// a code path with the library's Philox streams.
inline Matrix gaussian_matrix(std::mt19937_64& gen, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> normal;
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(gen);
    return m;
}

// G G^T / cols, rank min(dim, rank).
inline Matrix random_psd(std::mt19937_64& gen, Eigen::Index dim, Eigen::Index rank = -1) {
    if (rank < 0) rank = dim;
    Matrix g = gaussian_matrix(gen, dim, rank);
    return g * g.transpose() / static_cast<double>(std::max<Eigen::Index>(rank, 1));
}

inline Matrix random_symmetric(std::mt19937_64& gen, Eigen::Index dim) {
    Matrix g = gaussian_matrix(gen, dim, dim);
    return 0.5 * (g + g.transpose());
}

// Samples with covariance c via a Cholesky-free eigen factor.
inline Matrix correlated_samples(std::mt19937_64& gen, const Matrix& c, Eigen::Index count) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(c);
    Matrix root = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    return gaussian_matrix(gen, count, c.rows()) * root.transpose();
}

}  // namespace widelimit::testing
