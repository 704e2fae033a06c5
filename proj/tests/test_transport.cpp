#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "test_support.hpp"
#include "widelimit/errors.hpp"
#include "widelimit/nngp.hpp"
#include "widelimit/transport.hpp"

namespace widelimit {
namespace {

using testing::gaussian_matrix;

double sorted_wp(Vector a, Vector b, double p) {
    std::sort(a.data(), a.data() + a.size());
    std::sort(b.data(), b.data() + b.size());
    std::vector<double> terms(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) terms[i] = std::pow(std::abs(a(i) - b(i)), p);
    std::sort(terms.begin(), terms.end());
    return std::pow(std::accumulate(terms.begin(), terms.end(), 0.0) / a.size(), 1.0 / p);
}

// Exhaustive minimum over permutations.
double brute_force_cost(const Matrix& cost) {
    std::vector<int> perm(cost.rows());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < perm.size(); ++i) c += cost(i, perm[i]);
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

TEST(Assignment, MatchesBruteForce) {
    std::mt19937_64 gen(1);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 7;
        Matrix cost = gaussian_matrix(gen, n, n).cwiseAbs();
        std::vector<int> assign = solve_assignment(cost);
        double c = 0.0;
        std::vector<int> seen(n, 0);
        for (int i = 0; i < n; ++i) {
            c += cost(i, assign[i]);
            ++seen[assign[i]];
        }
        ASSERT_TRUE(std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; }));
        ASSERT_NEAR(c, brute_force_cost(cost), 1e-12);
    }
}

TEST(Assignment, RejectsNonSquare) {
    EXPECT_THROW(solve_assignment(Matrix::Zero(2, 3)), SizeMismatch);
}

TEST(EmpiricalWp, IdenticalMeasuresAreZero) {
    std::mt19937_64 gen(2);
    Matrix a = gaussian_matrix(gen, 30, 3);
    EXPECT_EQ(empirical_wp(a, a, 2.0), 0.0);
}

TEST(EmpiricalWp, SinglePair) {
    Matrix a = Matrix::Zero(1, 1), b = Matrix::Ones(1, 1);
    for (double p : {1.0, 2.0, 3.5}) EXPECT_DOUBLE_EQ(empirical_wp(a, b, p), 1.0);
}

TEST(EmpiricalWp, OneDimensionMatchesSortingExactly) {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 1 + trial % 100;
        Matrix a = gaussian_matrix(gen, n, 1), b = 2.0 * gaussian_matrix(gen, n, 1);
        const double p = trial % 2 ? 1.0 : 2.0;
        ASSERT_EQ(empirical_wp(a, b, p), sorted_wp(a.col(0), b.col(0), p));
    }
}

TEST(EmpiricalWp, RejectsUnequalSizes) {
    EXPECT_THROW(empirical_wp(Matrix::Zero(3, 2), Matrix::Zero(4, 2), 2.0), SizeMismatch);
}

TEST(EmpiricalWp, SymmetricExactly) {
    std::mt19937_64 gen(4);
    for (int trial = 0; trial < 100; ++trial) {
        Matrix a = gaussian_matrix(gen, 40, 3), b = gaussian_matrix(gen, 40, 3);
        ASSERT_EQ(empirical_wp(a, b, 2.0), empirical_wp(b, a, 2.0));
    }
}

TEST(EmpiricalWp, TriangleInequality) {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 64;
        Matrix a = gaussian_matrix(gen, n, 2), b = gaussian_matrix(gen, n, 2), c = gaussian_matrix(gen, n, 2);
        for (double p : {1.0, 2.0})
            ASSERT_LE(empirical_wp(a, c, p), empirical_wp(a, b, p) + empirical_wp(b, c, p) + 1e-9);
    }
}

TEST(EmpiricalWp, MonotoneInP) {
    std::mt19937_64 gen(6);
    for (int trial = 0; trial < 100; ++trial) {
        Matrix a = gaussian_matrix(gen, 25, 2), b = gaussian_matrix(gen, 25, 2);
        ASSERT_LE(empirical_wp(a, b, 1.0), empirical_wp(a, b, 2.0) + 1e-9);
        ASSERT_LE(empirical_wp(a, b, 2.0), empirical_wp(a, b, 3.0) + 1e-9);
    }
}

TEST(EmpiricalWp, ShiftInvariant) {
    std::mt19937_64 gen(7);
    Matrix a = gaussian_matrix(gen, 50, 3), b = gaussian_matrix(gen, 50, 3);
    Eigen::RowVector3d shift(10.0, -3.0, 0.5);
    Matrix as = a.rowwise() + shift, bs = b.rowwise() + shift;
    EXPECT_NEAR(empirical_wp(a, b, 2.0), empirical_wp(as, bs, 2.0), 1e-12);
}

TEST(W2Gaussian, IdenticalIsZero) {
    std::mt19937_64 gen(8);
    GaussianLaw g{Vector::Ones(3), PsdMatrix::from(testing::random_psd(gen, 3))};
    EXPECT_NEAR(w2_gaussian(g, g), 0.0, 1e-7);
}

TEST(W2Gaussian, CommutingDiagonal) {
    GaussianLaw a{Vector::Zero(2), PsdMatrix::from(Matrix::Identity(2, 2))};
    GaussianLaw b{Vector::Zero(2), PsdMatrix::from(4.0 * Matrix::Identity(2, 2))};
    EXPECT_NEAR(w2_gaussian(a, b), std::sqrt(2.0), 1e-12);
}

TEST(W2Gaussian, SymmetricAndShiftCovariant) {
    std::mt19937_64 gen(9);
    for (int trial = 0; trial < 100; ++trial) {
        GaussianLaw a{gaussian_matrix(gen, 3, 1).col(0), PsdMatrix::from(testing::random_psd(gen, 3))};
        GaussianLaw b{gaussian_matrix(gen, 3, 1).col(0), PsdMatrix::from(testing::random_psd(gen, 3, 2))};
        ASSERT_NEAR(w2_gaussian(a, b), w2_gaussian(b, a), 1e-12);
        GaussianLaw as{a.mean.array() + 5.0, a.cov}, bs{b.mean.array() + 5.0, b.cov};
        ASSERT_NEAR(w2_gaussian(a, b), w2_gaussian(as, bs), 1e-12);
    }
}

TEST(W2Gaussian, AgreesWithLargeSampleEmpirical) {
    std::mt19937_64 gen(10);
    Matrix c1 = testing::random_psd(gen, 3), c2 = testing::random_psd(gen, 3);
    const double exact = w2_gaussian({Vector::Zero(3), PsdMatrix::from(c1)}, {Vector::Zero(3), PsdMatrix::from(c2)});
    const Eigen::Index n = 512;
    const double emp =
        empirical_wp(testing::correlated_samples(gen, c1, n), testing::correlated_samples(gen, c2, n), 2.0);
    // Same-law control gives the bias envelope of the empirical estimator.
    const double floor =
        empirical_wp(testing::correlated_samples(gen, c1, n), testing::correlated_samples(gen, c1, n), 2.0);
    std::printf("w2 exact %.4f, empirical %.4f, same-law floor %.4f\n", exact, emp, floor);
    EXPECT_NEAR(emp, exact, floor + 0.05);
}

TEST(GaussianGaps, Cases) {
    GaussianLaw a{Vector::Zero(2), PsdMatrix::from(Matrix::Identity(2, 2))};
    auto same = gaussian_upper_bound_parts(a, a);
    EXPECT_NEAR(same.mean_gap, 0.0, 1e-15);
    EXPECT_NEAR(same.sqrtcov_gap, 0.0, 1e-14);
    GaussianLaw shifted{Eigen::Vector2d(3.0, 4.0), a.cov};
    auto m = gaussian_upper_bound_parts(a, shifted);
    EXPECT_NEAR(m.mean_gap, 5.0, 1e-14);
    EXPECT_NEAR(m.sqrtcov_gap, 0.0, 1e-14);
    GaussianLaw wide{Vector::Zero(2), PsdMatrix::from(4.0 * Matrix::Identity(2, 2))};
    auto c = gaussian_upper_bound_parts(a, wide);
    EXPECT_NEAR(c.mean_gap, 0.0, 1e-15);
    EXPECT_NEAR(c.sqrtcov_gap, std::sqrt(2.0), 1e-12);
}

TEST(PluginDistance, ZerosAgainstUnitVariance) {
    PluginDistance d = plugin_gaussian_distance(Matrix::Zero(100, 1), PsdMatrix::from(Matrix::Identity(1, 1)), 1);
    EXPECT_NEAR(d.distance, 1.0, 1e-12);
}

TEST(PluginDistance, GaussianSamplesConverge) {
    Matrix k(2, 2);
    k << 1.0, 0.3, 0.3, 2.0;
    SampleBatch b = gp_sample(PsdMatrix::from(k), 1, 100000, 11);
    EXPECT_LE(plugin_gaussian_distance(b.data, PsdMatrix::from(k), 1).distance, 0.05);
}

TEST(PluginDistance, FlagsTooFewSamples) {
    EXPECT_TRUE(
        plugin_gaussian_distance(Matrix::Ones(2, 3), PsdMatrix::from(Matrix::Identity(3, 3)), 1).insufficient_samples);
}

TEST(KronIdentity, BlockDiagonal) {
    Matrix k(2, 2);
    k << 1, 2, 2, 5;
    Matrix big = kron_identity(3, k);
    ASSERT_EQ(big.rows(), 6);
    EXPECT_EQ(big.block(2, 2, 2, 2), k);
    EXPECT_EQ(big.block(0, 2, 2, 2).norm(), 0.0);
}

}  // namespace
}  // namespace widelimit
