#pragma once

#include <vector>

#include "widelimit/psd_linalg.hpp"

namespace widelimit {

inline constexpr Eigen::Index kMaxAssignmentSize = 4096;

// Equal-weight point cloud, one point per row.
using EmpiricalMeasure = Matrix;

struct GaussianLaw {
    Vector mean;
    PsdMatrix cov;
};

// Minimum-cost perfect matching on a square cost matrix; result[i] is the
// column assigned to row i. Shortest augmenting paths with potentials, O(n^3).
std::vector<int> solve_assignment(const Matrix& cost);

// Exact W_p between equal-size empirical measures. d = 1 sorts; otherwise
// solves the assignment problem (N <= 4096).
double empirical_wp(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p);

double w2_gaussian(const GaussianLaw& g1, const GaussianLaw& g2);

struct GaussianGaps {
    double mean_gap;
    double sqrtcov_gap;
};

GaussianGaps gaussian_upper_bound_parts(const GaussianLaw& g1, const GaussianLaw& g2);

// Id_rows (x) K, matching the row-major (neuron, point) layout of batches.
Matrix kron_identity(int rows, const Matrix& k);

struct PluginDistance {
    double distance;
    GaussianGaps gaps;
    bool insufficient_samples;  // N < d + 1; covariance was PSD-clamped
};

// Bures distance between the moment-matched Gaussian of the samples and
// N(0, Id_rows (x) K).
PluginDistance plugin_gaussian_distance(const Matrix& samples, const PsdMatrix& k_target, int rows);

// Same distance from given moments.
PluginDistance plugin_gaussian_distance(const Vector& mean, const Matrix& cov, const PsdMatrix& k_target, int rows);

GaussianLaw empirical_gaussian(const Matrix& samples);

}  // namespace widelimit
