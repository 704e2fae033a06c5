#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "widelimit/network.hpp"
#include "widelimit/psd_linalg.hpp"
#include "widelimit/transport.hpp"

namespace widelimit {

// Training pairs and test inputs. The joint input set lists training points
// first, then test points.
struct Dataset {
    Matrix train_x;  // |D| x d0
    Matrix train_y;  // |D| x n_L
    Matrix test_x;   // |T| x d0

    int train_size() const { return static_cast<int>(train_x.rows()); }
    int test_size() const { return static_cast<int>(test_x.rows()); }
    int output_dim() const { return static_cast<int>(train_y.cols()); }
    InputSet joint() const;
    void validate() const;

    // CSV columns: role,x0..x{d0-1},y0..y{nL-1}; y cells of test rows are empty.
    static Dataset from_csv(const std::string& path);
};

// g evaluated on the training block z (n_L x |D|), in log space.
struct LikelihoodSpec {
    enum class Form { GaussianSquaredError, CustomLipschitz };
    Form form = Form::GaussianSquaredError;
    std::function<double(const Matrix& z)> log_g;  // CustomLipschitz only
    double lipschitz = 0.0;
    double sup = 1.0;

    // g(z) = exp(-sum |z_i - y_i|^2): Lip(g) = sqrt(2/e), sup g = 1.
    static LikelihoodSpec gaussian();
    static LikelihoodSpec custom(std::function<double(const Matrix&)> log_g, double lipschitz, double sup);
    double log_value(const Matrix& z, const Dataset& data) const;
    double lipschitz_constant() const;
};

// Noise variance that matches exp(-(z - y)^2).
inline constexpr double kGaussianLikelihoodNoise = 0.5;

struct GpPosterior {
    Matrix mean;    // n_L x |X|, joint train and test
    PsdMatrix cov;  // |X| x |X|, shared by every output coordinate
    int train_size = 0;

    // Law of the flattened (output, point) block; test_only drops the training points.
    GaussianLaw law(bool test_only = false) const;
};

// Standard GP regression for every output coordinate: conditioning N(0, K)
// on y = z_D + noise.
GpPosterior gp_posterior(const PsdMatrix& k, const Dataset& data, double noise_var);

struct WeightedSamples {
    Matrix points;   // N x dim
    Vector weights;  // normalized
    double ess = 0.0;
    double mean_likelihood = 0.0;  // (1/N) sum g, estimate of the normalizer

    Vector mean() const;
    Matrix covariance() const;
    // Blocked standard errors for the weighted mean and covariance.
    std::pair<Vector, Matrix> moment_stderr(int blocks = 20) const;
};

// Self-normalized importance weights w_i proportional to g(train block of
// sample i). Points keep the full flattened (output, point) layout.
WeightedSamples reweighted_posterior(const SampleBatch& batch, const LikelihoodSpec& lik, const Dataset& data);

// Keep only the columns of the test points.
WeightedSamples restrict_to_test(const WeightedSamples& ws, const Dataset& data);

// Finite Gaussian mixture sum_j w_j N(m_j, R_j R_j^T).
struct GaussianMixture {
    Vector weights;
    std::vector<Vector> means;
    std::vector<Matrix> roots;
    double ess = 0.0;
    double mean_likelihood = 0.0;
};

// Posterior of the network given its output-layer kernels. Given A_L the
// output rows are N(0, A_L), so the posterior is the mixture over draws of the
// GP posteriors under A_L, weighted by the marginal likelihood
// E[g | A_L] = prod_i det(2 A_DD + I)^{-1/2} exp(-y_i^T (A_DD + I/2)^{-1} y_i / 2).
GaussianMixture conditional_gaussian_posterior(const Matrix& kernels, const Dataset& data);

// E[g] under N(0, Id_{n_L} (x) K) for the Gaussian likelihood.
double gaussian_likelihood_normalizer(const Matrix& k, const Dataset& data);

struct W1Estimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::vector<double> values;
};

// Multinomial resampling to m points per side followed by exact W_1. Both
// sides consume the same uniform stream of derive_seed(seed, rep), so equal
// inputs give exactly zero.
W1Estimate posterior_w1(const WeightedSamples& a, const WeightedSamples& b, Eigen::Index m, std::uint64_t seed,
                        int repetitions = 10);

// The Gaussian side is sampled directly.
W1Estimate posterior_w1(const WeightedSamples& a, const GaussianLaw& b, Eigen::Index m, std::uint64_t seed,
                        int repetitions = 10);

// Mixture side: components resampled multinomially, then both sides use the
// same standard normal vector per point.
W1Estimate posterior_w1(const GaussianMixture& a, const GaussianLaw& b, Eigen::Index m, std::uint64_t seed,
                        int repetitions = 10);

double bayes_bound_constant(double mu_g, double nu_g, double lip_g, double sup_g, double m1_mu, double mpprime_mu,
                            double wp_prior, double p);

}  // namespace widelimit
