#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "widelimit/bayes.hpp"
#include "widelimit/config.hpp"
#include "widelimit/gauss_moments.hpp"
#include "widelimit/nngp.hpp"
#include "widelimit/stats.hpp"

namespace widelimit {

struct RunOptions {
    int threads = 1;
    std::ostream* log = nullptr;  // progress lines when set
};

// Hidden layers get width n, the output layer gets output_width.
NetworkSpec sweep_spec(const ExperimentConfig& cfg, int n, int depth);

struct KernelResult {
    KernelStack stack;
    NondegeneracyReport report;
};

KernelResult run_kernel(const ExperimentConfig& cfg, const RunOptions& opts = {});

// Metric tags:
//   plugin             Bures distance of the moment-matched output Gaussian, covariance
//                      from control-variate kernel estimates (primary)
//   plugin_conditional same, covariance from the mean conditional output kernel
//   plugin_raw         same, moments taken directly from the output samples
//   empirical_debiased W2(network, GP) - W2(GP, GP) on equal-size point clouds
struct RateRow {
    int width;
    std::string metric;
    double distance;
    double stderr_;
    bool nondegenerate;
};

struct MetricSummary {
    bool fitted = false;
    SlopeFit fit{};
    // distance * sqrt(n) non-increasing within 2 pooled stderr
    bool sqrt_n_envelope = false;
};

struct RateTable {
    std::vector<RateRow> rows;
    std::map<std::string, MetricSummary> metrics;
    NondegeneracyReport report;
};

RateTable run_rate_sweep(const ExperimentConfig& cfg, const RunOptions& opts = {});

struct CltRow {
    int width = 0;
    Matrix mean_empirical;
    Matrix mean_stderr;
    Matrix mean_model;
    Matrix cov_empirical;
    Matrix sigma;
    double cov_rel_error = 0.0;
    double mean_max_z = 0.0;
    double w2_models = 0.0;
};

struct FluctuationReport {
    int layer = 0;
    std::vector<CltRow> rows;
};

FluctuationReport run_kernel_clt(const ExperimentConfig& cfg, const RunOptions& opts = {});

// Estimators:
//   conditional  mixture of exact GP posteriors given the sampled output kernels,
//                compared with coupled output noise (primary)
//   direct       importance-reweighted output samples vs direct GP draws
struct PosteriorRow {
    std::string source;  // network | gp_control
    int width;
    std::string estimator;
    double w1;
    double stderr_;
    double ess_fraction;
    double bound;  // NaN when not applicable
};

struct BoundParts {
    int width;
    double mu_g, nu_g, lip_g, sup_g, m1_mu, m2_mu, w2_prior, w2_prior_stderr, bound;
};

struct PosteriorReport {
    std::vector<PosteriorRow> rows;
    std::vector<BoundParts> bounds;
    GpPosterior gp;
    // Reweighted GP-prior samples against the closed form, in stderr units.
    double control_mean_max_z = 0.0;
    double control_cov_max_z = 0.0;
    bool ess_ok = true;
};

PosteriorReport run_posterior(const ExperimentConfig& cfg, const RunOptions& opts = {});

struct BoundRow {
    std::string quantity;
    double p;
    double value;
};

std::vector<BoundRow> run_bound(const ExperimentConfig& cfg);

// Runs the configured experiment and writes <out>/result.csv and
// <out>/summary.json (plus kernels.json for the kernel experiment). The CSV
// starts with "# widelimit-v1 experiment=<kind> seed=<seed> config_hash=<hex>".
void run_and_write(const ExperimentConfig& cfg, const std::string& out_dir, const RunOptions& opts = {});

}  // namespace widelimit
