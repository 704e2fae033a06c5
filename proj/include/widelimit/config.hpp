#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "widelimit/activation.hpp"
#include "widelimit/bayes.hpp"
#include "widelimit/network.hpp"

namespace widelimit {

enum class ExperimentKind { Kernel, Rates, KernelClt, Posterior, Bound };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& text);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Kernel;
    nlohmann::json raw;  // as loaded; hashed for the output header

    // network
    int depth = 0;
    int input_dim = 0;
    Activation activation;
    int output_width = 1;
    InputSet inputs;
    std::vector<int> widths;

    // sampling
    Eigen::Index draws = 0;
    std::uint64_t seed = 0;
    SamplingMode sampler = SamplingMode::Conditional;
    int quadrature_nodes = 0;
    int cv_nodes = 24;

    // rates
    bool metric_plugin = true;
    bool metric_empirical = false;
    Eigen::Index empirical_points = 512;
    int empirical_reps = 4;
    int jackknife_blocks = 20;

    // kernel_clt
    int layer = 0;
    std::string test_function = "identity";

    // posterior
    std::optional<Dataset> dataset;
    Eigen::Index resample = 1024;
    int repetitions = 10;
    double ess_min_fraction = 0.1;

    // bound
    std::vector<double> p_values;
    std::optional<nlohmann::json> lemma;

    std::uint64_t hash() const;
};

// Throws InvalidConfig with a message naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// FNV-1a of the canonical (key-sorted, compact) JSON.
std::uint64_t config_hash(const nlohmann::json& j);

}  // namespace widelimit
