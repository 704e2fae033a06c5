#include "widelimit/config.hpp"

#include <fstream>
#include <random>

#include "widelimit/errors.hpp"
#include "widelimit/rng.hpp"

namespace widelimit {

using nlohmann::json;

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Kernel: return "kernel";
        case ExperimentKind::Rates: return "rates";
        case ExperimentKind::KernelClt: return "kernel_clt";
        case ExperimentKind::Posterior: return "posterior";
        case ExperimentKind::Bound: return "bound";
    }
    return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
    if (text == "kernel") return ExperimentKind::Kernel;
    if (text == "rates") return ExperimentKind::Rates;
    if (text == "kernel_clt" || text == "kernel-clt") return ExperimentKind::KernelClt;
    if (text == "posterior") return ExperimentKind::Posterior;
    if (text == "bound") return ExperimentKind::Bound;
    throw InvalidConfig("unknown experiment '" + text + "'");
}

std::uint64_t config_hash(const json& j) {
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t ExperimentConfig::hash() const {
    return config_hash(raw);
}

namespace {

const json& need(const json& j, const char* key) {
    if (!j.contains(key)) throw InvalidConfig(std::string("missing field '") + key + "'");
    return j.at(key);
}

template <class T>
T get(const json& j, const char* key) {
    try {
        return need(j, key).get<T>();
    } catch (const json::exception& e) {
        throw InvalidConfig(std::string("field '") + key + "': " + e.what());
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? get<T>(j, key) : fallback;
}

Matrix points(const json& j, const char* what) {
    if (!j.is_array() || j.empty()) throw InvalidConfig(std::string(what) + " must be a nonempty array of points");
    const std::size_t d = j.at(0).size();
    Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != d || d == 0)
            throw InvalidConfig(std::string(what) + ": every point needs the same positive dimension");
        for (std::size_t c = 0; c < d; ++c) {
            if (!j[i][c].is_number()) throw InvalidConfig(std::string(what) + ": coordinates must be numbers");
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
        }
    }
    return m;
}

Dataset parse_dataset(const json& j) {
    const json& train = need(j, "train");
    if (!train.is_array() || train.empty()) throw InvalidConfig("dataset.train must be a nonempty array");
    json xs = json::array(), ys = json::array();
    for (const auto& row : train) {
        xs.push_back(need(row, "x"));
        const json& y = need(row, "y");
        ys.push_back(y.is_array() ? y : json::array({y}));
    }
    Dataset data{points(xs, "dataset.train.x"), points(ys, "dataset.train.y"), points(need(j, "test"), "dataset.test")};
    data.validate();
    return data;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw InvalidConfig("config must be a JSON object");
    ExperimentConfig cfg;
    cfg.raw = j;
    cfg.kind = parse_experiment_kind(get<std::string>(j, "experiment"));
    // Deterministic experiments take an optional seed so the output header can still carry one.
    cfg.seed = get_or<std::uint64_t>(j, "seed", 0);

    if (cfg.kind == ExperimentKind::Bound) {
        cfg.p_values = get_or<std::vector<double>>(j, "p_values", {});
        if (j.contains("lemma")) cfg.lemma = j.at("lemma");
        if (cfg.p_values.empty() && !cfg.lemma) throw InvalidConfig("bound config needs p_values or lemma");
        return cfg;
    }

    const json& net = need(j, "network");
    cfg.depth = get<int>(net, "depth");
    cfg.activation = Activation::parse(get<std::string>(net, "activation"));
    if (cfg.depth < 1) throw InvalidConfig("network.depth must be at least 1");
    cfg.quadrature_nodes = get_or<int>(j, "quadrature_nodes", 0);

    if (cfg.kind == ExperimentKind::Posterior) {
        if (j.contains("dataset_csv"))
            cfg.dataset = Dataset::from_csv(get<std::string>(j, "dataset_csv"));
        else
            cfg.dataset = parse_dataset(need(j, "dataset"));
        cfg.inputs = cfg.dataset->joint();
        cfg.output_width = cfg.dataset->output_dim();
        cfg.resample = get_or<Eigen::Index>(j, "resample", 1024);
        cfg.repetitions = get_or<int>(j, "repetitions", 10);
        cfg.ess_min_fraction = get_or<double>(j, "ess_min_fraction", 0.1);
        if (cfg.repetitions < 2) throw InvalidConfig("repetitions must be at least 2");
    } else if (j.contains("inputs")) {
        cfg.inputs = points(j.at("inputs"), "inputs");
    } else if (j.contains("input_generator")) {
        const json& g = j.at("input_generator");
        const int count = get<int>(g, "count");
        const int dim = get<int>(net, "input_dim");
        const double scale = get_or<double>(g, "scale", 1.0);
        if (count < 1 || dim < 1) throw InvalidConfig("input_generator needs positive count and input_dim");
        Philox rng(get<std::uint64_t>(g, "seed"), 0);
        std::normal_distribution<double> normal;
        cfg.inputs.resize(count, dim);
        for (int i = 0; i < count; ++i)
            for (int c = 0; c < dim; ++c) cfg.inputs(i, c) = scale * normal(rng);
    } else {
        throw InvalidConfig("config needs 'inputs' or 'input_generator'");
    }
    cfg.input_dim = static_cast<int>(cfg.inputs.cols());
    if (net.contains("input_dim") && get<int>(net, "input_dim") != cfg.input_dim)
        throw InvalidConfig("network.input_dim does not match the inputs");

    if (cfg.kind == ExperimentKind::Kernel) {
        cfg.widths = get_or<std::vector<int>>(j, "widths", {});
        return cfg;
    }

    cfg.widths = get<std::vector<int>>(j, "widths");
    if (cfg.widths.empty()) throw InvalidConfig("widths must be nonempty");
    for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
        if (cfg.widths[i] < 1) throw InvalidConfig("widths must be positive");
        if (i > 0 && cfg.widths[i] <= cfg.widths[i - 1]) throw InvalidConfig("widths must be strictly increasing");
    }
    if (cfg.kind != ExperimentKind::Posterior) cfg.output_width = get_or<int>(j, "output_width", 1);
    if (cfg.output_width < 1) throw InvalidConfig("output_width must be positive");
    cfg.draws = get<Eigen::Index>(j, "draws");
    cfg.seed = get<std::uint64_t>(j, "seed");
    const auto sampler = get_or<std::string>(j, "sampler", "conditional");
    if (sampler == "conditional")
        cfg.sampler = SamplingMode::Conditional;
    else if (sampler == "weights")
        cfg.sampler = SamplingMode::Weights;
    else
        throw InvalidConfig("sampler must be 'conditional' or 'weights'");
    cfg.cv_nodes = get_or<int>(j, "control_variate_nodes", 24);
    cfg.jackknife_blocks = get_or<int>(j, "jackknife_blocks", 20);

    if (cfg.kind == ExperimentKind::KernelClt) {
        cfg.layer = get_or<int>(j, "layer", cfg.depth);
        if (cfg.layer < 1 || cfg.layer > cfg.depth) throw InvalidConfig("layer must lie in [1, depth]");
        cfg.test_function = get_or<std::string>(j, "test_function", "identity");
        Activation::parse(cfg.test_function);
        if (cfg.draws < 2) throw InsufficientReplicas("kernel_clt needs at least 2 replicas");
        return cfg;
    }
    if (cfg.draws < 100) throw InvalidConfig("statistical experiments need draws >= 100");

    if (cfg.kind == ExperimentKind::Rates) {
        const auto metric = get_or<std::string>(j, "metric", "plugin");
        cfg.metric_plugin = metric == "plugin" || metric == "both";
        cfg.metric_empirical = metric == "empirical_debiased" || metric == "both";
        if (!cfg.metric_plugin && !cfg.metric_empirical)
            throw InvalidConfig("metric must be plugin, empirical_debiased or both");
        cfg.empirical_points = get_or<Eigen::Index>(j, "empirical_points", 512);
        cfg.empirical_reps = get_or<int>(j, "empirical_reps", 4);
        if (cfg.metric_plugin && cfg.widths.size() < 4) throw InvalidConfig("a rate sweep needs at least 4 widths");
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InvalidConfig("config " + path + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

}  // namespace widelimit
