#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "widelimit/config.hpp"
#include "widelimit/errors.hpp"
#include "widelimit/experiments.hpp"
#include "widelimit/stats.hpp"

namespace widelimit {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<RatePoint> power_law(double c, double alpha) {
    std::vector<RatePoint> pts;
    for (double n : {32.0, 64.0, 128.0, 256.0, 512.0}) pts.push_back({n, c * std::pow(n, alpha), 0.0});
    return pts;
}

json base_rates() {
    return json::parse(R"({
        "experiment": "rates",
        "network": {"depth": 3, "activation": "tanh", "input_dim": 2},
        "inputs": [[0.3, -1.1], [0.9, 0.4], [-0.5, 0.2]],
        "widths": [32, 64, 128, 256, 512],
        "output_width": 1, "draws": 20000, "seed": 42, "metric": "plugin"
    })");
}

TEST(GammaP, Values) {
    EXPECT_DOUBLE_EQ(gamma_p(1.0), 1.0);
    EXPECT_NEAR(gamma_p(2.0), std::sqrt(std::sqrt(2.0) + 1.0), 1e-15);
    EXPECT_NEAR(gamma_p(2.0), 1.55377, 1e-5);
    EXPECT_GT(gamma_p(100.0), 1.0);
    EXPECT_LT(gamma_p(100.0), 1.05);
    EXPECT_THROW(gamma_p(0.5), DomainError);
    for (double p = 1.0; p < 50.0; p += 0.37) EXPECT_GE(gamma_p(p), 1.0);
}

TEST(SlopeFit, ExactPowerLaws) {
    SlopeFit f = fit_loglog_slope(power_law(1.0, -1.0));
    EXPECT_NEAR(f.slope, -1.0, 1e-10);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
    EXPECT_NEAR(fit_loglog_slope(power_law(1.0, -0.5)).slope, -0.5, 1e-10);
}

TEST(SlopeFit, NoisyInverseLaw) {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (int trial = 0; trial < 100; ++trial) {
        auto pts = power_law(3.0, -1.0);
        for (auto& p : pts) {
            p.value *= 1.0 + noise(gen);
            p.stderr_ = 0.01 * p.value;
        }
        const double s = fit_loglog_slope(pts).slope;
        ASSERT_GE(s, -1.05);
        ASSERT_LE(s, -0.95);
    }
}

TEST(SlopeFit, RescalingShiftsOnlyIntercept) {
    auto pts = power_law(2.0, -0.8);
    pts[1].value *= 1.1;
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i].stderr_ = 0.05 * pts[i].value * (1 + i);
    auto scaled = pts;
    for (auto& p : scaled) {
        p.value *= 37.0;
        p.stderr_ *= 37.0;
    }
    SlopeFit a = fit_loglog_slope(pts), b = fit_loglog_slope(scaled);
    EXPECT_NEAR(a.slope, b.slope, 1e-12);
    EXPECT_NEAR(b.intercept - a.intercept, std::log(37.0), 1e-12);
}

TEST(SlopeFit, Errors) {
    auto pts = power_law(1.0, -1.0);
    pts[2].value = 0.0;
    EXPECT_THROW(fit_loglog_slope(pts), NonpositiveValue);
    pts.resize(3);
    EXPECT_THROW(fit_loglog_slope(pts), InvalidConfig);
}

TEST(Jackknife, MeanOfIidRowsMatchesClassicalStderr) {
    std::mt19937_64 gen(2);
    std::normal_distribution<double> normal;
    Matrix rows(20000, 1);
    for (Eigen::Index i = 0; i < rows.rows(); ++i) rows(i, 0) = normal(gen);
    auto j = block_jackknife(rows, 20, [](const Vector& m) { return m(0); });
    EXPECT_NEAR(j.value, rows.mean(), 1e-15);
    EXPECT_NEAR(j.stderr_, 1.0 / std::sqrt(20000.0), 0.4 / std::sqrt(20000.0));
}

TEST(Config, ParsesRatesExample) {
    ExperimentConfig cfg = parse_config(base_rates());
    EXPECT_EQ(cfg.kind, ExperimentKind::Rates);
    EXPECT_EQ(cfg.depth, 3);
    EXPECT_EQ(cfg.inputs.rows(), 3);
    EXPECT_EQ(cfg.widths.size(), 5u);
    EXPECT_TRUE(cfg.metric_plugin);
    EXPECT_FALSE(cfg.metric_empirical);
}

TEST(Config, RejectsBadInputs) {
    auto expect_invalid = [](json j) { EXPECT_THROW(parse_config(j), InvalidConfig) << j.dump(); };
    json j = base_rates();
    j["widths"] = {32, 32, 64, 128};
    expect_invalid(j);
    j = base_rates();
    j["draws"] = 50;
    expect_invalid(j);
    j = base_rates();
    j.erase("seed");
    expect_invalid(j);
    j = base_rates();
    j["metric"] = "sliced";
    expect_invalid(j);
    j = base_rates();
    j["widths"] = {32, 64, 128};
    expect_invalid(j);
    j = base_rates();
    j["network"]["input_dim"] = 3;
    expect_invalid(j);
    j = base_rates();
    j["experiment"] = "train";
    expect_invalid(j);
}

TEST(Config, InputGeneratorIsSeeded) {
    json j = base_rates();
    j.erase("inputs");
    j["input_generator"] = {{"count", 4}, {"seed", 3}};
    ExperimentConfig a = parse_config(j), b = parse_config(j);
    EXPECT_EQ(a.inputs.rows(), 4);
    EXPECT_EQ(a.inputs, b.inputs);
}

TEST(Config, HashTracksContent) {
    json j = base_rates();
    const auto h = parse_config(j).hash();
    j["seed"] = 43;
    EXPECT_NE(parse_config(j).hash(), h);
    EXPECT_EQ(parse_config(base_rates()).hash(), h);
}

TEST(KernelClt, ReplicasRequired) {
    json j = base_rates();
    j["experiment"] = "kernel_clt";
    j["draws"] = 1;
    EXPECT_THROW(parse_config(j), InsufficientReplicas);
}

TEST(KernelClt, FirstLayerWishartCovariance) {
    json j = json::parse(R"({
        "experiment": "kernel_clt",
        "network": {"depth": 1, "activation": "identity", "input_dim": 2},
        "inputs": [[1.0, 0.0], [0.5, 0.5]],
        "widths": [256], "draws": 5000, "seed": 5, "layer": 1
    })");
    FluctuationReport rep = run_kernel_clt(parse_config(j), {});
    const CltRow& row = rep.rows[0];
    const double r = 5000.0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            const double s = row.sigma(a, b);
            const double se = std::sqrt((row.sigma(a, a) * row.sigma(b, b) + s * s) / r);
            EXPECT_NEAR(row.cov_empirical(a, b), s, 3.0 * se) << a << "," << b;
        }
    EXPECT_LT(row.mean_max_z, 3.0);
}

TEST(KernelClt, QuadrupledWidthShrinksTrace) {
    json j = json::parse(R"({
        "experiment": "kernel_clt",
        "network": {"depth": 2, "activation": "relu", "input_dim": 2},
        "inputs": [[0.3, -1.1], [0.9, 0.4]],
        "widths": [64, 256], "draws": 3000, "seed": 6
    })");
    FluctuationReport rep = run_kernel_clt(parse_config(j), {});
    const double ratio = rep.rows[1].cov_empirical.trace() / rep.rows[0].cov_empirical.trace();
    EXPECT_GE(ratio, 0.2);
    EXPECT_LE(ratio, 0.3);
}

TEST(RateSweep, FirstLayerIsWidthIndependent) {
    json j = base_rates();
    j["network"] = {{"depth", 1}, {"activation", "identity"}, {"input_dim", 2}};
    j["draws"] = 4000;
    RateTable t = run_rate_sweep(parse_config(j), {});
    for (const auto& r : t.rows)
        if (r.metric == "plugin") {
            EXPECT_LE(r.distance, 1e-12);
        }
    const MetricSummary& raw = t.metrics.at("plugin_raw");
    ASSERT_TRUE(raw.fitted);
    EXPECT_LT(std::abs(raw.fit.slope), 0.5);
}

TEST(RateSweep, SmallSweepHasRequiredColumns) {
    json j = base_rates();
    j["draws"] = 400;
    j["metric"] = "both";
    j["empirical_points"] = 64;
    j["empirical_reps"] = 2;
    RateTable t = run_rate_sweep(parse_config(j), {});
    EXPECT_TRUE(t.report.nondegenerate);
    for (const auto& r : t.rows) {
        EXPECT_TRUE(std::isfinite(r.distance));
        if (r.metric != "empirical_debiased") {
            EXPECT_GE(r.distance, 0.0);
        }
    }
    EXPECT_EQ(t.rows.size(), 5u * 4u);
}

TEST(Bound, TableAndPosteriorConstant) {
    json j = json::parse(R"({"experiment": "bound", "p_values": [1, 2],
        "lemma": {"p": 2, "mu_g": 1, "nu_g": 1, "lip_g": 0, "sup_g": 1, "m1_mu": 1, "mpprime_mu": 1, "wp_prior": 0.25}})");
    auto rows = run_bound(parse_config(j));
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_DOUBLE_EQ(rows[0].value, 1.0);
    EXPECT_DOUBLE_EQ(rows[2].value, 0.25);
}

// CLI behaviour through the built executable.
class Cli : public ::testing::Test {
protected:
    fs::path dir = fs::temp_directory_path() / "widelimit_cli_test";
    void SetUp() override {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    int run(const std::string& args) {
        const std::string cmd = std::string(WIDELIMIT_CLI_PATH) + " " + args + " > " + (dir / "stdout").string() +
                                " 2> " + (dir / "stderr").string();
        const int status = std::system(cmd.c_str());
        return WEXITSTATUS(status);
    }
    std::string read(const fs::path& p) {
        std::ifstream in(p);
        std::stringstream s;
        s << in.rdbuf();
        return s.str();
    }
    fs::path write_config(const json& j) {
        fs::path p = dir / "config.json";
        std::ofstream(p) << j.dump();
        return p;
    }
};

TEST_F(Cli, MissingConfigExitsTwoAndNamesPath) {
    EXPECT_EQ(run("kernel --config /nonexistent/widelimit.json --out " + (dir / "o").string()), 2);
    EXPECT_NE(read(dir / "stderr").find("/nonexistent/widelimit.json"), std::string::npos);
}

TEST_F(Cli, InvalidJsonExitsTwo) {
    fs::path p = dir / "bad.json";
    std::ofstream(p) << "{not json";
    EXPECT_EQ(run("kernel --config " + p.string()), 2);
}

TEST_F(Cli, KernelWritesLambdaMin) {
    json j = base_rates();
    j["experiment"] = "kernel";
    EXPECT_EQ(run("kernel --config " + write_config(j).string() + " --out " + (dir / "o").string()), 0);
    json k = json::parse(read(dir / "o" / "kernels.json"));
    ASSERT_EQ(k["layers"].size(), 3u);
    for (const auto& l : k["layers"]) EXPECT_GT(l["lambda_min"].get<double>(), 0.0);
    EXPECT_EQ(read(dir / "o" / "result.csv").rfind("# widelimit-v1 experiment=kernel seed=42 config_hash=", 0), 0u);
}

TEST_F(Cli, SubcommandMustMatchExperiment) {
    EXPECT_EQ(run("posterior --config " + write_config(base_rates()).string()), 2);
}

TEST_F(Cli, RatesHeaderAndSummary) {
    json j = base_rates();
    j["draws"] = 200;
    EXPECT_EQ(run("rates --threads 2 --config " + write_config(j).string() + " --out " + (dir / "o").string()), 0);
    std::istringstream csv(read(dir / "o" / "result.csv"));
    std::string comment, header;
    std::getline(csv, comment);
    std::getline(csv, header);
    EXPECT_EQ(comment.rfind("# widelimit-v1 experiment=rates seed=42 config_hash=", 0), 0u);
    EXPECT_EQ(header, "width,metric,distance,stderr,nondegenerate");
    json s = json::parse(read(dir / "o" / "summary.json"));
    EXPECT_TRUE(s["metrics"]["plugin"].contains("slope"));
    EXPECT_TRUE(s["metrics"]["plugin"].contains("r2"));
    EXPECT_TRUE(s["nondegeneracy"]["nondegenerate"].get<bool>());
}

TEST_F(Cli, NumericalFailureExitsThree) {
    json j = base_rates();
    j["experiment"] = "kernel_clt";
    j["network"]["depth"] = 2;
    j["inputs"] = {{0.3, -1.1}, {0.3, -1.1}};
    j["draws"] = 10;
    j["widths"] = {8};
    // Duplicate inputs make the base point singular for the differential.
    EXPECT_EQ(run("kernel-clt --config " + write_config(j).string() + " --out " + (dir / "o").string()), 3);
}

}  // namespace
}  // namespace widelimit
