#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "widelimit/activation.hpp"
#include "widelimit/config.hpp"
#include "widelimit/errors.hpp"
#include "widelimit/experiments.hpp"
#include "widelimit/network.hpp"
#include "widelimit/nngp.hpp"
#include "widelimit/stats.hpp"
#include "widelimit/transport.hpp"

namespace py = pybind11;
using namespace widelimit;

namespace {

SamplingMode parse_mode(const std::string& s) {
    if (s == "conditional") return SamplingMode::Conditional;
    if (s == "weights") return SamplingMode::Weights;
    throw InvalidConfig("sampler must be 'conditional' or 'weights'");
}

NetworkSpec fc_spec(const std::string& activation, const Matrix& inputs, const std::vector<int>& widths) {
    return lift_fully_connected(static_cast<int>(widths.size()), static_cast<int>(inputs.cols()), widths,
                                Activation::parse(activation), static_cast<int>(inputs.rows()));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Wide-network Gaussian limits: kernels, sampling, transport distances and experiments.";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

    m.def("gamma_p", &gamma_p, py::arg("p"));

    m.def(
        "pair_moment",
        [](const std::string& act, double k11, double k12, double k22, int nodes) {
            return activation_pair_moment(Activation::parse(act), k11, k12, k22, nodes);
        },
        py::arg("activation"), py::arg("k11"), py::arg("k12"), py::arg("k22"), py::arg("nodes") = 0);

    m.def(
        "nngp_kernels",
        [](const std::string& act, int depth, const Matrix& inputs, int nodes) {
            const NetworkSpec spec = fc_spec(act, inputs, std::vector<int>(static_cast<std::size_t>(depth), 1));
            const KernelStack stack = kernel_recursion(spec, inputs, KernelOptions{nodes});
            std::vector<Matrix> out;
            for (const auto& k : stack.kernels) out.push_back(k.matrix());
            return out;
        },
        py::arg("activation"), py::arg("depth"), py::arg("inputs"), py::arg("quadrature_nodes") = 0,
        "Limiting kernels K^(1)..K^(depth) of a fully connected network, each k x k.");

    m.def(
        "sample_outputs",
        [](const std::string& act, const std::vector<int>& widths, const Matrix& inputs, Eigen::Index count,
           std::uint64_t seed, const std::string& sampler, int threads) {
            const NetworkSpec spec = fc_spec(act, inputs, widths);
            SampleOptions opts;
            opts.mode = parse_mode(sampler);
            opts.threads = threads;
            py::gil_scoped_release release;
            return sample_outputs(spec, inputs, spec.depth, count, seed, opts).data;
        },
        py::arg("activation"), py::arg("widths"), py::arg("inputs"), py::arg("count"), py::arg("seed"),
        py::arg("sampler") = "conditional", py::arg("threads") = 1,
        "Output draws, one row per draw; entry (i, s) sits at column i * k + s.");

    m.def(
        "w2_gaussian",
        [](const Vector& m1, const Matrix& c1, const Vector& m2, const Matrix& c2) {
            return w2_gaussian({m1, PsdMatrix::from(c1)}, {m2, PsdMatrix::from(c2)});
        },
        py::arg("mean1"), py::arg("cov1"), py::arg("mean2"), py::arg("cov2"));

    m.def("empirical_wp", &empirical_wp, py::arg("a"), py::arg("b"), py::arg("p") = 2.0,
          "W_p between two uniform empirical measures of equal size, rows are points.");

    m.def(
        "run_experiment",
        [](const std::string& config_json, const std::string& out_dir, int threads) {
            const ExperimentConfig cfg = parse_config(nlohmann::json::parse(config_json));
            py::gil_scoped_release release;
            run_and_write(cfg, out_dir, RunOptions{threads, nullptr});
        },
        py::arg("config_json"), py::arg("out_dir"), py::arg("threads") = 1,
        "Runs a JSON experiment config and writes result.csv and summary.json to out_dir.");
}
