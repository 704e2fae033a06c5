#include "widelimit/nngp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "widelimit/errors.hpp"
#include "widelimit/parallel.hpp"
#include "widelimit/quadrature.hpp"
#include "widelimit/rng.hpp"

namespace widelimit {

bool has_closed_form(const Activation& act) {
    switch (act.kind()) {
        case ActivationKind::Identity:
        case ActivationKind::ReLU:
        case ActivationKind::LeakyReLU:
        case ActivationKind::Erf: return true;
        default: return false;
    }
}

namespace {

double relu_moment(double k11, double k12, double k22) {
    if (k11 <= 0.0 || k22 <= 0.0) return 0.0;
    const double r = std::sqrt(k11 * k22);
    const double c = std::clamp(k12 / r, -1.0, 1.0);
    const double theta = std::acos(c);
    return r / (2.0 * std::numbers::pi) * (std::sin(theta) + (std::numbers::pi - theta) * c);
}

}  // namespace

double pair_moment_closed_form(const Activation& act, double k11, double k12, double k22) {
    switch (act.kind()) {
        case ActivationKind::Identity: return k12;
        case ActivationKind::ReLU: return relu_moment(k11, k12, k22);
        case ActivationKind::LeakyReLU: {
            // sigma = (1 - a) relu + a id, and E[relu(u) v] = k12 / 2.
            const double a = act.slope();
            return (1 - a) * (1 - a) * relu_moment(k11, k12, k22) + a * (1 - a) * k12 + a * a * k12;
        }
        case ActivationKind::Erf: {
            const double den = std::sqrt((1 + 2 * k11) * (1 + 2 * k22));
            return 2.0 / std::numbers::pi * std::asin(std::clamp(2 * k12 / den, -1.0, 1.0));
        }
        default: throw UnsupportedActivation("no closed form for activation '" + act.name() + "'");
    }
}

double pair_moment_quadrature(const Activation& act, double k11, double k12, double k22, int nodes) {
    Matrix cov(2, 2);
    cov << k11, k12, k12, k22;
    GaussianGrid grid(cov, {act.breakpoints(), act.breakpoints()}, nodes);
    double acc = 0.0;
    grid.visit([&](const double* u, double w) { acc += w * act(u[0]) * act(u[1]); });
    return acc;
}

double activation_pair_moment(const Activation& act, double k11, double k12, double k22, int nodes) {
    if (k11 < 0.0 || k22 < 0.0 || k12 * k12 > k11 * k22 * (1 + 1e-10) + 1e-300)
        throw NonPsdInput("pair covariance is not PSD");
    if (nodes <= 0 && has_closed_form(act)) return pair_moment_closed_form(act, k11, k12, k22);
    return pair_moment_quadrature(act, k11, k12, k22, nodes > 0 ? nodes : 64);
}

Matrix layer_kernel_map(const NetworkSpec& spec, int layer, const Matrix& prev, const InputSet& x,
                        int quadrature_nodes) {
    if (layer == 1) {
        Matrix g = apply_layer_map(spec, 1, input_layer(x));
        return g.transpose() * g;  // n_0 = 1
    }
    if (spec.activation) {
        const Activation& act = *spec.activation;
        const Eigen::Index k = prev.rows();
        Matrix out(k, k);
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = 0; j <= i; ++j) {
                double v = activation_pair_moment(act, prev(i, i), prev(i, j), prev(j, j), quadrature_nodes) + 1.0;
                out(i, j) = v;
                out(j, i) = v;
            }
        return out;
    }
    const auto& h = spec.layer_maps.at(layer - 1);
    const int a = spec.aux_dims[layer - 1];
    const int s = spec.aux_sizes[layer];
    if (h.in_dim > kMaxQuadratureDim)
        throw UnsupportedActivation("layer map " + h.name + " on " + std::to_string(h.in_dim) +
                                    " coordinates is beyond quadrature support");
    GaussianGrid grid(prev, h.breakpoints, quadrature_nodes);
    Matrix m = Matrix::Zero(h.out_dim, h.out_dim);
    Vector out(h.out_dim);
    grid.visit([&](const double* u, double w) {
        h.map(u, out.data());
        m.noalias() += w * out * out.transpose();
    });
    return partial_trace(m, static_cast<std::size_t>(a), static_cast<std::size_t>(s));
}

KernelStack kernel_recursion(const NetworkSpec& spec, const InputSet& x, const KernelOptions& options) {
    spec.validate();
    if (x.rows() != spec.k || x.cols() != spec.input_dim) throw ShapeMismatch("input set does not match the spec");
    KernelStack stack;
    Matrix prev;
    for (int l = 1; l <= spec.depth; ++l) {
        Matrix k = layer_kernel_map(spec, l, prev, x, options.quadrature_nodes);
        PsdMatrix psd = PsdMatrix::project(k);
        std::string method = "exact";
        if (l > 1) {
            bool closed = spec.activation && has_closed_form(*spec.activation) && options.quadrature_nodes <= 0;
            method = closed ? "closed_form" : "quadrature";
        }
        stack.lambda_min.push_back(spectral_floors(psd).lambda_min);
        stack.method.push_back(method);
        prev = psd.matrix();
        stack.kernels.push_back(std::move(psd));
    }
    return stack;
}

NondegeneracyReport nondegeneracy_report(const KernelStack& stack, double tol) {
    NondegeneracyReport report;
    for (int l = 1; l <= stack.depth(); ++l) {
        const PsdMatrix& k = stack.at(l);
        double lmin = k.spectral_floor();
        bool ok = lmin > tol * k.matrix().norm();
        report.layers.push_back({l, lmin, ok});
        report.nondegenerate = report.nondegenerate && ok;
    }
    return report;
}

SampleBatch gp_sample(const PsdMatrix& kernel, int rows, Eigen::Index count, std::uint64_t seed, int threads) {
    if (rows < 1 || count < 1) throw InvalidConfig("gp_sample needs positive rows and count");
    const Matrix root = sym_sqrt(kernel).matrix();
    const Eigen::Index k = kernel.dim();
    SampleBatch batch;
    batch.rows = rows;
    batch.cols = static_cast<int>(k);
    batch.data.resize(count, rows * k);
    parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t begin, std::size_t end) {
        std::normal_distribution<double> normal;
        Matrix z(rows, k);
        for (std::size_t d = begin; d < end; ++d) {
            Philox rng(derive_seed(seed, d), 0);
            for (int i = 0; i < rows; ++i)
                for (Eigen::Index s = 0; s < k; ++s) z(i, s) = normal(rng);
            normal.reset();
            Matrix f = z * root;
            for (int i = 0; i < rows; ++i)
                for (Eigen::Index s = 0; s < k; ++s) batch.data(static_cast<Eigen::Index>(d), i * k + s) = f(i, s);
        }
    });
    return batch;
}

}  // namespace widelimit
