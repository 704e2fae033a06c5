#include "widelimit/network.hpp"

#include <random>
#include <set>
#include <string>

#include "widelimit/errors.hpp"
#include "widelimit/parallel.hpp"
#include "widelimit/rng.hpp"

namespace widelimit {

void NetworkSpec::validate() const {
    if (depth < 1) throw InvalidConfig("depth must be at least 1");
    if (input_dim < 1 || k < 1) throw InvalidConfig("input dimension and input count must be positive");
    auto L = static_cast<std::size_t>(depth);
    if (widths.size() != L || aux_dims.size() != L || layer_maps.size() != L || aux_sizes.size() != L + 1)
        throw InvalidConfig("network spec lists do not match the depth");
    for (int n : widths)
        if (n < 1) throw InvalidConfig("widths must be positive");
    if (aux_sizes[0] != input_dim * k) throw InvalidConfig("S_0 must equal d0 x k");
    for (std::size_t l = 1; l <= L; ++l) {
        const auto& h = layer_maps[l - 1];
        if (aux_dims[l - 1] < 1 || aux_sizes[l] < 1) throw InvalidConfig("aux dimensions must be positive");
        if (h.in_dim != aux_sizes[l - 1] || h.out_dim != aux_dims[l - 1] * aux_sizes[l])
            throw InvalidConfig("layer map " + std::to_string(l) + " has the wrong shape");
    }
}

NetworkSpec lift_fully_connected(int depth, int input_dim, const std::vector<int>& widths, const Activation& activation,
                                 int k) {
    if (depth < 1 || input_dim < 1 || k < 1) throw InvalidConfig("depth, input_dim and k must be positive");
    if (widths.size() != static_cast<std::size_t>(depth))
        throw InvalidConfig("expected " + std::to_string(depth) + " widths");
    NetworkSpec spec;
    spec.depth = depth;
    spec.input_dim = input_dim;
    spec.k = k;
    spec.widths = widths;
    spec.activation = activation;
    spec.aux_sizes.push_back(input_dim * k);
    for (int l = 1; l <= depth; ++l) {
        spec.aux_sizes.push_back(k);
        spec.aux_dims.push_back(l == 1 ? input_dim + 1 : 2);
        spec.layer_maps.push_back(l == 1 ? TestFunction::lifted_input(input_dim, k)
                                         : TestFunction::lifted_layer(activation, k));
    }
    spec.validate();
    return spec;
}

NetworkSpec with_widths(const NetworkSpec& spec, const std::vector<int>& widths) {
    NetworkSpec out = spec;
    out.widths = widths;
    out.validate();
    return out;
}

Matrix input_layer(const InputSet& x) {
    const Eigen::Index k = x.rows();
    const Eigen::Index d0 = x.cols();
    Matrix f0(1, d0 * k);
    for (Eigen::Index c = 0; c < d0; ++c)
        for (Eigen::Index i = 0; i < k; ++i) f0(0, c * k + i) = x(i, c);
    return f0;
}

bool has_duplicate_points(const InputSet& x) {
    std::set<std::vector<double>> seen;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        std::vector<double> row;
        for (Eigen::Index c = 0; c < x.cols(); ++c) row.push_back(x(i, c));
        if (!seen.insert(row).second) return true;
    }
    return false;
}

namespace {

void fill_normal(Matrix& m, Philox& rng, double scale) {
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * normal(rng);
}

void check_inputs(const NetworkSpec& spec, const InputSet& x) {
    if (x.rows() != spec.k || x.cols() != spec.input_dim)
        throw ShapeMismatch("input set is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                            ", spec expects " + std::to_string(spec.k) + "x" + std::to_string(spec.input_dim));
}

}  // namespace

WeightSet sample_weights(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    WeightSet w;
    w.seed = seed;
    for (int l = 1; l <= spec.depth; ++l) {
        Philox rng(seed, static_cast<std::uint64_t>(l));
        Matrix m(spec.width(l), spec.width(l - 1) * spec.aux_dims[l - 1]);
        fill_normal(m, rng, 1.0 / std::sqrt(static_cast<double>(spec.width(l - 1))));
        w.layers.push_back(std::move(m));
    }
    return w;
}

Matrix apply_layer_map(const NetworkSpec& spec, int layer, const Matrix& prev) {
    const auto& h = spec.layer_maps.at(layer - 1);
    const int a = spec.aux_dims[layer - 1];
    const int s = spec.aux_sizes[layer];
    if (prev.cols() != h.in_dim) throw ShapeMismatch("layer input has the wrong number of columns");
    Matrix g(prev.rows() * a, s);
    Vector in(h.in_dim);
    Vector out(h.out_dim);
    for (Eigen::Index j = 0; j < prev.rows(); ++j) {
        in = prev.row(j).transpose();
        h.map(in.data(), out.data());
        for (int c = 0; c < a; ++c)
            for (int t = 0; t < s; ++t) g(j * a + c, t) = out(c * s + t);
    }
    return g;
}

LayerOutputs forward(const NetworkSpec& spec, const WeightSet& weights, const InputSet& x) {
    spec.validate();
    check_inputs(spec, x);
    if (weights.layers.size() != static_cast<std::size_t>(spec.depth))
        throw ShapeMismatch("weight set depth does not match the spec");
    LayerOutputs out;
    out.f.push_back(input_layer(x));
    for (int l = 1; l <= spec.depth; ++l) {
        const Matrix& w = weights.layers[l - 1];
        if (w.rows() != spec.width(l) || w.cols() != spec.width(l - 1) * spec.aux_dims[l - 1])
            throw ShapeMismatch("weight matrix " + std::to_string(l) + " has the wrong shape");
        out.f.push_back(w * apply_layer_map(spec, l, out.f.back()));
    }
    return out;
}

Matrix SampleBatch::draw(Eigen::Index d) const {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int s = 0; s < cols; ++s) m(i, s) = data(d, i * cols + s);
    return m;
}

namespace {

void store_row(Matrix& dst, Eigen::Index d, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index s = 0; s < m.cols(); ++s) dst(d, i * m.cols() + s) = m(i, s);
}

}  // namespace

SampleBatch sample_outputs(const NetworkSpec& spec, const InputSet& x, int layer, Eigen::Index count,
                           std::uint64_t seed, const SampleOptions& options) {
    spec.validate();
    check_inputs(spec, x);
    if (layer < 1 || layer > spec.depth) throw InvalidConfig("layer out of range");
    if (count < 1) throw InvalidConfig("sample count must be positive");
    const bool conditional = options.mode == SamplingMode::Conditional;
    if (options.coupled_kernel && !conditional)
        throw InvalidConfig("coupled Gaussian draws require the conditional sampler");

    SampleBatch batch;
    batch.rows = spec.width(layer);
    batch.cols = spec.aux_sizes[layer];
    batch.data.resize(count, static_cast<Eigen::Index>(batch.rows) * batch.cols);
    if (options.record_kernels)
        for (int l = 1; l <= layer; ++l) batch.kernels.emplace_back(count, spec.aux_sizes[l] * spec.aux_sizes[l]);
    Matrix coupled_root;
    if (options.coupled_kernel) {
        if (options.coupled_kernel->rows() != batch.cols) throw ShapeMismatch("coupled kernel has the wrong size");
        coupled_root = sym_sqrt(*options.coupled_kernel);
        batch.coupled.resize(count, batch.data.cols());
    }
    const Matrix f0 = input_layer(x);

    parallel_for(static_cast<std::size_t>(count), options.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t di = begin; di < end; ++di) {
            auto d = static_cast<Eigen::Index>(di);
            const std::uint64_t draw_seed = derive_seed(seed, di);
            Matrix f = f0;
            for (int l = 1; l <= layer; ++l) {
                Matrix g = apply_layer_map(spec, l, f);
                const double inv_n = 1.0 / spec.width(l - 1);
                if (options.record_kernels) {
                    Matrix a = inv_n * (g.transpose() * g);
                    for (Eigen::Index i = 0; i < a.rows(); ++i)
                        for (Eigen::Index j = 0; j < a.cols(); ++j) batch.kernels[l - 1](d, i * a.cols() + j) = a(i, j);
                }
                Philox rng(draw_seed, static_cast<std::uint64_t>(l));
                if (conditional) {
                    Matrix a = inv_n * (g.transpose() * g);
                    Matrix z(spec.width(l), g.cols());
                    fill_normal(z, rng, 1.0);
                    f = z * sym_sqrt(PsdMatrix::project(a)).matrix();
                    if (l == layer && options.coupled_kernel) store_row(batch.coupled, d, z * coupled_root);
                } else {
                    Matrix w(spec.width(l), g.rows());
                    fill_normal(w, rng, std::sqrt(inv_n));
                    f = w * g;
                }
            }
            store_row(batch.data, d, f);
        }
    });
    return batch;
}

}  // namespace widelimit
