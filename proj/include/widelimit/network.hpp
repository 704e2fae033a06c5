#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "widelimit/activation.hpp"
#include "widelimit/psd_linalg.hpp"
#include "widelimit/test_function.hpp"

namespace widelimit {

// Input set X: one point per row (k x d0).
using InputSet = Matrix;

// Generalized architecture. Layer l maps f^(l-1) in R^{n_{l-1} x S_{l-1}} to
// f^(l) = (W^(l) (x) Id_{S_l}) sigma^(l)(f^(l-1)), where sigma^(l) acts on each
// row and returns an a_l x S_l block. n_0 = 1.
struct NetworkSpec {
    int depth = 0;
    int input_dim = 0;
    int k = 0;
    std::vector<int> widths;     // n_1 .. n_L
    std::vector<int> aux_sizes;  // |S_0| .. |S_L|
    std::vector<int> aux_dims;   // a_1 .. a_L
    std::vector<TestFunction> layer_maps;
    // Present for fully connected lifts; enables closed-form kernels.
    std::optional<Activation> activation;

    int width(int layer) const { return layer == 0 ? 1 : widths.at(layer - 1); }
    void validate() const;
};

NetworkSpec lift_fully_connected(int depth, int input_dim, const std::vector<int>& widths, const Activation& activation,
                                 int k);

// Same architecture with different widths.
NetworkSpec with_widths(const NetworkSpec& spec, const std::vector<int>& widths);

// f^(0): a 1 x (d0 k) row with entry c*k + i equal to x_i[c].
Matrix input_layer(const InputSet& x);
bool has_duplicate_points(const InputSet& x);

struct WeightSet {
    std::vector<Matrix> layers;  // W^(l): n_l x (n_{l-1} a_l)
    std::uint64_t seed = 0;
};

// Entries are N(0, 1/n_{l-1}); layer l draws from Philox stream l of the seed.
WeightSet sample_weights(const NetworkSpec& spec, std::uint64_t seed);

struct LayerOutputs {
    std::vector<Matrix> f;  // f^(0) .. f^(L), neuron-major
};

LayerOutputs forward(const NetworkSpec& spec, const WeightSet& weights, const InputSet& x);

// sigma^(l) applied to every row of f^(l-1), stacked into (n_{l-1} a_l) x S_l.
Matrix apply_layer_map(const NetworkSpec& spec, int layer, const Matrix& prev);

enum class SamplingMode {
    // Explicit weights, then forward().
    Weights,
    // Rows of f^(l) given f^(l-1) are i.i.d. N(0, A_l) with
    // A_l = (1/n_{l-1}) G^T G and G = apply_layer_map(l, f^(l-1)). Same law,
    // O(n k) per layer instead of O(n^2 k).
    Conditional,
};

struct SampleOptions {
    SamplingMode mode = SamplingMode::Conditional;
    int threads = 1;
    bool record_kernels = false;
    // Conditional mode only: also emit Z sqrt(K) with the same output noise Z.
    std::optional<Matrix> coupled_kernel;
};

struct SampleBatch {
    int rows = 0;
    int cols = 0;
    Matrix data;  // draw d, entry (i, s) at column i * cols + s
    // kernels[l - 1] row d is A_l of draw d, flattened row-major.
    std::vector<Matrix> kernels;
    Matrix coupled;

    Eigen::Index count() const { return data.rows(); }
    Matrix draw(Eigen::Index d) const;
};

// Draw d uses seed derive_seed(seed, d), so batches do not depend on the
// number of threads.
SampleBatch sample_outputs(const NetworkSpec& spec, const InputSet& x, int layer, Eigen::Index count,
                           std::uint64_t seed, const SampleOptions& options = {});

}  // namespace widelimit
