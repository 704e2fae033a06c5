#pragma once

#include <cstdint>
#include <vector>

#include "widelimit/network.hpp"
#include "widelimit/nngp.hpp"
#include "widelimit/psd_linalg.hpp"
#include "widelimit/test_function.hpp"

namespace widelimit {

struct MomentMethod {
    enum class Kind { Quadrature, MonteCarlo };
    Kind kind = Kind::Quadrature;
    int nodes = 0;  // 0 picks the default for the dimension
    Eigen::Index samples = 0;
    std::uint64_t seed = 0;

    static MomentMethod quadrature(int nodes = 0) { return {Kind::Quadrature, nodes, 0, 0}; }
    static MomentMethod monte_carlo(Eigen::Index samples, std::uint64_t seed) {
        return {Kind::MonteCarlo, 0, samples, seed};
    }
};

struct MomentEstimate {
    Matrix value;
    Matrix stderr_;  // entrywise; zero for quadrature
};

// M_h(A) = E[h(N_A) h(N_A)^T], a T x T matrix.
MomentEstimate moment_M(const PsdMatrix& a, const TestFunction& h, const MomentMethod& method = {});

// V_h(A) = Cov(vec h(N_A) h(N_A)^T) on (T x T) x (T x T); pair (a, b) sits
// at index a * T + b.
MomentEstimate moment_V(const PsdMatrix& a, const TestFunction& h, const MomentMethod& method = {});

double default_diff_eps(const PsdMatrix& a, const Matrix& b);

// Central difference (M_h(A + eps B) - M_h(A - eps B)) / (2 eps). eps <= 0
// selects default_diff_eps. Throws SingularBasePoint unless A is invertible.
Matrix diff_M(const PsdMatrix& a, const Matrix& b, const TestFunction& h, double eps = 0.0, int nodes = 0);

struct FluctuationModel {
    int layer = 0;
    int width = 0;
    Matrix mean;   // M_h(K^(l)), T x T
    Matrix sigma;  // Sigma_h^(l), T^2 x T^2
    double trace = 0.0;
};

struct SigmaOptions {
    int nodes = 0;
    // Push the lower layers through the generic layer map and tr_{a x a}
    // instead of the componentwise shortcut available for lifted networks.
    bool generic = false;
};

// Sigma_h^(l) for l = 1..L. The lower-layer covariance V_l of the kernel
// fluctuation enters as sum_c D M_h(K^(l))[B_c] (x) D M_h(K^(l))[B_c] over the
// columns B_c of sqrt(V_l), which is Cov(D M_h(K^(l)) N_{V_l}).
std::vector<FluctuationModel> sigma_recursion(const NetworkSpec& spec, const KernelStack& stack, const TestFunction& h,
                                              const SigmaOptions& options = {});

struct EmpiricalKernel {
    Matrix per_draw;     // N x T^2
    Matrix mean;         // T x T
    Matrix mean_stderr;  // T x T
    Matrix covariance;   // T^2 x T^2 across draws
};

// T_n = (1/rows) sum_i h(f[i, :]) h(f[i, :])^T for every draw of the batch.
EmpiricalKernel empirical_kernel(const SampleBatch& batch, const TestFunction& h);

// Jacobian of the layer kernel map F_l at prev, as a k^2 x k^2 matrix acting
// on row-major vec of symmetric matrices.
Matrix layer_jacobian(const NetworkSpec& spec, int layer, const PsdMatrix& prev, const InputSet& x, int nodes = 0);

// Per-draw unbiased estimates of E[A_L] (the output covariance per neuron)
// from a batch sampled with record_kernels. With J_l the layer Jacobians at
// the limiting kernels:
//   d_1 = 0,  d_l = J_l d_{l-1} + vec(A_l - F_l(A_{l-1})),
//   estimate = F_L(A_{L-1}) - J_L d_{L-1}.
// Every correction term has conditional mean zero, and the first-order
// fluctuation cancels, leaving O(1/n^2) variance. Returns N x k^2.
Matrix control_variate_kernels(const NetworkSpec& spec, const KernelStack& stack, const InputSet& x,
                               const SampleBatch& batch, int nodes = 24, int threads = 1);

}  // namespace widelimit
