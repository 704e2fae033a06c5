#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "widelimit/activation.hpp"
#include "widelimit/network.hpp"
#include "widelimit/psd_linalg.hpp"

namespace widelimit {

bool has_closed_form(const Activation& act);

// E[sigma(u) sigma(v)] for (u, v) ~ N(0, [[k11, k12], [k12, k22]]). Uses the
// closed form when one exists unless nodes > 0 forces quadrature.
double activation_pair_moment(const Activation& act, double k11, double k12, double k22, int nodes = 0);
double pair_moment_closed_form(const Activation& act, double k11, double k12, double k22);
double pair_moment_quadrature(const Activation& act, double k11, double k12, double k22, int nodes = 64);

struct KernelStack {
    std::vector<PsdMatrix> kernels;  // K^(1) .. K^(L)
    std::vector<double> lambda_min;
    std::vector<std::string> method;  // closed_form | quadrature | exact

    int depth() const { return static_cast<int>(kernels.size()); }
    const PsdMatrix& at(int layer) const { return kernels.at(layer - 1); }
};

struct KernelOptions {
    // 0 selects closed forms where available and the default node count otherwise.
    int quadrature_nodes = 0;
};

// One step of the recursion: tr_a E[sigma^(l)(N_prev)^{(x)2}], applied to an
// arbitrary PSD kernel on S_{l-1}. Layer 1 ignores prev and uses f^(0).
Matrix layer_kernel_map(const NetworkSpec& spec, int layer, const Matrix& prev, const InputSet& x,
                        int quadrature_nodes = 0);

KernelStack kernel_recursion(const NetworkSpec& spec, const InputSet& x, const KernelOptions& options = {});

struct LayerDegeneracy {
    int layer;
    double lambda_min;
    bool invertible;
};

struct NondegeneracyReport {
    std::vector<LayerDegeneracy> layers;
    bool nondegenerate = true;
};

// Invertible iff lambda_min(K^(l)) > tol * |K^(l)|_F.
NondegeneracyReport nondegeneracy_report(const KernelStack& stack, double tol = 1e-10);

// count draws of N(0, Id_rows (x) K): each draw is rows i.i.d. N(0, K) rows.
SampleBatch gp_sample(const PsdMatrix& kernel, int rows, Eigen::Index count, std::uint64_t seed, int threads = 1);

}  // namespace widelimit
