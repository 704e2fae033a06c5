#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "widelimit/psd_linalg.hpp"

namespace widelimit {

inline constexpr int kMaxQuadratureDim = 4;

struct GaussLegendre {
    std::vector<double> nodes;  // on [-1, 1]
    std::vector<double> weights;
};

// Cached per node count; safe to call concurrently.
const GaussLegendre& gauss_legendre(int n);

// Default nodes per piece for an integral of the given effective dimension.
int default_quadrature_nodes(int dim);

// Expectation over u ~ N(0, cov) for cov of dimension at most 4.
//
// cov = C C^T by pivoted Cholesky, so u_q = sum_j C(q, j) z_j with z standard.
// Each z_j is integrated over [-radius, radius] by composite Gauss-Legendre,
// split at 0 and at every z where a coordinate whose last nonzero
// coefficient sits at level j crosses one of its breakpoints. Integrands are
// then smooth on each piece.
class GaussianGrid {
public:
    GaussianGrid(const Matrix& cov, std::vector<std::vector<double>> breakpoints, int nodes_per_piece = 0,
                 double radius = 9.0);

    int dim() const { return dim_; }
    int rank() const { return rank_; }
    int nodes_per_piece() const { return nodes_; }

    // f(const double* u, double weight); weights sum to 1 up to truncation.
    template <class F>
    void visit(F&& f) const {
        std::array<double, kMaxQuadratureDim> u{};
        walk(0, u, 1.0, f);
    }

private:
    template <class F>
    void walk(int level, std::array<double, kMaxQuadratureDim>& u, double weight, F& f) const;
    void pieces(int level, const std::array<double, kMaxQuadratureDim>& u, std::vector<double>& cuts) const;

    int dim_ = 0;
    int rank_ = 0;
    int nodes_ = 0;
    double radius_ = 9.0;
    Matrix coef_;
    std::vector<int> last_level_;
    std::vector<std::vector<double>> breakpoints_;
    const GaussLegendre* rule_ = nullptr;
};

template <class F>
void GaussianGrid::walk(int level, std::array<double, kMaxQuadratureDim>& u, double weight, F& f) const {
    if (level == rank_) {
        f(u.data(), weight);
        return;
    }
    std::vector<double> cuts;
    pieces(level, u, cuts);
    const std::array<double, kMaxQuadratureDim> base = u;
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
        const double lo = cuts[p];
        const double hi = cuts[p + 1];
        const double half = 0.5 * (hi - lo);
        const double mid = 0.5 * (hi + lo);
        for (int i = 0; i < nodes_; ++i) {
            const double z = mid + half * rule_->nodes[i];
            const double w = half * rule_->weights[i] * inv_sqrt_2pi * std::exp(-0.5 * z * z);
            for (int q = 0; q < dim_; ++q) u[q] = base[q] + coef_(q, level) * z;
            walk(level + 1, u, weight * w, f);
        }
    }
    u = base;
}

}  // namespace widelimit
