#include "widelimit/quadrature.hpp"

#include <map>
#include <memory>
#include <mutex>

#include "widelimit/errors.hpp"

namespace widelimit {

const GaussLegendre& gauss_legendre(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<GaussLegendre>> cache;
    if (n < 1) throw InvalidConfig("Gauss-Legendre rule needs at least one node");
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[n];
    if (!slot) {
        // Golub-Welsch: nodes are eigenvalues of the Jacobi matrix.
        Matrix jac = Matrix::Zero(n, n);
        for (int i = 1; i < n; ++i) {
            double b = i / std::sqrt(4.0 * i * i - 1.0);
            jac(i, i - 1) = b;
            jac(i - 1, i) = b;
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(jac);
        auto rule = std::make_unique<GaussLegendre>();
        rule->nodes.resize(n);
        rule->weights.resize(n);
        for (int i = 0; i < n; ++i) {
            rule->nodes[i] = es.eigenvalues()(i);
            double v = es.eigenvectors()(0, i);
            rule->weights[i] = 2.0 * v * v;
        }
        slot = std::move(rule);
    }
    return *slot;
}

int default_quadrature_nodes(int dim) {
    if (dim <= 2) return 64;
    if (dim == 3) return 32;
    return 16;
}

GaussianGrid::GaussianGrid(const Matrix& cov, std::vector<std::vector<double>> breakpoints, int nodes_per_piece,
                           double radius)
    : dim_(static_cast<int>(cov.rows())), radius_(radius), breakpoints_(std::move(breakpoints)) {
    if (cov.rows() != cov.cols()) throw ShapeMismatch("covariance must be square");
    if (dim_ > kMaxQuadratureDim)
        throw DimensionTooLarge("quadrature supports at most " + std::to_string(kMaxQuadratureDim) +
                                " dimensions, got " + std::to_string(dim_));
    breakpoints_.resize(dim_);

    coef_ = Matrix::Zero(dim_, dim_);
    Vector resid = cov.diagonal();
    std::vector<bool> used(dim_, false);
    double tol = 1e-13 * std::max(resid.cwiseAbs().maxCoeff(), 1e-300);
    for (int j = 0; j < dim_; ++j) {
        int q = -1;
        for (int p = 0; p < dim_; ++p)
            if (!used[p] && (q < 0 || resid(p) > resid(q))) q = p;
        if (q < 0 || resid(q) <= tol) break;
        double pivot = std::sqrt(resid(q));
        used[q] = true;
        coef_(q, j) = pivot;
        for (int p = 0; p < dim_; ++p) {
            if (used[p]) continue;
            double s = cov(p, q);
            for (int i = 0; i < j; ++i) s -= coef_(p, i) * coef_(q, i);
            coef_(p, j) = s / pivot;
            resid(p) -= coef_(p, j) * coef_(p, j);
        }
        rank_ = j + 1;
    }

    double cut = 1e-14 * std::sqrt(std::max(cov.diagonal().maxCoeff(), 1e-300));
    last_level_.assign(dim_, -1);
    for (int q = 0; q < dim_; ++q)
        for (int j = 0; j < rank_; ++j)
            if (std::abs(coef_(q, j)) > cut) last_level_[q] = j;

    nodes_ = nodes_per_piece > 0 ? nodes_per_piece : default_quadrature_nodes(std::max(rank_, 1));
    rule_ = &gauss_legendre(nodes_);
}

void GaussianGrid::pieces(int level, const std::array<double, kMaxQuadratureDim>& u, std::vector<double>& cuts) const {
    cuts.clear();
    cuts.push_back(-radius_);
    cuts.push_back(0.0);
    cuts.push_back(radius_);
    for (int q = 0; q < dim_; ++q) {
        if (last_level_[q] != level) continue;
        for (double b : breakpoints_[q]) {
            double z = (b - u[q]) / coef_(q, level);
            if (z > -radius_ && z < radius_) cuts.push_back(z);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
}

}  // namespace widelimit
