#include "widelimit/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "widelimit/errors.hpp"

namespace widelimit {

std::vector<int> solve_assignment(const Matrix& cost) {
    if (cost.rows() != cost.cols()) throw SizeMismatch("assignment cost matrix must be square");
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based potentials; p[j] is the row matched to column j, row 0 is virtual.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n);
    for (int j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

namespace {

bool lex_less(const Matrix& a, const Matrix& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

double wp_ordered(const Matrix& a, const Matrix& b, double p) {
    const Eigen::Index n = a.rows();
    std::vector<double> terms(static_cast<std::size_t>(n));
    if (a.cols() == 1) {
        std::vector<double> x(a.data(), a.data() + n), y(b.data(), b.data() + n);
        std::sort(x.begin(), x.end());
        std::sort(y.begin(), y.end());
        for (Eigen::Index i = 0; i < n; ++i) terms[i] = std::pow(std::abs(x[i] - y[i]), p);
    } else {
        if (n > kMaxAssignmentSize)
            throw SizeMismatch("assignment solver is limited to " + std::to_string(kMaxAssignmentSize) + " points");
        Matrix cost(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = std::pow((a.row(i) - b.row(j)).norm(), p);
        auto match = solve_assignment(cost);
        for (Eigen::Index i = 0; i < n; ++i) terms[i] = cost(i, match[i]);
    }
    std::sort(terms.begin(), terms.end());
    double total = 0.0;
    for (double t : terms) total += t;
    return std::pow(total / static_cast<double>(n), 1.0 / p);
}

}  // namespace

double empirical_wp(const EmpiricalMeasure& a, const EmpiricalMeasure& b, double p) {
    if (a.rows() != b.rows()) throw SizeMismatch("empirical measures must have the same number of points");
    if (a.cols() != b.cols()) throw SizeMismatch("empirical measures must have the same dimension");
    if (a.rows() < 1 || a.cols() < 1) throw SizeMismatch("empirical measures must be nonempty");
    if (!(p >= 1.0)) throw DomainError("W_p needs p >= 1");
    // Fixed argument order makes the result exactly symmetric.
    return lex_less(b, a) ? wp_ordered(b, a, p) : wp_ordered(a, b, p);
}

namespace {

// tr sqrt(sqrt(B) A sqrt(B)). Eigenvalues within roundoff of zero are dropped,
// since sqrt would amplify them to O(sqrt(eps)).
double bures_cross(const PsdMatrix& a, const PsdMatrix& b) {
    const Matrix rb = sym_sqrt(b).matrix();
    const Matrix inner = rb * a.matrix() * rb;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
    const Vector& ev = es.eigenvalues();
    const double floor = ev.size() * std::numeric_limits<double>::epsilon() * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
    double cross = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev(i) > floor) cross += std::sqrt(ev(i));
    return cross;
}

}  // namespace

double w2_gaussian(const GaussianLaw& g1, const GaussianLaw& g2) {
    if (g1.mean.size() != g2.mean.size() || g1.cov.dim() != g2.cov.dim())
        throw SizeMismatch("Gaussian laws have different dimensions");
    // Averaging both orderings makes the result exactly symmetric.
    const double cross = 0.5 * (bures_cross(g1.cov, g2.cov) + bures_cross(g2.cov, g1.cov));
    const double sq =
        (g1.mean - g2.mean).squaredNorm() + g1.cov.matrix().trace() + g2.cov.matrix().trace() - 2.0 * cross;
    return std::sqrt(std::max(sq, 0.0));
}

GaussianGaps gaussian_upper_bound_parts(const GaussianLaw& g1, const GaussianLaw& g2) {
    if (g1.mean.size() != g2.mean.size() || g1.cov.dim() != g2.cov.dim())
        throw SizeMismatch("Gaussian laws have different dimensions");
    return {(g1.mean - g2.mean).norm(), (sym_sqrt(g1.cov).matrix() - sym_sqrt(g2.cov).matrix()).norm()};
}

Matrix kron_identity(int rows, const Matrix& k) {
    const Eigen::Index s = k.rows();
    Matrix out = Matrix::Zero(rows * s, rows * s);
    for (int i = 0; i < rows; ++i) out.block(i * s, i * s, s, s) = k;
    return out;
}

GaussianLaw empirical_gaussian(const Matrix& samples) {
    const Eigen::Index n = samples.rows();
    Vector mean = samples.colwise().mean().transpose();
    Matrix centered = samples.rowwise() - mean.transpose();
    Matrix cov =
        n > 1 ? Matrix(centered.transpose() * centered / (n - 1.0)) : Matrix::Zero(samples.cols(), samples.cols());
    return {mean, PsdMatrix::project(cov)};
}

PluginDistance plugin_gaussian_distance(const Vector& mean, const Matrix& cov, const PsdMatrix& k_target, int rows) {
    const Matrix target = kron_identity(rows, k_target.matrix());
    if (mean.size() != target.rows()) throw ShapeMismatch("sample dimension does not match rows x |K|");
    GaussianLaw g1{mean, PsdMatrix::project(cov)};
    GaussianLaw g2{Vector::Zero(mean.size()), PsdMatrix::project(target)};
    return {w2_gaussian(g1, g2), gaussian_upper_bound_parts(g1, g2), false};
}

PluginDistance plugin_gaussian_distance(const Matrix& samples, const PsdMatrix& k_target, int rows) {
    GaussianLaw g = empirical_gaussian(samples);
    PluginDistance out = plugin_gaussian_distance(g.mean, g.cov.matrix(), k_target, rows);
    out.insufficient_samples = samples.rows() < samples.cols() + 1;
    return out;
}

}  // namespace widelimit
