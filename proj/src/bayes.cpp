#include "widelimit/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "widelimit/errors.hpp"
#include "widelimit/rng.hpp"

namespace widelimit {

InputSet Dataset::joint() const {
    InputSet x(train_x.rows() + test_x.rows(), train_x.cols());
    x << train_x, test_x;
    return x;
}

void Dataset::validate() const {
    if (train_x.rows() < 1 || test_x.rows() < 1) throw InvalidConfig("dataset needs training and test points");
    if (train_x.cols() != test_x.cols() || train_x.cols() < 1)
        throw InvalidConfig("training and test inputs have different dimensions");
    if (train_y.rows() != train_x.rows() || train_y.cols() < 1)
        throw InvalidConfig("every training input needs a target");
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream in(line);
    std::string cell;
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& text, const std::string& path, int line) {
    try {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw InvalidConfig(path + ":" + std::to_string(line) + ": bad number '" + text + "'");
    }
}

}  // namespace

Dataset Dataset::from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open dataset file " + path);
    std::string line;
    if (!std::getline(in, line)) throw InvalidConfig(path + ": empty dataset file");
    auto header = split_csv(line);
    if (header.empty() || header[0] != "role") throw InvalidConfig(path + ": first column must be 'role'");
    int d0 = 0, ny = 0;
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (header[c].rfind('x', 0) == 0)
            ++d0;
        else if (header[c].rfind('y', 0) == 0)
            ++ny;
        else
            throw InvalidConfig(path + ": unexpected column '" + header[c] + "'");
    }
    std::vector<std::vector<double>> tx, ty, sx;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw InvalidConfig(path + ":" + std::to_string(lineno) + ": wrong column count");
        std::vector<double> x, y;
        for (int c = 0; c < d0; ++c) x.push_back(parse_cell(cells[1 + c], path, lineno));
        if (cells[0] == "train") {
            for (int c = 0; c < ny; ++c) y.push_back(parse_cell(cells[1 + d0 + c], path, lineno));
            tx.push_back(x);
            ty.push_back(y);
        } else if (cells[0] == "test") {
            sx.push_back(x);
        } else {
            throw InvalidConfig(path + ":" + std::to_string(lineno) + ": role must be train or test");
        }
    }
    auto to_matrix = [](const std::vector<std::vector<double>>& rows, int cols) {
        Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (int c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), c) = rows[i][c];
        return m;
    };
    Dataset data{to_matrix(tx, d0), to_matrix(ty, ny), to_matrix(sx, d0)};
    data.validate();
    return data;
}

LikelihoodSpec LikelihoodSpec::gaussian() {
    LikelihoodSpec lik;
    lik.lipschitz = std::sqrt(2.0 / std::exp(1.0));
    return lik;
}

LikelihoodSpec LikelihoodSpec::custom(std::function<double(const Matrix&)> log_g, double lipschitz, double sup) {
    if (!log_g) throw InvalidConfig("custom likelihood needs a callable");
    if (!(lipschitz >= 0.0) || !(sup > 0.0)) throw InvalidConfig("custom likelihood needs Lip(g) >= 0 and sup g > 0");
    LikelihoodSpec lik;
    lik.form = Form::CustomLipschitz;
    lik.log_g = std::move(log_g);
    lik.lipschitz = lipschitz;
    lik.sup = sup;
    return lik;
}

double LikelihoodSpec::log_value(const Matrix& z, const Dataset& data) const {
    if (form == Form::CustomLipschitz) return log_g(z);
    // z is n_L x |D|; targets are stored |D| x n_L.
    return -(z - data.train_y.transpose()).squaredNorm();
}

double LikelihoodSpec::lipschitz_constant() const {
    return lipschitz;
}

GaussianLaw GpPosterior::law(bool test_only) const {
    const Eigen::Index nl = mean.rows();
    const Eigen::Index start = test_only ? train_size : 0;
    const Eigen::Index m = mean.cols() - start;
    Vector mu(nl * m);
    for (Eigen::Index i = 0; i < nl; ++i)
        for (Eigen::Index t = 0; t < m; ++t) mu(i * m + t) = mean(i, start + t);
    Matrix c = cov.matrix().block(start, start, m, m);
    return {mu, PsdMatrix::project(kron_identity(static_cast<int>(nl), c))};
}

namespace {

struct Conditioned {
    Matrix mean;          // n_L x |X|
    Matrix cov;           // |X| x |X|
    double log_marginal;  // log E[g] under N(0, K)
};

Conditioned condition(const Matrix& k, const Dataset& data, double noise_var) {
    const Eigen::Index nd = data.train_size();
    Matrix s = k.topLeftCorner(nd, nd);
    s.diagonal().array() += noise_var;
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) throw SingularSystem("K_DD + noise I is not positive definite");
    const Matrix kxd = k.leftCols(nd);
    const Matrix y = data.train_y;  // |D| x n_L
    const Matrix alpha = llt.solve(y);
    Conditioned out;
    out.mean = (kxd * alpha).transpose();
    out.cov = k - kxd * llt.solve(kxd.transpose());
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    // With g = exp(-|z - y|^2 / (2 noise_var)) per output coordinate,
    // log E[g] = -(logdet S - |D| log noise_var) / 2 - y^T S^{-1} y / 2.
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    double lm = 0.0;
    for (Eigen::Index i = 0; i < y.cols(); ++i)
        lm -= 0.5 * (logdet - static_cast<double>(nd) * std::log(noise_var)) + 0.5 * y.col(i).dot(alpha.col(i));
    out.log_marginal = lm;
    return out;
}

}  // namespace

GpPosterior gp_posterior(const PsdMatrix& k, const Dataset& data, double noise_var) {
    data.validate();
    if (!(noise_var > 0.0)) throw InvalidConfig("noise variance must be positive");
    const Eigen::Index nx = data.train_size() + data.test_size();
    if (k.dim() != nx) throw ShapeMismatch("kernel does not cover the joint input set");
    Conditioned c = condition(k.matrix(), data, noise_var);
    return {c.mean, PsdMatrix::project(c.cov), data.train_size()};
}

double gaussian_likelihood_normalizer(const Matrix& k, const Dataset& data) {
    return std::exp(condition(k, data, kGaussianLikelihoodNoise).log_marginal);
}

Vector WeightedSamples::mean() const {
    return points.transpose() * weights;
}

Matrix WeightedSamples::covariance() const {
    Vector m = mean();
    Matrix c = points.rowwise() - m.transpose();
    return c.transpose() * weights.asDiagonal() * c;
}

std::pair<Vector, Matrix> WeightedSamples::moment_stderr(int blocks) const {
    const Eigen::Index n = points.rows();
    if (blocks < 2 || n < blocks) throw InsufficientReplicas("not enough samples for blocked standard errors");
    const Vector m = mean();
    const Matrix c = covariance();
    Vector sm = Vector::Zero(m.size());
    Matrix sc = Matrix::Zero(c.rows(), c.cols());
    // Each block is a self-normalized estimator on its own slice.
    for (int b = 0; b < blocks; ++b) {
        Eigen::Index lo = n * b / blocks, hi = n * (b + 1) / blocks;
        Vector w = weights.segment(lo, hi - lo);
        double total = w.sum();
        if (total <= 0.0) continue;
        w /= total;
        Matrix p = points.middleRows(lo, hi - lo);
        Vector mb = p.transpose() * w;
        Matrix cen = p.rowwise() - mb.transpose();
        Matrix cb = cen.transpose() * w.asDiagonal() * cen;
        sm.array() += (mb - m).array().square();
        sc.array() += (cb - c).array().square();
    }
    const double f = 1.0 / (blocks * (blocks - 1.0));
    return {(sm * f).cwiseSqrt(), (sc * f).cwiseSqrt()};
}

namespace {

WeightedSamples normalize(Matrix points, const Vector& logw) {
    const double top = logw.maxCoeff();
    if (!std::isfinite(top)) throw VanishingLikelihood("likelihood vanishes on every sample");
    // std::exp per entry: the vectorized exp flushes -inf to a denormal, not 0.
    Vector w = (logw.array() - top).unaryExpr([](double v) { return std::exp(v); });
    const double total = w.sum();
    WeightedSamples ws;
    ws.points = std::move(points);
    ws.weights = w / total;
    ws.ess = 1.0 / ws.weights.squaredNorm();
    ws.mean_likelihood = std::exp(top) * total / static_cast<double>(w.size());
    return ws;
}

}  // namespace

WeightedSamples reweighted_posterior(const SampleBatch& batch, const LikelihoodSpec& lik, const Dataset& data) {
    data.validate();
    const int nx = data.train_size() + data.test_size();
    if (batch.cols != nx) throw ShapeMismatch("batch does not cover the joint input set");
    if (lik.form == LikelihoodSpec::Form::GaussianSquaredError && batch.rows != data.output_dim())
        throw ShapeMismatch("batch output width does not match the targets");
    const Eigen::Index n = batch.count();
    Vector logw(n);
    Matrix z(batch.rows, data.train_size());
    for (Eigen::Index d = 0; d < n; ++d) {
        for (int i = 0; i < batch.rows; ++i)
            for (int t = 0; t < data.train_size(); ++t) z(i, t) = batch.data(d, i * nx + t);
        logw(d) = lik.log_value(z, data);
    }
    return normalize(batch.data, logw);
}

WeightedSamples restrict_to_test(const WeightedSamples& ws, const Dataset& data) {
    const int nx = data.train_size() + data.test_size();
    const int nt = data.test_size();
    if (ws.points.cols() % nx != 0) throw ShapeMismatch("weighted samples do not cover the joint input set");
    const Eigen::Index rows = ws.points.cols() / nx;
    WeightedSamples out = ws;
    out.points.resize(ws.points.rows(), rows * nt);
    for (Eigen::Index i = 0; i < rows; ++i)
        out.points.middleCols(i * nt, nt) = ws.points.middleCols(i * nx + data.train_size(), nt);
    return out;
}

GaussianMixture conditional_gaussian_posterior(const Matrix& kernels, const Dataset& data) {
    data.validate();
    const Eigen::Index nx = data.train_size() + data.test_size();
    if (kernels.cols() != nx * nx) throw ShapeMismatch("kernels do not cover the joint input set");
    const Eigen::Index n = kernels.rows();
    const int nl = data.output_dim();
    GaussianMixture mix;
    Vector logw(n);
    Matrix k(nx, nx);
    for (Eigen::Index d = 0; d < n; ++d) {
        for (Eigen::Index i = 0; i < nx; ++i)
            for (Eigen::Index j = 0; j < nx; ++j) k(i, j) = kernels(d, i * nx + j);
        Conditioned c = condition(k, data, kGaussianLikelihoodNoise);
        logw(d) = c.log_marginal;
        Vector mu(nl * nx);
        for (int i = 0; i < nl; ++i)
            for (Eigen::Index t = 0; t < nx; ++t) mu(i * nx + t) = c.mean(i, t);
        mix.means.push_back(std::move(mu));
        mix.roots.push_back(sym_sqrt(PsdMatrix::project(c.cov)).matrix());
    }
    WeightedSamples ws = normalize(Matrix::Zero(n, 1), logw);
    mix.weights = ws.weights;
    mix.ess = ws.ess;
    mix.mean_likelihood = ws.mean_likelihood;
    return mix;
}

namespace {

std::vector<Eigen::Index> multinomial(const Vector& weights, Eigen::Index m, Philox& rng) {
    std::vector<double> cum(static_cast<std::size_t>(weights.size()));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) cum[i] = (acc += weights(i));
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
    for (auto& j : idx) {
        double u = rng.uniform() * acc;
        auto it = std::upper_bound(cum.begin(), cum.end(), u);
        j = std::min<Eigen::Index>(it - cum.begin(), weights.size() - 1);
    }
    return idx;
}

Matrix gather(const Matrix& points, const std::vector<Eigen::Index>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), points.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = points.row(idx[i]);
    return out;
}

W1Estimate summarize(std::vector<double> values) {
    W1Estimate est;
    const double r = static_cast<double>(values.size());
    for (double v : values) est.mean += v / r;
    double ss = 0.0;
    for (double v : values) ss += (v - est.mean) * (v - est.mean);
    est.stderr_ = values.size() > 1 ? std::sqrt(ss / (r - 1.0) / r) : 0.0;
    est.values = std::move(values);
    return est;
}

void check_resample(Eigen::Index m, int reps) {
    if (m < 1 || m > kMaxAssignmentSize) throw InvalidConfig("resample size must lie in [1, 4096]");
    if (reps < 1) throw InvalidConfig("posterior_w1 needs at least one repetition");
}

}  // namespace

W1Estimate posterior_w1(const WeightedSamples& a, const WeightedSamples& b, Eigen::Index m, std::uint64_t seed,
                        int repetitions) {
    check_resample(m, repetitions);
    std::vector<double> values;
    for (int r = 0; r < repetitions; ++r) {
        Philox ra(derive_seed(seed, static_cast<std::uint64_t>(r)), 0);
        Philox rb(derive_seed(seed, static_cast<std::uint64_t>(r)), 0);
        Matrix pa = gather(a.points, multinomial(a.weights, m, ra));
        Matrix pb = gather(b.points, multinomial(b.weights, m, rb));
        values.push_back(empirical_wp(pa, pb, 1.0));
    }
    return summarize(std::move(values));
}

W1Estimate posterior_w1(const WeightedSamples& a, const GaussianLaw& b, Eigen::Index m, std::uint64_t seed,
                        int repetitions) {
    check_resample(m, repetitions);
    if (a.points.cols() != b.mean.size()) throw SizeMismatch("posterior laws have different dimensions");
    const Matrix root = sym_sqrt(b.cov).matrix();
    std::vector<double> values;
    for (int r = 0; r < repetitions; ++r) {
        const std::uint64_t key = derive_seed(seed, static_cast<std::uint64_t>(r));
        Philox ra(key, 0);
        Philox rg(key, 1);
        Matrix pa = gather(a.points, multinomial(a.weights, m, ra));
        std::normal_distribution<double> normal;
        Matrix z(m, b.mean.size());
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = normal(rg);
        Matrix pb = (z * root).rowwise() + b.mean.transpose();
        values.push_back(empirical_wp(pa, pb, 1.0));
    }
    return summarize(std::move(values));
}

W1Estimate posterior_w1(const GaussianMixture& a, const GaussianLaw& b, Eigen::Index m, std::uint64_t seed,
                        int repetitions) {
    check_resample(m, repetitions);
    if (a.means.empty() || a.means.front().size() != b.mean.size())
        throw SizeMismatch("posterior laws have different dimensions");
    const Matrix root = sym_sqrt(b.cov).matrix();
    const Eigen::Index dim = b.mean.size();
    const Eigen::Index block = a.roots.front().rows();
    const Eigen::Index outputs = dim / block;
    std::vector<double> values;
    for (int r = 0; r < repetitions; ++r) {
        const std::uint64_t key = derive_seed(seed, static_cast<std::uint64_t>(r));
        Philox ra(key, 0);
        Philox rg(key, 1);
        auto idx = multinomial(a.weights, m, ra);
        std::normal_distribution<double> normal;
        Matrix pa(m, dim), pb(m, dim);
        Vector z(dim);
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < dim; ++j) z(j) = normal(rg);
            const auto& rj = a.roots[static_cast<std::size_t>(idx[i])];
            Vector x = a.means[static_cast<std::size_t>(idx[i])];
            for (Eigen::Index o = 0; o < outputs; ++o) x.segment(o * block, block) += rj * z.segment(o * block, block);
            pa.row(i) = x.transpose();
            pb.row(i) = (root * z + b.mean).transpose();
        }
        values.push_back(empirical_wp(pa, pb, 1.0));
    }
    return summarize(std::move(values));
}

double bayes_bound_constant(double mu_g, double nu_g, double lip_g, double sup_g, double m1_mu, double mpprime_mu,
                            double wp_prior, double p) {
    if (!(mu_g > 0.0) || !(nu_g > 0.0)) throw NonpositiveNormalizer("mu(g) and nu(g) must be positive");
    if (!(p >= 1.0)) throw DomainError("p must be at least 1");
    return (lip_g * mpprime_mu + (1.0 + m1_mu * lip_g / nu_g) * sup_g) * wp_prior / mu_g;
}

}  // namespace widelimit
