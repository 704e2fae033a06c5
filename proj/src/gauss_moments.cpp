#include "widelimit/gauss_moments.hpp"

#include <cmath>
#include <random>
#include <string>

#include "widelimit/errors.hpp"
#include "widelimit/parallel.hpp"
#include "widelimit/quadrature.hpp"
#include "widelimit/rng.hpp"

namespace widelimit {

namespace {

constexpr int kBatches = 20;

// Accumulates E[h h^T] and, when fourth is set, E[vec(hh^T) vec(hh^T)^T].
struct SecondFourth {
    Matrix second;
    Matrix fourth;
};

Vector vec_outer(const Vector& v) {
    const Eigen::Index t = v.size();
    Vector out(t * t);
    for (Eigen::Index a = 0; a < t; ++a)
        for (Eigen::Index b = 0; b < t; ++b) out(a * t + b) = v(a) * v(b);
    return out;
}

SecondFourth quadrature_moments(const Matrix& a, const TestFunction& h, bool fourth, int nodes) {
    if (a.rows() != h.in_dim) throw ShapeMismatch("covariance dimension does not match the test function");
    GaussianGrid grid(a, h.breakpoints, nodes);
    const Eigen::Index t = h.out_dim;
    SecondFourth acc{Matrix::Zero(t, t), fourth ? Matrix::Zero(t * t, t * t) : Matrix()};
    Vector out(t);
    grid.visit([&](const double* u, double w) {
        h.map(u, out.data());
        acc.second.noalias() += w * out * out.transpose();
        if (fourth) {
            Vector q = vec_outer(out);
            acc.fourth.noalias() += w * q * q.transpose();
        }
    });
    return acc;
}

Matrix symmetrize(const Matrix& m) {
    return 0.5 * (m + m.transpose());
}

}  // namespace

MomentEstimate moment_M(const PsdMatrix& a, const TestFunction& h, const MomentMethod& method) {
    if (method.kind == MomentMethod::Kind::Quadrature) {
        auto acc = quadrature_moments(a.matrix(), h, false, method.nodes);
        Matrix m = symmetrize(acc.second);
        return {m, Matrix::Zero(m.rows(), m.cols())};
    }
    if (a.dim() != h.in_dim) throw ShapeMismatch("covariance dimension does not match the test function");
    const Eigen::Index t = h.out_dim;
    if (method.samples < kBatches) throw InvalidConfig("Monte-Carlo moments need at least 20 samples");
    const Matrix root = sym_sqrt(a).matrix();
    Philox rng(method.seed, 0);
    std::normal_distribution<double> normal;
    Vector z(a.dim()), out(t);
    Matrix total = Matrix::Zero(t, t);
    std::vector<Matrix> batch(kBatches, Matrix::Zero(t, t));
    for (Eigen::Index s = 0; s < method.samples; ++s) {
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
        Vector u = root * z;
        h.map(u.data(), out.data());
        batch[static_cast<std::size_t>(s % kBatches)].noalias() += out * out.transpose();
    }
    Matrix sq = Matrix::Zero(t, t);
    const double per = static_cast<double>(method.samples) / kBatches;
    for (auto& b : batch) {
        total += b;
        b /= per;
    }
    Matrix mean = total / static_cast<double>(method.samples);
    for (auto& b : batch) sq.array() += (b - mean).array().square();
    Matrix se = (sq / (kBatches * (kBatches - 1.0))).cwiseSqrt();
    return {symmetrize(mean), se};
}

MomentEstimate moment_V(const PsdMatrix& a, const TestFunction& h, const MomentMethod& method) {
    const Eigen::Index t = h.out_dim;
    if (method.kind == MomentMethod::Kind::Quadrature) {
        auto acc = quadrature_moments(a.matrix(), h, true, method.nodes);
        Vector m = vec_outer(Vector::Zero(t));
        Matrix second = symmetrize(acc.second);
        for (Eigen::Index i = 0; i < t; ++i)
            for (Eigen::Index j = 0; j < t; ++j) m(i * t + j) = second(i, j);
        Matrix v = symmetrize(acc.fourth - m * m.transpose());
        return {v, Matrix::Zero(v.rows(), v.cols())};
    }
    if (a.dim() != h.in_dim) throw ShapeMismatch("covariance dimension does not match the test function");
    if (method.samples < kBatches) throw InvalidConfig("Monte-Carlo moments need at least 20 samples");
    const Matrix root = sym_sqrt(a).matrix();
    Philox rng(method.seed, 0);
    std::normal_distribution<double> normal;
    Vector z(a.dim()), out(t);
    std::vector<Vector> bsum(kBatches, Vector::Zero(t * t));
    std::vector<Matrix> bsq(kBatches, Matrix::Zero(t * t, t * t));
    for (Eigen::Index s = 0; s < method.samples; ++s) {
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
        Vector u = root * z;
        h.map(u.data(), out.data());
        Vector q = vec_outer(out);
        auto b = static_cast<std::size_t>(s % kBatches);
        bsum[b] += q;
        bsq[b].noalias() += q * q.transpose();
    }
    const double n = static_cast<double>(method.samples);
    Vector mean = Vector::Zero(t * t);
    Matrix sq = Matrix::Zero(t * t, t * t);
    for (int b = 0; b < kBatches; ++b) {
        mean += bsum[b];
        sq += bsq[b];
    }
    mean /= n;
    Matrix v = symmetrize(sq / n - mean * mean.transpose()) * (n / (n - 1.0));
    // Batch estimates of V for the standard error.
    Matrix spread = Matrix::Zero(t * t, t * t);
    const double per = n / kBatches;
    for (int b = 0; b < kBatches; ++b) {
        Vector mb = bsum[b] / per;
        Matrix vb = bsq[b] / per - mb * mb.transpose();
        spread.array() += (vb - v).array().square();
    }
    return {v, (spread / (kBatches * (kBatches - 1.0))).cwiseSqrt()};
}

double default_diff_eps(const PsdMatrix& a, const Matrix& b) {
    double nb = b.norm();
    double lmin = a.spectral_floor();
    if (nb == 0.0) return 1e-4;
    return std::min(1e-4, lmin / (4.0 * nb));
}

Matrix diff_M(const PsdMatrix& a, const Matrix& b, const TestFunction& h, double eps, int nodes) {
    if (b.rows() != a.dim() || b.cols() != a.dim()) throw ShapeMismatch("direction has the wrong shape");
    if (!(a.spectral_floor() > kPsdTol * a.matrix().norm()))
        throw SingularBasePoint("differential of M_h needs an invertible base point");
    const Eigen::Index t = h.out_dim;
    if (b.norm() == 0.0) return Matrix::Zero(t, t);
    if (eps <= 0.0) eps = default_diff_eps(a, b);
    Matrix bs = symmetrize(b);
    Matrix plus = quadrature_moments(a.matrix() + eps * bs, h, false, nodes).second;
    Matrix minus = quadrature_moments(a.matrix() - eps * bs, h, false, nodes).second;
    return symmetrize((plus - minus) / (2.0 * eps));
}

namespace {

Vector vec(const Matrix& m) {
    Vector out(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out(i * m.cols() + j) = m(i, j);
    return out;
}

Matrix unvec(const Eigen::Ref<const Vector>& v, Eigen::Index rows) {
    Matrix m(rows, rows);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < rows; ++j) m(i, j) = v(i * rows + j);
    return m;
}

// Cov(D M_g(K) N_V) via the columns of sqrt(V).
Matrix pushed_covariance(const PsdMatrix& k, const Matrix& v, const TestFunction& g, int nodes) {
    const Eigen::Index t = g.out_dim;
    Matrix out = Matrix::Zero(t * t, t * t);
    if (v.norm() == 0.0) return out;
    Matrix root = sym_sqrt(PsdMatrix::project(v)).matrix();
    const double cut = 1e-14 * root.norm();
    for (Eigen::Index c = 0; c < root.cols(); ++c) {
        if (root.col(c).norm() <= cut) continue;
        Matrix b = unvec(root.col(c), k.dim());
        Vector d = vec(diff_M(k, b, g, 0.0, nodes));
        out.noalias() += d * d.transpose();
    }
    return out;
}

}  // namespace

std::vector<FluctuationModel> sigma_recursion(const NetworkSpec& spec, const KernelStack& stack, const TestFunction& h,
                                              const SigmaOptions& options) {
    spec.validate();
    if (stack.depth() != spec.depth) throw ShapeMismatch("kernel stack depth does not match the spec");
    std::vector<FluctuationModel> models;
    Matrix v_prev;  // covariance of the kernel fluctuation entering layer l
    for (int l = 1; l <= spec.depth; ++l) {
        const PsdMatrix& k = stack.at(l);
        const double n = spec.width(l);
        if (h.in_dim != k.dim()) throw ShapeMismatch("test function does not match S_l");
        MomentMethod quad = MomentMethod::quadrature(options.nodes);

        FluctuationModel fm;
        fm.layer = l;
        fm.width = spec.width(l);
        fm.mean = moment_M(k, h, quad).value;
        fm.sigma = moment_V(k, h, quad).value / n;
        if (l > 1) fm.sigma += pushed_covariance(k, v_prev, h, options.nodes);
        fm.sigma = PsdMatrix::project(fm.sigma).matrix();
        fm.trace = fm.sigma.trace();
        models.push_back(fm);

        if (l == spec.depth) break;
        // Fluctuation of A_{l+1} = tr_a Sigma^(l) of the next layer map.
        if (!options.generic && spec.activation) {
            TestFunction s = TestFunction::componentwise(*spec.activation, static_cast<int>(k.dim()));
            Matrix next = moment_V(k, s, quad).value / n;
            if (l > 1) next += pushed_covariance(k, v_prev, s, options.nodes);
            v_prev = next;
        } else {
            const TestFunction& s = spec.layer_maps[l];
            Matrix next = moment_V(k, s, quad).value / n;
            if (l > 1) next += pushed_covariance(k, v_prev, s, options.nodes);
            v_prev = partial_trace_pair(next, static_cast<std::size_t>(spec.aux_dims[l]),
                                        static_cast<std::size_t>(spec.aux_sizes[l + 1]));
        }
    }
    return models;
}

EmpiricalKernel empirical_kernel(const SampleBatch& batch, const TestFunction& h) {
    if (batch.cols != h.in_dim) throw ShapeMismatch("batch columns do not match the test function");
    const Eigen::Index n = batch.count();
    const Eigen::Index t = h.out_dim;
    EmpiricalKernel out;
    out.per_draw.resize(n, t * t);
    Vector in(batch.cols), hv(t);
    for (Eigen::Index d = 0; d < n; ++d) {
        Matrix acc = Matrix::Zero(t, t);
        for (int i = 0; i < batch.rows; ++i) {
            for (int s = 0; s < batch.cols; ++s) in(s) = batch.data(d, i * batch.cols + s);
            h.map(in.data(), hv.data());
            acc.noalias() += hv * hv.transpose();
        }
        acc /= batch.rows;
        out.per_draw.row(d) = vec(acc).transpose();
    }
    Vector mean = out.per_draw.colwise().mean().transpose();
    Matrix centered = out.per_draw.rowwise() - mean.transpose();
    out.covariance = n > 1 ? Matrix(centered.transpose() * centered / (n - 1.0)) : Matrix::Zero(t * t, t * t);
    out.mean = unvec(mean, t);
    Vector se = (out.covariance.diagonal() / static_cast<double>(n)).cwiseSqrt();
    out.mean_stderr = unvec(se, t);
    return out;
}

namespace {

int per_draw_nodes(const NetworkSpec& spec, int nodes) {
    return spec.activation && has_closed_form(*spec.activation) ? 0 : nodes;
}

}  // namespace

Matrix layer_jacobian(const NetworkSpec& spec, int layer, const PsdMatrix& prev, const InputSet& x, int nodes) {
    if (layer < 2) throw InvalidConfig("layer 1 does not depend on a previous kernel");
    const Eigen::Index s = prev.dim();
    if (!(prev.spectral_floor() > kPsdTol * prev.matrix().norm()))
        throw SingularBasePoint("layer Jacobian needs an invertible base kernel");
    const Eigen::Index t = spec.aux_sizes[layer];
    Matrix jac(t * t, s * s);
    for (Eigen::Index i = 0; i < s; ++i)
        for (Eigen::Index j = 0; j < s; ++j) {
            Matrix b = Matrix::Zero(s, s);
            b(i, j) += 0.5;
            b(j, i) += 0.5;
            const double eps = default_diff_eps(prev, b);
            Matrix plus = layer_kernel_map(spec, layer, prev.matrix() + eps * b, x, nodes);
            Matrix minus = layer_kernel_map(spec, layer, prev.matrix() - eps * b, x, nodes);
            jac.col(i * s + j) = vec((plus - minus) / (2.0 * eps));
        }
    return jac;
}

Matrix control_variate_kernels(const NetworkSpec& spec, const KernelStack& stack, const InputSet& x,
                               const SampleBatch& batch, int nodes, int threads) {
    const int L = spec.depth;
    if (static_cast<int>(batch.kernels.size()) != L)
        throw ShapeMismatch("batch must be sampled at the output layer with record_kernels");
    const Eigen::Index n = batch.count();
    const Eigen::Index k = spec.aux_sizes[L];
    Matrix out(n, k * k);
    if (L == 1) {
        for (Eigen::Index d = 0; d < n; ++d) out.row(d) = batch.kernels[0].row(d);
        return out;
    }
    for (int l = 1; l <= L; ++l)
        if (spec.aux_sizes[l] != k) throw ShapeMismatch("control variates need equal S_l across layers");
    // J_l for l = 3..L; J_2 multiplies d_1 = 0.
    std::vector<Matrix> jac(static_cast<std::size_t>(L + 1));
    for (int l = 3; l <= L; ++l) jac[l] = layer_jacobian(spec, l, stack.at(l - 1), x, 64);
    const int fnodes = per_draw_nodes(spec, nodes);
    // A_1 depends only on the inputs, so F_2(A_1) is a constant.
    const Matrix a1 = unvec(batch.kernels[0].row(0).transpose(), k);
    const Vector f2 = vec(layer_kernel_map(spec, 2, a1, x, fnodes));

    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t di = begin; di < end; ++di) {
            auto d = static_cast<Eigen::Index>(di);
            Vector delta = Vector::Zero(k * k);
            Vector f_prev = f2;  // F_l(A_{l-1}) for the current l
            for (int l = 2; l < L; ++l) {
                Vector a_l = batch.kernels[l - 1].row(d).transpose();
                delta = (l == 2 ? Vector::Zero(k * k) : Vector(jac[l] * delta)) + (a_l - f_prev);
                f_prev = vec(layer_kernel_map(spec, l + 1, unvec(a_l, k), x, fnodes));
            }
            if (L > 2) f_prev -= jac[L] * delta;
            out.row(d) = f_prev.transpose();
        }
    });
    return out;
}

}  // namespace widelimit
