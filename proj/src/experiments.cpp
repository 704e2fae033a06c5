#include "widelimit/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "widelimit/errors.hpp"
#include "widelimit/rng.hpp"
#include "widelimit/transport.hpp"

namespace widelimit {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void note(const RunOptions& opts, const std::string& line) {
    if (opts.log) *opts.log << line << std::endl;
}

Matrix unvec(const Eigen::Ref<const Vector>& v, Eigen::Index k) {
    Matrix m(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) m(i, j) = v(i * k + j);
    return m;
}

Vector vec(const Matrix& m) {
    Vector out(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out(i * m.cols() + j) = m(i, j);
    return out;
}

// Bures distance between N(0, Id_rows (x) C) and N(0, Id_rows (x) K).
double kernel_distance(const Matrix& c, const PsdMatrix& k, int rows) {
    GaussianLaw a{Vector::Zero(c.rows()), PsdMatrix::project(c)};
    GaussianLaw b{Vector::Zero(k.dim()), k};
    return std::sqrt(static_cast<double>(rows)) * w2_gaussian(a, b);
}

// Mean over draws of tr A for kernels stored row-major, one draw per row.
double mean_trace(const Matrix& kernels, Eigen::Index k) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) total += kernels.col(i * k + i).mean();
    return total;
}

}  // namespace

NetworkSpec sweep_spec(const ExperimentConfig& cfg, int n, int depth) {
    std::vector<int> widths(static_cast<std::size_t>(depth), n);
    widths.back() = cfg.output_width;
    return lift_fully_connected(depth, cfg.input_dim, widths, cfg.activation, static_cast<int>(cfg.inputs.rows()));
}

KernelResult run_kernel(const ExperimentConfig& cfg, const RunOptions&) {
    NetworkSpec spec = sweep_spec(cfg, 1, cfg.depth);
    KernelResult res;
    res.stack = kernel_recursion(spec, cfg.inputs, {cfg.quadrature_nodes});
    res.report = nondegeneracy_report(res.stack);
    return res;
}

RateTable run_rate_sweep(const ExperimentConfig& cfg, const RunOptions& opts) {
    const int L = cfg.depth;
    const int rows = cfg.output_width;
    const auto k = static_cast<Eigen::Index>(cfg.inputs.rows());
    NetworkSpec base = sweep_spec(cfg, cfg.widths.front(), L);
    KernelStack stack = kernel_recursion(base, cfg.inputs, {cfg.quadrature_nodes});
    RateTable table;
    table.report = nondegeneracy_report(stack);
    const PsdMatrix& target = stack.at(L);
    const bool nondeg = table.report.nondegenerate;

    for (int n : cfg.widths) {
        NetworkSpec spec = sweep_spec(cfg, n, L);
        const std::uint64_t wseed = derive_seed(cfg.seed, static_cast<std::uint64_t>(n));
        SampleOptions so;
        so.mode = cfg.sampler;
        so.threads = opts.threads;
        so.record_kernels = cfg.metric_plugin;
        SampleBatch batch = sample_outputs(spec, cfg.inputs, L, cfg.draws, wseed, so);
        note(opts, "width " + std::to_string(n) + ": sampled " + std::to_string(cfg.draws) + " draws");

        if (cfg.metric_plugin) {
            auto kernel_stat = [&](const Vector& m) { return kernel_distance(unvec(m, k), target, rows); };
            Matrix cv = control_variate_kernels(spec, stack, cfg.inputs, batch, cfg.cv_nodes, opts.threads);
            auto j = block_jackknife(cv, cfg.jackknife_blocks, kernel_stat);
            table.rows.push_back({n, "plugin", j.value, j.stderr_, nondeg});

            j = block_jackknife(batch.kernels[L - 1], cfg.jackknife_blocks, kernel_stat);
            table.rows.push_back({n, "plugin_conditional", j.value, j.stderr_, nondeg});

            const Eigen::Index d = batch.data.cols();
            Matrix suff(batch.count(), d + d * d);
            for (Eigen::Index r = 0; r < batch.count(); ++r) {
                Vector f = batch.data.row(r).transpose();
                suff.row(r).head(d) = f.transpose();
                suff.row(r).tail(d * d) = vec(f * f.transpose()).transpose();
            }
            auto raw_stat = [&](const Vector& m) {
                Vector mean = m.head(d);
                Matrix cov = unvec(m.tail(d * d), d) - mean * mean.transpose();
                return plugin_gaussian_distance(mean, cov, target, rows).distance;
            };
            j = block_jackknife(suff, cfg.jackknife_blocks, raw_stat);
            table.rows.push_back({n, "plugin_raw", j.value, j.stderr_, nondeg});
        }

        if (cfg.metric_empirical) {
            const int reps = std::max(1, cfg.empirical_reps);
            const Eigen::Index m = std::min<Eigen::Index>(cfg.empirical_points, batch.count() / reps);
            std::vector<double> vals;
            for (int r = 0; r < reps; ++r) {
                Matrix net = batch.data.middleRows(r * m, m);
                const std::uint64_t gseed = derive_seed(wseed, 0x1000000ull + static_cast<std::uint64_t>(r));
                Matrix ga = gp_sample(target, rows, m, derive_seed(gseed, 0), opts.threads).data;
                Matrix gb = gp_sample(target, rows, m, derive_seed(gseed, 1), opts.threads).data;
                vals.push_back(empirical_wp(net, ga, 2.0) - empirical_wp(gb, ga, 2.0));
            }
            double mean = 0.0, ss = 0.0;
            for (double v : vals) mean += v / reps;
            for (double v : vals) ss += (v - mean) * (v - mean);
            double se = reps > 1 ? std::sqrt(ss / (reps - 1.0) / reps) : kNaN;
            table.rows.push_back({n, "empirical_debiased", mean, se, nondeg});
        }
    }

    std::map<std::string, std::vector<RateRow>> by_metric;
    for (const auto& r : table.rows) by_metric[r.metric].push_back(r);
    for (auto& [metric, rs] : by_metric) {
        MetricSummary s;
        std::vector<RatePoint> pts;
        bool positive = true;
        for (const auto& r : rs) {
            pts.push_back({static_cast<double>(r.width), r.distance, r.stderr_});
            positive = positive && r.distance > 0.0;
        }
        if (positive && pts.size() >= 4) {
            s.fit = fit_loglog_slope(pts);
            s.fitted = true;
        }
        s.sqrt_n_envelope = true;
        for (std::size_t i = 1; i < rs.size(); ++i) {
            const double a = std::sqrt(static_cast<double>(rs[i - 1].width));
            const double b = std::sqrt(static_cast<double>(rs[i].width));
            const double pooled = std::hypot(a * rs[i - 1].stderr_, b * rs[i].stderr_);
            if (b * rs[i].distance > a * rs[i - 1].distance + 2.0 * pooled) s.sqrt_n_envelope = false;
        }
        table.metrics[metric] = s;
    }
    return table;
}

FluctuationReport run_kernel_clt(const ExperimentConfig& cfg, const RunOptions& opts) {
    if (cfg.draws < 2) throw InsufficientReplicas("kernel_clt needs at least 2 replicas");
    const int layer = cfg.layer;
    const auto k = static_cast<int>(cfg.inputs.rows());
    const TestFunction h = cfg.test_function == "identity"
                               ? TestFunction::identity(k)
                               : TestFunction::componentwise(Activation::parse(cfg.test_function), k);
    FluctuationReport report;
    report.layer = layer;
    for (int n : cfg.widths) {
        NetworkSpec spec = lift_fully_connected(layer, cfg.input_dim, std::vector<int>(layer, n), cfg.activation, k);
        KernelStack stack = kernel_recursion(spec, cfg.inputs, {cfg.quadrature_nodes});
        auto models = sigma_recursion(spec, stack, h, {cfg.quadrature_nodes, false});
        const FluctuationModel& fm = models.back();
        SampleOptions so;
        so.mode = cfg.sampler;
        so.threads = opts.threads;
        SampleBatch batch = sample_outputs(spec, cfg.inputs, layer, cfg.draws,
                                           derive_seed(cfg.seed, static_cast<std::uint64_t>(n)), so);
        EmpiricalKernel ek = empirical_kernel(batch, h);
        CltRow row;
        row.width = n;
        row.mean_empirical = ek.mean;
        row.mean_stderr = ek.mean_stderr;
        row.mean_model = fm.mean;
        row.cov_empirical = ek.covariance;
        row.sigma = fm.sigma;
        row.cov_rel_error = (ek.covariance - fm.sigma).norm() / fm.sigma.norm();
        for (Eigen::Index i = 0; i < ek.mean.size(); ++i) {
            double se = ek.mean_stderr(i);
            double diff = std::abs(ek.mean(i) - fm.mean(i));
            if (se > 0.0)
                row.mean_max_z = std::max(row.mean_max_z, diff / se);
            else if (diff > 1e-12)
                row.mean_max_z = std::numeric_limits<double>::infinity();
        }
        GaussianLaw emp{vec(ek.mean), PsdMatrix::project(ek.covariance)};
        GaussianLaw model{vec(fm.mean), PsdMatrix::project(fm.sigma)};
        row.w2_models = w2_gaussian(emp, model);
        note(opts, "width " + std::to_string(n) + ": covariance relative error " + std::to_string(row.cov_rel_error));
        report.rows.push_back(std::move(row));
    }
    return report;
}

PosteriorReport run_posterior(const ExperimentConfig& cfg, const RunOptions& opts) {
    const Dataset& data = *cfg.dataset;
    const int L = cfg.depth;
    const int rows = cfg.output_width;
    const InputSet& x = cfg.inputs;
    const Eigen::Index nx = x.rows();
    NetworkSpec base = sweep_spec(cfg, cfg.widths.front(), L);
    KernelStack stack = kernel_recursion(base, x, {cfg.quadrature_nodes});
    const PsdMatrix& kl = stack.at(L);

    PosteriorReport report;
    report.gp = gp_posterior(kl, data, kGaussianLikelihoodNoise);
    const GaussianLaw gp_law = report.gp.law();
    const LikelihoodSpec lik = LikelihoodSpec::gaussian();
    const std::uint64_t w1_seed = derive_seed(cfg.seed, 0xB1ull);

    // Bound inputs with mu the GP prior law on the joint inputs.
    const double mu_g = gaussian_likelihood_normalizer(kl.matrix(), data);
    const double m2_gp = rows * kl.matrix().trace();
    const Matrix root_k = sym_sqrt(kl).matrix();

    for (int n : cfg.widths) {
        NetworkSpec spec = sweep_spec(cfg, n, L);
        SampleOptions so;
        so.mode = SamplingMode::Conditional;
        so.threads = opts.threads;
        so.record_kernels = true;
        SampleBatch batch =
            sample_outputs(spec, x, L, cfg.draws, derive_seed(cfg.seed, static_cast<std::uint64_t>(n)), so);
        const Matrix& kernels = batch.kernels[L - 1];

        WeightedSamples ws = reweighted_posterior(batch, lik, data);
        const double ess_fraction = ws.ess / static_cast<double>(cfg.draws);
        if (ess_fraction < cfg.ess_min_fraction) {
            report.ess_ok = false;
            note(opts, "warning: width " + std::to_string(n) + " has ESS fraction " + std::to_string(ess_fraction));
        }
        GaussianMixture mix = conditional_gaussian_posterior(kernels, data);

        // Synchronous coupling of the priors: f = Z sqrt(A_L), G = Z sqrt(K).
        Matrix gap(kernels.rows(), 1);
        for (Eigen::Index d = 0; d < kernels.rows(); ++d) {
            Matrix a = unvec(kernels.row(d).transpose(), nx);
            gap(d, 0) = rows * (sym_sqrt(PsdMatrix::project(a)).matrix() - root_k).squaredNorm();
        }
        auto w2 = block_jackknife(gap, cfg.jackknife_blocks, [](const Vector& m) { return std::sqrt(m(0)); });
        // Upper end of the prior distance keeps the bound conservative.
        const double w2_prior = w2.value + 2.0 * w2.stderr_;
        // The first-moment term may refer to either prior, so take the larger
        // second moment; E|z| <= sqrt(E|z|^2). The p' = 2 term is taken as
        // max(E|z|^2, sqrt(E|z|^2)), valid for the raw moment and for its norm.
        const double m2_net = rows * mean_trace(kernels, nx);
        const double m1 = std::sqrt(std::max(m2_gp, m2_net));
        const double m2 = std::max(m2_gp, std::sqrt(m2_gp));
        const double nu_g = mix.mean_likelihood;
        const double lip = lik.lipschitz_constant();
        const double bound = bayes_bound_constant(mu_g, nu_g, lip, lik.sup, m1, m2, w2_prior, 2.0);
        report.bounds.push_back({n, mu_g, nu_g, lip, lik.sup, m1, m2, w2.value, w2.stderr_, bound});

        auto rb = posterior_w1(mix, gp_law, cfg.resample, w1_seed, cfg.repetitions);
        report.rows.push_back({"network", n, "conditional", rb.mean, rb.stderr_, mix.ess / cfg.draws, bound});
        auto direct = posterior_w1(ws, gp_law, cfg.resample, w1_seed, cfg.repetitions);
        report.rows.push_back({"network", n, "direct", direct.mean, direct.stderr_, ess_fraction, bound});
        note(opts, "width " + std::to_string(n) + ": W1 conditional " + std::to_string(rb.mean) + " direct " +
                       std::to_string(direct.mean));
    }

    // GP-prior control: the same estimators fed with exact GP samples.
    SampleBatch gp = gp_sample(kl, rows, cfg.draws, derive_seed(cfg.seed, 0xC0ull), opts.threads);
    WeightedSamples gws = reweighted_posterior(gp, lik, data);
    const double gess = gws.ess / static_cast<double>(cfg.draws);
    if (gess < cfg.ess_min_fraction) report.ess_ok = false;
    auto [mse, cse] = gws.moment_stderr(cfg.jackknife_blocks);
    const Vector gm = gws.mean();
    const Matrix gc = gws.covariance();
    const Matrix gp_cov = gp_law.cov.matrix();
    for (Eigen::Index i = 0; i < gm.size(); ++i) {
        report.control_mean_max_z = std::max(report.control_mean_max_z, std::abs(gm(i) - gp_law.mean(i)) / mse(i));
        for (Eigen::Index j = 0; j < gm.size(); ++j) {
            double diff = std::abs(gc(i, j) - gp_cov(i, j));
            if (cse(i, j) > 0.0)
                report.control_cov_max_z = std::max(report.control_cov_max_z, diff / cse(i, j));
            else if (diff > 1e-12)
                report.control_cov_max_z = std::numeric_limits<double>::infinity();
        }
    }
    Matrix exact(cfg.draws, nx * nx);
    exact.rowwise() = vec(kl.matrix()).transpose();
    GaussianMixture gmix = conditional_gaussian_posterior(exact, data);
    auto rb = posterior_w1(gmix, gp_law, cfg.resample, w1_seed, cfg.repetitions);
    report.rows.push_back({"gp_control", 0, "conditional", rb.mean, rb.stderr_, gmix.ess / cfg.draws, kNaN});
    auto direct = posterior_w1(gws, gp_law, cfg.resample, w1_seed, cfg.repetitions);
    report.rows.push_back({"gp_control", 0, "direct", direct.mean, direct.stderr_, gess, kNaN});
    return report;
}

std::vector<BoundRow> run_bound(const ExperimentConfig& cfg) {
    std::vector<BoundRow> out;
    for (double p : cfg.p_values) out.push_back({"gamma_p", p, gamma_p(p)});
    if (cfg.lemma) {
        const json& j = *cfg.lemma;
        auto f = [&](const char* key) {
            if (!j.contains(key) || !j.at(key).is_number())
                throw InvalidConfig(std::string("lemma.") + key + " must be a number");
            return j.at(key).get<double>();
        };
        const double p = f("p");
        out.push_back({"bayes_bound", p,
                       bayes_bound_constant(f("mu_g"), f("nu_g"), f("lip_g"), f("sup_g"), f("m1_mu"), f("mpprime_mu"),
                                            f("wp_prior"), p)});
    }
    return out;
}

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string hex(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

json finite(double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
}

json report_json(const NondegeneracyReport& r) {
    json layers = json::array();
    for (const auto& l : r.layers)
        layers.push_back({{"layer", l.layer}, {"lambda_min", l.lambda_min}, {"invertible", l.invertible}});
    return {{"nondegenerate", r.nondegenerate}, {"layers", layers}};
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
}

}  // namespace

void run_and_write(const ExperimentConfig& cfg, const std::string& out_dir, const RunOptions& opts) {
    std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw InvalidConfig("cannot create output directory " + out_dir);

    const std::string header = "# widelimit-v1 experiment=" + to_string(cfg.kind) +
                               " seed=" + std::to_string(cfg.seed) + " config_hash=" + hex(cfg.hash()) + "\n";
    std::string csv = header;
    json summary = {{"experiment", to_string(cfg.kind)}, {"seed", cfg.seed}, {"config_hash", hex(cfg.hash())}};

    switch (cfg.kind) {
        case ExperimentKind::Kernel: {
            KernelResult res = run_kernel(cfg, opts);
            json layers = json::array();
            csv += "layer,method,lambda_min,invertible\n";
            for (int l = 1; l <= res.stack.depth(); ++l) {
                const auto& rep = res.report.layers[l - 1];
                layers.push_back({{"layer", l},
                                  {"method", res.stack.method[l - 1]},
                                  {"lambda_min", rep.lambda_min},
                                  {"invertible", rep.invertible},
                                  {"kernel", matrix_json(res.stack.at(l).matrix())}});
                csv += std::to_string(l) + "," + res.stack.method[l - 1] + "," + num(rep.lambda_min) + "," +
                       (rep.invertible ? "true" : "false") + "\n";
            }
            write_file(dir / "kernels.json", json{{"layers", layers}}.dump(2) + "\n");
            summary["nondegeneracy"] = report_json(res.report);
            break;
        }
        case ExperimentKind::Rates: {
            RateTable t = run_rate_sweep(cfg, opts);
            csv += "width,metric,distance,stderr,nondegenerate\n";
            for (const auto& r : t.rows)
                csv += std::to_string(r.width) + "," + r.metric + "," + num(r.distance) + "," + num(r.stderr_) + "," +
                       (r.nondegenerate ? "true" : "false") + "\n";
            json metrics = json::object();
            for (const auto& [name, s] : t.metrics) {
                json m = {{"sqrt_n_envelope", s.sqrt_n_envelope}};
                if (s.fitted) {
                    m["slope"] = s.fit.slope;
                    m["intercept"] = s.fit.intercept;
                    m["r2"] = s.fit.r2;
                }
                metrics[name] = m;
            }
            summary["metrics"] = metrics;
            summary["primary_metric"] = cfg.metric_plugin ? "plugin" : "empirical_debiased";
            summary["nondegeneracy"] = report_json(t.report);
            break;
        }
        case ExperimentKind::KernelClt: {
            FluctuationReport rep = run_kernel_clt(cfg, opts);
            csv += "width,quantity,value\n";
            json rows = json::array();
            for (const auto& r : rep.rows) {
                csv += std::to_string(r.width) + ",cov_rel_frobenius," + num(r.cov_rel_error) + "\n";
                csv += std::to_string(r.width) + ",mean_max_z," + num(r.mean_max_z) + "\n";
                csv += std::to_string(r.width) + ",trace_empirical," + num(r.cov_empirical.trace()) + "\n";
                csv += std::to_string(r.width) + ",trace_sigma," + num(r.sigma.trace()) + "\n";
                csv += std::to_string(r.width) + ",w2_models," + num(r.w2_models) + "\n";
                rows.push_back({{"width", r.width},
                                {"mean_empirical", matrix_json(r.mean_empirical)},
                                {"mean_model", matrix_json(r.mean_model)},
                                {"cov_rel_frobenius", r.cov_rel_error},
                                {"mean_max_z", finite(r.mean_max_z)},
                                {"w2_models", r.w2_models}});
            }
            summary["layer"] = rep.layer;
            summary["rows"] = rows;
            break;
        }
        case ExperimentKind::Posterior: {
            PosteriorReport rep = run_posterior(cfg, opts);
            csv += "source,width,estimator,w1,stderr,ess_fraction,bound\n";
            for (const auto& r : rep.rows)
                csv += r.source + "," + std::to_string(r.width) + "," + r.estimator + "," + num(r.w1) + "," +
                       num(r.stderr_) + "," + num(r.ess_fraction) + "," + num(r.bound) + "\n";
            json bounds = json::array();
            for (const auto& b : rep.bounds)
                bounds.push_back({{"width", b.width},
                                  {"mu_g", b.mu_g},
                                  {"nu_g", b.nu_g},
                                  {"lip_g", b.lip_g},
                                  {"sup_g", b.sup_g},
                                  {"m1_mu", b.m1_mu},
                                  {"m2_mu", b.m2_mu},
                                  {"w2_prior", b.w2_prior},
                                  {"w2_prior_stderr", b.w2_prior_stderr},
                                  {"bound", b.bound}});
            summary["bounds"] = bounds;
            summary["gp_posterior"] = {{"mean", matrix_json(rep.gp.mean)}, {"cov", matrix_json(rep.gp.cov.matrix())}};
            summary["control_mean_max_z"] = finite(rep.control_mean_max_z);
            summary["control_cov_max_z"] = finite(rep.control_cov_max_z);
            summary["ess_ok"] = rep.ess_ok;
            break;
        }
        case ExperimentKind::Bound: {
            csv += "quantity,p,value\n";
            for (const auto& r : run_bound(cfg)) csv += r.quantity + "," + num(r.p) + "," + num(r.value) + "\n";
            break;
        }
    }
    write_file(dir / "result.csv", csv);
    write_file(dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace widelimit
