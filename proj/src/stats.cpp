#include "widelimit/stats.hpp"

#include <cmath>

#include "widelimit/errors.hpp"

namespace widelimit {

double gamma_p(double p) {
    if (!(p >= 1.0)) throw DomainError("gamma_p needs p >= 1");
    return std::pow(std::sqrt(p) + std::sqrt(p - 1.0), 1.0 / p);
}

SlopeFit fit_loglog_slope(const std::vector<RatePoint>& points) {
    if (points.size() < 4) throw InvalidConfig("slope fit needs at least 4 points");
    bool unit = false;
    for (const auto& pt : points) {
        if (!(pt.value > 0.0) || !(pt.n > 0.0)) throw NonpositiveValue("log-log fit needs positive widths and values");
        if (!(pt.stderr_ > 0.0)) unit = true;
    }
    double sw = 0, sx = 0, sy = 0;
    for (const auto& pt : points) {
        double rel = pt.stderr_ / pt.value;
        double w = unit ? 1.0 : 1.0 / (rel * rel);
        sw += w;
        sx += w * std::log(pt.n);
        sy += w * std::log(pt.value);
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& pt : points) {
        double rel = pt.stderr_ / pt.value;
        double w = unit ? 1.0 : 1.0 / (rel * rel);
        double dx = std::log(pt.n) - mx, dy = std::log(pt.value) - my;
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    if (sxx <= 0.0) throw InvalidConfig("slope fit needs at least two distinct widths");
    const double slope = sxy / sxx;
    const double r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return {slope, my - slope * mx, r2};
}

JackknifeResult block_jackknife(const Matrix& rows, int blocks, const std::function<double(const Vector&)>& stat) {
    const Eigen::Index n = rows.rows();
    if (blocks < 2 || n < blocks) throw InsufficientReplicas("jackknife needs at least as many rows as blocks");
    const Vector total = rows.colwise().sum().transpose();
    const double full = stat(total / static_cast<double>(n));
    std::vector<double> est(static_cast<std::size_t>(blocks));
    double mean = 0.0;
    for (int b = 0; b < blocks; ++b) {
        Eigen::Index lo = n * b / blocks, hi = n * (b + 1) / blocks;
        Vector rest = total - rows.middleRows(lo, hi - lo).colwise().sum().transpose();
        est[b] = stat(rest / static_cast<double>(n - (hi - lo)));
        mean += est[b] / blocks;
    }
    double ss = 0.0;
    for (double e : est) ss += (e - mean) * (e - mean);
    return {full, std::sqrt((blocks - 1.0) / blocks * ss)};
}

}  // namespace widelimit
