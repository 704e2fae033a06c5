#pragma once

#include <functional>
#include <vector>

#include "widelimit/psd_linalg.hpp"

namespace widelimit {

// (sqrt(p) + sqrt(p - 1))^{1/p}; equals 1 at p = 1 and tends to 1 as p grows.
double gamma_p(double p);

struct RatePoint {
    double n;
    double value;
    double stderr_;
};

struct SlopeFit {
    double slope;
    double intercept;
    double r2;
};

// Weighted least squares of log(value) on log(n) with weights
// 1 / (stderr / value)^2. If any stderr is zero every point gets unit weight.
SlopeFit fit_loglog_slope(const std::vector<RatePoint>& points);

struct JackknifeResult {
    double value;
    double stderr_;
};

// Delete-one-block jackknife of stat(column means of rows) over contiguous blocks.
JackknifeResult block_jackknife(const Matrix& rows, int blocks, const std::function<double(const Vector&)>& stat);

}  // namespace widelimit
