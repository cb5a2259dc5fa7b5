#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "sll/matrix.hpp"

namespace testutil {

// Relative error with an absolute floor, the usual gradient-check metric.
inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// Central-difference derivative of f w.r.t. one coordinate.
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-6) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Checks an analytic gradient matrix against central differences of a scalar
// function of one parameter matrix.  Returns the worst relative error.
inline double max_grad_rel_err(sll::Matrix& param, const sll::Matrix& analytic,
                               const std::function<double()>& loss, double h = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < param.data.size(); ++i) {
        const double keep = param.data[i];
        param.data[i] = keep + h;
        const double up = loss();
        param.data[i] = keep - h;
        const double down = loss();
        param.data[i] = keep;
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, rel_err(analytic.data[i], fd));
    }
    return worst;
}

inline double max_grad_rel_err_vec(std::vector<double>& param, const std::vector<double>& analytic,
                                   const std::function<double()>& loss, double h = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double keep = param[i];
        param[i] = keep + h;
        const double up = loss();
        param[i] = keep - h;
        const double down = loss();
        param[i] = keep;
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, rel_err(analytic[i], fd));
    }
    return worst;
}

// Least-squares fit y = a + b x; returns {a, b, r_squared}.
struct LineFit {
    double intercept = 0.0, slope = 0.0, r2 = 0.0;
};

inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    LineFit fit;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double mean_y = sy / n;
    for (std::size_t i = 0; i < n; ++i) {
        const double pred = fit.intercept + fit.slope * xs[i];
        ss_res += (ys[i] - pred) * (ys[i] - pred);
        ss_tot += (ys[i] - mean_y) * (ys[i] - mean_y);
    }
    fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

// Dataset root for tests that read the real corpora.
inline std::string data_root() {
    const char* env = std::getenv("SLL_DATA_ROOT");
    return env ? env : "";
}

}  // namespace testutil
