#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>

namespace frfs {

struct EvalResult {
    double r = std::numeric_limits<double>::quiet_NaN();
    double rmse_rel = 0.0;
    std::size_t n = 0;
    bool constant_truth = false;  // set when R is undefined (zero variance)
};

namespace detail {
inline bool all_equal(std::span<const double> v) {
    for (double x : v)
        if (x != v[0]) return false;
    return true;
}
}  // namespace detail

/// Pearson correlation coefficient. Undefined (NaN) when either series has
/// zero variance; `constant_flag`, if given, is set accordingly.
inline double pearson_r(std::span<const double> truth, std::span<const double> pred,
                        bool* constant_flag = nullptr) {
    if (truth.size() != pred.size())
        throw std::invalid_argument("pearson_r: length mismatch");
    if (truth.size() < 2)
        throw std::invalid_argument("pearson_r: need at least 2 samples");
    if (constant_flag) *constant_flag = false;
    if (detail::all_equal(truth) || detail::all_equal(pred)) {
        if (constant_flag) *constant_flag = true;
        return std::numeric_limits<double>::quiet_NaN();
    }
    const std::size_t n = truth.size();
    double mean_t = 0.0, mean_p = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_t += truth[i];
        mean_p += pred[i];
    }
    mean_t /= static_cast<double>(n);
    mean_p /= static_cast<double>(n);
    double cov = 0.0, var_t = 0.0, var_p = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dt = truth[i] - mean_t;
        const double dp = pred[i] - mean_p;
        cov += dt * dp;
        var_t += dt * dt;
        var_p += dp * dp;
    }
    return cov / std::sqrt(var_t * var_p);
}

/// Relative RMSE: sqrt(mean((pred - truth)^2)) / sqrt(mean(truth^2)).
inline double rmse_rel(std::span<const double> truth, std::span<const double> pred) {
    if (truth.size() != pred.size())
        throw std::invalid_argument("rmse_rel: length mismatch");
    if (truth.empty())
        throw std::invalid_argument("rmse_rel: empty input");
    double sq_err = 0.0, sq_truth = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double e = pred[i] - truth[i];
        sq_err += e * e;
        sq_truth += truth[i] * truth[i];
    }
    if (sq_truth == 0.0)
        throw std::invalid_argument("rmse_rel: truth is identically zero");
    return std::sqrt(sq_err / static_cast<double>(truth.size())) /
           std::sqrt(sq_truth / static_cast<double>(truth.size()));
}

inline EvalResult evaluate(std::span<const double> truth, std::span<const double> pred) {
    EvalResult out;
    out.n = truth.size();
    out.r = pearson_r(truth, pred, &out.constant_truth);
    out.rmse_rel = rmse_rel(truth, pred);
    return out;
}

}  // namespace frfs
