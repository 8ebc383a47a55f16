#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "shmloc/errors.hpp"
#include "shmloc/linalg.hpp"
#include "shmloc/signals.hpp"

namespace shmloc::novelty {

/// Normal-condition statistics for one spectral window. Immutable after
/// fitting; safe to share across concurrent scorers.
struct BaselineModel {
    signals::SpectralWindow window;
    Vector mean;
    Matrix covariance;      // unbiased sample covariance + ridge*I
    Matrix inv_covariance;
    double regularization = 0.0;
    std::size_t n_samples = 0;
};

/// Default ridge for a raw (pre-regularization) covariance: scales with
/// the average variance so windows of different energy condition alike.
inline double auto_ridge(const Matrix& raw_covariance) {
    double trace = 0.0;
    for (std::size_t i = 0; i < raw_covariance.rows(); ++i) trace += raw_covariance(i, i);
    return 1e-8 * trace / static_cast<double>(raw_covariance.rows());
}

/// Column means and unbiased sample covariance of the normal-condition
/// window samples, plus the precomputed inverse used on the scoring hot
/// path. ridge < 0 selects auto_ridge.
inline BaselineModel fit_baseline(const Matrix& normal_windows,
                                  const signals::SpectralWindow& window,
                                  double ridge = -1.0) {
    const std::size_t n = normal_windows.rows();
    const std::size_t dim = normal_windows.cols();
    if (n < dim + 1) {
        raise(ErrorKind::Precondition,
              "fit_baseline: need at least dim + 1 samples (" +
                  std::to_string(dim + 1) + "), got " + std::to_string(n));
    }
    BaselineModel baseline;
    baseline.window = window;
    baseline.n_samples = n;
    baseline.mean.assign(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) baseline.mean[j] += normal_windows(i, j);
    }
    for (double& m : baseline.mean) m /= static_cast<double>(n);

    Matrix cov(dim, dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < dim; ++a) {
            const double da = normal_windows(i, a) - baseline.mean[a];
            for (std::size_t b = a; b < dim; ++b) {
                cov(a, b) += da * (normal_windows(i, b) - baseline.mean[b]);
            }
        }
    }
    for (std::size_t a = 0; a < dim; ++a) {
        for (std::size_t b = a; b < dim; ++b) {
            const double v = cov(a, b) / static_cast<double>(n - 1);
            cov(a, b) = v;
            cov(b, a) = v;
        }
    }
    baseline.regularization = ridge < 0.0 ? auto_ridge(cov) : ridge;
    for (std::size_t a = 0; a < dim; ++a) cov(a, a) += baseline.regularization;
    baseline.covariance = cov;
    baseline.inv_covariance = cholesky_inverse(cholesky(cov));
    return baseline;
}

/// Mahalanobis squared-distance of x from the baseline distribution.
inline double msd(const BaselineModel& baseline, const Vector& x) {
    const std::size_t dim = baseline.mean.size();
    if (x.size() != dim) {
        raise(ErrorKind::Bounds, "msd: vector dimension " + std::to_string(x.size()) +
                                     " does not match window length " +
                                     std::to_string(dim));
    }
    Vector diff(dim);
    for (std::size_t j = 0; j < dim; ++j) diff[j] = x[j] - baseline.mean[j];
    const Vector y = mat_vec(baseline.inv_covariance, diff);
    double d2 = 0.0;
    for (std::size_t j = 0; j < dim; ++j) d2 += diff[j] * y[j];
    return d2 < 0.0 ? 0.0 : d2;
}

/// Novelty-index feature vector of a record: one MSD per baseline window.
inline Vector novelty_features(const std::vector<BaselineModel>& baselines,
                               const signals::TransmissibilityRecord& record) {
    Vector features(baselines.size());
    for (std::size_t k = 0; k < baselines.size(); ++k) {
        features[k] = msd(baselines[k], signals::window_slice(record, baselines[k].window));
    }
    return features;
}

} // namespace shmloc::novelty
