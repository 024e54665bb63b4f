// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "minder/error.hpp"

namespace minder {

/// Population moment features of one window: mean, variance, skewness
/// (m3 / sigma^3) and kurtosis (m4 / sigma^4). Skewness and kurtosis are
/// defined as 0 when the variance is degenerate.
struct MomentFeatures {
    double mean = 0.0;
    double variance = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;
};

inline MomentFeatures stat_features(std::span<const double> window) {
    const std::size_t n = window.size();
    if (n < 2) throw ConfigError("stat_features needs >= 2 samples");
    MomentFeatures f;
    for (double v : window) f.mean += v;
    f.mean /= static_cast<double>(n);

    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : window) {
        const double d = v - f.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);

    f.variance = m2;
    if (m2 < 1e-18) {
        f.skewness = 0.0;
        f.kurtosis = 0.0;
    } else {
        const double sigma = std::sqrt(m2);
        f.skewness = m3 / (sigma * sigma * sigma);
        f.kurtosis = m4 / (m2 * m2);
    }
    return f;
}

}  // namespace minder
