// zscore.h
// Population z-score standardization with a degenerate-input rule.
#pragma once

#include <cmath>
#include <vector>

#include "pcgl/common.h"

namespace pcgl::corpus {

// Standard deviation uses the population convention (divide by n).
// Near-constant input (sigma < 1e-8) maps to all zeros instead of erroring.
template <typename T>
std::vector<T> zscore(const std::vector<T>& x) {
    PCGL_CHECK(x.size() >= 2, "zscore: need at least 2 samples, got " << x.size());
    double s = 0;
    for (T v : x) s += v;
    const double mean = s / static_cast<double>(x.size());
    double s2 = 0;
    for (T v : x) s2 += (v - mean) * (v - mean);
    const double sigma = std::sqrt(s2 / static_cast<double>(x.size()));
    std::vector<T> out(x.size());
    if (sigma < 1e-8) return out;
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = static_cast<T>((x[i] - mean) / sigma);
    return out;
}

}  // namespace pcgl::corpus
