#include "pcgl/corpus/resample.h"

#include <cmath>
#include <cstdint>

#include "pcgl/common.h"

namespace pcgl::corpus {

namespace {

constexpr double kBeta = 8.0;
constexpr int kHalfTaps = 16;

double kaiser(double u) {
    // u in [-1, 1]
    const double t = 1.0 - u * u;
    if (t <= 0.0) return 0.0;
    return std::cyl_bessel_i(0.0, kBeta * std::sqrt(t)) / std::cyl_bessel_i(0.0, kBeta);
}

double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    const double px = M_PI * x;
    return std::sin(px) / px;
}

}  // namespace

std::vector<float> resample_sinc(const std::vector<float>& x, int sr_in, int sr_out) {
    PCGL_CHECK(sr_in > 0 && sr_out > 0, "resample: rates " << sr_in << " -> " << sr_out);
    if (sr_in == sr_out) return x;
    PCGL_CHECK(!x.empty(), "resample: empty input");

    // Cutoff at the lower Nyquist; kernel covers 32 input samples.
    const double fc = std::min(1.0, static_cast<double>(sr_out) / sr_in);
    const auto n_in = static_cast<std::int64_t>(x.size());
    const std::int64_t n_out = n_in * sr_out / sr_in;
    std::vector<float> y(static_cast<std::size_t>(n_out));

    for (std::int64_t n = 0; n < n_out; ++n) {
        const double t = static_cast<double>(n) * sr_in / sr_out;
        const auto k0 = static_cast<std::int64_t>(std::ceil(t)) - kHalfTaps;
        const auto k1 = static_cast<std::int64_t>(std::floor(t)) + kHalfTaps;
        double acc = 0.0, wsum = 0.0;
        for (std::int64_t k = k0; k <= k1; ++k) {
            const double u = t - static_cast<double>(k);
            const double w = fc * sinc(fc * u) * kaiser(u / kHalfTaps);
            wsum += w;
            if (k >= 0 && k < n_in) acc += w * x[static_cast<std::size_t>(k)];
        }
        // DC-gain correction keeps slowly varying signals at unit gain.
        y[static_cast<std::size_t>(n)] = static_cast<float>(wsum != 0.0 ? acc / wsum : 0.0);
    }
    return y;
}

}  // namespace pcgl::corpus
