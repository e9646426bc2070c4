#include "pcgl/views/augment.h"

#include <cmath>

#include "pcgl/common.h"
#include "pcgl/corpus/resample.h"
#include "pcgl/corpus/types.h"
#include "pcgl/substrate/rng.h"

namespace pcgl::views {

namespace {

using substrate::make_rng;

constexpr int kFs = corpus::kSampleRate;

void apply_gauss_noise(std::vector<float>& x, double sigma, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, sigma);
    for (auto& v : x) v += static_cast<float>(g(rng));
}

void apply_time_shift(std::vector<float>& x, double shift_ms) {
    const auto n = static_cast<std::int64_t>(x.size());
    std::int64_t k = std::llround(shift_ms * kFs / 1000.0) % n;
    if (k < 0) k += n;
    if (k == 0) return;
    std::vector<float> y(x.size());
    for (std::int64_t i = 0; i < n; ++i) y[static_cast<std::size_t>((i + k) % n)] = x[i];
    x = std::move(y);
}

void apply_pitch_shift(std::vector<float>& x, double semitones) {
    const double ratio = std::pow(2.0, semitones / 12.0);
    const int sr_virtual = static_cast<int>(std::lround(kFs / ratio));
    auto y = corpus::resample_sinc(x, kFs, sr_virtual);
    y.resize(x.size(), 0.0f);  // crop or zero-pad back to the fixed length
    x = std::move(y);
}

void apply_amp_scale(std::vector<float>& x, double factor) {
    for (auto& v : x) v = static_cast<float>(v * factor);
}

void apply_snr_noise(std::vector<float>& x, double snr_db, std::mt19937_64& rng) {
    double p_sig = 0;
    for (float v : x) p_sig += static_cast<double>(v) * v;
    p_sig /= static_cast<double>(x.size());
    if (p_sig <= 0) return;
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> noise(x.size());
    double p_noise = 0;
    for (auto& v : noise) {
        v = g(rng);
        p_noise += v * v;
    }
    p_noise /= static_cast<double>(x.size());
    // Scale by the realized noise power so the requested SNR is met exactly.
    const double scale = std::sqrt(p_sig / (p_noise * std::pow(10.0, snr_db / 10.0)));
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] += static_cast<float>(scale * noise[i]);
}

struct Biquad {
    double b0, b1, b2, a1, a2;
    double z1 = 0, z2 = 0;
    float step(float in) {
        const double out = b0 * in + z1;
        z1 = b1 * in - a1 * out + z2;
        z2 = b2 * in - a2 * out;
        return static_cast<float>(out);
    }
};

Biquad make_lowpass(double fc_hz, double q) {
    const double w = 2.0 * M_PI * fc_hz / kFs;
    const double alpha = std::sin(w) / (2.0 * q);
    const double c = std::cos(w);
    const double a0 = 1.0 + alpha;
    return {(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0,
            -2.0 * c / a0, (1.0 - alpha) / a0};
}

Biquad make_highpass(double fc_hz, double q) {
    const double w = 2.0 * M_PI * fc_hz / kFs;
    const double alpha = std::sin(w) / (2.0 * q);
    const double c = std::cos(w);
    const double a0 = 1.0 + alpha;
    return {(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0,
            -2.0 * c / a0, (1.0 - alpha) / a0};
}

void apply_bandpass(std::vector<float>& x, double lo_hz, double hi_hz) {
    Biquad hp = make_highpass(lo_hz, M_SQRT1_2);
    Biquad lp = make_lowpass(hi_hz, M_SQRT1_2);
    for (auto& v : x) v = lp.step(hp.step(v));
}

}  // namespace

AugmentationRecipe sample_recipe(std::mt19937_64& rng) {
    AugmentationRecipe r;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uni = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    if (u01(rng) < 0.5) r.ops.push_back({AugOpKind::GaussNoise, uni(kGaussSigmaLo, kGaussSigmaHi)});
    if (u01(rng) < 0.5) r.ops.push_back({AugOpKind::TimeShift, uni(-kShiftMsMax, kShiftMsMax)});
    if (u01(rng) < 0.5)
        r.ops.push_back({AugOpKind::PitchShift, uni(-kPitchSemitonesMax, kPitchSemitonesMax)});
    if (u01(rng) < 0.5) r.ops.push_back({AugOpKind::AmpScale, uni(kAmpLo, kAmpHi)});
    if (u01(rng) < 0.5) r.ops.push_back({AugOpKind::SnrNoise, uni(kSnrDbLo, kSnrDbHi)});
    if (u01(rng) < 0.5)
        r.ops.push_back(
            {AugOpKind::Bandpass, uni(kBandLoMin, kBandLoMax), uni(kBandHiMin, kBandHiMax)});
    r.seed = rng();
    return r;
}

std::vector<float> augment_wave(const std::vector<float>& x,
                                const AugmentationRecipe& recipe) {
    std::vector<float> y = x;
    auto noise_rng = make_rng(recipe.seed, "augment-noise");
    for (const auto& op : recipe.ops) {
        switch (op.kind) {
            case AugOpKind::GaussNoise:
                PCGL_CHECK(op.a >= kGaussSigmaLo && op.a <= kGaussSigmaHi,
                           "gauss_noise sigma " << op.a << " out of range");
                apply_gauss_noise(y, op.a, noise_rng);
                break;
            case AugOpKind::TimeShift:
                PCGL_CHECK(std::abs(op.a) <= kShiftMsMax,
                           "time_shift " << op.a << " ms out of range");
                apply_time_shift(y, op.a);
                break;
            case AugOpKind::PitchShift:
                PCGL_CHECK(std::abs(op.a) <= kPitchSemitonesMax,
                           "pitch_shift " << op.a << " semitones out of range");
                apply_pitch_shift(y, op.a);
                break;
            case AugOpKind::AmpScale:
                PCGL_CHECK(op.a >= kAmpLo && op.a <= kAmpHi,
                           "amp_scale " << op.a << " out of range");
                apply_amp_scale(y, op.a);
                break;
            case AugOpKind::SnrNoise:
                PCGL_CHECK(op.a >= kSnrDbLo && op.a <= kSnrDbHi,
                           "snr_noise " << op.a << " dB out of range");
                apply_snr_noise(y, op.a, noise_rng);
                break;
            case AugOpKind::Bandpass:
                PCGL_CHECK(op.a >= kBandLoMin && op.a <= kBandLoMax && op.b >= kBandHiMin &&
                               op.b <= kBandHiMax,
                           "bandpass [" << op.a << "," << op.b << "] out of range");
                apply_bandpass(y, op.a, op.b);
                break;
        }
    }
    return y;
}

}  // namespace pcgl::views
