// logmel.h
// Log-mel spectrogram of a 4000-sample window plus SpecAugment-style
// time/frequency masking.
#pragma once

#include <cstdint>
#include <vector>

namespace pcgl::views {

inline constexpr int kNMels = 64;
inline constexpr int kNFrames = 59;
inline constexpr int kNFft = 256;
inline constexpr int kHop = 64;
inline constexpr double kMelLoHz = 25.0;
inline constexpr double kMelHiHz = 2000.0;
inline constexpr double kLogFloor = 1e-6;

struct MelSpec {
    std::vector<float> bins;  // row-major [kNMels][kNFrames]
    float& at(int m, int t) { return bins[static_cast<std::size_t>(m) * kNFrames + t]; }
    float at(int m, int t) const { return bins[static_cast<std::size_t>(m) * kNFrames + t]; }
};

// Hann-windowed STFT power, triangular mel filterbank (64 filters spanning
// 25-2000 Hz on the mel scale), natural log of (power + 1e-6), then
// per-spectrogram z-score. A constant spectrogram standardizes to zeros.
MelSpec logmel(const std::vector<float>& samples);

// Mel filter center frequencies in Hz, exposed for verification.
std::vector<double> mel_filter_centers_hz();

// Zeroes contiguous frame/bin ranges; fill value 0 is the standardized mean.
MelSpec augment_spec(const MelSpec& spec, int n_time_masks, int n_freq_masks, int max_width,
                     std::uint64_t seed);

}  // namespace pcgl::views
