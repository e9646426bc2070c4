// augment.h
// Waveform augmentation recipes for contrastive views and minority
// oversampling. A recipe is an explicit ordered op list with concrete
// parameters plus a noise seed, so plans are inspectable and replayable.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace pcgl::views {

enum class AugOpKind { GaussNoise, TimeShift, PitchShift, AmpScale, SnrNoise, Bandpass };

struct AugOp {
    AugOpKind kind;
    // GaussNoise: a = sigma. TimeShift: a = shift_ms. PitchShift: a = semitones.
    // AmpScale: a = factor. SnrNoise: a = snr_db. Bandpass: a = lo_hz, b = hi_hz.
    double a = 0.0;
    double b = 0.0;
};

struct AugmentationRecipe {
    std::vector<AugOp> ops;
    std::uint64_t seed = 0;
};

// Parameter ranges; each op joins a sampled recipe independently with p = 0.5.
inline constexpr double kGaussSigmaLo = 0.001, kGaussSigmaHi = 0.01;
inline constexpr double kShiftMsMax = 100.0;
inline constexpr double kPitchSemitonesMax = 2.0;
inline constexpr double kAmpLo = 0.8, kAmpHi = 1.2;
inline constexpr double kSnrDbLo = 20.0, kSnrDbHi = 30.0;
inline constexpr double kBandLoMin = 15.0, kBandLoMax = 25.0;
inline constexpr double kBandHiMin = 450.0, kBandHiMax = 550.0;

AugmentationRecipe sample_recipe(std::mt19937_64& rng);

// Input length is preserved (4000 samples at 4 kHz). Throws on parameters
// outside the documented ranges.
std::vector<float> augment_wave(const std::vector<float>& x,
                                const AugmentationRecipe& recipe);

}  // namespace pcgl::views
