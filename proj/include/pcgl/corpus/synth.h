// synth.h
// Synthetic phonocardiogram generator. Produces separable murmur-present /
// murmur-absent classes so the whole pipeline can run without external data.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pcgl/corpus/types.h"

namespace pcgl::corpus {

struct SynthSpec {
    int n_patients = 16;
    int recordings_per_patient = 2;
    double duration_s = 10.0;
    std::pair<double, double> heart_rate_bpm_range{60.0, 110.0};
    double murmur_prevalence = 0.5;
    std::pair<double, double> murmur_band_hz{150.0, 400.0};
    // Murmur RMS relative to the heart-sound RMS, in dB (0 = equal power).
    double murmur_snr_db = 0.0;
    // Heart-sound RMS over background-noise RMS, in dB (larger = cleaner).
    double background_snr_db = 12.0;
    std::uint64_t seed = 42;
};

struct SynthCorpus {
    Manifest manifest;
    std::vector<Recording> recordings;
};

// Deterministic for a fixed seed; per-recording substreams make generation
// order-independent. Each cycle: S1 burst (40 Hz, 80 ms) at cycle start,
// S2 burst (60 Hz, 60 ms) at 35% of the cycle; positives add band-limited
// noise over the S1-to-S2 interval. Heart rate is drawn once per patient.
SynthCorpus synth_corpus(const SynthSpec& spec);

// Writes WAVs plus manifest.jsonl under dir and rewrites entry paths.
void write_corpus(SynthCorpus& corpus, const std::string& dir);

}  // namespace pcgl::corpus
