// windows.h
// Fixed-length window assembly from labeled intervals (rollover buffer),
// patient-aware splits, oversampling plans, and episode construction.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pcgl/corpus/types.h"
#include "pcgl/views/augment.h"

namespace pcgl::windows {

inline constexpr int kWindowSamples = 4000;
inline constexpr double kMinSegmentS = 0.2;
inline constexpr double kMaxMurmurSegmentS = 3.2;
inline constexpr double kMinGapMs = 50.0;
inline constexpr double kMaxGapMs = 1000.0;
inline constexpr double kNegativeTileS = 1.0;

struct Segment {
    std::string recording_id;
    std::string patient_id;
    int label = 0;
    double start_s = 0.0;
    double end_s = 0.0;
    std::vector<float> samples;
};

struct QualityFlags {
    bool temporal_continuity = true;
    bool amplitude_consistency = true;
    bool frequency_consistency = true;
    bool rhythm_preserved = true;
    bool label_pure = true;
    bool source_unified = true;
    bool all() const {
        return temporal_continuity && amplitude_consistency && frequency_consistency &&
               rhythm_preserved && label_pure && source_unified;
    }
};

struct SourceRef {
    int segment_index = 0;  // index into the segment list given to build_windows
    double gap_ms = 0.0;    // silence between the previous segment and this one
};

struct Window {
    std::string window_id;
    std::string patient_id;
    std::string recording_id;
    int label = 0;
    std::vector<float> samples;  // exactly kWindowSamples
    std::vector<SourceRef> source_segments;
    QualityFlags quality;
};

struct SplitAssignment {
    std::vector<std::string> train, val, test;
    double train_prevalence = 0.0, val_prevalence = 0.0, test_prevalence = 0.0;
};

struct Episode {
    std::vector<std::pair<int, int>> support;  // (batch index, label)
    std::vector<std::pair<int, int>> query;
};

struct QualityThresholds {
    double boundary_sigmas = 6.0;
    double rms_ratio_lo = 0.2;
    double rms_ratio_hi = 5.0;
    double centroid_diff_hz = 150.0;
};

// Positive recordings yield one segment per murmur interval; negative
// recordings are tiled with 1.0 s segments between/around any intervals.
// Out-of-bounds intervals are skipped and counted, sub-0.2 s pieces dropped.
std::vector<Segment> extract_segments(const corpus::Recording& rec, int* skipped = nullptr);

// Envelope autocorrelation peak in the 0.33-2.5 s lag range; 72 bpm fallback.
double estimate_heart_rate_bpm(const std::vector<float>& samples);

// Greedy rollover concatenation of same-recording, same-label segments.
// A chain continues only across gaps of 50-1000 ms that are also at most
// 1.5 expected cardiac cycles; once the buffer reaches 4000 samples the
// window is the first 4000 and the buffer restarts. Sub-window leftovers
// are dropped.
std::vector<Window> build_windows(const std::vector<Segment>& segments,
                                  double hr_estimate_bpm,
                                  const QualityThresholds& thresholds = {});

// Stratified by patient-level label (positive if any recording positive),
// 60/20/20 by patient count, deterministic per seed.
SplitAssignment split_patients(const corpus::Manifest& manifest, std::uint64_t seed);

// Plan entries are (training-window index, recipe); applying them brings the
// minority class to a 1:1 window ratio.
std::vector<std::pair<int, views::AugmentationRecipe>> oversample_minority(
    const std::vector<Window>& train_windows, std::uint64_t seed);

// Per class: support = min(k_shot, floor(n_c/2)), remainder query.
Episode make_episode(const std::vector<std::pair<int, int>>& batch, int k_shot,
                     std::uint64_t seed);

// Raw float32 block plus JSONL index serialization.
void save_windows(const std::string& dir, const std::vector<Window>& windows);
std::vector<Window> load_windows(const std::string& dir);

}  // namespace pcgl::windows
