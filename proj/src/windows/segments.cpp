#include <algorithm>
#include <cmath>

#include "pcgl/windows/windows.h"

namespace pcgl::windows {

namespace {

constexpr int kFs = corpus::kSampleRate;

Segment make_segment(const corpus::Recording& rec, double start_s, double end_s) {
    Segment s;
    s.recording_id = rec.meta.recording_id;
    s.patient_id = rec.meta.patient_id;
    s.label = rec.meta.label;
    s.start_s = start_s;
    s.end_s = end_s;
    const auto i0 = static_cast<std::size_t>(std::llround(start_s * kFs));
    const auto i1 = std::min(rec.samples.size(),
                             static_cast<std::size_t>(std::llround(end_s * kFs)));
    s.samples.assign(rec.samples.begin() + static_cast<std::ptrdiff_t>(i0),
                     rec.samples.begin() + static_cast<std::ptrdiff_t>(i1));
    return s;
}

// 1.0 s tiles over [lo, hi); a trailing piece >= 0.2 s is kept.
void tile_region(const corpus::Recording& rec, double lo, double hi,
                 std::vector<Segment>& out) {
    for (double t = lo; hi - t >= kMinSegmentS; t += kNegativeTileS) {
        const double end = std::min(t + kNegativeTileS, hi);
        if (end - t >= kMinSegmentS) out.push_back(make_segment(rec, t, end));
    }
}

}  // namespace

std::vector<Segment> extract_segments(const corpus::Recording& rec, int* skipped) {
    const double dur = static_cast<double>(rec.samples.size()) / kFs;
    std::vector<Segment> out;
    int skip_count = 0;

    if (rec.meta.label == 1) {
        for (const auto& [s, e] : rec.meta.murmur_intervals) {
            if (s < 0.0 || e > dur + 1e-9) {
                ++skip_count;
                continue;
            }
            if (e - s < kMinSegmentS) continue;
            out.push_back(make_segment(rec, s, e));
        }
    } else {
        // negatives: tile the complement of any annotated intervals
        double cursor = 0.0;
        auto intervals = rec.meta.murmur_intervals;
        std::sort(intervals.begin(), intervals.end());
        for (const auto& [s, e] : intervals) {
            if (s < 0.0 || e > dur + 1e-9) {
                ++skip_count;
                continue;
            }
            tile_region(rec, cursor, s, out);
            cursor = std::max(cursor, e);
        }
        tile_region(rec, cursor, dur, out);
    }
    if (skipped) *skipped = skip_count;
    return out;
}

double estimate_heart_rate_bpm(const std::vector<float>& samples) {
    constexpr double kFallbackBpm = 72.0;
    constexpr int kDecim = 8;  // envelope autocorrelation at 500 Hz
    constexpr int kEnvFs = kFs / kDecim;
    constexpr int kMinLag = static_cast<int>(0.33 * kEnvFs);
    constexpr int kMaxLag = static_cast<int>(2.5 * kEnvFs);
    constexpr int kSmooth = kFs * 80 / 1000;

    if (static_cast<int>(samples.size()) < 2 * kMinLag * kDecim) return kFallbackBpm;

    // rectified envelope, moving-average smoothed, decimated, mean-removed
    std::vector<double> env;
    env.reserve(samples.size() / kDecim + 1);
    double run = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        run += std::abs(samples[i]);
        if (i >= static_cast<std::size_t>(kSmooth)) run -= std::abs(samples[i - kSmooth]);
        if (i % kDecim == 0)
            env.push_back(run / static_cast<double>(std::min<std::size_t>(i + 1, kSmooth)));
    }
    const auto n = static_cast<int>(env.size());
    double mean = 0;
    for (double v : env) mean += v;
    mean /= n;
    for (double& v : env) v -= mean;

    const int max_lag = std::min(kMaxLag, n / 2);
    if (max_lag <= kMinLag) return kFallbackBpm;
    std::vector<double> r(static_cast<std::size_t>(max_lag - kMinLag + 1));
    double rmax = 0;
    for (int lag = kMinLag; lag <= max_lag; ++lag) {
        double acc = 0;
        for (int i = 0; i + lag < n; ++i)
            acc += env[static_cast<std::size_t>(i)] * env[static_cast<std::size_t>(i + lag)];
        acc /= static_cast<double>(n - lag);
        r[static_cast<std::size_t>(lag - kMinLag)] = acc;
        rmax = std::max(rmax, acc);
    }
    if (rmax <= 0) return kFallbackBpm;
    // the period's autocorrelation repeats at every multiple, so take the
    // smallest lag that is both a local maximum and close to the global one
    for (int lag = kMinLag + 1; lag < max_lag; ++lag) {
        const auto k = static_cast<std::size_t>(lag - kMinLag);
        if (r[k] >= 0.85 * rmax && r[k] >= r[k - 1] && r[k] >= r[k + 1])
            return 60.0 * kEnvFs / lag;
    }
    return kFallbackBpm;
}

}  // namespace pcgl::windows
