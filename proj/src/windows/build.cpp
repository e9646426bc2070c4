#include <cmath>
#include <complex>

#include "pcgl/windows/windows.h"

namespace pcgl::windows {

namespace {

constexpr int kFs = corpus::kSampleRate;

double rms_of(const std::vector<float>& x) {
    if (x.empty()) return 0.0;
    double s = 0;
    for (float v : x) s += static_cast<double>(v) * v;
    return std::sqrt(s / static_cast<double>(x.size()));
}

// Spectral centroid over the first 512 samples (7.8 Hz grid).
double centroid_hz(const std::vector<float>& x) {
    const int n = static_cast<int>(std::min<std::size_t>(x.size(), 512));
    if (n < 16) return 0.0;
    double num = 0, den = 0;
    for (int k = 1; k <= n / 2; ++k) {
        std::complex<double> acc(0, 0);
        const double w = -2.0 * M_PI * k / n;
        for (int i = 0; i < n; ++i)
            acc += static_cast<double>(x[static_cast<std::size_t>(i)]) *
                   std::complex<double>(std::cos(w * i), std::sin(w * i));
        const double mag = std::abs(acc);
        const double f = static_cast<double>(k) * kFs / n;
        num += f * mag;
        den += mag;
    }
    return den > 0 ? num / den : 0.0;
}

struct Chain {
    std::vector<int> seg_idx;
    std::vector<double> gaps_ms;  // gaps_ms[0] = 0 for the first segment
    std::size_t total = 0;
};

Window finalize(const std::vector<Segment>& segments, const Chain& chain, int serial,
                const QualityThresholds& th, double max_gap_ms) {
    Window w;
    const Segment& first = segments[static_cast<std::size_t>(chain.seg_idx[0])];
    w.recording_id = first.recording_id;
    w.patient_id = first.patient_id;
    w.label = first.label;
    w.window_id = first.recording_id + "_w" + std::to_string(serial);

    w.samples.reserve(kWindowSamples);
    for (std::size_t j = 0; j < chain.seg_idx.size() &&
                            w.samples.size() < static_cast<std::size_t>(kWindowSamples);
         ++j) {
        const auto& seg = segments[static_cast<std::size_t>(chain.seg_idx[j])];
        const std::size_t room = kWindowSamples - w.samples.size();
        const std::size_t take = std::min(room, seg.samples.size());
        w.samples.insert(w.samples.end(), seg.samples.begin(),
                         seg.samples.begin() + static_cast<std::ptrdiff_t>(take));
        w.source_segments.push_back({chain.seg_idx[j], chain.gaps_ms[j]});
    }

    // quality flags over the participating segments
    double wmean = 0;
    for (float v : w.samples) wmean += v;
    wmean /= static_cast<double>(w.samples.size());
    double wvar = 0;
    for (float v : w.samples) wvar += (v - wmean) * (v - wmean);
    const double wsigma = std::sqrt(wvar / static_cast<double>(w.samples.size()));

    for (std::size_t j = 1; j < w.source_segments.size(); ++j) {
        const auto& prev = segments[static_cast<std::size_t>(w.source_segments[j - 1].segment_index)];
        const auto& next = segments[static_cast<std::size_t>(w.source_segments[j].segment_index)];
        const double jump = std::abs(static_cast<double>(prev.samples.back()) -
                                     static_cast<double>(next.samples.front()));
        if (jump >= th.boundary_sigmas * wsigma) w.quality.temporal_continuity = false;
        const double r_prev = rms_of(prev.samples), r_next = rms_of(next.samples);
        const double ratio = r_next > 0 ? r_prev / r_next : 0.0;
        if (ratio < th.rms_ratio_lo || ratio > th.rms_ratio_hi)
            w.quality.amplitude_consistency = false;
        if (std::abs(centroid_hz(prev.samples) - centroid_hz(next.samples)) >=
            th.centroid_diff_hz)
            w.quality.frequency_consistency = false;
        const double gap = w.source_segments[j].gap_ms;
        if (gap < kMinGapMs || gap > max_gap_ms) w.quality.rhythm_preserved = false;
        if (prev.label != next.label) w.quality.label_pure = false;
        if (prev.recording_id != next.recording_id) w.quality.source_unified = false;
    }
    return w;
}

}  // namespace

std::vector<Window> build_windows(const std::vector<Segment>& segments,
                                  double hr_estimate_bpm, const QualityThresholds& th) {
    PCGL_CHECK(hr_estimate_bpm > 0, "build_windows: heart rate " << hr_estimate_bpm);
    for (std::size_t i = 1; i < segments.size(); ++i)
        PCGL_CHECK(segments[i - 1].recording_id < segments[i].recording_id ||
                       (segments[i - 1].recording_id == segments[i].recording_id &&
                        segments[i - 1].start_s <= segments[i].start_s),
                   "build_windows: segments not sorted by (recording_id, start_s)");

    const double cycle_ms = 1000.0 * 60.0 / hr_estimate_bpm;
    const double max_gap_ms = std::min(kMaxGapMs, 1.5 * cycle_ms);

    std::vector<Window> out;
    Chain chain;
    int serial = 0;
    std::string cur_recording;

    auto flush = [&](bool emit) {
        if (emit && chain.total >= static_cast<std::size_t>(kWindowSamples))
            out.push_back(finalize(segments, chain, serial++, th, max_gap_ms));
        chain = Chain{};
    };

    for (int i = 0; i < static_cast<int>(segments.size()); ++i) {
        const auto& seg = segments[static_cast<std::size_t>(i)];
        if (seg.samples.empty()) continue;
        bool chainable = !chain.seg_idx.empty();
        double gap_ms = 0.0;
        if (chainable) {
            const auto& prev = segments[static_cast<std::size_t>(chain.seg_idx.back())];
            gap_ms = (seg.start_s - prev.end_s) * 1000.0;
            chainable = seg.recording_id == prev.recording_id && seg.label == prev.label &&
                        gap_ms >= kMinGapMs && gap_ms <= max_gap_ms;
        }
        if (!chainable) flush(true);
        if (seg.recording_id != cur_recording) {
            cur_recording = seg.recording_id;
            serial = 0;
        }
        chain.seg_idx.push_back(i);
        chain.gaps_ms.push_back(chain.seg_idx.size() == 1 ? 0.0 : gap_ms);
        chain.total += seg.samples.size();
        if (chain.total >= static_cast<std::size_t>(kWindowSamples)) flush(true);
    }
    flush(true);
    return out;
}

}  // namespace pcgl::windows
