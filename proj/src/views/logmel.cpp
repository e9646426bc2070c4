#include "pcgl/views/logmel.h"

#include <cmath>
#include <random>

#include <fftw3.h>

#include "pcgl/common.h"
#include "pcgl/corpus/types.h"
#include "pcgl/substrate/rng.h"

namespace pcgl::views {

namespace {

constexpr int kFs = corpus::kSampleRate;
constexpr int kNBins = kNFft / 2 + 1;

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// 64 triangles need 66 mel-spaced edge points.
std::vector<double> mel_edges_hz() {
    const double lo = hz_to_mel(kMelLoHz), hi = hz_to_mel(kMelHiHz);
    std::vector<double> edges(kNMels + 2);
    for (int i = 0; i < kNMels + 2; ++i)
        edges[static_cast<std::size_t>(i)] =
            mel_to_hz(lo + (hi - lo) * i / (kNMels + 1));
    return edges;
}

struct Stft {
    fftwf_plan plan;
    float* in;
    fftwf_complex* out;
    std::vector<float> hann;

    Stft() {
        in = fftwf_alloc_real(kNFft);
        out = fftwf_alloc_complex(kNBins);
        plan = fftwf_plan_dft_r2c_1d(kNFft, in, out, FFTW_ESTIMATE);
        hann.resize(kNFft);
        for (int i = 0; i < kNFft; ++i)
            hann[static_cast<std::size_t>(i)] =
                0.5f * (1.0f - std::cos(2.0f * static_cast<float>(M_PI) * i / kNFft));
    }
    ~Stft() {
        fftwf_destroy_plan(plan);
        fftwf_free(in);
        fftwf_free(out);
    }
};

// Filterbank weights [kNMels][kNBins], built once.
const std::vector<float>& filterbank() {
    static const std::vector<float> fb = [] {
        std::vector<float> w(static_cast<std::size_t>(kNMels) * kNBins, 0.0f);
        const auto edges = mel_edges_hz();
        for (int m = 0; m < kNMels; ++m) {
            const double fl = edges[static_cast<std::size_t>(m)];
            const double fc = edges[static_cast<std::size_t>(m) + 1];
            const double fr = edges[static_cast<std::size_t>(m) + 2];
            for (int k = 0; k < kNBins; ++k) {
                const double f = static_cast<double>(k) * kFs / kNFft;
                double v = 0;
                if (f > fl && f < fc)
                    v = (f - fl) / (fc - fl);
                else if (f >= fc && f < fr)
                    v = (fr - f) / (fr - fc);
                w[static_cast<std::size_t>(m) * kNBins + static_cast<std::size_t>(k)] =
                    static_cast<float>(v);
            }
        }
        return w;
    }();
    return fb;
}

}  // namespace

std::vector<double> mel_filter_centers_hz() {
    const auto edges = mel_edges_hz();
    return {edges.begin() + 1, edges.end() - 1};
}

MelSpec logmel(const std::vector<float>& samples) {
    PCGL_CHECK(samples.size() == 4000,
               "logmel: want a 4000-sample window, got " << samples.size());
    const int n_frames = static_cast<int>((samples.size() - kNFft) / kHop) + 1;

    static thread_local Stft stft;
    const auto& fb = filterbank();

    std::vector<float> mel(static_cast<std::size_t>(kNMels) * n_frames);
    std::vector<float> power(kNBins);
    for (int t = 0; t < n_frames; ++t) {
        const std::size_t base = static_cast<std::size_t>(t) * kHop;
        for (int i = 0; i < kNFft; ++i)
            stft.in[i] = samples[base + static_cast<std::size_t>(i)] *
                         stft.hann[static_cast<std::size_t>(i)];
        fftwf_execute(stft.plan);
        for (int k = 0; k < kNBins; ++k)
            power[static_cast<std::size_t>(k)] =
                stft.out[k][0] * stft.out[k][0] + stft.out[k][1] * stft.out[k][1];
        for (int m = 0; m < kNMels; ++m) {
            double acc = 0;
            const float* row = fb.data() + static_cast<std::size_t>(m) * kNBins;
            for (int k = 0; k < kNBins; ++k) acc += row[k] * power[static_cast<std::size_t>(k)];
            mel[static_cast<std::size_t>(m) * n_frames + static_cast<std::size_t>(t)] =
                static_cast<float>(std::log(acc + kLogFloor));
        }
    }

    // Per-spectrogram standardization (population sigma; constant input -> 0).
    double s = 0;
    for (float v : mel) s += v;
    const double mean = s / static_cast<double>(mel.size());
    double s2 = 0;
    for (float v : mel) s2 += (v - mean) * (v - mean);
    const double sigma = std::sqrt(s2 / static_cast<double>(mel.size()));
    MelSpec out;
    out.bins.assign(mel.size(), 0.0f);
    if (sigma >= 1e-8)
        for (std::size_t i = 0; i < mel.size(); ++i)
            out.bins[i] = static_cast<float>((mel[i] - mean) / sigma);
    PCGL_CHECK(n_frames == kNFrames, "logmel: frame count " << n_frames);
    return out;
}

MelSpec augment_spec(const MelSpec& spec, int n_time_masks, int n_freq_masks, int max_width,
                     std::uint64_t seed) {
    PCGL_CHECK(max_width >= 1, "augment_spec: max_width " << max_width);
    PCGL_CHECK(max_width <= kNFrames && max_width <= kNMels,
               "augment_spec: max_width " << max_width << " exceeds axis size");
    MelSpec out = spec;
    auto rng = substrate::make_rng(seed, "spec-mask");
    std::uniform_int_distribution<int> uw(1, max_width);
    for (int i = 0; i < n_time_masks; ++i) {
        const int w = uw(rng);
        const int t0 = std::uniform_int_distribution<int>(0, kNFrames - w)(rng);
        for (int m = 0; m < kNMels; ++m)
            for (int t = t0; t < t0 + w; ++t) out.at(m, t) = 0.0f;
    }
    for (int i = 0; i < n_freq_masks; ++i) {
        const int w = uw(rng);
        const int m0 = std::uniform_int_distribution<int>(0, kNMels - w)(rng);
        for (int m = m0; m < m0 + w; ++m)
            for (int t = 0; t < kNFrames; ++t) out.at(m, t) = 0.0f;
    }
    return out;
}

}  // namespace pcgl::views
