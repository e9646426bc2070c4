#include "pcgl/corpus/synth.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "pcgl/corpus/manifest.h"
#include "pcgl/corpus/wav.h"
#include "pcgl/substrate/rng.h"

namespace pcgl::corpus {

namespace {

using substrate::make_rng;

constexpr double kS1Hz = 40.0, kS1Dur = 0.080;
constexpr double kS2Hz = 60.0, kS2Dur = 0.060;
constexpr double kS2Phase = 0.35;
constexpr double kS2Amp = 0.8;

void add_burst(std::vector<float>& x, double start_s, double dur_s, double freq_hz,
               double amp) {
    const double sigma = dur_s / 6.0;
    const double center = start_s + dur_s / 2.0;
    const auto i0 = static_cast<std::int64_t>(std::ceil(start_s * kSampleRate));
    const auto i1 = static_cast<std::int64_t>(std::floor((start_s + dur_s) * kSampleRate));
    for (std::int64_t i = std::max<std::int64_t>(0, i0);
         i <= i1 && i < static_cast<std::int64_t>(x.size()); ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        const double env = std::exp(-0.5 * std::pow((t - center) / sigma, 2.0));
        x[static_cast<std::size_t>(i)] +=
            static_cast<float>(amp * env * std::sin(2.0 * M_PI * freq_hz * (t - start_s)));
    }
}

double rms(const std::vector<float>& x) {
    double s = 0;
    for (float v : x) s += static_cast<double>(v) * v;
    return std::sqrt(s / static_cast<double>(x.size()));
}

Recording make_recording(const SynthSpec& spec, int patient, int rec, double hr_bpm,
                         int label) {
    auto rng = make_rng(spec.seed, "synth-rec", static_cast<std::uint64_t>(patient),
                        static_cast<std::uint64_t>(rec));
    const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * kSampleRate));
    const double cycle_s = 60.0 / hr_bpm;
    const double systole_s = kS2Phase * cycle_s + kS2Dur;

    Recording out;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "p%04d", patient);
    out.meta.patient_id = idbuf;
    std::snprintf(idbuf, sizeof(idbuf), "p%04d_r%02d", patient, rec);
    out.meta.recording_id = idbuf;
    out.meta.label = label;
    out.meta.site = static_cast<Site>(rec % 4);
    out.meta.sample_rate_hz = kSampleRate;
    out.samples.assign(n, 0.0f);

    for (double t0 = 0.0; t0 < spec.duration_s; t0 += cycle_s) {
        add_burst(out.samples, t0, kS1Dur, kS1Hz, 1.0);
        add_burst(out.samples, t0 + kS2Phase * cycle_s, kS2Dur, kS2Hz, kS2Amp);
    }
    const double heart_rms = rms(out.samples);

    if (label == 1) {
        // Random-phase multi-sine inside the murmur band, gated to systole.
        std::vector<double> freqs, phases;
        std::uniform_real_distribution<double> uphase(0.0, 2.0 * M_PI);
        for (double f = spec.murmur_band_hz.first; f <= spec.murmur_band_hz.second + 1e-9;
             f += 2.0) {
            freqs.push_back(f);
            phases.push_back(uphase(rng));
        }
        std::vector<float> murmur(n, 0.0f);
        double active_energy = 0.0;
        std::size_t active_count = 0;
        for (double t0 = 0.0; t0 < spec.duration_s; t0 += cycle_s) {
            const auto i0 = static_cast<std::size_t>(std::llround(t0 * kSampleRate));
            const auto i1 = std::min(
                n, static_cast<std::size_t>(std::llround((t0 + systole_s) * kSampleRate)));
            for (std::size_t i = i0; i < i1; ++i) {
                const double t = static_cast<double>(i) / kSampleRate;
                double v = 0;
                for (std::size_t k = 0; k < freqs.size(); ++k)
                    v += std::cos(2.0 * M_PI * freqs[k] * t + phases[k]);
                murmur[i] = static_cast<float>(v);
                active_energy += v * v;
                ++active_count;
            }
            const double end_s = std::min(t0 + systole_s, spec.duration_s);
            if (end_s - t0 >= 0.2) out.meta.murmur_intervals.emplace_back(t0, end_s);
        }
        if (active_count > 0) {
            const double murmur_rms =
                std::sqrt(active_energy / static_cast<double>(active_count));
            const double scale =
                heart_rms * std::pow(10.0, spec.murmur_snr_db / 20.0) / murmur_rms;
            for (std::size_t i = 0; i < n; ++i)
                out.samples[i] += static_cast<float>(scale * murmur[i]);
        }
    }

    const double noise_rms = heart_rms * std::pow(10.0, -spec.background_snr_db / 20.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& v : out.samples) v += static_cast<float>(noise_rms * gauss(rng));

    float peak = 0.0f;
    for (float v : out.samples) peak = std::max(peak, std::abs(v));
    if (peak > 0.0f) {
        const float s = 0.9f / peak;
        for (auto& v : out.samples) v *= s;
    }
    return out;
}

}  // namespace

SynthCorpus synth_corpus(const SynthSpec& spec) {
    PCGL_CHECK(spec.n_patients >= 1 && spec.recordings_per_patient >= 1,
               "synth: need at least one patient and recording");
    PCGL_CHECK(spec.duration_s > 0.5, "synth: duration_s " << spec.duration_s << " too short");
    PCGL_CHECK(spec.heart_rate_bpm_range.first > 0 &&
                   spec.heart_rate_bpm_range.first <= spec.heart_rate_bpm_range.second,
               "synth: heart-rate range out of order");
    PCGL_CHECK(spec.murmur_prevalence >= 0.0 && spec.murmur_prevalence <= 1.0,
               "synth: prevalence " << spec.murmur_prevalence);
    PCGL_CHECK(spec.murmur_band_hz.first > 0 &&
                   spec.murmur_band_hz.first < spec.murmur_band_hz.second &&
                   spec.murmur_band_hz.second < kSampleRate / 2.0,
               "synth: murmur band out of range");

    SynthCorpus out;
    for (int p = 0; p < spec.n_patients; ++p) {
        auto hr_rng = make_rng(spec.seed, "synth-hr", static_cast<std::uint64_t>(p));
        std::uniform_real_distribution<double> uhr(spec.heart_rate_bpm_range.first,
                                                   spec.heart_rate_bpm_range.second);
        const double hr = uhr(hr_rng);
        for (int r = 0; r < spec.recordings_per_patient; ++r) {
            auto label_rng =
                make_rng(spec.seed, "synth-label", static_cast<std::uint64_t>(p),
                         static_cast<std::uint64_t>(r));
            std::uniform_real_distribution<double> u01(0.0, 1.0);
            const int label = u01(label_rng) < spec.murmur_prevalence ? 1 : 0;
            out.recordings.push_back(make_recording(spec, p, r, hr, label));
            out.manifest.entries.push_back(out.recordings.back().meta);
        }
    }
    return out;
}

void write_corpus(SynthCorpus& corpus, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < corpus.recordings.size(); ++i) {
        auto& rec = corpus.recordings[i];
        const std::string path = dir + "/" + rec.meta.recording_id + ".wav";
        write_wav_float32(path, rec.samples, kSampleRate);
        rec.meta.path = path;
        corpus.manifest.entries[i].path = path;
    }
    save_manifest(dir + "/manifest.jsonl", corpus.manifest);
}

}  // namespace pcgl::corpus
