#include "pcgl/harness/data.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <json.hpp>

#include "pcgl/common.h"
#include "pcgl/corpus/manifest.h"
#include "pcgl/corpus/zscore.h"
#include "pcgl/substrate/rng.h"
#include "pcgl/views/logmel.h"

namespace pcgl::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kind_name(views::AugOpKind k) {
    switch (k) {
        case views::AugOpKind::GaussNoise: return "gauss_noise";
        case views::AugOpKind::TimeShift: return "time_shift";
        case views::AugOpKind::PitchShift: return "pitch_shift";
        case views::AugOpKind::AmpScale: return "amp_scale";
        case views::AugOpKind::SnrNoise: return "snr_noise";
        case views::AugOpKind::Bandpass: return "bandpass";
    }
    throw std::runtime_error("unknown augmentation op kind");
}

views::AugOpKind kind_from_name(const std::string& s) {
    if (s == "gauss_noise") return views::AugOpKind::GaussNoise;
    if (s == "time_shift") return views::AugOpKind::TimeShift;
    if (s == "pitch_shift") return views::AugOpKind::PitchShift;
    if (s == "amp_scale") return views::AugOpKind::AmpScale;
    if (s == "snr_noise") return views::AugOpKind::SnrNoise;
    if (s == "bandpass") return views::AugOpKind::Bandpass;
    throw std::runtime_error("unknown augmentation op '" + s + "'");
}

json recipe_json(const views::AugmentationRecipe& r) {
    json ops = json::array();
    for (const auto& op : r.ops)
        ops.push_back({{"kind", kind_name(op.kind)}, {"a", op.a}, {"b", op.b}});
    return json{{"seed", r.seed}, {"ops", ops}};
}

views::AugmentationRecipe recipe_from_json(const json& j) {
    views::AugmentationRecipe r;
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& op : j.at("ops"))
        r.ops.push_back({kind_from_name(op.at("kind").get<std::string>()),
                         op.at("a").get<double>(), op.at("b").get<double>()});
    return r;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    PCGL_CHECK(out, "cannot write " << path.string());
    out << j.dump(2) << '\n';
    PCGL_CHECK(out.good(), "write failed for " << path.string());
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    PCGL_CHECK(in, "cannot open " << path.string());
    return json::parse(in);
}

}  // namespace

PreparedDataset prepare_dataset(const std::string& corpus_dir, std::uint64_t seed) {
    const corpus::Manifest manifest =
        corpus::load_manifest((fs::path(corpus_dir) / "manifest.jsonl").string());
    PCGL_CHECK(!manifest.entries.empty(), "prepare: empty manifest in " << corpus_dir);
    PreparedDataset ds;
    ds.split = windows::split_patients(manifest, seed);
    ds.n_recordings = static_cast<int>(manifest.entries.size());
    const std::set<std::string> train_set(ds.split.train.begin(), ds.split.train.end());
    const std::set<std::string> val_set(ds.split.val.begin(), ds.split.val.end());
    for (const auto& entry : manifest.entries) {
        corpus::Recording rec = corpus::read_recording(entry);
        rec.samples = corpus::zscore(rec.samples);
        int skipped = 0;
        const auto segments = windows::extract_segments(rec, &skipped);
        ds.skipped_intervals += skipped;
        const double hr = windows::estimate_heart_rate_bpm(rec.samples);
        for (auto& w : windows::build_windows(segments, hr)) {
            if (!w.quality.all()) {
                ++ds.dropped_quality;
                continue;
            }
            if (train_set.count(w.patient_id))
                ds.train.push_back(std::move(w));
            else if (val_set.count(w.patient_id))
                ds.val.push_back(std::move(w));
            else
                ds.test.push_back(std::move(w));
        }
    }
    PCGL_CHECK(!ds.train.empty(), "prepare: no training windows survived");
    ds.oversample_plan = windows::oversample_minority(ds.train, seed);
    return ds;
}

void save_prepared(const std::string& dir, const PreparedDataset& ds, std::uint64_t seed) {
    fs::create_directories(dir);
    windows::save_windows((fs::path(dir) / "train").string(), ds.train);
    windows::save_windows((fs::path(dir) / "val").string(), ds.val);
    windows::save_windows((fs::path(dir) / "test").string(), ds.test);
    write_json(fs::path(dir) / "splits.json",
               json{{"train", ds.split.train},
                    {"val", ds.split.val},
                    {"test", ds.split.test},
                    {"train_prevalence", ds.split.train_prevalence},
                    {"val_prevalence", ds.split.val_prevalence},
                    {"test_prevalence", ds.split.test_prevalence}});
    json plan = json::array();
    for (const auto& [idx, recipe] : ds.oversample_plan)
        plan.push_back({{"index", idx}, {"recipe", recipe_json(recipe)}});
    write_json(fs::path(dir) / "oversample.json", plan);
    write_json(fs::path(dir) / "prepared.json",
               json{{"schema_version", 1},
                    {"seed", seed},
                    {"n_recordings", ds.n_recordings},
                    {"dropped_quality", ds.dropped_quality},
                    {"skipped_intervals", ds.skipped_intervals},
                    {"windows",
                     {{"train", ds.train.size()},
                      {"val", ds.val.size()},
                      {"test", ds.test.size()}}}});
}

PreparedDataset load_prepared(const std::string& dir) {
    const json meta = read_json(fs::path(dir) / "prepared.json");
    PCGL_CHECK(meta.at("schema_version").get<int>() == 1,
               "prepared dataset schema version "
                   << meta.at("schema_version").get<int>() << " unsupported");
    PreparedDataset ds;
    ds.n_recordings = meta.at("n_recordings").get<int>();
    ds.dropped_quality = meta.at("dropped_quality").get<int>();
    ds.skipped_intervals = meta.at("skipped_intervals").get<int>();
    ds.train = windows::load_windows((fs::path(dir) / "train").string());
    ds.val = windows::load_windows((fs::path(dir) / "val").string());
    ds.test = windows::load_windows((fs::path(dir) / "test").string());
    const json splits = read_json(fs::path(dir) / "splits.json");
    ds.split.train = splits.at("train").get<std::vector<std::string>>();
    ds.split.val = splits.at("val").get<std::vector<std::string>>();
    ds.split.test = splits.at("test").get<std::vector<std::string>>();
    ds.split.train_prevalence = splits.at("train_prevalence").get<double>();
    ds.split.val_prevalence = splits.at("val_prevalence").get<double>();
    ds.split.test_prevalence = splits.at("test_prevalence").get<double>();
    for (const auto& e : read_json(fs::path(dir) / "oversample.json"))
        ds.oversample_plan.emplace_back(e.at("index").get<int>(),
                                        recipe_from_json(e.at("recipe")));
    return ds;
}

std::vector<std::string> label_fraction_patients(const std::vector<windows::Window>& train,
                                                 double fraction, std::uint64_t seed) {
    PCGL_CHECK(fraction > 0.0 && fraction <= 1.0,
               "label fraction " << fraction << " outside (0, 1]");
    std::map<std::string, int> patient_label;
    for (const auto& w : train) {
        auto [it, inserted] = patient_label.emplace(w.patient_id, w.label);
        if (!inserted && w.label == 1) it->second = 1;
    }
    std::vector<std::string> kept;
    for (int cls = 0; cls <= 1; ++cls) {
        std::vector<std::string> pool;
        for (const auto& [id, lab] : patient_label)
            if (lab == cls) pool.push_back(id);
        if (pool.empty()) continue;
        auto rng = substrate::make_rng(seed, "label-fraction", static_cast<std::uint64_t>(cls));
        std::shuffle(pool.begin(), pool.end(), rng);
        const auto keep = static_cast<std::size_t>(
            std::ceil(fraction * static_cast<double>(pool.size())));
        pool.resize(std::max<std::size_t>(1, keep));
        kept.insert(kept.end(), pool.begin(), pool.end());
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

std::vector<windows::Window> filter_by_patients(const std::vector<windows::Window>& ws,
                                                const std::vector<std::string>& patients) {
    const std::set<std::string> keep(patients.begin(), patients.end());
    std::vector<windows::Window> out;
    for (const auto& w : ws)
        if (keep.count(w.patient_id)) out.push_back(w);
    return out;
}

std::vector<windows::Window> apply_oversample(
    const std::vector<windows::Window>& train,
    const std::vector<std::pair<int, views::AugmentationRecipe>>& plan) {
    std::vector<windows::Window> out = train;
    out.reserve(train.size() + plan.size());
    for (std::size_t k = 0; k < plan.size(); ++k) {
        const auto& [idx, recipe] = plan[k];
        PCGL_CHECK(idx >= 0 && static_cast<std::size_t>(idx) < train.size(),
                   "oversample plan index " << idx << " out of range");
        windows::Window w = train[static_cast<std::size_t>(idx)];
        w.samples = views::augment_wave(w.samples, recipe);
        w.window_id += "-aug" + std::to_string(k);
        out.push_back(std::move(w));
    }
    return out;
}

substrate::Tensor<float> wave_batch(const std::vector<windows::Window>& ws,
                                    const std::vector<int>& idx) {
    PCGL_CHECK(!idx.empty(), "wave_batch: empty index list");
    auto t = substrate::Tensor<float>::zeros(
        {static_cast<int>(idx.size()), windows::kWindowSamples});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto& w = ws.at(static_cast<std::size_t>(idx[r]));
        PCGL_CHECK(w.samples.size() == windows::kWindowSamples,
                   "window " << w.window_id << " has " << w.samples.size() << " samples");
        std::copy(w.samples.begin(), w.samples.end(),
                  t.data.begin() + static_cast<std::ptrdiff_t>(r * windows::kWindowSamples));
    }
    return t;
}

substrate::Tensor<float> spec_batch(const std::vector<windows::Window>& ws,
                                    const std::vector<int>& idx) {
    PCGL_CHECK(!idx.empty(), "spec_batch: empty index list");
    const std::size_t px = static_cast<std::size_t>(views::kNMels) * views::kNFrames;
    auto t = substrate::Tensor<float>::zeros(
        {static_cast<int>(idx.size()), views::kNMels, views::kNFrames});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const views::MelSpec ms = views::logmel(ws.at(static_cast<std::size_t>(idx[r])).samples);
        std::copy(ms.bins.begin(), ms.bins.end(),
                  t.data.begin() + static_cast<std::ptrdiff_t>(r * px));
    }
    return t;
}

std::vector<int> window_labels(const std::vector<windows::Window>& ws) {
    std::vector<int> out;
    out.reserve(ws.size());
    for (const auto& w : ws) out.push_back(w.label);
    return out;
}

int count_patients(const std::vector<windows::Window>& ws) {
    std::set<std::string> ids;
    for (const auto& w : ws) ids.insert(w.patient_id);
    return static_cast<int>(ids.size());
}

}  // namespace pcgl::harness
