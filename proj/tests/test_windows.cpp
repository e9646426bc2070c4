#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "pcgl/corpus/synth.h"
#include "pcgl/substrate/rng.h"
#include "pcgl/windows/windows.h"

using namespace pcgl::windows;
using pcgl::corpus::Manifest;
using pcgl::corpus::Recording;
using pcgl::corpus::RecordingMeta;
using pcgl::substrate::make_rng;

namespace {

Recording make_rec(const std::string& rid, const std::string& pid, int label, double dur_s,
                   std::vector<std::pair<double, double>> intervals) {
    Recording r;
    r.meta.recording_id = rid;
    r.meta.patient_id = pid;
    r.meta.label = label;
    r.meta.murmur_intervals = std::move(intervals);
    r.samples.resize(static_cast<std::size_t>(dur_s * 4000));
    auto rng = make_rng(1, "rec-fill", std::hash<std::string>{}(rid));
    std::normal_distribution<float> d(0.f, 0.1f);
    for (auto& v : r.samples) v = d(rng);
    return r;
}

Segment make_seg(const std::string& rid, int label, double start_s, double end_s,
                 std::uint64_t fill_seed) {
    Segment s;
    s.recording_id = rid;
    s.patient_id = "p_" + rid;
    s.label = label;
    s.start_s = start_s;
    s.end_s = end_s;
    s.samples.resize(static_cast<std::size_t>(std::llround((end_s - start_s) * 4000)));
    auto rng = make_rng(fill_seed, "seg-fill");
    std::normal_distribution<float> d(0.f, 0.1f);
    for (auto& v : s.samples) v = d(rng);
    return s;
}

// Independent replay of the chaining rules, tracking only segment indices.
std::vector<std::vector<int>> oracle_chains(const std::vector<Segment>& segs, double hr_bpm) {
    const double max_gap = std::min(1000.0, 1.5 * 60000.0 / hr_bpm);
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    std::size_t total = 0;
    auto emit = [&]() {
        if (total >= 4000) {
            // only segments that actually contribute samples are recorded
            std::vector<int> used;
            std::size_t filled = 0;
            for (int i : cur) {
                if (filled >= 4000) break;
                used.push_back(i);
                filled += segs[static_cast<std::size_t>(i)].samples.size();
            }
            out.push_back(used);
        }
        cur.clear();
        total = 0;
    };
    for (int i = 0; i < static_cast<int>(segs.size()); ++i) {
        if (!cur.empty()) {
            const auto& prev = segs[static_cast<std::size_t>(cur.back())];
            const auto& s = segs[static_cast<std::size_t>(i)];
            const double gap = (s.start_s - prev.end_s) * 1000.0;
            const bool ok = s.recording_id == prev.recording_id && s.label == prev.label &&
                            gap >= 50.0 && gap <= max_gap;
            if (!ok) emit();
        }
        cur.push_back(i);
        total += segs[static_cast<std::size_t>(i)].samples.size();
        if (total >= 4000) emit();
    }
    emit();
    return out;
}

}  // namespace

TEST_CASE("extract_segments maps murmur intervals for positives") {
    auto rec = make_rec("r1", "p1", 1, 3.0, {{0.5, 1.0}, {2.0, 2.4}});
    int skipped = -1;
    auto segs = extract_segments(rec, &skipped);
    CHECK(skipped == 0);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].samples.size() == 2000);
    CHECK(segs[1].samples.size() == 1600);
    CHECK(segs[0].label == 1);
    CHECK(segs[0].start_s == doctest::Approx(0.5));
}

TEST_CASE("extract_segments skips out-of-bounds intervals with a count") {
    auto rec = make_rec("r1", "p1", 1, 3.0, {{2.9, 3.5}, {0.1, 0.8}});
    int skipped = 0;
    auto segs = extract_segments(rec, &skipped);
    CHECK(skipped == 1);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].start_s == doctest::Approx(0.1));
}

TEST_CASE("extract_segments tiles negatives") {
    auto rec = make_rec("r2", "p2", 0, 3.0, {});
    auto segs = extract_segments(rec, nullptr);
    REQUIRE(segs.size() == 3);
    double covered = 0;
    for (const auto& s : segs) {
        CHECK(s.label == 0);
        CHECK(s.samples.size() == 4000);
        covered += s.end_s - s.start_s;
    }
    CHECK(covered == doctest::Approx(3.0));

    // a 3.5 s recording keeps the 0.5 s remainder
    auto rec2 = make_rec("r3", "p2", 0, 3.5, {});
    auto segs2 = extract_segments(rec2, nullptr);
    REQUIRE(segs2.size() == 4);
    CHECK(segs2[3].samples.size() == 2000);
}

TEST_CASE("build_windows merges short segments across valid gaps") {
    std::vector<Segment> segs;
    segs.push_back(make_seg("r1", 1, 0.0, 0.6, 1));
    segs.push_back(make_seg("r1", 1, 0.7, 1.2, 2));  // 100 ms gap
    auto ws = build_windows(segs, 72.0);
    REQUIRE(ws.size() == 1);
    CHECK(ws[0].samples.size() == 4000);
    REQUIRE(ws[0].source_segments.size() == 2);
    CHECK(ws[0].source_segments[0].gap_ms == doctest::Approx(0.0));
    CHECK(ws[0].source_segments[1].gap_ms == doctest::Approx(100.0));
    CHECK(ws[0].quality.rhythm_preserved);
    CHECK(ws[0].quality.label_pure);
    CHECK(ws[0].quality.source_unified);
    // first 2400 samples come from the first segment
    for (std::size_t i = 0; i < 2400; ++i) CHECK(ws[0].samples[i] == segs[0].samples[i]);
    for (std::size_t i = 0; i < 1600; ++i)
        CHECK(ws[0].samples[2400 + i] == segs[1].samples[i]);
}

TEST_CASE("a 1200 ms gap breaks the chain") {
    std::vector<Segment> segs;
    segs.push_back(make_seg("r1", 1, 0.0, 0.6, 3));
    segs.push_back(make_seg("r1", 1, 1.8, 2.4, 4));
    auto ws = build_windows(segs, 72.0);
    CHECK(ws.empty());
}

TEST_CASE("the cycle-scaled gap cap applies at high heart rates") {
    // 700 ms gap passes the absolute rule but 1.5 cycles at 150 bpm is 600 ms
    std::vector<Segment> segs;
    segs.push_back(make_seg("r1", 1, 0.0, 0.6, 5));
    segs.push_back(make_seg("r1", 1, 1.3, 1.9, 6));
    CHECK(build_windows(segs, 150.0).empty());
    CHECK(build_windows(segs, 72.0).size() == 1);
}

TEST_CASE("single long segment truncates to the first 4000 samples") {
    std::vector<Segment> segs{make_seg("r1", 1, 0.0, 1.2, 7)};
    auto ws = build_windows(segs, 72.0);
    REQUIRE(ws.size() == 1);
    REQUIRE(ws[0].source_segments.size() == 1);
    for (std::size_t i = 0; i < 4000; ++i) CHECK(ws[0].samples[i] == segs[0].samples[i]);
}

TEST_CASE("build_windows agrees with an independent rule replay") {
    auto rng = make_rng(8, "stream");
    std::uniform_real_distribution<double> ulen(0.2, 1.4), ugap(0.0, 1.3);
    std::uniform_int_distribution<int> ulabel(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Segment> segs;
        for (int r = 0; r < 3; ++r) {
            const std::string rid = "rec" + std::to_string(trial) + "_" + std::to_string(r);
            const int label = ulabel(rng);
            double t = 0.0;
            for (int k = 0; k < 8; ++k) {
                const double len = ulen(rng);
                segs.push_back(make_seg(rid, label, t, t + len,
                                        static_cast<std::uint64_t>(trial * 100 + k)));
                t += len + ugap(rng);
            }
        }
        const double hr = 60.0 + 50.0 * ulen(rng);
        auto ws = build_windows(segs, hr);
        auto expect = oracle_chains(segs, hr);
        REQUIRE(ws.size() == expect.size());
        for (std::size_t w = 0; w < ws.size(); ++w) {
            REQUIRE(ws[w].source_segments.size() == expect[w].size());
            for (std::size_t j = 0; j < expect[w].size(); ++j)
                CHECK(ws[w].source_segments[j].segment_index == expect[w][j]);
        }
    }
}

TEST_CASE("emitted windows satisfy the documented invariants") {
    auto rng = make_rng(9, "stream2");
    std::uniform_real_distribution<double> ulen(0.2, 2.0), ugap(0.04, 1.2);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<Segment> segs;
        double t = 0.0;
        const int label = trial % 2;
        for (int k = 0; k < 10; ++k) {
            const double len = ulen(rng);
            segs.push_back(
                make_seg("rec" + std::to_string(trial), label, t, t + len,
                         static_cast<std::uint64_t>(900 + trial * 100 + k)));
            t += len + ugap(rng);
        }
        const double hr = 75.0;
        const double max_gap = std::min(1000.0, 1.5 * 60000.0 / hr);
        for (const auto& w : build_windows(segs, hr)) {
            CHECK(w.samples.size() == 4000);
            CHECK(w.quality.label_pure);
            CHECK(w.quality.source_unified);
            for (std::size_t j = 0; j < w.source_segments.size(); ++j) {
                const auto& ref = w.source_segments[j];
                CHECK(segs[static_cast<std::size_t>(ref.segment_index)].label == w.label);
                CHECK(segs[static_cast<std::size_t>(ref.segment_index)].recording_id ==
                      w.recording_id);
                if (j > 0) {
                    CHECK(ref.gap_ms >= 50.0);
                    CHECK(ref.gap_ms <= max_gap);
                } else {
                    CHECK(ref.gap_ms == 0.0);
                }
            }
        }
    }
}

TEST_CASE("heart-rate estimate recovers the synthetic rate") {
    pcgl::corpus::SynthSpec spec;
    spec.n_patients = 1;
    spec.recordings_per_patient = 1;
    spec.duration_s = 10.0;
    spec.heart_rate_bpm_range = {75.0, 75.0};
    spec.murmur_prevalence = 0.0;
    spec.seed = 14;
    auto corpus = pcgl::corpus::synth_corpus(spec);
    const double est = estimate_heart_rate_bpm(corpus.recordings[0].samples);
    CHECK(est > 65.0);
    CHECK(est < 85.0);

    std::vector<float> tiny(1000, 0.1f);
    CHECK(estimate_heart_rate_bpm(tiny) == doctest::Approx(72.0));
}

TEST_CASE("split assigns 6/2/2 on ten patients and never leaks") {
    Manifest m;
    for (int p = 0; p < 10; ++p) {
        RecordingMeta e;
        e.recording_id = "r" + std::to_string(p);
        e.patient_id = "p" + std::to_string(p);
        e.label = p < 4 ? 1 : 0;
        m.entries.push_back(e);
    }
    auto split = split_patients(m, 42);
    CHECK(split.train.size() == 6);
    CHECK(split.val.size() == 2);
    CHECK(split.test.size() == 2);

    auto split2 = split_patients(m, 42);
    CHECK(split.train == split2.train);
    CHECK(split.val == split2.val);
    CHECK(split.test == split2.test);

    Manifest small;
    for (int p = 0; p < 4; ++p) {
        RecordingMeta e;
        e.recording_id = "r" + std::to_string(p);
        e.patient_id = "p" + std::to_string(p);
        small.entries.push_back(e);
    }
    CHECK_THROWS_AS(split_patients(small, 1), std::runtime_error);
}

TEST_CASE("random manifests: disjoint splits, coverage, stratification") {
    auto rng = make_rng(10, "manifests");
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<int> un(5, 60);
        std::uniform_real_distribution<double> uprev(0.1, 0.9);
        const int n = un(rng);
        const double prev = uprev(rng);
        Manifest m;
        int n_pos = 0;
        for (int p = 0; p < n; ++p) {
            RecordingMeta e;
            e.recording_id = "r" + std::to_string(p);
            e.patient_id = "p" + std::to_string(p);
            e.label = std::uniform_real_distribution<double>(0, 1)(rng) < prev ? 1 : 0;
            n_pos += e.label;
            m.entries.push_back(e);
        }
        auto s = split_patients(m, rng());

        std::set<std::string> train(s.train.begin(), s.train.end());
        std::set<std::string> val(s.val.begin(), s.val.end());
        std::set<std::string> test(s.test.begin(), s.test.end());
        CHECK(train.size() + val.size() + test.size() == static_cast<std::size_t>(n));
        for (const auto& pid : val) CHECK(train.count(pid) == 0);
        for (const auto& pid : test) {
            CHECK(train.count(pid) == 0);
            CHECK(val.count(pid) == 0);
        }
        CHECK(std::abs(static_cast<double>(s.train.size()) - 0.6 * n) <= 1.0);
        CHECK(std::abs(static_cast<double>(s.val.size()) - 0.2 * n) <= 1.0);
        CHECK(std::abs(static_cast<double>(s.test.size()) - 0.2 * n) <= 1.0);
    }
}

TEST_CASE("oversampling plan rebalances to 1:1") {
    std::vector<Window> wins;
    for (int i = 0; i < 100; ++i) {
        Window w;
        w.window_id = "w" + std::to_string(i);
        w.label = i < 30 ? 1 : 0;
        w.samples.assign(4000, 0.1f);
        wins.push_back(w);
    }
    auto plan = oversample_minority(wins, 7);
    CHECK(plan.size() == 40);
    for (const auto& [idx, recipe] : plan) CHECK(wins[static_cast<std::size_t>(idx)].label == 1);

    auto plan2 = oversample_minority(wins, 7);
    REQUIRE(plan.size() == plan2.size());
    for (std::size_t i = 0; i < plan.size(); ++i) {
        CHECK(plan[i].first == plan2[i].first);
        CHECK(plan[i].second.seed == plan2[i].second.seed);
        CHECK(plan[i].second.ops.size() == plan2[i].second.ops.size());
    }

    std::vector<Window> balanced(wins.begin(), wins.begin() + 60);
    CHECK(oversample_minority(balanced, 7).empty());

    std::vector<Window> single(wins.begin(), wins.begin() + 30);
    CHECK_THROWS_AS(oversample_minority(single, 7), std::runtime_error);
}

TEST_CASE("episodes follow the support-size rule") {
    std::vector<std::pair<int, int>> batch;
    for (int i = 0; i < 16; ++i) batch.emplace_back(i, 0);
    for (int i = 16; i < 32; ++i) batch.emplace_back(i, 1);
    auto ep = make_episode(batch, 5, 3);
    CHECK(ep.support.size() == 10);
    CHECK(ep.query.size() == 22);

    std::vector<std::pair<int, int>> tiny{{0, 0}, {1, 0}, {2, 1}, {3, 1}};
    auto ep2 = make_episode(tiny, 5, 3);
    CHECK(ep2.support.size() == 2);
    CHECK(ep2.query.size() == 2);

    // disjoint and jointly covering
    std::set<int> seen;
    for (const auto& [i, l] : ep.support) CHECK(seen.insert(i).second);
    for (const auto& [i, l] : ep.query) CHECK(seen.insert(i).second);
    CHECK(seen.size() == 32);

    auto ep3 = make_episode(batch, 5, 3);
    CHECK(ep3.support == ep.support);
    CHECK(ep3.query == ep.query);

    std::vector<std::pair<int, int>> bad{{0, 0}, {1, 0}, {2, 1}};
    CHECK_THROWS_AS(make_episode(bad, 5, 3), std::runtime_error);
}

TEST_CASE("window store round-trips samples and metadata") {
    std::vector<Segment> segs;
    segs.push_back(make_seg("r1", 1, 0.0, 0.6, 31));
    segs.push_back(make_seg("r1", 1, 0.7, 1.2, 32));
    segs.push_back(make_seg("r2", 0, 0.0, 1.1, 33));
    auto ws = build_windows(segs, 72.0);
    REQUIRE(ws.size() == 2);

    const auto dir =
        (std::filesystem::temp_directory_path() / "window_store_test").string();
    save_windows(dir, ws);
    auto back = load_windows(dir);
    REQUIRE(back.size() == ws.size());
    for (std::size_t i = 0; i < ws.size(); ++i) {
        CHECK(back[i].window_id == ws[i].window_id);
        CHECK(back[i].patient_id == ws[i].patient_id);
        CHECK(back[i].label == ws[i].label);
        REQUIRE(back[i].samples.size() == 4000);
        for (std::size_t j = 0; j < 4000; ++j) CHECK(back[i].samples[j] == ws[i].samples[j]);
        REQUIRE(back[i].source_segments.size() == ws[i].source_segments.size());
        CHECK(back[i].quality.all() == ws[i].quality.all());
    }
    std::filesystem::remove_all(dir);
}
