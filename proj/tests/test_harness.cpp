#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "pcgl/corpus/synth.h"
#include "pcgl/harness/config.h"
#include "pcgl/harness/data.h"
#include "pcgl/harness/train.h"
#include "pcgl/substrate/rng.h"
#include "pcgl/views/logmel.h"
#include "pcgl/windows/windows.h"

using namespace pcgl;
using namespace pcgl::harness;

namespace {

namespace fs = std::filesystem;

std::string fresh_dir(const std::string& tag) {
    const auto d = fs::temp_directory_path() / ("pcgl_harness_" + tag);
    fs::remove_all(d);
    fs::create_directories(d);
    return d.string();
}

windows::Window fake_window(const std::string& pid, int label, int ordinal) {
    windows::Window w;
    w.window_id = pid + "-w" + std::to_string(ordinal);
    w.patient_id = pid;
    w.recording_id = pid + "-r0";
    w.label = label;
    w.samples.resize(windows::kWindowSamples);
    auto rng = substrate::make_rng(7, "fake-window", static_cast<std::uint64_t>(ordinal));
    std::normal_distribution<float> g(0.f, 0.5f);
    for (auto& v : w.samples) v = g(rng);
    return w;
}

// A small corpus shared by the data-path tests. Built once.
const std::string& corpus_dir() {
    static const std::string dir = [] {
        const std::string d = fresh_dir("corpus");
        corpus::SynthSpec spec;
        spec.n_patients = 12;
        spec.recordings_per_patient = 2;
        spec.duration_s = 4.0;
        spec.seed = 29;
        auto c = corpus::synth_corpus(spec);
        corpus::write_corpus(c, d);
        return d;
    }();
    return dir;
}

const PreparedDataset& prepared() {
    static const PreparedDataset ds = prepare_dataset(corpus_dir(), 29);
    return ds;
}

RunConfig smoke_config() {
    RunConfig cfg;
    cfg.seed = 21;
    cfg.pretrain.epochs = 2;
    cfg.pretrain.batch = 8;
    cfg.proto.epochs = 2;
    cfg.proto.per_class = 4;
    cfg.proto.k_shot = 2;
    cfg.baseline.epochs = 2;
    cfg.baseline.freeze_epochs = 2;
    return cfg;
}

struct TrainerFixture {
    PreparedDataset ds;
    RunConfig cfg;
    PretrainResult pre;
};

const TrainerFixture& trainer_fixture() {
    static const TrainerFixture f = [] {
        TrainerFixture t;
        t.ds = prepared();
        t.cfg = smoke_config();
        t.pre = pretrain(t.cfg, t.ds);
        return t;
    }();
    return f;
}

std::set<std::string> id_set(const std::vector<std::string>& v) {
    return {v.begin(), v.end()};
}

bool same_tensor(const substrate::Tensor<float>& a, const substrate::Tensor<float>& b) {
    return a.shape == b.shape && a.data == b.data;
}

}  // namespace

TEST_CASE("run config defaults pin the training protocol") {
    RunConfig cfg;
    CHECK(cfg.seed == 42);
    CHECK(cfg.label_fraction == 1.0);
    CHECK(cfg.pretrain.epochs == 30);
    CHECK(cfg.pretrain.batch == 32);
    CHECK(cfg.pretrain.lr == 1e-3);
    CHECK(cfg.pretrain.schedule == "cosine");
    CHECK(cfg.proto.epochs == 50);
    CHECK(cfg.proto.lr == 1e-4);
    CHECK(cfg.proto.weight_decay == 1e-4);
    CHECK(cfg.proto.clip == 1.0);
    CHECK(cfg.baseline.epochs == 50);
    CHECK(cfg.baseline.head_lr == 1e-4);
    CHECK(cfg.baseline.backbone_lr == 1e-5);
    CHECK(cfg.baseline.freeze_epochs == 10);
    CHECK(cfg.baseline.schedule == "plateau");
    CHECK(cfg.ablation.dual_path);
    CHECK(cfg.ablation.enhanced_encoders);
    CHECK(cfg.ablation.hybrid_loss);
    CHECK(cfg.ablation.proto_head);
    CHECK(cfg.loss.temperature == doctest::Approx(0.07));
    CHECK(cfg.loss.alpha == doctest::Approx(0.3));
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config file parsing sets every section") {
    const std::string text = R"(
# full override
[run]
seed = 7
label_fraction = 0.5

[pretrain]
epochs = 3
batch = 16
lr = 0.002
schedule = constant

[proto]
epochs = 4
lr = 0.0002
weight_decay = 0.001
clip = 2.5
per_class = 8
k_shot = 3

[baseline]
epochs = 6
head_lr = 0.0003
backbone_lr = 0.00005
freeze_epochs = 2
schedule = constant

[ablation]
dual_path = false
enhanced_encoders = true
hybrid_loss = false
proto_head = true

[loss]
temperature = 0.1
alpha = 0.25
sinkhorn_epsilon = 0.05
sinkhorn_iters = 64
)";
    const auto cfg = parse_run_config(text);
    CHECK(cfg.seed == 7);
    CHECK(cfg.label_fraction == 0.5);
    CHECK(cfg.pretrain.epochs == 3);
    CHECK(cfg.pretrain.batch == 16);
    CHECK(cfg.pretrain.lr == 0.002);
    CHECK(cfg.pretrain.schedule == "constant");
    CHECK(cfg.proto.epochs == 4);
    CHECK(cfg.proto.clip == 2.5);
    CHECK(cfg.proto.per_class == 8);
    CHECK(cfg.proto.k_shot == 3);
    CHECK(cfg.baseline.freeze_epochs == 2);
    CHECK_FALSE(cfg.ablation.dual_path);
    CHECK_FALSE(cfg.ablation.hybrid_loss);
    CHECK(cfg.ablation.proto_head);
    CHECK(cfg.loss.temperature == 0.1);
    CHECK(cfg.loss.alpha == 0.25);
    CHECK(cfg.loss.sinkhorn.max_iters == 64);
}

TEST_CASE("config errors name the offending field") {
    CHECK_THROWS_WITH_AS(parse_run_config("[proto]\nblah = 1\n"),
                         doctest::Contains("proto.blah"), std::exception);
    CHECK_THROWS_WITH_AS(parse_run_config("[nosuch]\nx = 1\n"),
                         doctest::Contains("nosuch"), std::exception);
    CHECK_THROWS_WITH_AS(parse_run_config("[pretrain]\nepochs = soon\n"),
                         doctest::Contains("epochs"), std::exception);
    CHECK_THROWS_WITH_AS(parse_run_config("[ablation]\ndual_path = maybe\n"),
                         doctest::Contains("dual_path"), std::exception);
    CHECK_THROWS_AS(parse_run_config("[run]\nlabel_fraction = 0\n"), std::exception);
    CHECK_THROWS_AS(parse_run_config("[pretrain]\nbatch = 1\n"), std::exception);
    CHECK_THROWS_AS(parse_run_config("[pretrain]\nschedule = linear\n"), std::exception);
    CHECK_THROWS_AS(parse_run_config("[baseline]\nfreeze_epochs = 99\n"), std::exception);
}

TEST_CASE("run config survives the json round trip") {
    auto cfg = smoke_config();
    cfg.label_fraction = 0.25;
    cfg.ablation.enhanced_encoders = false;
    cfg.loss.alpha = 0.4;
    const auto j = run_config_json(cfg);
    const auto back = run_config_from_json(j);
    CHECK(back.seed == cfg.seed);
    CHECK(back.label_fraction == cfg.label_fraction);
    CHECK(back.pretrain.epochs == cfg.pretrain.epochs);
    CHECK(back.pretrain.schedule == cfg.pretrain.schedule);
    CHECK(back.proto.per_class == cfg.proto.per_class);
    CHECK(back.baseline.freeze_epochs == cfg.baseline.freeze_epochs);
    CHECK(back.ablation.enhanced_encoders == cfg.ablation.enhanced_encoders);
    CHECK(back.loss.alpha == cfg.loss.alpha);
    CHECK(back.loss.sinkhorn.max_iters == cfg.loss.sinkhorn.max_iters);
}

TEST_CASE("ablation flags drive the encoder and loss wiring") {
    RunConfig cfg;
    auto enc = encoder_config(cfg);
    CHECK(enc.tcn_dilated);
    CHECK(enc.enc2d_skips);
    cfg.ablation.enhanced_encoders = false;
    enc = encoder_config(cfg);
    CHECK_FALSE(enc.tcn_dilated);
    CHECK_FALSE(enc.enc2d_skips);

    CHECK(effective_loss(cfg).alpha == doctest::Approx(0.3));
    cfg.ablation.hybrid_loss = false;
    CHECK(effective_loss(cfg).alpha == 0.0);
}

TEST_CASE("prepared splits never share a patient") {
    const auto& ds = prepared();
    const auto tr = id_set(ds.split.train), va = id_set(ds.split.val), te = id_set(ds.split.test);
    CHECK(tr.size() + va.size() + te.size() == 12);
    for (const auto& p : va) CHECK(tr.count(p) == 0);
    for (const auto& p : te) CHECK(tr.count(p) == 0);
    for (const auto& p : te) CHECK(va.count(p) == 0);

    auto windows_match = [](const std::vector<windows::Window>& ws,
                            const std::set<std::string>& pats) {
        for (const auto& w : ws) CHECK(pats.count(w.patient_id) == 1);
    };
    windows_match(ds.train, tr);
    windows_match(ds.val, va);
    windows_match(ds.test, te);
}

TEST_CASE("prepared windows are clean and exactly one second long") {
    const auto& ds = prepared();
    CHECK(ds.n_recordings == 24);
    CHECK(ds.train.size() > 0);
    CHECK(ds.val.size() > 0);
    CHECK(ds.test.size() > 0);
    for (const auto* split : {&ds.train, &ds.val, &ds.test})
        for (const auto& w : *split) {
            CHECK(w.samples.size() == windows::kWindowSamples);
            CHECK(w.quality.all());
        }
    for (const auto& [idx, recipe] : ds.oversample_plan) {
        CHECK(idx >= 0);
        CHECK(idx < static_cast<int>(ds.train.size()));
    }
}

TEST_CASE("prepared dataset round trips through disk") {
    const auto& ds = prepared();
    const auto dir = fresh_dir("prepared_rt");
    save_prepared(dir, ds, 29);
    const auto back = load_prepared(dir);
    CHECK(back.split.train == ds.split.train);
    CHECK(back.split.val == ds.split.val);
    CHECK(back.split.test == ds.split.test);
    CHECK(back.dropped_quality == ds.dropped_quality);
    CHECK(back.skipped_intervals == ds.skipped_intervals);
    CHECK(back.n_recordings == ds.n_recordings);
    CHECK(back.oversample_plan.size() == ds.oversample_plan.size());
    REQUIRE(back.train.size() == ds.train.size());
    REQUIRE(back.test.size() == ds.test.size());
    for (std::size_t i = 0; i < ds.train.size(); ++i) {
        CHECK(back.train[i].window_id == ds.train[i].window_id);
        CHECK(back.train[i].label == ds.train[i].label);
        CHECK(back.train[i].samples == ds.train[i].samples);
    }
    fs::remove_all(dir);
}

TEST_CASE("label fractions nest and stratify") {
    std::vector<windows::Window> train;
    int ordinal = 0;
    for (int p = 0; p < 16; ++p) {
        const int label = p < 6 ? 1 : 0;  // 6 positive, 10 negative patients
        const std::string pid = "pat" + std::to_string(p);
        for (int k = 0; k < 3; ++k) train.push_back(fake_window(pid, label, ordinal++));
    }
    const auto q = label_fraction_patients(train, 0.25, 5);
    const auto h = label_fraction_patients(train, 0.5, 5);
    const auto full = label_fraction_patients(train, 1.0, 5);
    CHECK(full.size() == 16);
    CHECK(h.size() == 8);   // ceil(3) + ceil(5)
    CHECK(q.size() == 5);   // ceil(1.5)=2 + ceil(2.5)=3
    const auto hs = id_set(h), fs_ = id_set(full);
    for (const auto& p : q) CHECK(hs.count(p) == 1);
    for (const auto& p : h) CHECK(fs_.count(p) == 1);
    CHECK(label_fraction_patients(train, 0.25, 5) == q);

    int pos = 0;
    for (const auto& pid : q) pos += pid < "pat6" && pid.size() == 4;
    CHECK(pos == 2);

    const auto sub = filter_by_patients(train, q);
    const auto keep = id_set(q);
    CHECK(sub.size() == q.size() * 3);
    for (const auto& w : sub) CHECK(keep.count(w.patient_id) == 1);
}

TEST_CASE("a tiny fraction still keeps one patient per class") {
    std::vector<windows::Window> train;
    int ordinal = 0;
    for (int p = 0; p < 8; ++p)
        train.push_back(fake_window("pat" + std::to_string(p), p % 2, ordinal++));
    const auto kept = label_fraction_patients(train, 0.01, 3);
    CHECK(kept.size() == 2);
    std::set<int> labels;
    for (const auto& w : filter_by_patients(train, kept)) labels.insert(w.label);
    CHECK(labels.size() == 2);
}

TEST_CASE("oversampling balances the classes with augmented copies") {
    std::vector<windows::Window> train;
    int ordinal = 0;
    for (int i = 0; i < 4; ++i) train.push_back(fake_window("pos" + std::to_string(i), 1, ordinal++));
    for (int i = 0; i < 11; ++i)
        train.push_back(fake_window("neg" + std::to_string(i), 0, ordinal++));
    const auto plan = windows::oversample_minority(train, 9);
    CHECK(plan.size() == 7);
    const auto pool = apply_oversample(train, plan);
    int pos = 0, neg = 0;
    for (const auto& w : pool) (w.label == 1 ? pos : neg)++;
    CHECK(pos == neg);
    CHECK(pool.size() == train.size() + plan.size());
    std::set<std::string> ids;
    for (const auto& w : pool) ids.insert(w.window_id);
    CHECK(ids.size() == pool.size());
    for (std::size_t i = train.size(); i < pool.size(); ++i) {
        CHECK(pool[i].window_id.find("-aug") != std::string::npos);
        CHECK(pool[i].label == 1);
        CHECK(pool[i].samples.size() == windows::kWindowSamples);
        const auto& src = train[static_cast<std::size_t>(plan[i - train.size()].first)];
        CHECK(pool[i].patient_id == src.patient_id);
        CHECK(pool[i].samples != src.samples);
    }
    CHECK_THROWS_AS(apply_oversample(train, {{42, plan.front().second}}), std::exception);
}

TEST_CASE("batch assembly matches the window contents") {
    const auto& ds = prepared();
    const std::vector<int> idx{0, static_cast<int>(ds.train.size()) - 1};
    const auto wav = wave_batch(ds.train, idx);
    REQUIRE(wav.shape == substrate::Shape{2, windows::kWindowSamples});
    for (int j = 0; j < windows::kWindowSamples; ++j) {
        CHECK(wav.at(0, j) == ds.train.front().samples[static_cast<std::size_t>(j)]);
        CHECK(wav.at(1, j) == ds.train.back().samples[static_cast<std::size_t>(j)]);
    }
    const auto spec = spec_batch(ds.train, idx);
    REQUIRE(spec.shape.size() == 3);
    CHECK(spec.dim(0) == 2);
    CHECK(spec.dim(1) == 64);
    CHECK(spec.dim(2) == 59);
    const auto ref = views::logmel(ds.train.front().samples);
    for (int m = 0; m < 64; ++m)
        for (int t = 0; t < 59; ++t) CHECK(spec.at(0, m, t) == ref.at(m, t));

    const auto labels = window_labels(ds.train);
    CHECK(labels.size() == ds.train.size());
    CHECK(count_patients(ds.train) == static_cast<int>(ds.split.train.size()));
}

TEST_CASE("pretraining records losses and a loadable checkpoint") {
    const auto& f = trainer_fixture();
    CHECK(f.pre.epoch_loss.size() == 2);
    CHECK(f.pre.step_loss.size() >= 2);
    for (double l : f.pre.step_loss) CHECK(std::isfinite(l));

    auto bundle = load_bundle(f.pre.checkpoint);
    CHECK(bundle.kind == "pretrain");
    CHECK(bundle.cfg.seed == f.cfg.seed);
    for (auto* p : bundle.model->params())
        CHECK(f.pre.checkpoint.f32.count(p->name) == 1);
    CHECK(f.pre.checkpoint.meta.at("adam_steps").get<int>() ==
          static_cast<int>(f.pre.step_loss.size()));
}

TEST_CASE("pretraining is bitwise deterministic") {
    const auto& f = trainer_fixture();
    const auto again = pretrain(f.cfg, f.ds);
    CHECK(again.step_loss == f.pre.step_loss);
    CHECK(again.epoch_loss == f.pre.epoch_loss);
    for (const auto& [name, t] : f.pre.checkpoint.f32) {
        REQUIRE(again.checkpoint.f32.count(name) == 1);
        CHECK(same_tensor(again.checkpoint.f32.at(name), t));
    }
}

TEST_CASE("prototypical fine-tuning freezes the backbone and clips gradients") {
    const auto& f = trainer_fixture();
    const auto res = train_proto(f.cfg, f.ds, f.pre.checkpoint);
    CHECK(res.val_metric.size() == 2);
    for (double v : res.val_metric) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(res.grad_norms.size() >= 2);
    for (double g : res.grad_norms) CHECK(g <= f.cfg.proto.clip * (1 + 1e-5));
    CHECK(res.threshold >= 0.0);
    CHECK(res.threshold <= 1.0);

    auto bundle = load_bundle(res.checkpoint);
    CHECK(bundle.kind == "proto");
    CHECK(bundle.prototypes.has_value());
    CHECK(bundle.threshold == res.threshold);
    for (auto* p : bundle.model->params()) {
        const bool backbone = p->name.rfind("tcn.", 0) == 0 || p->name.rfind("enc2d.", 0) == 0;
        if (!backbone) continue;
        REQUIRE(f.pre.checkpoint.f32.count(p->name) == 1);
        CHECK(same_tensor(res.checkpoint.f32.at(p->name), f.pre.checkpoint.f32.at(p->name)));
    }
}

TEST_CASE("proto fine-tuning rejects a single-class labeled subset") {
    const auto& f = trainer_fixture();
    auto ds = f.ds;
    std::vector<windows::Window> one_class;
    for (const auto& w : ds.train)
        if (w.label == 0) one_class.push_back(w);
    ds.train = one_class;
    CHECK_THROWS_WITH_AS(train_proto(f.cfg, ds, f.pre.checkpoint),
                         doctest::Contains("single-class"), std::exception);
}

TEST_CASE("linear fine-tuning honors the freeze schedule") {
    const auto& f = trainer_fixture();

    // freeze_epochs == epochs: the backbone never moves.
    auto frozen_cfg = f.cfg;
    frozen_cfg.baseline.epochs = 2;
    frozen_cfg.baseline.freeze_epochs = 2;
    const auto frozen = train_linear(frozen_cfg, f.ds, &f.pre.checkpoint);
    CHECK(frozen.val_metric.size() == 2);
    auto bundle = load_bundle(frozen.checkpoint);
    int backbone_params = 0;
    for (auto* p : bundle.model->params()) {
        const bool backbone = p->name.rfind("tcn.", 0) == 0 || p->name.rfind("enc2d.", 0) == 0;
        if (!backbone) continue;
        ++backbone_params;
        CHECK(same_tensor(frozen.checkpoint.f32.at(p->name), f.pre.checkpoint.f32.at(p->name)));
    }
    CHECK(backbone_params > 0);

    // Unfreezing at epoch 1 must actually move backbone weights.
    auto thaw_cfg = f.cfg;
    thaw_cfg.baseline.epochs = 2;
    thaw_cfg.baseline.freeze_epochs = 1;
    const auto thawed = train_linear(thaw_cfg, f.ds, &f.pre.checkpoint);
    bool moved = false;
    for (const auto& [name, t] : thawed.checkpoint.f32) {
        if (name.rfind("tcn.", 0) != 0) continue;
        if (name.find("running_") != std::string::npos) continue;
        if (!same_tensor(t, f.pre.checkpoint.f32.at(name))) moved = true;
    }
    CHECK(moved);
}

TEST_CASE("from-scratch linear training needs no checkpoint") {
    const auto& f = trainer_fixture();
    auto cfg = f.cfg;
    cfg.baseline.epochs = 1;
    cfg.baseline.freeze_epochs = 0;
    const auto res = train_linear(cfg, f.ds, nullptr);
    CHECK(res.val_metric.size() == 1);
    CHECK(std::isfinite(res.val_metric.front()));
    auto bundle = load_bundle(res.checkpoint);
    CHECK(bundle.kind == "linear");
    CHECK(res.checkpoint.meta.at("from_scratch").get<bool>());
}

TEST_CASE("evaluation and prediction are deterministic") {
    const auto& f = trainer_fixture();
    const auto res = train_proto(f.cfg, f.ds, f.pre.checkpoint);
    const auto r1 = evaluate(res.checkpoint, f.ds.test);
    const auto r2 = evaluate(res.checkpoint, f.ds.test);
    CHECK(r1.f1 == r2.f1);
    CHECK(r1.auroc == r2.auroc);
    CHECK(r1.brier == r2.brier);
    CHECK(r1.n_windows == static_cast<int>(f.ds.test.size()));
    CHECK(r1.n_patients == static_cast<int>(f.ds.split.test.size()));
    CHECK(r1.threshold == res.threshold);

    const auto p1 = predict(res.checkpoint, f.ds.test);
    const auto p2 = predict(res.checkpoint, f.ds.test);
    CHECK(p1.scores == p2.scores);
    CHECK(p1.patient_ids.size() == f.ds.test.size());
    for (std::size_t i = 0; i < f.ds.test.size(); ++i) {
        CHECK(p1.patient_ids[i] == f.ds.test[i].patient_id);
        CHECK(p1.labels[i] == f.ds.test[i].label);
        CHECK(p1.scores[i] >= 0.0);
        CHECK(p1.scores[i] <= 1.0);
    }
}

TEST_CASE("embedding export writes the advertised geometry") {
    const auto& f = trainer_fixture();
    const auto dir = fresh_dir("embed");
    const auto path = dir + "/test.f32";
    export_embeddings(f.pre.checkpoint, f.ds.test, path);
    std::ifstream side(path + ".json");
    REQUIRE(side.good());
    const auto j = nlohmann::json::parse(side);
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    CHECK(rows == f.ds.test.size());
    CHECK(j.at("dtype").get<std::string>() == "float32");
    CHECK(j.at("ids").size() == rows);
    CHECK(fs::file_size(path) == rows * cols * 4);
    fs::remove_all(dir);
}
