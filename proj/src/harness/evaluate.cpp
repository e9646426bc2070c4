#include <fstream>

#include "pcgl/common.h"
#include "pcgl/harness/stats.h"
#include "pcgl/harness/train.h"

namespace pcgl::harness {

using substrate::Tensor;

EvalReport evaluate(const substrate::Checkpoint& ckpt,
                    const std::vector<windows::Window>& split) {
    ModelBundle b = load_bundle(ckpt);
    PCGL_CHECK(b.head() != nullptr,
               "checkpoint of kind '" << b.kind << "' has no classifier head");
    PCGL_CHECK(!split.empty(), "evaluate: empty split");
    const auto scores = window_scores(b, split);
    return evaluate_scores(scores, window_labels(split), b.threshold,
                           count_patients(split));
}

Predictions predict(const substrate::Checkpoint& ckpt,
                    const std::vector<windows::Window>& split) {
    ModelBundle b = load_bundle(ckpt);
    PCGL_CHECK(b.head() != nullptr,
               "checkpoint of kind '" << b.kind << "' has no classifier head");
    PCGL_CHECK(!split.empty(), "predict: empty split");
    Predictions p;
    p.scores = window_scores(b, split);
    p.labels = window_labels(split);
    for (const auto& w : split) p.patient_ids.push_back(w.patient_id);
    return p;
}

void export_embeddings(const substrate::Checkpoint& ckpt,
                       const std::vector<windows::Window>& split, const std::string& path) {
    ModelBundle b = load_bundle(ckpt);
    PCGL_CHECK(!split.empty(), "export: empty split");
    Tensor<float> emb = backbone_features(*b.model, split);
    if (b.cfg.ablation.dual_path) {
        b.model->fusion().set_mode(substrate::Mode::Eval);
        emb = b.model->fusion().forward(emb);
    }
    std::ofstream out(path, std::ios::binary);
    PCGL_CHECK(out, "cannot write embeddings to " << path);
    out.write(reinterpret_cast<const char*>(emb.data.data()),
              static_cast<std::streamsize>(emb.numel() * sizeof(float)));
    PCGL_CHECK(out.good(), "write failed for " << path);
    out.close();

    nlohmann::json ids = nlohmann::json::array(), labels = nlohmann::json::array();
    for (const auto& w : split) {
        ids.push_back(w.window_id);
        labels.push_back(w.label);
    }
    std::ofstream side(path + ".json");
    PCGL_CHECK(side, "cannot write sidecar for " << path);
    side << nlohmann::json{{"rows", emb.dim(0)},
                           {"cols", emb.dim(1)},
                           {"dtype", "float32"},
                           {"byte_order", "little-endian"},
                           {"ids", ids},
                           {"labels", labels}}
                .dump(2)
         << '\n';
    PCGL_CHECK(side.good(), "write failed for " << path << ".json");
}

std::vector<EfficiencyPoint> efficiency_curve(const RunConfig& cfg, const PreparedDataset& ds,
                                              const std::vector<double>& fractions,
                                              const substrate::Checkpoint* pretrained) {
    PCGL_CHECK(!fractions.empty(), "efficiency: no fractions given");
    for (double f : fractions)
        PCGL_CHECK(f > 0.0 && f <= 1.0, "efficiency: fraction " << f << " outside (0, 1]");
    substrate::Checkpoint local;
    if (!pretrained) {
        local = pretrain(cfg, ds).checkpoint;
        pretrained = &local;
    }
    const auto test_labels = window_labels(ds.test);
    std::vector<std::string> test_patients;
    for (const auto& w : ds.test) test_patients.push_back(w.patient_id);

    std::vector<EfficiencyPoint> out;
    for (double f : fractions) {
        RunConfig ssl_cfg = cfg;
        ssl_cfg.label_fraction = f;
        FinetuneResult ssl = train_proto(ssl_cfg, ds, *pretrained);

        // The supervised arm trains everything from random init at the head
        // rate with no warm-up freeze.
        RunConfig sup_cfg = ssl_cfg;
        sup_cfg.baseline.freeze_epochs = 0;
        sup_cfg.baseline.backbone_lr = sup_cfg.baseline.head_lr;
        FinetuneResult sup = train_linear(sup_cfg, ds, nullptr);

        ModelBundle ssl_b = load_bundle(ssl.checkpoint);
        ModelBundle sup_b = load_bundle(sup.checkpoint);
        const auto ssl_scores = window_scores(ssl_b, ds.test);
        const auto sup_scores = window_scores(sup_b, ds.test);
        const PairedF1 ci =
            bootstrap_f1_pair(ssl_scores, ssl.threshold, sup_scores, sup.threshold,
                              test_labels, test_patients, 2000, cfg.seed);
        EfficiencyPoint pt;
        pt.fraction = f;
        pt.ssl_f1 = ci.f1_a;
        pt.ssl_lo = ci.a_low;
        pt.ssl_hi = ci.a_high;
        pt.supervised_f1 = ci.f1_b;
        pt.supervised_lo = ci.b_low;
        pt.supervised_hi = ci.b_high;
        pt.delta_f1 = ci.delta;
        pt.delta_lo = ci.d_low;
        pt.delta_hi = ci.d_high;
        out.push_back(pt);
    }
    return out;
}

nlohmann::json efficiency_json(const std::vector<EfficiencyPoint>& pts) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& p : pts)
        rows.push_back({{"fraction", p.fraction},
                        {"ssl_f1", p.ssl_f1},
                        {"ssl_ci", {p.ssl_lo, p.ssl_hi}},
                        {"supervised_f1", p.supervised_f1},
                        {"supervised_ci", {p.supervised_lo, p.supervised_hi}},
                        {"delta_f1", p.delta_f1},
                        {"delta_ci", {p.delta_lo, p.delta_hi}}});
    return nlohmann::json{{"points", rows}};
}

}  // namespace pcgl::harness
