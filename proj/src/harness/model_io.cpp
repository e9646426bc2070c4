#include <algorithm>
#include <numeric>

#include "pcgl/common.h"
#include "pcgl/harness/train.h"

namespace pcgl::harness {

using substrate::Tensor;

substrate::Module<float>* ModelBundle::head() {
    if (proto) return proto.get();
    if (linear) return linear.get();
    return nullptr;
}

FineStack<float> ModelBundle::stack() {
    PCGL_CHECK(head() != nullptr, "checkpoint of kind '" << kind
                                                         << "' has no classifier head");
    return FineStack<float>(cfg.ablation.dual_path ? &model->fusion() : nullptr, head());
}

ModelBundle make_bundle(const RunConfig& cfg, const std::string& kind) {
    cfg.validate();
    ModelBundle b;
    b.cfg = cfg;
    b.kind = kind;
    const encoders::EncoderConfig ec = encoder_config(cfg);
    b.model = std::make_unique<encoders::DualPathModel<float>>(ec, cfg.ablation.dual_path);
    if (kind == "proto") {
        protohead::ProtoHeadConfig pc;
        pc.input_dim = ec.embed_dim;
        b.proto = std::make_unique<protohead::ProtoHead<float>>(pc);
    } else if (kind == "linear") {
        b.linear = std::make_unique<protohead::LinearHead<float>>(ec.embed_dim);
    } else {
        PCGL_CHECK(kind == "pretrain", "unknown model kind '" << kind << "'");
    }
    return b;
}

ModelBundle load_bundle(const substrate::Checkpoint& ckpt) {
    PCGL_CHECK(ckpt.meta.contains("kind") && ckpt.meta.contains("config"),
               "checkpoint metadata missing kind/config");
    ModelBundle b = make_bundle(run_config_from_json(ckpt.meta.at("config")),
                                ckpt.meta.at("kind").get<std::string>());
    auto params = b.model->params();
    if (auto* h = b.head()) {
        auto hp = h->params();
        params.insert(params.end(), hp.begin(), hp.end());
    }
    substrate::unpack_params(ckpt, params);
    b.model->reseed(b.cfg.seed);
    if (b.proto) {
        b.proto->reseed(substrate::mix_seed(b.cfg.seed, "model-proto"));
        b.prototypes = protohead::load_prototypes<float>(ckpt);
    }
    if (ckpt.meta.contains("threshold")) b.threshold = ckpt.meta.at("threshold").get<double>();
    return b;
}

substrate::Checkpoint save_bundle(ModelBundle& b) {
    substrate::Checkpoint ckpt;
    auto params = b.model->params();
    if (auto* h = b.head()) {
        auto hp = h->params();
        params.insert(params.end(), hp.begin(), hp.end());
    }
    substrate::pack_params(ckpt, params);
    if (b.prototypes) protohead::store_prototypes(ckpt, *b.prototypes);
    ckpt.meta["kind"] = b.kind;
    ckpt.meta["config"] = run_config_json(b.cfg);
    ckpt.meta["threshold"] = b.threshold;
    return ckpt;
}

void set_weights_trainable(const std::vector<substrate::Parameter<float>*>& ps,
                           bool trainable) {
    auto ends_with = [](const std::string& s, const std::string& suf) {
        return s.size() >= suf.size() &&
               s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
    };
    for (auto* p : ps) {
        if (ends_with(p->name, ".running_mean") || ends_with(p->name, ".running_var"))
            continue;
        p->trainable = trainable;
    }
}

Tensor<float> backbone_features(encoders::DualPathModel<float>& model,
                                const std::vector<windows::Window>& ws) {
    PCGL_CHECK(!ws.empty(), "backbone_features: empty window list");
    model.set_mode(substrate::Mode::Eval);
    const int feat_dim = model.dual_path() ? 2 * model.embed_dim() : model.embed_dim();
    auto out = Tensor<float>::zeros({static_cast<int>(ws.size()), feat_dim});
    constexpr int kBatch = 64;
    for (std::size_t at = 0; at < ws.size(); at += kBatch) {
        const auto n = std::min<std::size_t>(kBatch, ws.size() - at);
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), static_cast<int>(at));
        Tensor<float> z = model.tcn().forward(wave_batch(ws, idx));
        if (model.dual_path())
            z = substrate::concat_cols(z, model.enc2d().forward(spec_batch(ws, idx)));
        std::copy(z.data.begin(), z.data.end(),
                  out.data.begin() + static_cast<std::ptrdiff_t>(at * z.dim(1)));
    }
    return out;
}

std::vector<double> window_scores(ModelBundle& b, const std::vector<windows::Window>& ws) {
    const Tensor<float> feats = backbone_features(*b.model, ws);
    FineStack<float> stack = b.stack();
    stack.set_mode(substrate::Mode::Eval);
    const Tensor<float> out = stack.forward(feats);
    std::vector<double> scores(ws.size());
    if (b.proto) {
        PCGL_CHECK(b.prototypes.has_value(), "proto checkpoint has no cached prototypes");
        const auto pred = protohead::nearest_prototype(out, *b.prototypes);
        for (std::size_t i = 0; i < ws.size(); ++i) scores[i] = pred.scores[i];
    } else {
        const auto probs = protohead::softmax_rows(substrate::cast_tensor<double>(out));
        for (std::size_t i = 0; i < ws.size(); ++i) scores[i] = probs.at(static_cast<int>(i), 1);
    }
    return scores;
}

}  // namespace pcgl::harness
