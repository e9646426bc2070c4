#include <algorithm>
#include <numeric>

#include "pcgl/common.h"
#include "pcgl/harness/train.h"
#include "pcgl/substrate/optim.h"
#include "pcgl/substrate/rng.h"
#include "pcgl/views/logmel.h"

namespace pcgl::harness {

using substrate::Tensor;

namespace {

// SpecAugment masking applied to each contrastive spectrogram view.
constexpr int kTimeMasks = 1;
constexpr int kFreqMasks = 1;
constexpr int kMaxMaskWidth = 8;

// Concatenation along the leading axis for arbitrary-rank tensors.
Tensor<float> stack0(const Tensor<float>& a, const Tensor<float>& b) {
    PCGL_CHECK(a.ndim() == b.ndim(), "stack0: rank mismatch");
    for (int d = 1; d < a.ndim(); ++d)
        PCGL_CHECK(a.dim(d) == b.dim(d), "stack0: trailing shape mismatch");
    std::vector<int> shape = a.shape;
    shape[0] = a.dim(0) + b.dim(0);
    auto out = Tensor<float>::zeros(shape);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(a.numel()));
    return out;
}

std::pair<Tensor<double>, Tensor<double>> unstack0(const Tensor<float>& x, int n0) {
    std::vector<int> sa = x.shape, sb = x.shape;
    sa[0] = n0;
    sb[0] = x.dim(0) - n0;
    auto a = Tensor<double>::zeros(sa);
    auto b = Tensor<double>::zeros(sb);
    std::copy(x.data.begin(), x.data.begin() + static_cast<std::ptrdiff_t>(a.numel()),
              a.data.begin());
    std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(a.numel()), x.data.end(),
              b.data.begin());
    return {std::move(a), std::move(b)};
}

struct ViewPair {
    Tensor<float> wave_a, wave_b;  // [B, 4000]
    Tensor<float> spec_a, spec_b;  // [B, 64, 59]
};

// Two stochastic views per window: an augmented waveform and the masked
// log-mel spectrogram of that same waveform. Augmentation streams key on
// the dataset window index so batch composition does not affect them.
ViewPair make_views(const std::vector<windows::Window>& ws, const std::vector<int>& batch,
                    std::uint64_t seed, int epoch, bool with_spec) {
    const int n = static_cast<int>(batch.size());
    ViewPair v;
    v.wave_a = Tensor<float>::zeros({n, windows::kWindowSamples});
    v.wave_b = Tensor<float>::zeros({n, windows::kWindowSamples});
    if (with_spec) {
        v.spec_a = Tensor<float>::zeros({n, views::kNMels, views::kNFrames});
        v.spec_b = Tensor<float>::zeros({n, views::kNMels, views::kNFrames});
    }
    const std::size_t px = static_cast<std::size_t>(views::kNMels) * views::kNFrames;
    for (int r = 0; r < n; ++r) {
        const auto& w = ws[static_cast<std::size_t>(batch[static_cast<std::size_t>(r)])];
        for (int view = 0; view < 2; ++view) {
            const auto stream = static_cast<std::uint64_t>(2 * batch[static_cast<std::size_t>(r)] + view);
            auto rng = substrate::make_rng(seed, "pretrain-aug",
                                           static_cast<std::uint64_t>(epoch), stream);
            const views::AugmentationRecipe recipe = views::sample_recipe(rng);
            const std::vector<float> wave = views::augment_wave(w.samples, recipe);
            Tensor<float>& wt = view == 0 ? v.wave_a : v.wave_b;
            std::copy(wave.begin(), wave.end(),
                      wt.data.begin() + static_cast<std::ptrdiff_t>(
                                            static_cast<std::size_t>(r) *
                                            windows::kWindowSamples));
            if (!with_spec) continue;
            const views::MelSpec ms = views::augment_spec(
                views::logmel(wave), kTimeMasks, kFreqMasks, kMaxMaskWidth,
                substrate::mix_seed(seed, "pretrain-mask",
                                    static_cast<std::uint64_t>(epoch), stream));
            Tensor<float>& st = view == 0 ? v.spec_a : v.spec_b;
            std::copy(ms.bins.begin(), ms.bins.end(),
                      st.data.begin() +
                          static_cast<std::ptrdiff_t>(static_cast<std::size_t>(r) * px));
        }
    }
    return v;
}

}  // namespace

PretrainResult pretrain(const RunConfig& cfg, const PreparedDataset& ds) {
    cfg.validate();
    PCGL_CHECK(!ds.train.empty(), "pretrain: empty training corpus");
    const objectives::LossConfig lc = effective_loss(cfg);
    PretrainResult res;

    ModelBundle b = make_bundle(cfg, "pretrain");
    b.model->init(cfg.seed);
    b.model->set_mode(substrate::Mode::Train);
    auto backbone = b.model->backbone_params();
    substrate::Adam<float> opt(backbone, {.lr = cfg.pretrain.lr});

    const int n = static_cast<int>(ds.train.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.pretrain.epochs; ++epoch) {
        if (cfg.pretrain.schedule == "cosine")
            opt.set_lr(substrate::cosine_lr(cfg.pretrain.lr, 0.0, epoch, cfg.pretrain.epochs));
        auto shuffle_rng = substrate::make_rng(cfg.seed, "pretrain-shuffle",
                                               static_cast<std::uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_sum = 0;
        int epoch_steps = 0;
        for (int at = 0; at < n; at += cfg.pretrain.batch) {
            const int bs = std::min(cfg.pretrain.batch, n - at);
            if (bs < 2) continue;  // a singleton tail cannot form contrastive pairs
            const std::vector<int> batch(order.begin() + at, order.begin() + at + bs);
            const ViewPair v =
                make_views(ds.train, batch, cfg.seed, epoch, cfg.ablation.dual_path);
            opt.zero_grad();
            double total = 0;
            if (cfg.ablation.dual_path) {
                const Tensor<float> z1 = b.model->tcn().forward(stack0(v.wave_a, v.wave_b));
                const Tensor<float> z2 = b.model->enc2d().forward(stack0(v.spec_a, v.spec_b));
                const auto [z1a, z1b] = unstack0(z1, bs);
                const auto [z2a, z2b] = unstack0(z2, bs);
                Tensor<double> d1a, d1b, d2a, d2b;
                const objectives::LossBreakdown lb =
                    objectives::pretrain_objective(z1a, z1b, z2a, z2b, lc, &d1a, &d1b, &d2a,
                                                   &d2b);
                total = lb.total;
                b.model->tcn().backward(stack0(substrate::cast_tensor<float>(d1a),
                                               substrate::cast_tensor<float>(d1b)));
                b.model->enc2d().backward(stack0(substrate::cast_tensor<float>(d2a),
                                                 substrate::cast_tensor<float>(d2b)));
            } else {
                const Tensor<float> z1 = b.model->tcn().forward(stack0(v.wave_a, v.wave_b));
                const auto [z1a, z1b] = unstack0(z1, bs);
                Tensor<double> d1a, d1b;
                const objectives::HybridTerm ht = objectives::hybrid(z1a, z1b, lc, &d1a, &d1b);
                total = ht.total;
                b.model->tcn().backward(stack0(substrate::cast_tensor<float>(d1a),
                                               substrate::cast_tensor<float>(d1b)));
            }
            opt.step();
            res.step_loss.push_back(total);
            epoch_sum += total;
            ++epoch_steps;
        }
        PCGL_CHECK(epoch_steps > 0, "pretrain: no usable batches, corpus too small");
        res.epoch_loss.push_back(epoch_sum / epoch_steps);
    }

    res.checkpoint = save_bundle(b);
    for (const auto& [name, mv] : opt.state()) {
        res.checkpoint.f64["adam.m." + name] = mv.first;
        res.checkpoint.f64["adam.v." + name] = mv.second;
    }
    res.checkpoint.meta["adam_steps"] = opt.steps();
    res.checkpoint.meta["epoch_loss"] = res.epoch_loss;
    res.checkpoint.meta["step_loss"] = res.step_loss;
    res.checkpoint.meta["spec_masks"] = {{"time", kTimeMasks},
                                         {"freq", kFreqMasks},
                                         {"max_width", kMaxMaskWidth}};
    return res;
}

}  // namespace pcgl::harness
