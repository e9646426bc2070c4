#include <algorithm>
#include <cmath>
#include <numeric>

#include "pcgl/common.h"
#include "pcgl/harness/train.h"
#include "pcgl/substrate/optim.h"
#include "pcgl/substrate/rng.h"

namespace pcgl::harness {

using substrate::Tensor;

namespace {

constexpr int kFinetuneBatch = 32;

Tensor<float> gather_rows(const Tensor<float>& x, const std::vector<int>& rows) {
    const std::size_t row_sz = x.numel() / static_cast<std::size_t>(x.dim(0));
    std::vector<int> shape = x.shape;
    shape[0] = static_cast<int>(rows.size());
    auto out = Tensor<float>::zeros(shape);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        PCGL_CHECK(rows[r] >= 0 && rows[r] < x.dim(0),
                   "gather: row " << rows[r] << " out of range [0, " << x.dim(0) << ")");
        std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(rows[r] * row_sz),
                  x.data.begin() + static_cast<std::ptrdiff_t>((rows[r] + 1) * row_sz),
                  out.data.begin() + static_cast<std::ptrdiff_t>(r * row_sz));
    }
    return out;
}

std::vector<windows::Window> labeled_subset(const PreparedDataset& ds, const RunConfig& cfg,
                                            const char* op) {
    const auto patients = label_fraction_patients(ds.train, cfg.label_fraction, cfg.seed);
    auto subset = filter_by_patients(ds.train, patients);
    const auto labels = window_labels(subset);
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    PCGL_CHECK(pos > 0 && pos < static_cast<long>(labels.size()),
               op << ": single-class training split at label fraction "
                  << cfg.label_fraction);
    PCGL_CHECK(!ds.val.empty(), op << ": empty validation split");
    return subset;
}

double f1_of_labels(const std::vector<int>& pred, const std::vector<int>& truth) {
    Confusion c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == 1 && truth[i] == 1) ++c.tp;
        else if (pred[i] == 1) ++c.fp;
        else if (truth[i] == 1) ++c.fn;
        else ++c.tn;
    }
    return c.f1();
}

// Mean cross entropy of a trained stack over cached features, eval mode.
double stack_val_loss(FineStack<float>& stack, const Tensor<float>& feats,
                      const std::vector<int>& labels) {
    stack.set_mode(substrate::Mode::Eval);
    const Tensor<double> logits =
        substrate::cast_tensor<double>(stack.forward(feats));
    return protohead::softmax_cross_entropy(logits, labels);
}

}  // namespace

FinetuneResult train_proto(const RunConfig& cfg, const PreparedDataset& ds,
                           const substrate::Checkpoint& pretrained) {
    cfg.validate();
    ModelBundle b = make_bundle(cfg, "proto");
    {
        auto mp = b.model->params();
        substrate::unpack_params(pretrained, mp);
    }
    b.model->reseed(cfg.seed);
    {
        auto rng = substrate::make_rng(cfg.seed, "init-proto");
        b.proto->init(rng);
    }
    b.proto->reseed(substrate::mix_seed(cfg.seed, "model-proto"));

    const auto subset = labeled_subset(ds, cfg, "train-proto");
    const auto subset_labels = window_labels(subset);
    const auto pool = apply_oversample(subset, windows::oversample_minority(subset, cfg.seed));
    const auto pool_labels = window_labels(pool);
    const auto val_labels = window_labels(ds.val);

    auto backbone = b.model->backbone_params();
    for (auto* p : backbone) p->trainable = false;
    const Tensor<float> pool_feats = backbone_features(*b.model, pool);
    const Tensor<float> raw_feats = backbone_features(*b.model, subset);
    const Tensor<float> val_feats = backbone_features(*b.model, ds.val);

    FineStack<float> stack = b.stack();
    auto sp = stack.params();
    substrate::Adam<float> opt(sp, {.lr = cfg.proto.lr,
                                    .weight_decay = cfg.proto.weight_decay});

    std::vector<int> cls[2];
    for (std::size_t i = 0; i < pool_labels.size(); ++i)
        cls[pool_labels[i]].push_back(static_cast<int>(i));
    const auto largest = std::max(cls[0].size(), cls[1].size());
    const int steps_per_epoch = static_cast<int>(
        (largest + static_cast<std::size_t>(cfg.proto.per_class) - 1) /
        static_cast<std::size_t>(cfg.proto.per_class));

    // Monitoring embeds the raw labeled windows, mirrors the cached-prototype
    // inference path, and never touches test data.
    auto val_f1_now = [&]() {
        stack.set_mode(substrate::Mode::Eval);
        const auto protos = protohead::compute_prototypes(
            stack.forward(raw_feats), subset_labels,
            protohead::PrototypeSource::full_train_cache);
        const auto pred = protohead::nearest_prototype(stack.forward(val_feats), protos);
        return f1_of_labels(pred.labels, val_labels);
    };

    FinetuneResult res;
    for (int epoch = 0; epoch < cfg.proto.epochs; ++epoch) {
        std::vector<int> order[2] = {cls[0], cls[1]};
        for (int c = 0; c < 2; ++c) {
            auto rng = substrate::make_rng(cfg.seed, "proto-shuffle",
                                           static_cast<std::uint64_t>(epoch),
                                           static_cast<std::uint64_t>(c));
            std::shuffle(order[c].begin(), order[c].end(), rng);
        }
        stack.set_mode(substrate::Mode::Train);
        for (int s = 0; s < steps_per_epoch; ++s) {
            std::vector<std::pair<int, int>> batch;
            for (int c = 0; c < 2; ++c)
                for (int j = 0; j < cfg.proto.per_class; ++j) {
                    const auto k = (static_cast<std::size_t>(s) * cfg.proto.per_class + j) %
                                   order[c].size();
                    batch.emplace_back(order[c][k], c);
                }
            const windows::Episode ep = windows::make_episode(
                batch, cfg.proto.k_shot,
                substrate::mix_seed(cfg.seed, "episode", static_cast<std::uint64_t>(epoch),
                                    static_cast<std::uint64_t>(s)));
            std::vector<int> sup_rows, qry_rows, sup_l, qry_l;
            for (const auto& [row, lab] : ep.support) {
                sup_rows.push_back(row);
                sup_l.push_back(lab);
            }
            for (const auto& [row, lab] : ep.query) {
                qry_rows.push_back(row);
                qry_l.push_back(lab);
            }
            opt.zero_grad();
            const Tensor<float> metric = stack.forward(substrate::concat_rows(
                gather_rows(pool_feats, sup_rows), gather_rows(pool_feats, qry_rows)));
            const Tensor<double> zm = substrate::cast_tensor<double>(metric);
            auto zs = Tensor<double>::zeros({static_cast<int>(sup_rows.size()), zm.dim(1)});
            auto zq = Tensor<double>::zeros({static_cast<int>(qry_rows.size()), zm.dim(1)});
            std::copy(zm.data.begin(), zm.data.begin() + static_cast<std::ptrdiff_t>(zs.numel()),
                      zs.data.begin());
            std::copy(zm.data.begin() + static_cast<std::ptrdiff_t>(zs.numel()), zm.data.end(),
                      zq.data.begin());
            Tensor<double> dzs, dzq;
            protohead::episodic_loss(zs, sup_l, zq, qry_l, &dzs, &dzq);
            stack.backward(substrate::cast_tensor<float>(substrate::concat_rows(dzs, dzq)));
            substrate::clip_global_norm(sp, cfg.proto.clip);
            res.grad_norms.push_back(substrate::grad_global_norm(sp));
            opt.step();
        }
        res.val_metric.push_back(val_f1_now());
    }

    stack.set_mode(substrate::Mode::Eval);
    b.prototypes = protohead::compute_prototypes(
        stack.forward(raw_feats), subset_labels,
        protohead::PrototypeSource::full_train_cache);
    const auto val_pred = protohead::nearest_prototype(stack.forward(val_feats), *b.prototypes);
    res.threshold = threshold_max_f1(val_pred.scores, val_labels);
    b.threshold = res.threshold;
    res.checkpoint = save_bundle(b);
    res.checkpoint.meta["val_f1"] = res.val_metric;
    res.checkpoint.meta["pool_windows"] = pool.size();
    res.checkpoint.meta["labeled_windows"] = subset.size();
    return res;
}

FinetuneResult train_linear(const RunConfig& cfg, const PreparedDataset& ds,
                            const substrate::Checkpoint* pretrained) {
    cfg.validate();
    ModelBundle b = make_bundle(cfg, "linear");
    if (pretrained) {
        auto mp = b.model->params();
        substrate::unpack_params(*pretrained, mp);
    } else {
        b.model->init(cfg.seed);
    }
    b.model->reseed(cfg.seed);
    {
        auto rng = substrate::make_rng(cfg.seed, "init-linear");
        b.linear->init(rng);
    }

    const auto subset = labeled_subset(ds, cfg, "train-linear");
    const auto pool = apply_oversample(subset, windows::oversample_minority(subset, cfg.seed));
    const auto pool_labels = window_labels(pool);
    const auto val_labels = window_labels(ds.val);
    const int n = static_cast<int>(pool.size());

    auto all_params = b.model->params();
    {
        auto hp = b.linear->params();
        all_params.insert(all_params.end(), hp.begin(), hp.end());
    }
    substrate::Adam<float> opt(all_params, {.lr = cfg.baseline.head_lr});
    const double backbone_scale = cfg.baseline.backbone_lr / cfg.baseline.head_lr;
    opt.set_group_scale("tcn", backbone_scale);
    opt.set_group_scale("enc2d", backbone_scale);

    auto backbone = b.model->backbone_params();
    for (auto* p : backbone) p->trainable = false;
    Tensor<float> pool_feats, val_feats;
    if (cfg.baseline.freeze_epochs > 0) {
        pool_feats = backbone_features(*b.model, pool);
        val_feats = backbone_features(*b.model, ds.val);
    }

    FineStack<float> stack = b.stack();
    const int d = b.model->embed_dim();
    substrate::PlateauScheduler plateau;
    double lr = cfg.baseline.head_lr;

    FinetuneResult res;
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.baseline.epochs; ++epoch) {
        const bool frozen = epoch < cfg.baseline.freeze_epochs;
        if (!frozen && epoch == cfg.baseline.freeze_epochs)
            set_weights_trainable(backbone, true);
        auto rng = substrate::make_rng(cfg.seed, "linear-shuffle",
                                       static_cast<std::uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), rng);
        for (int at = 0; at < n; at += kFinetuneBatch) {
            const int bs = std::min(kFinetuneBatch, n - at);
            const std::vector<int> batch(order.begin() + at, order.begin() + at + bs);
            std::vector<int> batch_labels(static_cast<std::size_t>(bs));
            for (int r = 0; r < bs; ++r)
                batch_labels[static_cast<std::size_t>(r)] =
                    pool_labels[static_cast<std::size_t>(batch[static_cast<std::size_t>(r)])];
            opt.zero_grad();
            Tensor<double> dlogits;
            if (frozen) {
                stack.set_mode(substrate::Mode::Train);
                const Tensor<float> logits = stack.forward(gather_rows(pool_feats, batch));
                protohead::softmax_cross_entropy(substrate::cast_tensor<double>(logits),
                                                 batch_labels, &dlogits);
                stack.backward(substrate::cast_tensor<float>(dlogits));
            } else {
                b.model->set_mode(substrate::Mode::Train);
                b.linear->set_mode(substrate::Mode::Train);
                const Tensor<float> z1 = b.model->tcn().forward(wave_batch(pool, batch));
                Tensor<float> fused;
                if (cfg.ablation.dual_path) {
                    const Tensor<float> z2 = b.model->enc2d().forward(spec_batch(pool, batch));
                    fused = b.model->fusion().forward(substrate::concat_cols(z1, z2));
                } else {
                    fused = z1;
                }
                const Tensor<float> logits = b.linear->forward(fused);
                protohead::softmax_cross_entropy(substrate::cast_tensor<double>(logits),
                                                 batch_labels, &dlogits);
                const Tensor<float> dfused =
                    b.linear->backward(substrate::cast_tensor<float>(dlogits));
                if (cfg.ablation.dual_path) {
                    const auto [d1, d2] =
                        substrate::split_cols(b.model->fusion().backward(dfused), d);
                    b.model->tcn().backward(d1);
                    b.model->enc2d().backward(d2);
                } else {
                    b.model->tcn().backward(dfused);
                }
            }
            opt.step();
        }
        double vloss;
        if (frozen) {
            vloss = stack_val_loss(stack, val_feats, val_labels);
        } else {
            const Tensor<float> vf = backbone_features(*b.model, ds.val);
            vloss = stack_val_loss(stack, vf, val_labels);
        }
        res.val_metric.push_back(vloss);
        if (cfg.baseline.schedule == "plateau") {
            lr = plateau.apply(lr, vloss);
            opt.set_lr(lr);
        }
    }

    const auto val_scores = window_scores(b, ds.val);
    res.threshold = threshold_max_f1(val_scores, val_labels);
    b.threshold = res.threshold;
    res.checkpoint = save_bundle(b);
    res.checkpoint.meta["val_loss"] = res.val_metric;
    res.checkpoint.meta["from_scratch"] = pretrained == nullptr;
    res.checkpoint.meta["final_lr"] = lr;
    return res;
}

}  // namespace pcgl::harness
