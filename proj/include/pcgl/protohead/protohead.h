// protohead.h
// Metric-learning classifier over frozen fused features: a trainable MLP head
// into a low-dimensional metric space, class prototypes as arithmetic means,
// softmax over negative squared distances, and the linear-probe baseline.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "pcgl/substrate/checkpoint.h"
#include "pcgl/substrate/layers.h"

namespace pcgl::protohead {

using substrate::Module;
using substrate::Tensor;

struct ProtoHeadConfig {
    int input_dim = 64;   // fused feature width from the extractor
    int hidden = 64;
    int metric_dim = 32;  // M
    double dropout = 0.1;

    void validate() const {
        PCGL_CHECK(input_dim >= 1 && hidden >= 1, "proto head: non-positive layer width");
        PCGL_CHECK(metric_dim >= 2, "proto head: metric_dim=" << metric_dim << ", want >= 2");
        PCGL_CHECK(dropout >= 0.0 && dropout < 1.0, "proto head: dropout=" << dropout);
    }
};

enum class PrototypeSource { episodic, full_train_cache };

template <typename T>
struct PrototypeSet {
    std::vector<int> class_ids;  // ascending
    Tensor<T> centroids;         // [C, M]
    PrototypeSource source = PrototypeSource::episodic;

    int num_classes() const { return static_cast<int>(class_ids.size()); }
    int metric_dim() const { return centroids.ndim() == 2 ? centroids.dim(1) : 0; }
};

// affine(D -> hidden) -> relu -> dropout -> affine(hidden -> M)
template <typename T>
class ProtoHead : public Module<T> {
public:
    explicit ProtoHead(const ProtoHeadConfig& cfg, const std::string& prefix = "proto")
        : cfg_(cfg),
          fc1_(prefix + ".fc1", cfg.input_dim, cfg.hidden),
          drop_(cfg.dropout),
          fc2_(prefix + ".fc2", cfg.hidden, cfg.metric_dim) {
        cfg.validate();
    }

    void init(std::mt19937_64& rng) {
        fc1_.init(rng);
        fc2_.init(rng);
    }

    Tensor<T> forward(const Tensor<T>& z) override {
        Tensor<T> h = fc1_.forward(z);
        h = relu_.forward(h);
        h = drop_.forward(h);
        return fc2_.forward(h);
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> d = fc2_.backward(dy);
        d = drop_.backward(d);
        d = relu_.backward(d);
        return fc1_.backward(d);
    }
    void children(std::vector<Module<T>*>& out) override {
        out.push_back(&fc1_);
        out.push_back(&relu_);
        out.push_back(&drop_);
        out.push_back(&fc2_);
    }

    int metric_dim() const { return cfg_.metric_dim; }
    const ProtoHeadConfig& config() const { return cfg_; }

private:
    ProtoHeadConfig cfg_;
    substrate::Affine<T> fc1_;
    substrate::ReLU<T> relu_;
    substrate::Dropout<T> drop_;
    substrate::Affine<T> fc2_;
};

// Per-class arithmetic means of metric-space rows. Class ids are the sorted
// distinct labels; every class therefore has at least one vector.
template <typename T>
PrototypeSet<T> compute_prototypes(const Tensor<T>& embedded, const std::vector<int>& labels,
                                   PrototypeSource source = PrototypeSource::episodic) {
    PCGL_CHECK(embedded.ndim() == 2 && embedded.dim(0) >= 1,
               "prototypes: want a non-empty [N,M] support matrix, got "
                   << substrate::shape_str(embedded.shape));
    PCGL_CHECK(static_cast<int>(labels.size()) == embedded.dim(0),
               "prototypes: " << labels.size() << " labels for " << embedded.dim(0) << " rows");

    PrototypeSet<T> out;
    out.source = source;
    out.class_ids = labels;
    std::sort(out.class_ids.begin(), out.class_ids.end());
    out.class_ids.erase(std::unique(out.class_ids.begin(), out.class_ids.end()),
                        out.class_ids.end());

    const int c = static_cast<int>(out.class_ids.size());
    const int m = embedded.dim(1);
    Tensor<double> acc({c, m});
    std::vector<int> counts(static_cast<std::size_t>(c), 0);
    for (int i = 0; i < embedded.dim(0); ++i) {
        const auto it =
            std::lower_bound(out.class_ids.begin(), out.class_ids.end(), labels[i]);
        const int k = static_cast<int>(it - out.class_ids.begin());
        ++counts[static_cast<std::size_t>(k)];
        for (int j = 0; j < m; ++j) acc.at(k, j) += embedded.at(i, j);
    }
    out.centroids = Tensor<T>({c, m});
    for (int k = 0; k < c; ++k)
        for (int j = 0; j < m; ++j)
            out.centroids.at(k, j) =
                static_cast<T>(acc.at(k, j) / counts[static_cast<std::size_t>(k)]);
    PCGL_CHECK(out.centroids.all_finite(), "prototypes: non-finite centroid");
    return out;
}

// Squared Euclidean distances [N,C] between query rows and centroids.
template <typename T>
Tensor<T> prototype_sq_dists(const Tensor<T>& queries, const PrototypeSet<T>& protos) {
    PCGL_CHECK(protos.num_classes() >= 1, "prototype distances: empty prototype set");
    const int c = protos.num_classes(), m = protos.metric_dim();
    PCGL_CHECK(queries.ndim() == 2 && queries.dim(1) == m,
               "prototype distances: query " << substrate::shape_str(queries.shape)
                                             << ", want [N," << m << "]");
    const int n = queries.dim(0);
    Tensor<T> d({n, c});
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < c; ++k) {
            double s = 0;
            for (int j = 0; j < m; ++j) {
                const double diff = static_cast<double>(queries.at(i, j)) -
                                    static_cast<double>(protos.centroids.at(k, j));
                s += diff * diff;
            }
            d.at(i, k) = static_cast<T>(s);
        }
    return d;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
    PCGL_CHECK(logits.ndim() == 2 && logits.dim(1) >= 1,
               "softmax: want [N,C] logits, got " << substrate::shape_str(logits.shape));
    Tensor<T> p = Tensor<T>::zeros_like(logits);
    const int n = logits.dim(0), c = logits.dim(1);
    for (int i = 0; i < n; ++i) {
        double mx = logits.at(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(logits.at(i, j)));
        double denom = 0;
        for (int j = 0; j < c; ++j) denom += std::exp(static_cast<double>(logits.at(i, j)) - mx);
        for (int j = 0; j < c; ++j)
            p.at(i, j) =
                static_cast<T>(std::exp(static_cast<double>(logits.at(i, j)) - mx) / denom);
    }
    return p;
}

// Softmax over negative squared distances to each prototype. Accepts a single
// [M] query or a [N,M] batch; the result has the matching rank.
template <typename T>
Tensor<T> class_probs(const Tensor<T>& queries, const PrototypeSet<T>& protos) {
    const bool single = queries.ndim() == 1;
    Tensor<T> q = queries;
    if (single) q.shape = {1, queries.dim(0)};
    Tensor<T> logits = prototype_sq_dists(q, protos);
    for (auto& v : logits.data) v = -v;
    Tensor<T> p = softmax_rows(logits);
    if (single) p.shape = {p.dim(1)};
    return p;
}

struct Prediction {
    std::vector<int> labels;     // nearest centroid, ties to the lower class id
    std::vector<double> scores;  // probability mass on class id 1
};

template <typename T>
Prediction nearest_prototype(const Tensor<T>& queries, const PrototypeSet<T>& protos) {
    Tensor<T> d = prototype_sq_dists(queries, protos);
    Tensor<T> logits = d;
    for (auto& v : logits.data) v = -v;
    Tensor<T> p = softmax_rows(logits);

    Prediction out;
    const int n = d.dim(0), c = d.dim(1);
    out.labels.resize(static_cast<std::size_t>(n));
    out.scores.resize(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        int best = 0;
        for (int k = 1; k < c; ++k)
            if (d.at(i, k) < d.at(i, best)) best = k;
        out.labels[static_cast<std::size_t>(i)] = protos.class_ids[static_cast<std::size_t>(best)];
        for (int k = 0; k < c; ++k)
            if (protos.class_ids[static_cast<std::size_t>(k)] == 1)
                out.scores[static_cast<std::size_t>(i)] += static_cast<double>(p.at(i, k));
    }
    return out;
}

// Mean query negative log-likelihood under prototypes built from the support
// rows. Optional gradients with respect to both row sets.
double episodic_loss(const Tensor<double>& support, const std::vector<int>& support_labels,
                     const Tensor<double>& query, const std::vector<int>& query_labels,
                     Tensor<double>* dsupport = nullptr, Tensor<double>* dquery = nullptr);

// Softmax cross-entropy with integer targets, averaged over rows.
double softmax_cross_entropy(const Tensor<double>& logits, const std::vector<int>& labels,
                             Tensor<double>* dlogits = nullptr);

// Baseline probe: a single affine layer producing class logits.
template <typename T>
class LinearHead : public Module<T> {
public:
    explicit LinearHead(int input_dim, int classes = 2, const std::string& prefix = "linear")
        : fc_(prefix + ".fc", input_dim, classes) {}

    void init(std::mt19937_64& rng) { fc_.init(rng); }
    Tensor<T> forward(const Tensor<T>& z) override { return fc_.forward(z); }
    Tensor<T> backward(const Tensor<T>& dy) override { return fc_.backward(dy); }
    void children(std::vector<Module<T>*>& out) override { out.push_back(&fc_); }

private:
    substrate::Affine<T> fc_;
};

// One episodic training step: runs the head over the stacked support and
// query features, computes the loss in double, and (optionally) accumulates
// parameter gradients. Feature rows are [S+Q, input_dim] after stacking.
template <typename T>
double episodic_step(ProtoHead<T>& head, const Tensor<T>& support_z,
                     const std::vector<int>& support_labels, const Tensor<T>& query_z,
                     const std::vector<int>& query_labels, bool backprop = true) {
    const int s = support_z.dim(0);
    Tensor<T> out = head.forward(substrate::concat_rows(support_z, query_z));
    Tensor<double> metric = substrate::cast_tensor<double>(out);
    Tensor<double> sup({s, out.dim(1)}), qry({out.dim(0) - s, out.dim(1)});
    std::copy(metric.data.begin(), metric.data.begin() + sup.numel(), sup.data.begin());
    std::copy(metric.data.begin() + sup.numel(), metric.data.end(), qry.data.begin());

    if (!backprop) return episodic_loss(sup, support_labels, qry, query_labels);

    Tensor<double> dsup, dqry;
    const double loss = episodic_loss(sup, support_labels, qry, query_labels, &dsup, &dqry);
    Tensor<double> dmetric = Tensor<double>::zeros_like(metric);
    std::copy(dsup.data.begin(), dsup.data.end(), dmetric.data.begin());
    std::copy(dqry.data.begin(), dqry.data.end(), dmetric.data.begin() + dsup.numel());
    head.backward(substrate::cast_tensor<T>(dmetric));
    return loss;
}

// Inference prototypes live in the checkpoint under `proto.centroids` and
// `proto.class_ids`.
template <typename T>
void store_prototypes(substrate::Checkpoint& ckpt, const PrototypeSet<T>& protos) {
    PCGL_CHECK(protos.num_classes() >= 1, "prototype cache: empty set");
    Tensor<T> ids({protos.num_classes()});
    for (int k = 0; k < protos.num_classes(); ++k)
        ids[static_cast<std::size_t>(k)] =
            static_cast<T>(protos.class_ids[static_cast<std::size_t>(k)]);
    if constexpr (std::is_same_v<T, float>) {
        ckpt.f32["proto.centroids"] = protos.centroids;
        ckpt.f32["proto.class_ids"] = ids;
    } else {
        ckpt.f64["proto.centroids"] = protos.centroids;
        ckpt.f64["proto.class_ids"] = ids;
    }
    ckpt.meta["proto_source"] =
        protos.source == PrototypeSource::episodic ? "episodic" : "full-train-cache";
}

template <typename T>
PrototypeSet<T> load_prototypes(const substrate::Checkpoint& ckpt) {
    const auto& dir = [&]() -> const std::map<std::string, Tensor<T>>& {
        if constexpr (std::is_same_v<T, float>)
            return ckpt.f32;
        else
            return ckpt.f64;
    }();
    const auto cit = dir.find("proto.centroids");
    const auto iit = dir.find("proto.class_ids");
    PCGL_CHECK(cit != dir.end() && iit != dir.end(),
               "checkpoint has no cached prototypes");
    PrototypeSet<T> out;
    out.centroids = cit->second;
    PCGL_CHECK(out.centroids.ndim() == 2, "prototype cache: centroids must be [C,M]");
    PCGL_CHECK(iit->second.ndim() == 1 && iit->second.dim(0) == out.centroids.dim(0),
               "prototype cache: class id count mismatch");
    for (std::size_t k = 0; k < iit->second.numel(); ++k)
        out.class_ids.push_back(static_cast<int>(std::lround(
            static_cast<double>(iit->second[k]))));
    out.source = ckpt.meta.value("proto_source", "full-train-cache") == "episodic"
                     ? PrototypeSource::episodic
                     : PrototypeSource::full_train_cache;
    return out;
}

}  // namespace pcgl::protohead
