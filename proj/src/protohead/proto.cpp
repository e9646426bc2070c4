// proto.cpp
// Episodic prototype loss and the baseline cross-entropy, double precision
// with analytic gradients.
#include "pcgl/protohead/protohead.h"

#include <algorithm>
#include <cmath>
#include <vector>

namespace pcgl::protohead {

double episodic_loss(const Tensor<double>& support, const std::vector<int>& support_labels,
                     const Tensor<double>& query, const std::vector<int>& query_labels,
                     Tensor<double>* dsupport, Tensor<double>* dquery) {
    PCGL_CHECK(support.ndim() == 2 && query.ndim() == 2 && support.dim(1) == query.dim(1),
               "episodic loss: support " << substrate::shape_str(support.shape) << " vs query "
                                         << substrate::shape_str(query.shape));
    PCGL_CHECK(query.dim(0) >= 1, "episodic loss: empty query set");
    PCGL_CHECK(static_cast<int>(query_labels.size()) == query.dim(0),
               "episodic loss: " << query_labels.size() << " query labels for " << query.dim(0)
                                 << " rows");

    const PrototypeSet<double> protos = compute_prototypes(support, support_labels);
    const int c = protos.num_classes(), m = protos.metric_dim(), q = query.dim(0);

    std::vector<int> counts(static_cast<std::size_t>(c), 0);
    for (int lab : support_labels) {
        const auto it = std::lower_bound(protos.class_ids.begin(), protos.class_ids.end(), lab);
        ++counts[static_cast<std::size_t>(it - protos.class_ids.begin())];
    }
    std::vector<int> query_class(static_cast<std::size_t>(q));
    for (int i = 0; i < q; ++i) {
        const int lab = query_labels[static_cast<std::size_t>(i)];
        const auto it = std::lower_bound(protos.class_ids.begin(), protos.class_ids.end(), lab);
        PCGL_CHECK(it != protos.class_ids.end() && *it == lab,
                   "episodic loss: query label " << lab << " has no support vectors");
        query_class[static_cast<std::size_t>(i)] = static_cast<int>(it - protos.class_ids.begin());
    }

    const bool want_grad = dsupport != nullptr || dquery != nullptr;
    PCGL_CHECK(!want_grad || (dsupport != nullptr && dquery != nullptr),
               "episodic loss: gradients must be requested for both row sets");
    Tensor<double> dproto;
    if (want_grad) {
        *dsupport = Tensor<double>::zeros_like(support);
        *dquery = Tensor<double>::zeros_like(query);
        dproto = Tensor<double>({c, m});
    }

    double loss = 0;
    std::vector<double> logits(static_cast<std::size_t>(c));
    for (int i = 0; i < q; ++i) {
        for (int k = 0; k < c; ++k) {
            double s = 0;
            for (int j = 0; j < m; ++j) {
                const double diff = query.at(i, j) - protos.centroids.at(k, j);
                s += diff * diff;
            }
            logits[static_cast<std::size_t>(k)] = -s;
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double denom = 0;
        for (int k = 0; k < c; ++k) denom += std::exp(logits[static_cast<std::size_t>(k)] - mx);
        const int y = query_class[static_cast<std::size_t>(i)];
        loss += -(logits[static_cast<std::size_t>(y)] - mx) + std::log(denom);

        if (want_grad) {
            for (int k = 0; k < c; ++k) {
                const double p = std::exp(logits[static_cast<std::size_t>(k)] - mx) / denom;
                const double g = (p - (k == y ? 1.0 : 0.0)) / q;
                for (int j = 0; j < m; ++j) {
                    const double diff = query.at(i, j) - protos.centroids.at(k, j);
                    dquery->at(i, j) += -2.0 * g * diff;
                    dproto.at(k, j) += 2.0 * g * diff;
                }
            }
        }
    }

    if (want_grad) {
        for (int i = 0; i < support.dim(0); ++i) {
            const auto it = std::lower_bound(protos.class_ids.begin(), protos.class_ids.end(),
                                             support_labels[static_cast<std::size_t>(i)]);
            const int k = static_cast<int>(it - protos.class_ids.begin());
            const double inv = 1.0 / counts[static_cast<std::size_t>(k)];
            for (int j = 0; j < m; ++j) dsupport->at(i, j) += inv * dproto.at(k, j);
        }
    }
    return loss / q;
}

double softmax_cross_entropy(const Tensor<double>& logits, const std::vector<int>& labels,
                             Tensor<double>* dlogits) {
    PCGL_CHECK(logits.ndim() == 2 && logits.dim(0) >= 1 && logits.dim(1) >= 2,
               "cross entropy: want [N,C] logits, got " << substrate::shape_str(logits.shape));
    const int n = logits.dim(0), c = logits.dim(1);
    PCGL_CHECK(static_cast<int>(labels.size()) == n,
               "cross entropy: " << labels.size() << " labels for " << n << " rows");
    if (dlogits) *dlogits = Tensor<double>::zeros_like(logits);

    double loss = 0;
    for (int i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        PCGL_CHECK(y >= 0 && y < c, "cross entropy: label " << y << " outside [0," << c << ")");
        double mx = logits.at(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
        double denom = 0;
        for (int j = 0; j < c; ++j) denom += std::exp(logits.at(i, j) - mx);
        loss += -(logits.at(i, y) - mx) + std::log(denom);
        if (dlogits)
            for (int j = 0; j < c; ++j)
                dlogits->at(i, j) =
                    (std::exp(logits.at(i, j) - mx) / denom - (j == y ? 1.0 : 0.0)) / n;
    }
    return loss / n;
}

}  // namespace pcgl::protohead
