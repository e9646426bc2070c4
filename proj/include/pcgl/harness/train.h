// train.h
// Orchestration layer: contrastive pretraining, prototypical and linear
// fine-tuning, evaluation, data-efficiency curves and embedding export.
// Checkpoints are self-describing: the resolved run configuration rides in
// the metadata and reconstructs the exact module wiring on load.
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pcgl/encoders/encoders.h"
#include "pcgl/harness/config.h"
#include "pcgl/harness/data.h"
#include "pcgl/harness/metrics.h"
#include "pcgl/protohead/protohead.h"
#include "pcgl/substrate/checkpoint.h"

namespace pcgl::harness {

// Trainable stack above the backbone: fusion MLP (dual path only) feeding
// the classification head.
template <typename T>
class FineStack : public substrate::Module<T> {
public:
    FineStack(encoders::FusionMlp<T>* fusion, substrate::Module<T>* head)
        : fusion_(fusion), head_(head) {}
    substrate::Tensor<T> forward(const substrate::Tensor<T>& x) override {
        return head_->forward(fusion_ ? fusion_->forward(x) : x);
    }
    substrate::Tensor<T> backward(const substrate::Tensor<T>& dy) override {
        substrate::Tensor<T> d = head_->backward(dy);
        return fusion_ ? fusion_->backward(d) : d;
    }
    void children(std::vector<substrate::Module<T>*>& out) override {
        if (fusion_) out.push_back(fusion_);
        out.push_back(head_);
    }

private:
    encoders::FusionMlp<T>* fusion_;
    substrate::Module<T>* head_;
};

// A model plus everything needed to score windows with it.
struct ModelBundle {
    RunConfig cfg;
    std::string kind;  // pretrain | proto | linear
    std::unique_ptr<encoders::DualPathModel<float>> model;
    std::unique_ptr<protohead::ProtoHead<float>> proto;
    std::unique_ptr<protohead::LinearHead<float>> linear;
    std::optional<protohead::PrototypeSet<float>> prototypes;
    double threshold = 0.5;

    substrate::Module<float>* head();
    FineStack<float> stack();  // valid while the bundle lives
};

ModelBundle make_bundle(const RunConfig& cfg, const std::string& kind);
ModelBundle load_bundle(const substrate::Checkpoint& ckpt);
substrate::Checkpoint save_bundle(ModelBundle& b);

// Flips trainability of real weights; batch-norm running statistics stay
// non-trainable so the optimizer never decays them.
void set_weights_trainable(const std::vector<substrate::Parameter<float>*>& ps,
                           bool trainable);

// Frozen-backbone representation of a window list in eval mode:
// concat(z1, z2) [N, 2D] on the dual path, z1 [N, D] otherwise.
substrate::Tensor<float> backbone_features(encoders::DualPathModel<float>& model,
                                           const std::vector<windows::Window>& ws);

// Positive-class probability per window, eval mode.
std::vector<double> window_scores(ModelBundle& b, const std::vector<windows::Window>& ws);

struct PretrainResult {
    substrate::Checkpoint checkpoint;
    std::vector<double> epoch_loss;  // mean total objective per epoch
    std::vector<double> step_loss;
};

PretrainResult pretrain(const RunConfig& cfg, const PreparedDataset& ds);

struct FinetuneResult {
    substrate::Checkpoint checkpoint;
    std::vector<double> val_metric;  // proto: F1 per epoch; linear: CE loss per epoch
    std::vector<double> grad_norms;  // proto: post-clip global norm per step
    double threshold = 0.5;
};

FinetuneResult train_proto(const RunConfig& cfg, const PreparedDataset& ds,
                           const substrate::Checkpoint& pretrained);

// pretrained == nullptr trains the fully supervised baseline from random
// init (no freeze phase, one learning rate).
FinetuneResult train_linear(const RunConfig& cfg, const PreparedDataset& ds,
                            const substrate::Checkpoint* pretrained);

EvalReport evaluate(const substrate::Checkpoint& ckpt,
                    const std::vector<windows::Window>& split);
Predictions predict(const substrate::Checkpoint& ckpt,
                    const std::vector<windows::Window>& split);

struct EfficiencyPoint {
    double fraction = 1.0;
    double ssl_f1 = 0, ssl_lo = 0, ssl_hi = 0;
    double supervised_f1 = 0, supervised_lo = 0, supervised_hi = 0;
    double delta_f1 = 0, delta_lo = 0, delta_hi = 0;
};

// Paired SSL-pretrained vs from-scratch runs per label fraction, scored on
// the test split with patient-bootstrap CIs. Passing a pretraining
// checkpoint skips the shared pretraining stage.
std::vector<EfficiencyPoint> efficiency_curve(
    const RunConfig& cfg, const PreparedDataset& ds, const std::vector<double>& fractions,
    const substrate::Checkpoint* pretrained = nullptr);

nlohmann::json efficiency_json(const std::vector<EfficiencyPoint>& pts);

// Float32 little-endian row-major matrix at path plus a JSON sidecar
// (path + ".json") with ids, labels and dimensions.
void export_embeddings(const substrate::Checkpoint& ckpt,
                       const std::vector<windows::Window>& split, const std::string& path);

}  // namespace pcgl::harness
