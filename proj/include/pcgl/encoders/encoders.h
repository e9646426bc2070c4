// encoders.h
// Dual-path feature extractor: a dilated temporal convolution stack for raw
// waveforms, a compact residual 2D network with projection head for log-mel
// spectrograms, and the fusion MLP that joins them.
#pragma once

#include <string>
#include <vector>

#include "pcgl/substrate/layers.h"

namespace pcgl::encoders {

using substrate::Module;
using substrate::Tensor;

struct EncoderConfig {
    int embed_dim = 64;  // D; both paths emit this dimension

    int tcn_init_kernel = 16;
    int tcn_init_stride = 4;
    int tcn_init_pool = 2;
    int tcn_blocks = 8;
    int tcn_kernel = 3;
    double tcn_dropout = 0.1;
    bool tcn_dilated = true;  // false drops dilations to 1 (ablation)

    std::vector<int> enc2d_widths{16, 32, 64, 128};
    int enc2d_blocks_per_stage = 2;
    bool enc2d_skips = true;  // false removes residual shortcuts (ablation)

    int input_len = 4000;
    int spec_mels = 64;
    int spec_frames = 59;
    double head_dropout = 0.1;
};

template <typename T>
struct EmbeddingBatch {
    std::vector<std::string> ids;
    Tensor<T> vectors;  // [N, D]
    bool normalized = false;
};

// Pre-activation residual block: h + dropout(conv_d(relu(bn(h)))), same length.
template <typename T>
class TcnBlock : public Module<T> {
public:
    TcnBlock(const std::string& name, int channels, int kernel, int dilation, double dropout)
        : bn_(name + ".bn", channels),
          conv_(name + ".conv", channels, channels, kernel, 1, dilation,
                dilation * (kernel - 1) / 2),
          drop_(dropout) {}

    void init(std::mt19937_64& rng) { conv_.init(rng); }

    Tensor<T> forward(const Tensor<T>& x) override {
        Tensor<T> t = bn_.forward(x);
        t = relu_.forward(t);
        t = conv_.forward(t);
        t = drop_.forward(t);
        return x + t;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> d = drop_.backward(dy);
        d = conv_.backward(d);
        d = relu_.backward(d);
        d = bn_.backward(d);
        return dy + d;
    }
    void children(std::vector<Module<T>*>& out) override {
        out.push_back(&bn_);
        out.push_back(&relu_);
        out.push_back(&conv_);
        out.push_back(&drop_);
    }
    int dilation() const { return conv_.spec().dilation; }
    int kernel() const { return conv_.spec().kernel; }

private:
    substrate::BatchNorm<T> bn_;
    substrate::ReLU<T> relu_;
    substrate::Conv1d<T> conv_;
    substrate::Dropout<T> drop_;
};

// Waveform path. Input [N, input_len] (or [N, 1, input_len]); output [N, D].
template <typename T>
class TcnEncoder : public Module<T> {
public:
    explicit TcnEncoder(const EncoderConfig& cfg, const std::string& prefix = "tcn")
        : cfg_(cfg),
          stem_(prefix + ".stem", 1, cfg.embed_dim, cfg.tcn_init_kernel, cfg.tcn_init_stride,
                1, (cfg.tcn_init_kernel - cfg.tcn_init_stride) / 2),
          stem_ln_(prefix + ".stem_ln", cfg.embed_dim),
          pool_(cfg.tcn_init_pool) {
        for (int l = 0; l < cfg.tcn_blocks; ++l) {
            const int dilation = cfg.tcn_dilated ? (1 << l) : 1;
            blocks_.push_back(std::make_unique<TcnBlock<T>>(
                prefix + ".block" + std::to_string(l), cfg.embed_dim, cfg.tcn_kernel,
                dilation, cfg.tcn_dropout));
        }
    }

    void init(std::mt19937_64& rng) {
        stem_.init(rng);
        for (auto& b : blocks_) b->init(rng);
    }

    // Receptive field of the dilated stack in post-downsample samples.
    int receptive_field() const {
        int rf = 1;
        for (const auto& b : blocks_) rf += (b->kernel() - 1) * b->dilation();
        return rf;
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        Tensor<T> h = as_nchw(x);
        had_2d_input_ = x.ndim() == 2;
        h = stem_.forward(h);
        h = stem_ln_.forward(h);
        h = stem_relu_.forward(h);
        h = pool_.forward(h);
        for (auto& b : blocks_) h = b->forward(h);
        return gap_.forward(h);
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> d = gap_.backward(dy);
        for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) d = (*it)->backward(d);
        d = pool_.backward(d);
        d = stem_relu_.backward(d);
        d = stem_ln_.backward(d);
        d = stem_.backward(d);
        if (had_2d_input_) d.shape = {d.dim(0), d.dim(2)};
        return d;
    }
    void children(std::vector<Module<T>*>& out) override {
        out.push_back(&stem_);
        out.push_back(&stem_ln_);
        out.push_back(&stem_relu_);
        out.push_back(&pool_);
        for (auto& b : blocks_) out.push_back(b.get());
        out.push_back(&gap_);
    }

private:
    Tensor<T> as_nchw(const Tensor<T>& x) const {
        if (x.ndim() == 3) {
            PCGL_CHECK(x.dim(1) == 1 && x.dim(2) == cfg_.input_len,
                       "tcn: input " << substrate::shape_str(x.shape));
            return x;
        }
        PCGL_CHECK(x.ndim() == 2 && x.dim(1) == cfg_.input_len,
                   "tcn: input " << substrate::shape_str(x.shape) << ", want [N,"
                                 << cfg_.input_len << "]");
        Tensor<T> y = x;
        y.shape = {x.dim(0), 1, x.dim(1)};
        return y;
    }

    EncoderConfig cfg_;
    substrate::Conv1d<T> stem_;
    substrate::LayerNorm<T> stem_ln_;
    substrate::ReLU<T> stem_relu_;
    substrate::AvgPool1d<T> pool_;
    std::vector<std::unique_ptr<TcnBlock<T>>> blocks_;
    substrate::GlobalAvgPool<T> gap_;
    bool had_2d_input_ = false;
};

// Residual 2D block: relu(G(x) + shortcut(x)). The stage-entry variant uses
// stride 2 with a 1x1 projection shortcut; with skips disabled it is relu(G(x)).
template <typename T>
class Res2dBlock : public Module<T> {
public:
    Res2dBlock(const std::string& name, int in_ch, int out_ch, int stride, bool skip)
        : skip_(skip), projected_(stride != 1 || in_ch != out_ch),
          conv1_(name + ".conv1", in_ch, out_ch, 3, stride, 1),
          bn1_(name + ".bn1", out_ch),
          conv2_(name + ".conv2", out_ch, out_ch, 3, 1, 1),
          bn2_(name + ".bn2", out_ch) {
        if (skip_ && projected_) {
            proj_ = std::make_unique<substrate::Conv2d<T>>(name + ".proj", in_ch, out_ch, 1,
                                                           stride, 0);
            proj_bn_ = std::make_unique<substrate::BatchNorm<T>>(name + ".proj_bn", out_ch);
        }
    }

    void init(std::mt19937_64& rng) {
        conv1_.init(rng);
        conv2_.init(rng);
        if (proj_) proj_->init(rng);
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        Tensor<T> g = conv1_.forward(x);
        g = bn1_.forward(g);
        g = mid_relu_.forward(g);
        g = conv2_.forward(g);
        g = bn2_.forward(g);
        if (skip_) {
            Tensor<T> s = x;
            if (projected_) s = proj_bn_->forward(proj_->forward(x));
            g = g + s;
        }
        return out_relu_.forward(g);
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> d = out_relu_.backward(dy);
        Tensor<T> dg = bn2_.backward(d);
        dg = conv2_.backward(dg);
        dg = mid_relu_.backward(dg);
        dg = bn1_.backward(dg);
        Tensor<T> dx = conv1_.backward(dg);
        if (skip_) {
            if (projected_) {
                Tensor<T> ds = proj_bn_->backward(d);
                ds = proj_->backward(ds);
                dx = dx + ds;
            } else {
                dx = dx + d;
            }
        }
        return dx;
    }
    void children(std::vector<Module<T>*>& out) override {
        out.push_back(&conv1_);
        out.push_back(&bn1_);
        out.push_back(&mid_relu_);
        out.push_back(&conv2_);
        out.push_back(&bn2_);
        if (proj_) {
            out.push_back(proj_.get());
            out.push_back(proj_bn_.get());
        }
        out.push_back(&out_relu_);
    }

private:
    bool skip_, projected_;
    substrate::Conv2d<T> conv1_;
    substrate::BatchNorm<T> bn1_;
    substrate::ReLU<T> mid_relu_;
    substrate::Conv2d<T> conv2_;
    substrate::BatchNorm<T> bn2_;
    std::unique_ptr<substrate::Conv2d<T>> proj_;
    std::unique_ptr<substrate::BatchNorm<T>> proj_bn_;
    substrate::ReLU<T> out_relu_;
};

// Spectrogram path. Input [N, mels, frames] (or [N,1,mels,frames]); output [N, D].
template <typename T>
class Conv2dEncoder : public Module<T> {
public:
    explicit Conv2dEncoder(const EncoderConfig& cfg, const std::string& prefix = "enc2d")
        : cfg_(cfg),
          stem_(prefix + ".stem", 1, cfg.enc2d_widths.at(0), 3, 1, 1),
          stem_bn_(prefix + ".stem_bn", cfg.enc2d_widths.at(0)) {
        int in_ch = cfg.enc2d_widths.at(0);
        for (std::size_t s = 0; s < cfg.enc2d_widths.size(); ++s) {
            const int w = cfg.enc2d_widths[s];
            for (int b = 0; b < cfg.enc2d_blocks_per_stage; ++b) {
                const int stride = b == 0 ? 2 : 1;
                blocks_.push_back(std::make_unique<Res2dBlock<T>>(
                    prefix + ".s" + std::to_string(s) + "b" + std::to_string(b), in_ch, w,
                    stride, cfg.enc2d_skips));
                in_ch = w;
            }
        }
        const int feat = cfg.enc2d_widths.back();
        head_fc1_ = std::make_unique<substrate::Affine<T>>(prefix + ".head_fc1", feat, feat);
        head_bn_ = std::make_unique<substrate::BatchNorm<T>>(prefix + ".head_bn", feat);
        head_drop_ = std::make_unique<substrate::Dropout<T>>(cfg.head_dropout);
        head_fc2_ = std::make_unique<substrate::Affine<T>>(prefix + ".head_fc2", feat,
                                                           cfg.embed_dim);
    }

    void init(std::mt19937_64& rng) {
        stem_.init(rng);
        for (auto& b : blocks_) b->init(rng);
        head_fc1_->init(rng);
        head_fc2_->init(rng);
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        Tensor<T> h = as_nchw(x);
        had_3d_input_ = x.ndim() == 3;
        h = stem_.forward(h);
        h = stem_bn_.forward(h);
        h = stem_relu_.forward(h);
        for (auto& b : blocks_) h = b->forward(h);
        h = gap_.forward(h);
        h = head_fc1_->forward(h);
        h = head_bn_->forward(h);
        h = head_relu_.forward(h);
        h = head_drop_->forward(h);
        return head_fc2_->forward(h);
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> d = head_fc2_->backward(dy);
        d = head_drop_->backward(d);
        d = head_relu_.backward(d);
        d = head_bn_->backward(d);
        d = head_fc1_->backward(d);
        d = gap_.backward(d);
        for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) d = (*it)->backward(d);
        d = stem_relu_.backward(d);
        d = stem_bn_.backward(d);
        d = stem_.backward(d);
        if (had_3d_input_) d.shape = {d.dim(0), d.dim(2), d.dim(3)};
        return d;
    }
    void children(std::vector<Module<T>*>& out) override {
        out.push_back(&stem_);
        out.push_back(&stem_bn_);
        out.push_back(&stem_relu_);
        for (auto& b : blocks_) out.push_back(b.get());
        out.push_back(&gap_);
        out.push_back(head_fc1_.get());
        out.push_back(head_bn_.get());
        out.push_back(&head_relu_);
        out.push_back(head_drop_.get());
        out.push_back(head_fc2_.get());
    }

private:
    Tensor<T> as_nchw(const Tensor<T>& x) const {
        if (x.ndim() == 4) {
            PCGL_CHECK(x.dim(1) == 1 && x.dim(2) == cfg_.spec_mels &&
                           x.dim(3) == cfg_.spec_frames,
                       "enc2d: input " << substrate::shape_str(x.shape));
            return x;
        }
        PCGL_CHECK(x.ndim() == 3 && x.dim(1) == cfg_.spec_mels && x.dim(2) == cfg_.spec_frames,
                   "enc2d: input " << substrate::shape_str(x.shape) << ", want [N,"
                                   << cfg_.spec_mels << "," << cfg_.spec_frames << "]");
        Tensor<T> y = x;
        y.shape = {x.dim(0), 1, x.dim(1), x.dim(2)};
        return y;
    }

    EncoderConfig cfg_;
    substrate::Conv2d<T> stem_;
    substrate::BatchNorm<T> stem_bn_;
    substrate::ReLU<T> stem_relu_;
    std::vector<std::unique_ptr<Res2dBlock<T>>> blocks_;
    substrate::GlobalAvgPool<T> gap_;
    std::unique_ptr<substrate::Affine<T>> head_fc1_;
    std::unique_ptr<substrate::BatchNorm<T>> head_bn_;
    substrate::ReLU<T> head_relu_;
    std::unique_ptr<substrate::Dropout<T>> head_drop_;
    std::unique_ptr<substrate::Affine<T>> head_fc2_;
    bool had_3d_input_ = false;
};

// concat(z1, z2) -> affine(2D->2D) -> layer-norm -> relu -> dropout -> affine(2D->D)
template <typename T>
class FusionMlp : public Module<T> {
public:
    explicit FusionMlp(const EncoderConfig& cfg, const std::string& prefix = "fusion")
        : d_(cfg.embed_dim),
          fc1_(prefix + ".fc1", 2 * cfg.embed_dim, 2 * cfg.embed_dim),
          ln_(prefix + ".ln", 2 * cfg.embed_dim),
          drop_(cfg.head_dropout),
          fc2_(prefix + ".fc2", 2 * cfg.embed_dim, cfg.embed_dim) {}

    void init(std::mt19937_64& rng) {
        fc1_.init(rng);
        fc2_.init(rng);
    }

    // forward/backward on the already concatenated [N, 2D] input
    Tensor<T> forward(const Tensor<T>& cat) override {
        Tensor<T> h = fc1_.forward(cat);
        h = ln_.forward(h);
        h = relu_.forward(h);
        h = drop_.forward(h);
        return fc2_.forward(h);
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> d = fc2_.backward(dy);
        d = drop_.backward(d);
        d = relu_.backward(d);
        d = ln_.backward(d);
        return fc1_.backward(d);
    }
    void children(std::vector<Module<T>*>& out) override {
        out.push_back(&fc1_);
        out.push_back(&ln_);
        out.push_back(&relu_);
        out.push_back(&drop_);
        out.push_back(&fc2_);
    }

    EmbeddingBatch<T> fuse(const EmbeddingBatch<T>& z1, const EmbeddingBatch<T>& z2) {
        PCGL_CHECK(z1.ids == z2.ids, "fuse: sample id mismatch between paths");
        PCGL_CHECK(z1.vectors.ndim() == 2 && z1.vectors.dim(1) == d_ &&
                       z2.vectors.dim(1) == d_,
                   "fuse: want [N," << d_ << "] embeddings");
        EmbeddingBatch<T> out;
        out.ids = z1.ids;
        out.vectors = forward(substrate::concat_cols(z1.vectors, z2.vectors));
        return out;
    }

private:
    int d_;
    substrate::Affine<T> fc1_;
    substrate::LayerNorm<T> ln_;
    substrate::ReLU<T> relu_;
    substrate::Dropout<T> drop_;
    substrate::Affine<T> fc2_;
};

// The full extractor. Pretraining drives the two paths directly; fine-tuning
// and inference go through embed(), which fuses when dual_path is on and
// falls back to the waveform path alone otherwise.
template <typename T>
class DualPathModel {
public:
    explicit DualPathModel(const EncoderConfig& cfg, bool dual_path = true)
        : cfg_(cfg), dual_path_(dual_path), tcn_(cfg), enc2d_(cfg), fusion_(cfg) {}

    void init(std::uint64_t seed) {
        auto r1 = substrate::make_rng(seed, "init-tcn");
        tcn_.init(r1);
        auto r2 = substrate::make_rng(seed, "init-enc2d");
        enc2d_.init(r2);
        auto r3 = substrate::make_rng(seed, "init-fusion");
        fusion_.init(r3);
        reseed(seed);
    }
    void reseed(std::uint64_t seed) {
        tcn_.reseed(substrate::mix_seed(seed, "model-tcn"));
        enc2d_.reseed(substrate::mix_seed(seed, "model-enc2d"));
        fusion_.reseed(substrate::mix_seed(seed, "model-fusion"));
    }
    void set_mode(substrate::Mode m) {
        tcn_.set_mode(m);
        enc2d_.set_mode(m);
        fusion_.set_mode(m);
    }

    Tensor<T> embed_1d(const Tensor<T>& wave) { return tcn_.forward(wave); }
    Tensor<T> embed_2d(const Tensor<T>& spec) { return enc2d_.forward(spec); }
    Tensor<T> embed(const Tensor<T>& wave, const Tensor<T>& spec) {
        Tensor<T> z1 = tcn_.forward(wave);
        if (!dual_path_) return z1;
        Tensor<T> z2 = enc2d_.forward(spec);
        return fusion_.forward(substrate::concat_cols(z1, z2));
    }
    int embed_dim() const { return cfg_.embed_dim; }
    bool dual_path() const { return dual_path_; }

    TcnEncoder<T>& tcn() { return tcn_; }
    Conv2dEncoder<T>& enc2d() { return enc2d_; }
    FusionMlp<T>& fusion() { return fusion_; }
    const EncoderConfig& config() const { return cfg_; }

    std::vector<substrate::Parameter<T>*> params() {
        auto out = tcn_.params();
        auto p2 = enc2d_.params();
        auto p3 = fusion_.params();
        out.insert(out.end(), p2.begin(), p2.end());
        out.insert(out.end(), p3.begin(), p3.end());
        return out;
    }
    std::vector<substrate::Parameter<T>*> backbone_params() {
        auto out = tcn_.params();
        auto p2 = enc2d_.params();
        out.insert(out.end(), p2.begin(), p2.end());
        return out;
    }
    void zero_grads() {
        for (auto* p : params()) p->zero_grad();
    }

private:
    EncoderConfig cfg_;
    bool dual_path_;
    TcnEncoder<T> tcn_;
    Conv2dEncoder<T> enc2d_;
    FusionMlp<T> fusion_;
};

}  // namespace pcgl::encoders
