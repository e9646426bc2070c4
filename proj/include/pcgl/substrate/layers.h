// layers.h
// Differentiable building blocks with explicit forward/backward passes.
// Each layer caches what its backward needs during forward; a module
// instance is single-writer during training.
#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pcgl/substrate/kernels.h"
#include "pcgl/substrate/rng.h"
#include "pcgl/substrate/tensor.h"

namespace pcgl::substrate {

enum class Mode { Train, Eval };

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Shape s) : name(std::move(n)), value(s), grad(std::move(s)) {}
    void zero_grad() { grad.fill(T(0)); }
};

template <typename T>
class Module {
public:
    virtual ~Module() = default;
    virtual Tensor<T> forward(const Tensor<T>& x) = 0;
    virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
    virtual void collect_params(std::vector<Parameter<T>*>& out) {}
    virtual void children(std::vector<Module<T>*>& out) {}

    void set_mode(Mode m) {
        mode_ = m;
        std::vector<Module<T>*> cs;
        children(cs);
        for (auto* c : cs) c->set_mode(m);
    }
    Mode mode() const { return mode_; }
    bool training() const { return mode_ == Mode::Train; }

    std::vector<Parameter<T>*> params() {
        std::vector<Parameter<T>*> out;
        collect_all(out);
        return out;
    }
    void collect_all(std::vector<Parameter<T>*>& out) {
        collect_params(out);
        std::vector<Module<T>*> cs;
        children(cs);
        for (auto* c : cs) c->collect_all(out);
    }
    void zero_grads() {
        for (auto* p : params()) p->zero_grad();
    }
    void set_trainable(bool t) {
        for (auto* p : params()) p->trainable = t;
    }

    // Resets every dropout stream under this module. Called once per run with
    // the derived global seed; gradient checks call it before each evaluation
    // so the sampled masks are held fixed.
    void reseed(std::uint64_t seed) {
        std::uint64_t ctr = 0;
        reseed_walk(seed, ctr);
    }

protected:
    virtual void on_reseed(std::uint64_t) {}
    void reseed_walk(std::uint64_t seed, std::uint64_t& ctr) {
        on_reseed(mix_seed(seed, "dropout-stream", ctr++));
        std::vector<Module<T>*> cs;
        children(cs);
        for (auto* c : cs) c->reseed_walk(seed, ctr);
    }
    Mode mode_ = Mode::Train;
};

// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) init for weights and biases.
template <typename T>
void init_uniform(Tensor<T>& t, int fan_in, std::mt19937_64& rng) {
    const double bound = std::sqrt(1.0 / std::max(1, fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.data) v = static_cast<T>(dist(rng));
}

template <typename T>
class Conv1d : public Module<T> {
public:
    Conv1d(std::string name, int in_ch, int out_ch, int kernel, int stride, int dilation,
           int padding)
        : spec_{in_ch, out_ch, kernel, stride, dilation, padding},
          weight_(name + ".weight", {out_ch, in_ch * kernel}),
          bias_(name + ".bias", {out_ch}) {}

    void init(std::mt19937_64& rng) {
        init_uniform(weight_.value, spec_.in_ch * spec_.kernel, rng);
        init_uniform(bias_.value, spec_.in_ch * spec_.kernel, rng);
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        x_ = x;
        Tensor<T> y;
        conv1d_forward(x, weight_.value, &bias_.value, spec_, y);
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx, dw;
        conv1d_backward(x_, weight_.value, dy, spec_, dx, dw, &bias_.grad);
        axpy(T(1), dw, weight_.grad);
        return dx;
    }
    void collect_params(std::vector<Parameter<T>*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }
    const Conv1dSpec& spec() const { return spec_; }
    Parameter<T>& weight() { return weight_; }

private:
    Conv1dSpec spec_;
    Parameter<T> weight_, bias_;
    Tensor<T> x_;
};

template <typename T>
class Conv2d : public Module<T> {
public:
    Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int padding)
        : spec_{in_ch, out_ch, kernel, stride, padding},
          weight_(name + ".weight", {out_ch, in_ch * kernel * kernel}),
          bias_(name + ".bias", {out_ch}) {}

    void init(std::mt19937_64& rng) {
        init_uniform(weight_.value, spec_.in_ch * spec_.kernel * spec_.kernel, rng);
        init_uniform(bias_.value, spec_.in_ch * spec_.kernel * spec_.kernel, rng);
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        x_ = x;
        Tensor<T> y;
        conv2d_forward(x, weight_.value, &bias_.value, spec_, y);
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx, dw;
        conv2d_backward(x_, weight_.value, dy, spec_, dx, dw, &bias_.grad);
        axpy(T(1), dw, weight_.grad);
        return dx;
    }
    void collect_params(std::vector<Parameter<T>*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }
    const Conv2dSpec& spec() const { return spec_; }

private:
    Conv2dSpec spec_;
    Parameter<T> weight_, bias_;
    Tensor<T> x_;
};

// Fully connected: y = x W^T + b with W stored [out, in].
template <typename T>
class Affine : public Module<T> {
public:
    Affine(std::string name, int in, int out)
        : in_(in), out_(out), weight_(name + ".weight", {out, in}), bias_(name + ".bias", {out}) {}

    void init(std::mt19937_64& rng) {
        init_uniform(weight_.value, in_, rng);
        init_uniform(bias_.value, in_, rng);
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        PCGL_CHECK(x.ndim() == 2 && x.dim(1) == in_,
                   "affine: input " << shape_str(x.shape) << ", want [N," << in_ << "]");
        x_ = x;
        const int n = x.dim(0);
        Tensor<T> y({n, out_});
        gemm<T>(false, true, n, out_, in_, T(1), x.ptr(), in_, weight_.value.ptr(), in_, T(0),
                y.ptr(), out_);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < out_; ++j) y.at(i, j) += bias_.value[static_cast<std::size_t>(j)];
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        const int n = x_.dim(0);
        gemm<T>(true, false, out_, in_, n, T(1), dy.ptr(), out_, x_.ptr(), in_, T(1),
                weight_.grad.ptr(), in_);
        for (int j = 0; j < out_; ++j) {
            double acc = 0;
            for (int i = 0; i < n; ++i) acc += static_cast<double>(dy.at(i, j));
            bias_.grad[static_cast<std::size_t>(j)] += static_cast<T>(acc);
        }
        Tensor<T> dx({n, in_});
        gemm<T>(false, false, n, in_, out_, T(1), dy.ptr(), out_, weight_.value.ptr(), in_, T(0),
                dx.ptr(), in_);
        return dx;
    }
    void collect_params(std::vector<Parameter<T>*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

private:
    int in_, out_;
    Parameter<T> weight_, bias_;
    Tensor<T> x_;
};

// Batch normalization over every axis except channel (axis 1); accepts
// [N,C], [N,C,L] and [N,C,H,W]. Population (biased) statistics are used both
// for normalization and for the running buffers.
template <typename T>
class BatchNorm : public Module<T> {
public:
    BatchNorm(std::string name, int channels, double momentum = 0.1, double eps = 1e-5)
        : c_(channels), momentum_(momentum), eps_(eps),
          gamma_(name + ".gamma", {channels}), beta_(name + ".beta", {channels}),
          run_mean_(name + ".running_mean", {channels}),
          run_var_(name + ".running_var", {channels}) {
        gamma_.value.fill(T(1));
        run_var_.value.fill(T(1));
        run_mean_.trainable = false;
        run_var_.trainable = false;
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        PCGL_CHECK(x.ndim() >= 2 && x.dim(1) == c_, "batchnorm: input " << shape_str(x.shape)
                                                                        << ", want channels "
                                                                        << c_);
        const auto [n, sp] = layout(x);
        xhat_ = Tensor<T>::zeros_like(x);
        inv_std_.assign(static_cast<std::size_t>(c_), 0.0);
        Tensor<T> y = Tensor<T>::zeros_like(x);
        const std::size_t m = static_cast<std::size_t>(n) * sp;
        for (int c = 0; c < c_; ++c) {
            double mean, var;
            if (this->training()) {
                double s = 0, s2 = 0;
                for_channel(x, c, [&](T v) {
                    s += v;
                    s2 += static_cast<double>(v) * v;
                });
                mean = s / static_cast<double>(m);
                var = s2 / static_cast<double>(m) - mean * mean;
                if (var < 0) var = 0;
                auto cz = static_cast<std::size_t>(c);
                run_mean_.value[cz] =
                    static_cast<T>((1 - momentum_) * run_mean_.value[cz] + momentum_ * mean);
                run_var_.value[cz] =
                    static_cast<T>((1 - momentum_) * run_var_.value[cz] + momentum_ * var);
            } else {
                mean = run_mean_.value[static_cast<std::size_t>(c)];
                var = run_var_.value[static_cast<std::size_t>(c)];
            }
            const double inv = 1.0 / std::sqrt(var + eps_);
            inv_std_[static_cast<std::size_t>(c)] = inv;
            const T g = gamma_.value[static_cast<std::size_t>(c)];
            const T b = beta_.value[static_cast<std::size_t>(c)];
            map_channel(x, xhat_, y, c, [&](T v, T& xh, T& out) {
                xh = static_cast<T>((v - mean) * inv);
                out = g * xh + b;
            });
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        const auto [n, sp] = layout(dy);
        const std::size_t m = static_cast<std::size_t>(n) * sp;
        Tensor<T> dx = Tensor<T>::zeros_like(dy);
        for (int c = 0; c < c_; ++c) {
            const auto cz = static_cast<std::size_t>(c);
            const T g = gamma_.value[cz];
            double sum_dy = 0, sum_dyxh = 0;
            zip_channel(dy, xhat_, c, [&](T d, T xh) {
                sum_dy += d;
                sum_dyxh += static_cast<double>(d) * xh;
            });
            gamma_.grad[cz] += static_cast<T>(sum_dyxh);
            beta_.grad[cz] += static_cast<T>(sum_dy);
            const double inv = inv_std_[cz];
            if (this->training()) {
                const double md = static_cast<double>(m);
                zip_channel_out(dy, xhat_, dx, c, [&](T d, T xh, T& o) {
                    const double dxh = static_cast<double>(d) * g;
                    o = static_cast<T>(inv * (dxh - (g * sum_dy) / md -
                                              static_cast<double>(xh) * (g * sum_dyxh) / md));
                });
            } else {
                zip_channel_out(dy, xhat_, dx, c, [&](T d, T, T& o) {
                    o = static_cast<T>(static_cast<double>(d) * g * inv);
                });
            }
        }
        return dx;
    }

    void collect_params(std::vector<Parameter<T>*>& out) override {
        out.push_back(&gamma_);
        out.push_back(&beta_);
        out.push_back(&run_mean_);
        out.push_back(&run_var_);
    }

private:
    std::pair<int, std::size_t> layout(const Tensor<T>& x) const {
        std::size_t sp = 1;
        for (int i = 2; i < x.ndim(); ++i) sp *= static_cast<std::size_t>(x.dim(i));
        return {x.dim(0), sp};
    }
    template <typename F>
    void for_channel(const Tensor<T>& x, int c, F&& f) const {
        const auto [n, sp] = layout(x);
        for (int i = 0; i < n; ++i) {
            const T* p = x.ptr() + (static_cast<std::size_t>(i) * c_ + c) * sp;
            for (std::size_t k = 0; k < sp; ++k) f(p[k]);
        }
    }
    template <typename F>
    void map_channel(const Tensor<T>& x, Tensor<T>& a, Tensor<T>& b, int c, F&& f) const {
        const auto [n, sp] = layout(x);
        for (int i = 0; i < n; ++i) {
            const std::size_t off = (static_cast<std::size_t>(i) * c_ + c) * sp;
            for (std::size_t k = 0; k < sp; ++k) f(x.ptr()[off + k], a.ptr()[off + k],
                                                  b.ptr()[off + k]);
        }
    }
    template <typename F>
    void zip_channel(const Tensor<T>& a, const Tensor<T>& b, int c, F&& f) const {
        const auto [n, sp] = layout(a);
        for (int i = 0; i < n; ++i) {
            const std::size_t off = (static_cast<std::size_t>(i) * c_ + c) * sp;
            for (std::size_t k = 0; k < sp; ++k) f(a.ptr()[off + k], b.ptr()[off + k]);
        }
    }
    template <typename F>
    void zip_channel_out(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& o, int c,
                         F&& f) const {
        const auto [n, sp] = layout(a);
        for (int i = 0; i < n; ++i) {
            const std::size_t off = (static_cast<std::size_t>(i) * c_ + c) * sp;
            for (std::size_t k = 0; k < sp; ++k)
                f(a.ptr()[off + k], b.ptr()[off + k], o.ptr()[off + k]);
        }
    }

    int c_;
    double momentum_, eps_;
    Parameter<T> gamma_, beta_, run_mean_, run_var_;
    Tensor<T> xhat_;
    std::vector<double> inv_std_;
};

// Layer normalization over the channel axis: per sample for [N,C], per
// (sample, position) for [N,C,L]. Scale/shift are per channel.
template <typename T>
class LayerNorm : public Module<T> {
public:
    LayerNorm(std::string name, int channels, double eps = 1e-5)
        : c_(channels), eps_(eps), gamma_(name + ".gamma", {channels}),
          beta_(name + ".beta", {channels}) {
        gamma_.value.fill(T(1));
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        PCGL_CHECK(x.ndim() >= 2 && x.dim(1) == c_, "layernorm: input " << shape_str(x.shape)
                                                                        << ", want channels "
                                                                        << c_);
        const auto [n, sp] = layout(x);
        xhat_ = Tensor<T>::zeros_like(x);
        inv_std_.assign(static_cast<std::size_t>(n) * sp, 0.0);
        Tensor<T> y = Tensor<T>::zeros_like(x);
        for (int i = 0; i < n; ++i)
            for (std::size_t k = 0; k < sp; ++k) {
                double s = 0, s2 = 0;
                for (int c = 0; c < c_; ++c) {
                    const T v = elem(x, i, c, k, sp);
                    s += v;
                    s2 += static_cast<double>(v) * v;
                }
                const double mean = s / c_;
                double var = s2 / c_ - mean * mean;
                if (var < 0) var = 0;
                const double inv = 1.0 / std::sqrt(var + eps_);
                inv_std_[static_cast<std::size_t>(i) * sp + k] = inv;
                for (int c = 0; c < c_; ++c) {
                    const auto cz = static_cast<std::size_t>(c);
                    T& xh = elem(xhat_, i, c, k, sp);
                    xh = static_cast<T>((elem(x, i, c, k, sp) - mean) * inv);
                    elem(y, i, c, k, sp) = gamma_.value[cz] * xh + beta_.value[cz];
                }
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        const auto [n, sp] = layout(dy);
        Tensor<T> dx = Tensor<T>::zeros_like(dy);
        for (int i = 0; i < n; ++i)
            for (std::size_t k = 0; k < sp; ++k) {
                double sum_dxh = 0, sum_dxhxh = 0;
                for (int c = 0; c < c_; ++c) {
                    const double dxh = static_cast<double>(elem(dy, i, c, k, sp)) *
                                       gamma_.value[static_cast<std::size_t>(c)];
                    sum_dxh += dxh;
                    sum_dxhxh += dxh * elem(xhat_, i, c, k, sp);
                }
                const double inv = inv_std_[static_cast<std::size_t>(i) * sp + k];
                for (int c = 0; c < c_; ++c) {
                    const auto cz = static_cast<std::size_t>(c);
                    const double dxh =
                        static_cast<double>(elem(dy, i, c, k, sp)) * gamma_.value[cz];
                    const double xh = elem(xhat_, i, c, k, sp);
                    elem(dx, i, c, k, sp) = static_cast<T>(
                        inv * (dxh - sum_dxh / c_ - xh * sum_dxhxh / c_));
                    gamma_.grad[cz] += static_cast<T>(
                        static_cast<double>(elem(dy, i, c, k, sp)) * xh);
                    beta_.grad[cz] += elem(dy, i, c, k, sp);
                }
            }
        return dx;
    }

    void collect_params(std::vector<Parameter<T>*>& out) override {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }

private:
    std::pair<int, std::size_t> layout(const Tensor<T>& x) const {
        std::size_t sp = 1;
        for (int i = 2; i < x.ndim(); ++i) sp *= static_cast<std::size_t>(x.dim(i));
        return {x.dim(0), sp};
    }
    static T& elem(Tensor<T>& t, int i, int c, std::size_t k, std::size_t sp) {
        return t.ptr()[(static_cast<std::size_t>(i) * t.dim(1) + c) * sp + k];
    }
    static const T& elem(const Tensor<T>& t, int i, int c, std::size_t k, std::size_t sp) {
        return t.ptr()[(static_cast<std::size_t>(i) * t.dim(1) + c) * sp + k];
    }

    int c_;
    double eps_;
    Parameter<T> gamma_, beta_;
    Tensor<T> xhat_;
    std::vector<double> inv_std_;
};

// Subgradient 0 at x == 0.
template <typename T>
class ReLU : public Module<T> {
public:
    Tensor<T> forward(const Tensor<T>& x) override {
        mask_.assign(x.numel(), 0);
        Tensor<T> y = Tensor<T>::zeros_like(x);
        for (std::size_t i = 0; i < x.numel(); ++i)
            if (x[i] > T(0)) {
                y[i] = x[i];
                mask_[i] = 1;
            }
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx = Tensor<T>::zeros_like(dy);
        for (std::size_t i = 0; i < dy.numel(); ++i)
            if (mask_[i]) dx[i] = dy[i];
        return dx;
    }

private:
    std::vector<unsigned char> mask_;
};

// Inverted dropout: kept units scaled by 1/(1-p) at train time.
template <typename T>
class Dropout : public Module<T> {
public:
    explicit Dropout(double p) : p_(p), rng_(0) {
        PCGL_CHECK(p >= 0.0 && p < 1.0, "dropout: p=" << p << " outside [0,1)");
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        if (!this->training() || p_ == 0.0) {
            identity_ = true;
            return x;
        }
        identity_ = false;
        mask_.assign(x.numel(), 0);
        const T scale = static_cast<T>(1.0 / (1.0 - p_));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Tensor<T> y = Tensor<T>::zeros_like(x);
        for (std::size_t i = 0; i < x.numel(); ++i)
            if (u(rng_) >= p_) {
                mask_[i] = 1;
                y[i] = x[i] * scale;
            }
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        if (identity_) return dy;
        const T scale = static_cast<T>(1.0 / (1.0 - p_));
        Tensor<T> dx = Tensor<T>::zeros_like(dy);
        for (std::size_t i = 0; i < dy.numel(); ++i)
            if (mask_[i]) dx[i] = dy[i] * scale;
        return dx;
    }

protected:
    void on_reseed(std::uint64_t seed) override { rng_.seed(seed); }

private:
    double p_;
    std::mt19937_64 rng_;
    std::vector<unsigned char> mask_;
    bool identity_ = true;
};

// Non-overlapping average pooling along the last axis of [N,C,L].
template <typename T>
class AvgPool1d : public Module<T> {
public:
    explicit AvgPool1d(int k) : k_(k) { PCGL_CHECK(k >= 1, "avgpool: k=" << k); }

    Tensor<T> forward(const Tensor<T>& x) override {
        PCGL_CHECK(x.ndim() == 3, "avgpool1d: want rank-3 input, got " << shape_str(x.shape));
        PCGL_CHECK(x.dim(2) % k_ == 0,
                   "avgpool1d: length " << x.dim(2) << " not divisible by " << k_);
        in_shape_ = x.shape;
        const int n = x.dim(0), c = x.dim(1), lo = x.dim(2) / k_;
        Tensor<T> y({n, c, lo});
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch)
                for (int o = 0; o < lo; ++o) {
                    double acc = 0;
                    for (int k = 0; k < k_; ++k) acc += x.at(i, ch, o * k_ + k);
                    y.at(i, ch, o) = static_cast<T>(acc / k_);
                }
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx(in_shape_);
        const int n = dy.dim(0), c = dy.dim(1), lo = dy.dim(2);
        const T inv = static_cast<T>(1.0 / k_);
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch)
                for (int o = 0; o < lo; ++o) {
                    const T g = dy.at(i, ch, o) * inv;
                    for (int k = 0; k < k_; ++k) dx.at(i, ch, o * k_ + k) = g;
                }
        return dx;
    }

private:
    int k_;
    Shape in_shape_;
};

// Mean over all spatial axes: [N,C,...] -> [N,C].
template <typename T>
class GlobalAvgPool : public Module<T> {
public:
    Tensor<T> forward(const Tensor<T>& x) override {
        PCGL_CHECK(x.ndim() >= 3, "global pool: want spatial input, got " << shape_str(x.shape));
        in_shape_ = x.shape;
        std::size_t sp = 1;
        for (int i = 2; i < x.ndim(); ++i) sp *= static_cast<std::size_t>(x.dim(i));
        sp_ = sp;
        const int n = x.dim(0), c = x.dim(1);
        Tensor<T> y({n, c});
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const T* p = x.ptr() + (static_cast<std::size_t>(i) * c + ch) * sp;
                double acc = 0;
                for (std::size_t k = 0; k < sp; ++k) acc += p[k];
                y.at(i, ch) = static_cast<T>(acc / static_cast<double>(sp));
            }
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx(in_shape_);
        const int n = dy.dim(0), c = dy.dim(1);
        const T inv = static_cast<T>(1.0 / static_cast<double>(sp_));
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                T* p = dx.ptr() + (static_cast<std::size_t>(i) * c + ch) * sp_;
                const T g = dy.at(i, ch) * inv;
                for (std::size_t k = 0; k < sp_; ++k) p[k] = g;
            }
        return dx;
    }

private:
    Shape in_shape_;
    std::size_t sp_ = 1;
};

template <typename T>
class Sequential : public Module<T> {
public:
    Sequential() = default;
    template <typename M, typename... Args>
    M* add(Args&&... args) {
        auto m = std::make_unique<M>(std::forward<Args>(args)...);
        M* raw = m.get();
        mods_.push_back(std::move(m));
        return raw;
    }
    Tensor<T> forward(const Tensor<T>& x) override {
        Tensor<T> h = x;
        for (auto& m : mods_) h = m->forward(h);
        return h;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> g = dy;
        for (auto it = mods_.rbegin(); it != mods_.rend(); ++it) g = (*it)->backward(g);
        return g;
    }
    void children(std::vector<Module<T>*>& out) override {
        for (auto& m : mods_) out.push_back(m.get());
    }

private:
    std::vector<std::unique_ptr<Module<T>>> mods_;
};

// Feature concatenation [N,A] ++ [N,B] -> [N,A+B] and its adjoint split.
template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
    PCGL_CHECK(a.ndim() == 2 && b.ndim() == 2 && a.dim(0) == b.dim(0),
               "concat: incompatible shapes " << shape_str(a.shape) << " and "
                                              << shape_str(b.shape));
    const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    Tensor<T> out({n, ca + cb});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < ca; ++j) out.at(i, j) = a.at(i, j);
        for (int j = 0; j < cb; ++j) out.at(i, ca + j) = b.at(i, j);
    }
    return out;
}

// Row stacking [A,C] ++ [B,C] -> [A+B,C].
template <typename T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
    PCGL_CHECK(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(1),
               "concat rows: incompatible shapes " << shape_str(a.shape) << " and "
                                                   << shape_str(b.shape));
    Tensor<T> out({a.dim(0) + b.dim(0), a.dim(1)});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_cols(const Tensor<T>& d, int ca) {
    const int n = d.dim(0), cb = d.dim(1) - ca;
    Tensor<T> da({n, ca}), db({n, cb});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < ca; ++j) da.at(i, j) = d.at(i, j);
        for (int j = 0; j < cb; ++j) db.at(i, j) = d.at(i, ca + j);
    }
    return {std::move(da), std::move(db)};
}

}  // namespace pcgl::substrate
