// optim.h
// Adam with coupled L2 weight decay, global-norm clipping and the two
// learning-rate schedules used by the trainers.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "pcgl/substrate/layers.h"
#include "pcgl/substrate/tensor.h"

namespace pcgl::substrate {

template <typename T>
double grad_global_norm(const std::vector<Parameter<T>*>& params) {
    double s = 0;
    for (const auto* p : params) {
        if (!p->trainable) continue;
        for (const auto& g : p->grad.data) s += static_cast<double>(g) * g;
    }
    return std::sqrt(s);
}

// Scales all gradients so the joint L2 norm is at most max_norm.
// Returns the pre-clip norm.
template <typename T>
double clip_global_norm(std::vector<Parameter<T>*>& params, double max_norm) {
    const double norm = grad_global_norm(params);
    if (norm > max_norm && norm > 0) {
        const T scale = static_cast<T>(max_norm / norm);
        for (auto* p : params) {
            if (!p->trainable) continue;
            for (auto& g : p->grad.data) g *= scale;
        }
    }
    return norm;
}

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Weight decay is folded into the gradient before the moment updates
// (classic L2 regularization, not the decoupled variant). Parameters whose
// name matches a group pattern get lr * group_scale; this is how the linear
// probe trains head and backbone at different rates.
template <typename T>
class Adam {
public:
    Adam(std::vector<Parameter<T>*> params, AdamConfig cfg)
        : params_(std::move(params)), cfg_(cfg) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i] = Tensor<double>::zeros(params_[i]->value.shape);
            v_[i] = Tensor<double>::zeros(params_[i]->value.shape);
        }
        lr_scale_.assign(params_.size(), 1.0);
    }

    void set_group_scale(const std::string& name_prefix, double scale) {
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (params_[i]->name.rfind(name_prefix, 0) == 0) lr_scale_[i] = scale;
    }

    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }
    std::int64_t steps() const { return t_; }
    std::int64_t skipped_steps() const { return skipped_; }

    // One update over all trainable parameters. If any gradient entry is
    // non-finite the whole step is skipped and counted.
    void step() {
        for (const auto* p : params_) {
            if (!p->trainable) continue;
            if (!p->grad.all_finite()) {
                ++skipped_;
                return;
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Parameter<T>* p = params_[i];
            if (!p->trainable) continue;
            const double lr = cfg_.lr * lr_scale_[i];
            for (std::size_t j = 0; j < p->value.numel(); ++j) {
                double g = static_cast<double>(p->grad[j]) +
                           cfg_.weight_decay * static_cast<double>(p->value[j]);
                double& m = m_[i][j];
                double& v = v_[i][j];
                m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
                v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                p->value[j] = static_cast<T>(p->value[j] -
                                             lr * mhat / (std::sqrt(vhat) + cfg_.eps));
            }
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    // Moment state keyed by parameter name, for checkpointing.
    std::map<std::string, std::pair<Tensor<double>, Tensor<double>>> state() const {
        std::map<std::string, std::pair<Tensor<double>, Tensor<double>>> out;
        for (std::size_t i = 0; i < params_.size(); ++i)
            out[params_[i]->name] = {m_[i], v_[i]};
        return out;
    }
    void load_state(
        const std::map<std::string, std::pair<Tensor<double>, Tensor<double>>>& st,
        std::int64_t steps) {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto it = st.find(params_[i]->name);
            PCGL_CHECK(it != st.end(), "optimizer state missing " << params_[i]->name);
            PCGL_CHECK(it->second.first.shape == params_[i]->value.shape,
                       "optimizer moment shape mismatch for " << params_[i]->name);
            m_[i] = it->second.first;
            v_[i] = it->second.second;
        }
        t_ = steps;
    }

private:
    std::vector<Parameter<T>*> params_;
    AdamConfig cfg_;
    std::vector<Tensor<double>> m_, v_;
    std::vector<double> lr_scale_;
    std::int64_t t_ = 0;
    std::int64_t skipped_ = 0;
};

// Cosine annealing from lr_max down to lr_min over total_epochs, evaluated
// at the start of each epoch (epoch is 0-based).
inline double cosine_lr(double lr_max, double lr_min, int epoch, int total_epochs) {
    if (total_epochs <= 1) return lr_max;
    const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(M_PI * t));
}

// Halves the learning rate when the monitored value stops improving by at
// least rel_threshold relative to the best seen.
class PlateauScheduler {
public:
    PlateauScheduler(double factor = 0.5, int patience = 5, double rel_threshold = 1e-4,
                     double min_lr = 1e-7)
        : factor_(factor), patience_(patience), rel_threshold_(rel_threshold), min_lr_(min_lr) {}

    // Feed the epoch's validation metric; returns the multiplier to apply
    // to the current learning rate (1.0 or factor).
    double observe(double value) {
        if (!std::isfinite(best_) || value < best_ - rel_threshold_ * std::abs(best_)) {
            best_ = value;
            bad_ = 0;
            return 1.0;
        }
        if (++bad_ > patience_) {
            bad_ = 0;
            return factor_;
        }
        return 1.0;
    }

    double apply(double lr, double value) {
        const double m = observe(value);
        return std::max(min_lr_, lr * m);
    }

    double best() const { return best_; }

private:
    double factor_;
    int patience_;
    double rel_threshold_, min_lr_;
    int bad_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

}  // namespace pcgl::substrate
