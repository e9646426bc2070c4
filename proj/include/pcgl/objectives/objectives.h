// objectives.h
// Self-supervised loss stack: NT-Xent, debiased entropic Wasserstein via
// Sinkhorn, their hybrid combination, and the dual-path pretraining
// composition. Everything runs in double internally; gradients are analytic
// and differentiate through the unrolled Sinkhorn iterations.
#pragma once

#include "pcgl/substrate/tensor.h"

namespace pcgl::objectives {

using substrate::Tensor;

struct SinkhornConfig {
    double epsilon = 0.05;
    int max_iters = 200;
    double marginal_tol = 1e-6;
    bool debiased = true;
    // Anneal from a coarse epsilon toward the target; keeps the iteration
    // count bounded at small epsilon.
    bool eps_scaling = true;
};

struct LossConfig {
    double temperature = 0.07;
    double alpha = 0.3;
    SinkhornConfig sinkhorn;
    double w_1d = 1.0 / 3.0;
    double w_2d = 1.0 / 3.0;
    double w_cross = 1.0 / 3.0;

    void validate() const;
};

struct SinkhornInfo {
    int sweeps = 0;
    double marginal_err = 0.0;
};

// Contrastive loss over row-aligned positive pairs. Rows are L2-normalized
// internally; gradients (if requested) are with respect to the raw inputs.
double ntxent(const Tensor<double>& za, const Tensor<double>& zb, double tau,
              Tensor<double>* dza = nullptr, Tensor<double>* dzb = nullptr);

// Entropic Wasserstein divergence between the two batches viewed as uniform
// empirical distributions; squared Euclidean cost on L2-normalized rows.
// With cfg.debiased the symmetric self-terms are subtracted.
double sinkhorn_w2(const Tensor<double>& za, const Tensor<double>& zb,
                   const SinkhornConfig& cfg, Tensor<double>* dza = nullptr,
                   Tensor<double>* dzb = nullptr, SinkhornInfo* info = nullptr);

struct HybridTerm {
    double total = 0.0;
    double ntxent = 0.0;
    double wasserstein = 0.0;
};

// alpha * wasserstein + (1 - alpha) * ntxent
HybridTerm hybrid(const Tensor<double>& za, const Tensor<double>& zb, const LossConfig& cfg,
                  Tensor<double>* dza = nullptr, Tensor<double>* dzb = nullptr);

struct LossBreakdown {
    double total = 0.0;
    // Weighted aggregates across the three terms, so that
    // total = alpha * wasserstein + (1 - alpha) * ntxent.
    double ntxent = 0.0;
    double wasserstein = 0.0;
    // Hybrid values of the individual terms, so that
    // total = w_1d * term_1d + w_2d * term_2d + w_cross * term_cross.
    double term_1d = 0.0;
    double term_2d = 0.0;
    double term_cross = 0.0;
};

// Full pretraining objective over the four view embeddings:
//   w_1d * hybrid(z1a, z1b) + w_2d * hybrid(z2a, z2b)
//   + w_cross * 0.5 * (hybrid(z1a, z2a) + hybrid(z1b, z2b))
// Gradient outputs accumulate the contributions of every term they enter.
LossBreakdown pretrain_objective(const Tensor<double>& z1a, const Tensor<double>& z1b,
                                 const Tensor<double>& z2a, const Tensor<double>& z2b,
                                 const LossConfig& cfg, Tensor<double>* dz1a = nullptr,
                                 Tensor<double>* dz1b = nullptr, Tensor<double>* dz2a = nullptr,
                                 Tensor<double>* dz2b = nullptr);

}  // namespace pcgl::objectives
