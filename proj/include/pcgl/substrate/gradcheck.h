// gradcheck.h
// Central-difference verification of analytic gradients, always run on the
// double instantiation. Stochastic layers are pinned by reseeding the module
// before every forward so each evaluation sees identical masks.
#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "pcgl/substrate/layers.h"
#include "pcgl/substrate/rng.h"
#include "pcgl/substrate/tensor.h"

namespace pcgl::substrate {

struct GradCheckConfig {
    double h = 1e-5;
    // Entries sampled per tensor; <= 0 checks every entry.
    int max_per_tensor = 24;
    std::uint64_t seed = 1234;
};

struct GradReport {
    double max_rel = 0.0;
    std::string worst;
    std::size_t checked = 0;
    std::size_t kinks = 0;

    void note(const std::string& where, double analytic, double numeric) {
        ++checked;
        const double denom = std::max(std::abs(analytic), std::abs(numeric));
        // Both effectively zero: treated as agreement to avoid 0/0 noise.
        if (denom < 1e-7) return;
        // Differences under the central-difference noise floor are not
        // resolvable regardless of the gradient magnitude.
        if (std::abs(analytic - numeric) < 1e-9) return;
        const double rel = std::abs(analytic - numeric) / denom;
        if (rel > max_rel) {
            max_rel = rel;
            worst = where + " (analytic=" + std::to_string(analytic) +
                    " numeric=" + std::to_string(numeric) + ")";
        }
    }
    void merge(const GradReport& o) {
        checked += o.checked;
        kinks += o.kinks;
        if (o.max_rel > max_rel) {
            max_rel = o.max_rel;
            worst = o.worst;
        }
    }
};

// Central difference of `eval` with respect to entries of `x`, compared
// against the analytic gradient `gx`.
template <typename EvalFn>
void fd_check_tensor(EvalFn&& eval, Tensor<double>& x, const Tensor<double>& gx,
                     const std::string& label, const GradCheckConfig& cfg,
                     std::mt19937_64& rng, GradReport& rep) {
    PCGL_CHECK(gx.same_shape(x), "gradcheck " << label << ": grad shape "
                                              << shape_str(gx.shape) << " vs value "
                                              << shape_str(x.shape));
    std::vector<std::size_t> idx;
    const std::size_t n = x.numel();
    if (cfg.max_per_tensor <= 0 || n <= static_cast<std::size_t>(cfg.max_per_tensor)) {
        idx.resize(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (int i = 0; i < cfg.max_per_tensor; ++i) idx.push_back(pick(rng));
    }
    for (std::size_t i : idx) {
        const double orig = x[i];
        x[i] = orig + cfg.h;
        const double fp = eval();
        x[i] = orig - cfg.h;
        const double fm = eval();
        x[i] = orig;
        const double numeric = (fp - fm) / (2.0 * cfg.h);
        const double a = gx[i];
        const double denom = std::max(std::abs(a), std::abs(numeric));
        const double diff = std::abs(a - numeric);
        if (denom >= 1e-7 && diff >= 1e-9 && diff / denom > 1e-5) {
            // The central difference straddles relu corners. When the two
            // one-sided slopes disagree the point is a kink and any value
            // between them is a valid subgradient. A genuinely dropped
            // gradient has matching one-sided slopes and still fails.
            const double f0 = eval();
            const double sp = (fp - f0) / cfg.h;
            const double sm = (f0 - fm) / cfg.h;
            const double scale = std::max({std::abs(sp), std::abs(sm), 1.0});
            if (std::abs(sp - sm) > 1e-3 * scale &&
                a >= std::min(sp, sm) - 1e-3 * scale &&
                a <= std::max(sp, sm) + 1e-3 * scale) {
                ++rep.checked;
                ++rep.kinks;
                continue;
            }
        }
        rep.note(label + "[" + std::to_string(i) + "]", a, numeric);
    }
}

// Scalar objective for module checks: fixed random weighting of the output.
inline Tensor<double> random_cotangent(const Shape& s, std::uint64_t seed) {
    Tensor<double> c(s);
    auto rng = make_rng(seed, "cotangent");
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : c.data) v = u(rng);
    return c;
}

// Verifies d(sum(c * m(x)))/dx and /dparams against central differences.
inline GradReport check_module(Module<double>& m, Tensor<double> x,
                               const GradCheckConfig& cfg = {}) {
    auto rng = make_rng(cfg.seed, "gradcheck-pick");

    m.reseed(cfg.seed);
    Tensor<double> y0 = m.forward(x);
    const Tensor<double> c = random_cotangent(y0.shape, mix_seed(cfg.seed, "cot"));

    auto eval = [&]() {
        m.reseed(cfg.seed);
        const Tensor<double> y = m.forward(x);
        double s = 0;
        for (std::size_t i = 0; i < y.numel(); ++i) s += y[i] * c[i];
        return s;
    };

    m.zero_grads();
    m.reseed(cfg.seed);
    (void)m.forward(x);
    Tensor<double> dx = m.backward(c);

    GradReport rep;
    fd_check_tensor(eval, x, dx, "input", cfg, rng, rep);
    for (auto* p : m.params()) {
        if (!p->trainable) continue;
        fd_check_tensor(eval, p->value, p->grad, p->name, cfg, rng, rep);
    }
    return rep;
}

}  // namespace pcgl::substrate
