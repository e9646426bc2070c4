#include "pcgl/objectives/objectives.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pcgl/common.h"

namespace pcgl::objectives {

namespace {

constexpr double kNormEps = 1e-12;

struct Normalized {
    Tensor<double> z;
    std::vector<double> rinv;
};

Normalized normalize_rows(const Tensor<double>& z) {
    const int n = z.dim(0), d = z.dim(1);
    Normalized out{Tensor<double>(z.shape), std::vector<double>(static_cast<std::size_t>(n))};
    for (int i = 0; i < n; ++i) {
        double s = 0;
        for (int j = 0; j < d; ++j) s += z.at(i, j) * z.at(i, j);
        const double r = 1.0 / std::sqrt(s + kNormEps);
        out.rinv[static_cast<std::size_t>(i)] = r;
        for (int j = 0; j < d; ++j) out.z.at(i, j) = z.at(i, j) * r;
    }
    return out;
}

// dz = r * dzh - r^3 * (z . dzh) * z, accumulated into dz.
void normalize_backward(const Tensor<double>& raw, const Normalized& nz,
                        const Tensor<double>& dzh, Tensor<double>& dz) {
    const int n = raw.dim(0), d = raw.dim(1);
    for (int i = 0; i < n; ++i) {
        const double r = nz.rinv[static_cast<std::size_t>(i)];
        double dot = 0;
        for (int j = 0; j < d; ++j) dot += raw.at(i, j) * dzh.at(i, j);
        const double r3dot = r * r * r * dot;
        for (int j = 0; j < d; ++j) dz.at(i, j) += r * dzh.at(i, j) - r3dot * raw.at(i, j);
    }
}

void check_batch(const Tensor<double>& z, const char* what) {
    PCGL_CHECK(z.ndim() == 2, what << ": want [N,D] embeddings, got "
                                   << substrate::shape_str(z.shape));
    PCGL_CHECK(z.dim(0) >= 1, what << ": empty batch");
}

Tensor<double> pairwise_sq(const Tensor<double>& a, const Tensor<double>& b) {
    const int n = a.dim(0), m = b.dim(0), d = a.dim(1);
    Tensor<double> c({n, m});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double s = 0;
            for (int k = 0; k < d; ++k) {
                const double u = a.at(i, k) - b.at(j, k);
                s += u * u;
            }
            c.at(i, j) = s;
        }
    return c;
}

struct CoreResult {
    double value = 0.0;
    Tensor<double> dC;
    int sweeps = 0;
    double marginal_err = 0.0;
};

// Entropic OT between uniform distributions over the rows/columns of C,
// log-domain Sinkhorn. The returned value is the dual objective a.f + b.g.
// The gradient is reverse-mode through the stored iterate history, so it
// agrees with finite differences of the actually computed value.
CoreResult sinkhorn_core(const Tensor<double>& C, const SinkhornConfig& cfg, bool want_grad) {
    const int n = C.dim(0), m = C.dim(1);
    const double la = -std::log(static_cast<double>(n));
    const double lb = -std::log(static_cast<double>(m));

    std::vector<double> eps_stages;
    if (cfg.eps_scaling) {
        double cmax = 0;
        for (double v : C.data) cmax = std::max(cmax, v);
        for (double e = cmax / 2.0; e > cfg.epsilon * 1.000001; e /= 2.0)
            eps_stages.push_back(e);
    }

    struct Step {
        std::vector<double> g_prev, f_new;
        double eps;
    };
    std::vector<Step> steps;
    std::vector<double> f(static_cast<std::size_t>(n), 0.0);
    std::vector<double> g(static_cast<std::size_t>(m), 0.0);
    std::vector<double> row(static_cast<std::size_t>(m)), col(static_cast<std::size_t>(n));

    auto lse = [](const std::vector<double>& x, int len) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < len; ++i) mx = std::max(mx, x[static_cast<std::size_t>(i)]);
        double s = 0;
        for (int i = 0; i < len; ++i) s += std::exp(x[static_cast<std::size_t>(i)] - mx);
        return mx + std::log(s);
    };

    auto one_sweep = [&](double e) {
        Step st;
        st.g_prev = g;
        st.eps = e;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < m; ++j)
                row[static_cast<std::size_t>(j)] = lb + (g[static_cast<std::size_t>(j)] - C.at(i, j)) / e;
            f[static_cast<std::size_t>(i)] = -e * lse(row, m);
        }
        st.f_new = f;
        for (int j = 0; j < m; ++j) {
            for (int i = 0; i < n; ++i)
                col[static_cast<std::size_t>(i)] = la + (f[static_cast<std::size_t>(i)] - C.at(i, j)) / e;
            g[static_cast<std::size_t>(j)] = -e * lse(col, n);
        }
        if (want_grad) steps.push_back(std::move(st));
    };

    auto marginal_violation = [&]() {
        // Column marginals hold exactly after the g update; check rows.
        double worst = 0;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < m; ++j)
                row[static_cast<std::size_t>(j)] =
                    lb + (f[static_cast<std::size_t>(i)] + g[static_cast<std::size_t>(j)] - C.at(i, j)) /
                             cfg.epsilon;
            worst = std::max(worst, std::abs(std::exp(lse(row, m)) - 1.0));
        }
        return worst;
    };

    CoreResult res;
    for (double e : eps_stages) {
        if (res.sweeps >= cfg.max_iters) break;
        one_sweep(e);
        ++res.sweeps;
    }
    res.marginal_err = std::numeric_limits<double>::infinity();
    while (res.sweeps < cfg.max_iters) {
        one_sweep(cfg.epsilon);
        ++res.sweeps;
        res.marginal_err = marginal_violation();
        if (res.marginal_err < cfg.marginal_tol) break;
    }
    if (!std::isfinite(res.marginal_err)) res.marginal_err = marginal_violation();

    for (int i = 0; i < n; ++i) res.value += f[static_cast<std::size_t>(i)] / n;
    for (int j = 0; j < m; ++j) res.value += g[static_cast<std::size_t>(j)] / m;

    if (!want_grad) return res;

    res.dC = Tensor<double>({n, m});
    std::vector<double> df(static_cast<std::size_t>(n), 1.0 / n);
    std::vector<double> dg(static_cast<std::size_t>(m), 1.0 / m);
    std::vector<double> dg_prev(static_cast<std::size_t>(m));
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
        const double e = it->eps;
        // g_j = -e * lse_i(la + (f_i - C_ij)/e): softmax over i per column.
        for (int j = 0; j < m; ++j) {
            const double dgj = dg[static_cast<std::size_t>(j)];
            if (dgj != 0.0) {
                for (int i = 0; i < n; ++i)
                    col[static_cast<std::size_t>(i)] =
                        la + (it->f_new[static_cast<std::size_t>(i)] - C.at(i, j)) / e;
                const double z = lse(col, n);
                for (int i = 0; i < n; ++i) {
                    const double w = std::exp(col[static_cast<std::size_t>(i)] - z);
                    df[static_cast<std::size_t>(i)] -= dgj * w;
                    res.dC.at(i, j) += dgj * w;
                }
            }
        }
        // f_i = -e * lse_j(lb + (g_prev_j - C_ij)/e): softmax over j per row.
        std::fill(dg_prev.begin(), dg_prev.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            const double dfi = df[static_cast<std::size_t>(i)];
            if (dfi != 0.0) {
                for (int j = 0; j < m; ++j)
                    row[static_cast<std::size_t>(j)] =
                        lb + (it->g_prev[static_cast<std::size_t>(j)] - C.at(i, j)) / e;
                const double z = lse(row, m);
                for (int j = 0; j < m; ++j) {
                    const double v = std::exp(row[static_cast<std::size_t>(j)] - z);
                    dg_prev[static_cast<std::size_t>(j)] -= dfi * v;
                    res.dC.at(i, j) += dfi * v;
                }
            }
        }
        dg = dg_prev;
        std::fill(df.begin(), df.end(), 0.0);
    }
    return res;
}

// Routes dC of a transport problem between normalized batches na, nb into
// gradients on the normalized embeddings. scale multiplies the contribution.
void sq_cost_backward(const Tensor<double>& na, const Tensor<double>& nb,
                      const Tensor<double>& dC, double scale, Tensor<double>& dna,
                      Tensor<double>& dnb) {
    const int n = na.dim(0), m = nb.dim(0), d = na.dim(1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            const double w = 2.0 * scale * dC.at(i, j);
            if (w == 0.0) continue;
            for (int k = 0; k < d; ++k) {
                const double u = na.at(i, k) - nb.at(j, k);
                dna.at(i, k) += w * u;
                dnb.at(j, k) -= w * u;
            }
        }
}

void validate_sinkhorn(const SinkhornConfig& cfg) {
    PCGL_CHECK(cfg.epsilon > 0, "sinkhorn: epsilon=" << cfg.epsilon << " must be > 0");
    PCGL_CHECK(cfg.max_iters >= 1, "sinkhorn: max_iters=" << cfg.max_iters);
    PCGL_CHECK(cfg.marginal_tol > 0, "sinkhorn: marginal_tol=" << cfg.marginal_tol);
}

}  // namespace

void LossConfig::validate() const {
    PCGL_CHECK(temperature > 0, "loss config: temperature=" << temperature << " must be > 0");
    PCGL_CHECK(alpha >= 0 && alpha <= 1, "loss config: alpha=" << alpha << " outside [0,1]");
    validate_sinkhorn(sinkhorn);
    PCGL_CHECK(std::isfinite(w_1d) && std::isfinite(w_2d) && std::isfinite(w_cross),
               "loss config: non-finite composition weights");
}

double ntxent(const Tensor<double>& za, const Tensor<double>& zb, double tau,
              Tensor<double>* dza, Tensor<double>* dzb) {
    check_batch(za, "ntxent");
    check_batch(zb, "ntxent");
    PCGL_CHECK(za.shape == zb.shape, "ntxent: mismatched batches "
                                         << substrate::shape_str(za.shape) << " vs "
                                         << substrate::shape_str(zb.shape));
    PCGL_CHECK(tau > 0, "ntxent: temperature " << tau);

    const int n = za.dim(0), d = za.dim(1), m = 2 * n;
    const Normalized na = normalize_rows(za);
    const Normalized nb = normalize_rows(zb);
    auto urow = [&](int i) { return i < n ? &na.z.at(i, 0) : &nb.z.at(i - n, 0); };

    Tensor<double> S({m, m});
    for (int i = 0; i < m; ++i) {
        const double* ui = urow(i);
        for (int k = 0; k < m; ++k) {
            const double* uk = urow(k);
            double s = 0;
            for (int j = 0; j < d; ++j) s += ui[j] * uk[j];
            S.at(i, k) = s / tau;
        }
    }

    const bool want = dza != nullptr || dzb != nullptr;
    Tensor<double> dS;
    if (want) dS = Tensor<double>({m, m});

    double loss = 0;
    for (int i = 0; i < m; ++i) {
        const int p = (i + n) % m;
        double mx = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < m; ++k)
            if (k != i) mx = std::max(mx, S.at(i, k));
        double denom = 0;
        for (int k = 0; k < m; ++k)
            if (k != i) denom += std::exp(S.at(i, k) - mx);
        loss += -S.at(i, p) + mx + std::log(denom);
        if (want) {
            for (int k = 0; k < m; ++k)
                if (k != i) dS.at(i, k) += std::exp(S.at(i, k) - mx) / denom / m;
            dS.at(i, p) -= 1.0 / m;
        }
    }
    loss /= m;

    if (want) {
        Tensor<double> du({m, d});
        for (int i = 0; i < m; ++i)
            for (int k = 0; k < m; ++k) {
                const double w = (dS.at(i, k) + dS.at(k, i)) / tau;
                if (w == 0.0) continue;
                const double* uk = urow(k);
                for (int j = 0; j < d; ++j) du.at(i, j) += w * uk[j];
            }
        Tensor<double> dua({n, d}), dub({n, d});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) {
                dua.at(i, j) = du.at(i, j);
                dub.at(i, j) = du.at(i + n, j);
            }
        if (dza) {
            *dza = Tensor<double>(za.shape);
            normalize_backward(za, na, dua, *dza);
        }
        if (dzb) {
            *dzb = Tensor<double>(zb.shape);
            normalize_backward(zb, nb, dub, *dzb);
        }
    }
    return loss;
}

double sinkhorn_w2(const Tensor<double>& za, const Tensor<double>& zb,
                   const SinkhornConfig& cfg, Tensor<double>* dza, Tensor<double>* dzb,
                   SinkhornInfo* info) {
    check_batch(za, "sinkhorn");
    check_batch(zb, "sinkhorn");
    PCGL_CHECK(za.dim(1) == zb.dim(1), "sinkhorn: dimension mismatch " << za.dim(1) << " vs "
                                                                      << zb.dim(1));
    validate_sinkhorn(cfg);

    const bool want = dza != nullptr || dzb != nullptr;
    const Normalized na = normalize_rows(za);
    const Normalized nb = normalize_rows(zb);

    CoreResult ab = sinkhorn_core(pairwise_sq(na.z, nb.z), cfg, want);
    double value = ab.value;
    SinkhornInfo stats{ab.sweeps, ab.marginal_err};

    Tensor<double> dna, dnb;
    if (want) {
        dna = Tensor<double>(za.shape);
        dnb = Tensor<double>(zb.shape);
        sq_cost_backward(na.z, nb.z, ab.dC, 1.0, dna, dnb);
    }

    if (cfg.debiased) {
        CoreResult aa = sinkhorn_core(pairwise_sq(na.z, na.z), cfg, want);
        CoreResult bb = sinkhorn_core(pairwise_sq(nb.z, nb.z), cfg, want);
        value -= 0.5 * aa.value + 0.5 * bb.value;
        stats.sweeps = std::max({stats.sweeps, aa.sweeps, bb.sweeps});
        stats.marginal_err = std::max({stats.marginal_err, aa.marginal_err, bb.marginal_err});
        if (want) {
            sq_cost_backward(na.z, na.z, aa.dC, -0.5, dna, dna);
            sq_cost_backward(nb.z, nb.z, bb.dC, -0.5, dnb, dnb);
        }
    }

    if (dza) {
        *dza = Tensor<double>(za.shape);
        normalize_backward(za, na, dna, *dza);
    }
    if (dzb) {
        *dzb = Tensor<double>(zb.shape);
        normalize_backward(zb, nb, dnb, *dzb);
    }
    if (info) *info = stats;
    return value;
}

HybridTerm hybrid(const Tensor<double>& za, const Tensor<double>& zb, const LossConfig& cfg,
                  Tensor<double>* dza, Tensor<double>* dzb) {
    cfg.validate();
    check_batch(za, "hybrid");
    check_batch(zb, "hybrid");
    PCGL_CHECK(za.shape == zb.shape, "hybrid: mismatched batches");

    const bool want = dza != nullptr || dzb != nullptr;
    HybridTerm out;
    Tensor<double> na, nb, wa, wb;

    // Boundary weights skip the unused term entirely so ablation configs do
    // not pay for (or depend on) the disabled objective.
    if (cfg.alpha < 1.0)
        out.ntxent = ntxent(za, zb, cfg.temperature, want ? &na : nullptr, want ? &nb : nullptr);
    if (cfg.alpha > 0.0)
        out.wasserstein =
            sinkhorn_w2(za, zb, cfg.sinkhorn, want ? &wa : nullptr, want ? &wb : nullptr);
    out.total = cfg.alpha * out.wasserstein + (1.0 - cfg.alpha) * out.ntxent;

    if (dza) {
        *dza = Tensor<double>(za.shape);
        if (cfg.alpha < 1.0) substrate::axpy(1.0 - cfg.alpha, na, *dza);
        if (cfg.alpha > 0.0) substrate::axpy(cfg.alpha, wa, *dza);
    }
    if (dzb) {
        *dzb = Tensor<double>(zb.shape);
        if (cfg.alpha < 1.0) substrate::axpy(1.0 - cfg.alpha, nb, *dzb);
        if (cfg.alpha > 0.0) substrate::axpy(cfg.alpha, wb, *dzb);
    }
    return out;
}

LossBreakdown pretrain_objective(const Tensor<double>& z1a, const Tensor<double>& z1b,
                                 const Tensor<double>& z2a, const Tensor<double>& z2b,
                                 const LossConfig& cfg, Tensor<double>* dz1a,
                                 Tensor<double>* dz1b, Tensor<double>* dz2a,
                                 Tensor<double>* dz2b) {
    cfg.validate();
    check_batch(z1a, "pretrain objective");
    PCGL_CHECK(z1b.shape == z1a.shape && z2a.shape == z1a.shape && z2b.shape == z1a.shape,
               "pretrain objective: all four batches must be row-aligned, got "
                   << substrate::shape_str(z1a.shape) << " / " << substrate::shape_str(z1b.shape)
                   << " / " << substrate::shape_str(z2a.shape) << " / "
                   << substrate::shape_str(z2b.shape));

    const bool want = dz1a || dz1b || dz2a || dz2b;
    auto zero_like = [&](Tensor<double>* p) {
        if (p) *p = Tensor<double>(z1a.shape);
    };
    zero_like(dz1a);
    zero_like(dz1b);
    zero_like(dz2a);
    zero_like(dz2b);

    LossBreakdown out;
    auto add_term = [&](const Tensor<double>& a, const Tensor<double>& b, double weight,
                        Tensor<double>* da, Tensor<double>* db) {
        HybridTerm t;
        if (weight != 0.0) {
            Tensor<double> ga, gb;
            t = hybrid(a, b, cfg, want ? &ga : nullptr, want ? &gb : nullptr);
            if (da) substrate::axpy(weight, ga, *da);
            if (db) substrate::axpy(weight, gb, *db);
            out.total += weight * t.total;
            out.ntxent += weight * t.ntxent;
            out.wasserstein += weight * t.wasserstein;
        }
        return t;
    };

    out.term_1d = add_term(z1a, z1b, cfg.w_1d, dz1a, dz1b).total;
    out.term_2d = add_term(z2a, z2b, cfg.w_2d, dz2a, dz2b).total;
    const double tc1 = add_term(z1a, z2a, 0.5 * cfg.w_cross, dz1a, dz2a).total;
    const double tc2 = add_term(z1b, z2b, 0.5 * cfg.w_cross, dz1b, dz2b).total;
    out.term_cross = 0.5 * (tc1 + tc2);
    return out;
}

}  // namespace pcgl::objectives
