#include "pcgl/harness/stats.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "pcgl/common.h"
#include "pcgl/harness/metrics.h"
#include "pcgl/substrate/rng.h"

namespace pcgl::harness {

namespace {

// DeLong structural components for one score vector: AUC plus the V01 / V10
// placement values (Sun & Xu midrank formulation).
struct Placements {
    double auc = 0;
    std::vector<double> v01;  // per positive
    std::vector<double> v10;  // per negative
};

Placements placements(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] == 1 ? pos : neg).push_back(scores[i]);
    const auto m = pos.size();
    const auto n = neg.size();
    std::vector<double> all = pos;
    all.insert(all.end(), neg.begin(), neg.end());
    const std::vector<double> tz = midranks(all);
    const std::vector<double> tx = midranks(pos);
    const std::vector<double> ty = midranks(neg);
    Placements out;
    out.v01.resize(m);
    out.v10.resize(n);
    double sum = 0;
    for (std::size_t i = 0; i < m; ++i) {
        out.v01[i] = (tz[i] - tx[i]) / static_cast<double>(n);
        sum += tz[i];
    }
    for (std::size_t j = 0; j < n; ++j)
        out.v10[j] = 1.0 - (tz[m + j] - ty[j]) / static_cast<double>(m);
    out.auc = (sum - 0.5 * static_cast<double>(m) * (static_cast<double>(m) + 1)) /
              (static_cast<double>(m) * static_cast<double>(n));
    return out;
}

double covariance(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = x.size();
    if (n < 2) return 0;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += (x[i] - mx) * (y[i] - my);
    return s / static_cast<double>(n - 1);
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

// log P(X = k) for X ~ Binomial(n, 1/2)
double log_binom_half(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
           n * std::log(2.0);
}

// Linear-interpolation quantile of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q) {
    PCGL_CHECK(!sorted.empty(), "quantile of empty sample");
    if (sorted.size() == 1) return sorted[0];
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1 - frac) + sorted[lo + 1] * frac;
}

struct PatientGroups {
    std::vector<std::string> ids;  // distinct, sorted
    std::vector<std::vector<std::size_t>> rows;
};

}  // namespace

DeLongResult delong_test(const std::vector<double>& scores_a,
                         const std::vector<double>& scores_b,
                         const std::vector<int>& labels) {
    PCGL_CHECK(scores_a.size() == labels.size() && scores_b.size() == labels.size(),
               "delong: unpaired inputs");
    const auto n_pos = std::count(labels.begin(), labels.end(), 1);
    PCGL_CHECK(n_pos > 0 && n_pos < static_cast<long>(labels.size()),
               "delong: needs both classes");
    const Placements a = placements(scores_a, labels);
    const Placements b = placements(scores_b, labels);
    DeLongResult r;
    r.auc_a = a.auc;
    r.auc_b = b.auc;
    r.delta = a.auc - b.auc;
    const double s01 = covariance(a.v01, a.v01) + covariance(b.v01, b.v01) -
                       2 * covariance(a.v01, b.v01);
    const double s10 = covariance(a.v10, a.v10) + covariance(b.v10, b.v10) -
                       2 * covariance(a.v10, b.v10);
    const double var = s01 / static_cast<double>(a.v01.size()) +
                       s10 / static_cast<double>(a.v10.size());
    if (!(var > 1e-24) || !std::isfinite(var)) {
        if (std::abs(r.delta) <= 1e-12) {
            r.z = 0;
            r.p = 1;
        } else {
            r.z = r.delta > 0 ? std::numeric_limits<double>::infinity()
                              : -std::numeric_limits<double>::infinity();
            r.p = 0;
        }
        return r;
    }
    r.z = r.delta / std::sqrt(var);
    r.p = normal_two_sided_p(r.z);
    return r;
}

McNemarResult mcnemar_test(const std::vector<bool>& correct_a,
                           const std::vector<bool>& correct_b) {
    PCGL_CHECK(correct_a.size() == correct_b.size(), "mcnemar: unpaired inputs");
    McNemarResult r;
    for (std::size_t i = 0; i < correct_a.size(); ++i) {
        if (correct_a[i] && !correct_b[i]) ++r.b;
        if (!correct_a[i] && correct_b[i]) ++r.c;
    }
    const int n = r.b + r.c;
    if (n == 0) {
        r.p = 1;
        return r;
    }
    const int k = std::min(r.b, r.c);
    double tail = 0;
    for (int i = 0; i <= k; ++i) tail += std::exp(log_binom_half(n, i));
    r.p = std::min(1.0, 2.0 * tail);
    return r;
}

namespace {

PatientGroups group_by_patient(const std::vector<std::string>& patient_ids) {
    std::map<std::string, std::vector<std::size_t>> by_id;
    for (std::size_t i = 0; i < patient_ids.size(); ++i) by_id[patient_ids[i]].push_back(i);
    PatientGroups g;
    for (auto& [id, rows] : by_id) {
        g.ids.push_back(id);
        g.rows.push_back(std::move(rows));
    }
    return g;
}

// Draws patient resample index lists until both classes appear; counts the
// discarded draws.
std::vector<std::size_t> resample_rows(const PatientGroups& g, const std::vector<int>& labels,
                                       std::mt19937_64& rng, int* redraws) {
    std::uniform_int_distribution<std::size_t> pick(0, g.ids.size() - 1);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<std::size_t> rows;
        for (std::size_t d = 0; d < g.ids.size(); ++d) {
            const auto& pr = g.rows[pick(rng)];
            rows.insert(rows.end(), pr.begin(), pr.end());
        }
        bool has0 = false, has1 = false;
        for (std::size_t r : rows) (labels[r] == 1 ? has1 : has0) = true;
        if (has0 && has1) return rows;
        ++*redraws;
    }
    throw std::runtime_error("bootstrap: 1000 consecutive single-class resamples");
}

template <typename F>
std::vector<double> gather(const std::vector<std::size_t>& rows, const F& src) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(src[r]);
    return out;
}

std::vector<int> gather_int(const std::vector<std::size_t>& rows, const std::vector<int>& src) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(src[r]);
    return out;
}

}  // namespace

BootstrapResult bootstrap_auprc(const std::vector<double>& scores_a,
                                const std::vector<double>& scores_b,
                                const std::vector<int>& labels,
                                const std::vector<std::string>& patient_ids,
                                int n_resamples, std::uint64_t seed) {
    PCGL_CHECK(scores_a.size() == labels.size() && scores_b.size() == labels.size() &&
                   patient_ids.size() == labels.size(),
               "bootstrap: unpaired inputs");
    PCGL_CHECK(n_resamples >= 1, "bootstrap: n_resamples " << n_resamples);
    BootstrapResult r;
    r.n_resamples = n_resamples;
    r.delta = auprc(scores_a, labels) - auprc(scores_b, labels);
    const PatientGroups g = group_by_patient(patient_ids);
    auto rng = substrate::make_rng(seed, "bootstrap-auprc");
    std::vector<double> deltas;
    deltas.reserve(static_cast<std::size_t>(n_resamples));
    for (int t = 0; t < n_resamples; ++t) {
        const auto rows = resample_rows(g, labels, rng, &r.redraws);
        const auto la = gather_int(rows, labels);
        deltas.push_back(auprc(gather(rows, scores_a), la) -
                         auprc(gather(rows, scores_b), la));
    }
    std::vector<double> sorted = deltas;
    std::sort(sorted.begin(), sorted.end());
    r.ci_low = quantile_sorted(sorted, 0.025);
    r.ci_high = quantile_sorted(sorted, 0.975);
    int extreme = 0;
    for (double d : deltas)
        if (std::abs(d - r.delta) >= std::abs(r.delta)) ++extreme;
    r.p = (1.0 + extreme) / (1.0 + n_resamples);
    return r;
}

PairedF1 bootstrap_f1_pair(const std::vector<double>& scores_a, double threshold_a,
                           const std::vector<double>& scores_b, double threshold_b,
                           const std::vector<int>& labels,
                           const std::vector<std::string>& patient_ids,
                           int n_resamples, std::uint64_t seed) {
    PCGL_CHECK(scores_a.size() == labels.size() && scores_b.size() == labels.size() &&
                   patient_ids.size() == labels.size(),
               "bootstrap: unpaired inputs");
    PairedF1 r;
    r.f1_a = confusion_at(scores_a, labels, threshold_a).f1();
    r.f1_b = confusion_at(scores_b, labels, threshold_b).f1();
    r.delta = r.f1_a - r.f1_b;
    const PatientGroups g = group_by_patient(patient_ids);
    auto rng = substrate::make_rng(seed, "bootstrap-f1");
    std::vector<double> fa, fb, fd;
    int redraws = 0;
    for (int t = 0; t < n_resamples; ++t) {
        const auto rows = resample_rows(g, labels, rng, &redraws);
        const auto la = gather_int(rows, labels);
        const double va = confusion_at(gather(rows, scores_a), la, threshold_a).f1();
        const double vb = confusion_at(gather(rows, scores_b), la, threshold_b).f1();
        fa.push_back(va);
        fb.push_back(vb);
        fd.push_back(va - vb);
    }
    auto ci = [](std::vector<double>& v, double* lo, double* hi) {
        std::sort(v.begin(), v.end());
        *lo = quantile_sorted(v, 0.025);
        *hi = quantile_sorted(v, 0.975);
    };
    ci(fa, &r.a_low, &r.a_high);
    ci(fb, &r.b_low, &r.b_high);
    ci(fd, &r.d_low, &r.d_high);
    return r;
}

nlohmann::json comparison_json(const ComparisonReport& r) {
    return nlohmann::json{
        {"delong",
         {{"auc_a", r.delong.auc_a},
          {"auc_b", r.delong.auc_b},
          {"delta_auc", r.delong.delta},
          {"z", r.delong.z},
          {"p", r.delong.p}}},
        {"mcnemar", {{"b", r.mcnemar.b}, {"c", r.mcnemar.c}, {"p_exact", r.mcnemar.p}}},
        {"bootstrap_auprc",
         {{"delta", r.bootstrap_auprc.delta},
          {"ci_low", r.bootstrap_auprc.ci_low},
          {"ci_high", r.bootstrap_auprc.ci_high},
          {"p", r.bootstrap_auprc.p},
          {"n_resamples", r.bootstrap_auprc.n_resamples},
          {"redraws", r.bootstrap_auprc.redraws}}},
    };
}

}  // namespace pcgl::harness
