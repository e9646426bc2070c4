// stats.h
// Paired significance tests on classifier scores: DeLong AUROC comparison,
// exact McNemar, and patient-level bootstrap of AUPRC and F1 differences.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace pcgl::harness {

struct DeLongResult {
    double auc_a = 0, auc_b = 0;
    double delta = 0;  // auc_a - auc_b
    double z = 0;
    double p = 1;
};

struct McNemarResult {
    int b = 0;  // a correct, b wrong
    int c = 0;  // a wrong, b correct
    double p = 1;
};

struct BootstrapResult {
    double delta = 0;  // auprc_a - auprc_b on the full sample
    double ci_low = 0, ci_high = 0;
    double p = 1;
    int n_resamples = 0;
    int redraws = 0;  // single-class resamples that were thrown away
};

struct ComparisonReport {
    DeLongResult delong;
    McNemarResult mcnemar;
    BootstrapResult bootstrap_auprc;
};

// Paired AUROC difference with the midrank covariance estimate; two-sided
// normal p. Degenerate variance with zero delta reports p = 1.
DeLongResult delong_test(const std::vector<double>& scores_a,
                         const std::vector<double>& scores_b,
                         const std::vector<int>& labels);

// Exact two-sided binomial test over discordant pairs, capped at 1.
McNemarResult mcnemar_test(const std::vector<bool>& correct_a,
                           const std::vector<bool>& correct_b);

// Patients resampled with replacement; two-sided p from the delta
// distribution recentered at zero, 95% percentile CI. Resamples that lose a
// class are redrawn and counted.
BootstrapResult bootstrap_auprc(const std::vector<double>& scores_a,
                                const std::vector<double>& scores_b,
                                const std::vector<int>& labels,
                                const std::vector<std::string>& patient_ids,
                                int n_resamples = 2000, std::uint64_t seed = 42);

// Paired patient bootstrap of F1 at per-model frozen thresholds.
struct PairedF1 {
    double f1_a = 0, a_low = 0, a_high = 0;
    double f1_b = 0, b_low = 0, b_high = 0;
    double delta = 0, d_low = 0, d_high = 0;
};
PairedF1 bootstrap_f1_pair(const std::vector<double>& scores_a, double threshold_a,
                           const std::vector<double>& scores_b, double threshold_b,
                           const std::vector<int>& labels,
                           const std::vector<std::string>& patient_ids,
                           int n_resamples = 2000, std::uint64_t seed = 42);

nlohmann::json comparison_json(const ComparisonReport& r);

}  // namespace pcgl::harness
