// metrics.h
// Threshold metrics, rank statistics and calibration for binary murmur
// scores. Scores are positive-class probabilities; a sample is predicted
// positive iff score > threshold (strictly), matching the prototype tie rule.
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace pcgl::harness {

struct RocPoint {
    double threshold = 0.0;  // samples with score >= threshold count as positive
    double fpr = 0.0;
    double tpr = 0.0;
};

struct PrPoint {
    double threshold = 0.0;
    double recall = 0.0;
    double precision = 0.0;
};

struct ReliabilityBin {
    double lo = 0.0, hi = 0.0;  // bin interval; bins partition [0,1] exactly
    int count = 0;
    double mean_score = 0.0;
    double pos_frac = 0.0;
};

struct Confusion {
    int tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy() const;
    double precision() const;  // 0 when nothing is predicted positive
    double recall() const;
    double f1() const;
};

struct EvalReport {
    int n_windows = 0;
    int n_patients = 0;
    double threshold = 0.5;
    double accuracy = 0, precision = 0, recall = 0, f1 = 0;
    double auroc = 0, auprc = 0;
    double ece = 0, brier = 0;
    std::vector<RocPoint> roc;
    std::vector<PrPoint> pr;
    std::vector<ReliabilityBin> reliability;
};

// Midranks (1-based, ties averaged) in input order.
std::vector<double> midranks(const std::vector<double>& x);

// Mann-Whitney AUROC via midranks. Throws when either class is missing.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Average precision: step integration of the tie-grouped PR curve.
double auprc(const std::vector<double>& scores, const std::vector<int>& labels);

// One point per distinct score, descending.
std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<int>& labels);
std::vector<PrPoint> pr_points(const std::vector<double>& scores,
                               const std::vector<int>& labels);

double brier(const std::vector<double>& scores, const std::vector<int>& labels);

// Equal-width binning of the positive-class score; per-bin
// |mean score - positive fraction| weighted by occupancy.
double ece(const std::vector<double>& scores, const std::vector<int>& labels, int n_bins = 15,
           std::vector<ReliabilityBin>* bins = nullptr);

Confusion confusion_at(const std::vector<double>& scores, const std::vector<int>& labels,
                       double threshold);

// Max-F1 threshold over candidates {0} plus every distinct score; ties pick
// the smallest candidate.
double threshold_max_f1(const std::vector<double>& scores, const std::vector<int>& labels);

EvalReport evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                           double threshold, int n_patients);

nlohmann::json report_json(const EvalReport& r);

// One scored sample per line: patient_id,true_label,score.
struct Predictions {
    std::vector<std::string> patient_ids;
    std::vector<int> labels;
    std::vector<double> scores;
};

void save_predictions(const std::string& path, const Predictions& p);
Predictions load_predictions(const std::string& path);

}  // namespace pcgl::harness
