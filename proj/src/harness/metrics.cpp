#include "pcgl/harness/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "pcgl/common.h"

namespace pcgl::harness {

namespace {

void check_paired(const std::vector<double>& scores, const std::vector<int>& labels) {
    PCGL_CHECK(scores.size() == labels.size(), "metrics: " << scores.size() << " scores vs "
                                                           << labels.size() << " labels");
    PCGL_CHECK(!scores.empty(), "metrics: empty input");
    for (int y : labels) PCGL_CHECK(y == 0 || y == 1, "metrics: label " << y << " not in {0,1}");
    for (double s : scores) PCGL_CHECK(std::isfinite(s), "metrics: non-finite score");
}

int count_pos(const std::vector<int>& labels) {
    return static_cast<int>(std::count(labels.begin(), labels.end(), 1));
}

// Indices sorted by descending score, tie groups as [begin, end) runs.
std::vector<std::size_t> order_desc(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

}  // namespace

double Confusion::accuracy() const {
    const int n = tp + fp + tn + fn;
    return n == 0 ? 0.0 : static_cast<double>(tp + tn) / n;
}
double Confusion::precision() const {
    return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
}
double Confusion::recall() const {
    return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
}
double Confusion::f1() const {
    const double p = precision(), r = recall();
    return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

std::vector<double> midranks(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && x[idx[j]] == x[idx[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
        for (std::size_t k = i; k < j; ++k) r[idx[k]] = mid;
        i = j;
    }
    return r;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_paired(scores, labels);
    const int m = count_pos(labels);
    const int n = static_cast<int>(labels.size()) - m;
    PCGL_CHECK(m > 0 && n > 0, "auroc: needs both classes, got " << m << " positives of "
                                                                 << labels.size());
    const std::vector<double> r = midranks(scores);
    double rank_sum = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == 1) rank_sum += r[i];
    return (rank_sum - 0.5 * m * (m + 1.0)) / (static_cast<double>(m) * n);
}

double auprc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_paired(scores, labels);
    const int m = count_pos(labels);
    PCGL_CHECK(m > 0, "auprc: no positive samples");
    const auto idx = order_desc(scores);
    double ap = 0;
    double prev_recall = 0;
    int tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) (labels[idx[k]] == 1 ? tp : fp)++;
        const double recall = static_cast<double>(tp) / m;
        const double precision = static_cast<double>(tp) / (tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
    check_paired(scores, labels);
    const int m = count_pos(labels);
    const int n = static_cast<int>(labels.size()) - m;
    PCGL_CHECK(m > 0 && n > 0, "roc: needs both classes");
    const auto idx = order_desc(scores);
    std::vector<RocPoint> out;
    int tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) (labels[idx[k]] == 1 ? tp : fp)++;
        out.push_back({scores[idx[i]], static_cast<double>(fp) / n,
                       static_cast<double>(tp) / m});
        i = j;
    }
    return out;
}

std::vector<PrPoint> pr_points(const std::vector<double>& scores,
                               const std::vector<int>& labels) {
    check_paired(scores, labels);
    const int m = count_pos(labels);
    PCGL_CHECK(m > 0, "pr: no positive samples");
    const auto idx = order_desc(scores);
    std::vector<PrPoint> out;
    int tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        for (std::size_t k = i; k < j; ++k) (labels[idx[k]] == 1 ? tp : fp)++;
        out.push_back({scores[idx[i]], static_cast<double>(tp) / m,
                       static_cast<double>(tp) / (tp + fp)});
        i = j;
    }
    return out;
}

double brier(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_paired(scores, labels);
    double s = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double d = scores[i] - labels[i];
        s += d * d;
    }
    return s / static_cast<double>(scores.size());
}

double ece(const std::vector<double>& scores, const std::vector<int>& labels, int n_bins,
           std::vector<ReliabilityBin>* bins) {
    check_paired(scores, labels);
    PCGL_CHECK(n_bins >= 1, "ece: n_bins " << n_bins);
    for (double s : scores)
        PCGL_CHECK(s >= 0.0 && s <= 1.0, "ece: score " << s << " outside [0,1]");
    std::vector<ReliabilityBin> b(static_cast<std::size_t>(n_bins));
    for (int k = 0; k < n_bins; ++k) {
        b[static_cast<std::size_t>(k)].lo = static_cast<double>(k) / n_bins;
        b[static_cast<std::size_t>(k)].hi = static_cast<double>(k + 1) / n_bins;
    }
    std::vector<double> score_sum(static_cast<std::size_t>(n_bins), 0.0);
    std::vector<int> pos(static_cast<std::size_t>(n_bins), 0);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const int k = std::min(n_bins - 1, static_cast<int>(scores[i] * n_bins));
        auto kz = static_cast<std::size_t>(k);
        ++b[kz].count;
        score_sum[kz] += scores[i];
        pos[kz] += labels[i];
    }
    double e = 0;
    const auto n = static_cast<double>(scores.size());
    for (std::size_t k = 0; k < b.size(); ++k) {
        if (b[k].count == 0) continue;
        b[k].mean_score = score_sum[k] / b[k].count;
        b[k].pos_frac = static_cast<double>(pos[k]) / b[k].count;
        e += (b[k].count / n) * std::abs(b[k].mean_score - b[k].pos_frac);
    }
    if (bins) *bins = std::move(b);
    return e;
}

Confusion confusion_at(const std::vector<double>& scores, const std::vector<int>& labels,
                       double threshold) {
    check_paired(scores, labels);
    Confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] > threshold;
        if (pred && labels[i] == 1) ++c.tp;
        else if (pred) ++c.fp;
        else if (labels[i] == 1) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double threshold_max_f1(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_paired(scores, labels);
    std::vector<double> cand = scores;
    cand.push_back(0.0);
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    double best_t = cand.front(), best_f1 = -1;
    for (double t : cand) {
        const double f1 = confusion_at(scores, labels, t).f1();
        if (f1 > best_f1) {
            best_f1 = f1;
            best_t = t;
        }
    }
    return best_t;
}

EvalReport evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                           double threshold, int n_patients) {
    check_paired(scores, labels);
    const int m = count_pos(labels);
    PCGL_CHECK(m > 0 && m < static_cast<int>(labels.size()),
               "evaluate: split has a single class, AUROC undefined");
    EvalReport r;
    r.n_windows = static_cast<int>(scores.size());
    r.n_patients = n_patients;
    r.threshold = threshold;
    const Confusion c = confusion_at(scores, labels, threshold);
    r.accuracy = c.accuracy();
    r.precision = c.precision();
    r.recall = c.recall();
    r.f1 = c.f1();
    r.auroc = auroc(scores, labels);
    r.auprc = auprc(scores, labels);
    r.brier = brier(scores, labels);
    r.ece = ece(scores, labels, 15, &r.reliability);
    r.roc = roc_points(scores, labels);
    r.pr = pr_points(scores, labels);
    return r;
}

nlohmann::json report_json(const EvalReport& r) {
    nlohmann::json roc = nlohmann::json::array();
    for (const auto& p : r.roc)
        roc.push_back({{"threshold", p.threshold}, {"fpr", p.fpr}, {"tpr", p.tpr}});
    nlohmann::json pr = nlohmann::json::array();
    for (const auto& p : r.pr)
        pr.push_back({{"threshold", p.threshold}, {"recall", p.recall},
                      {"precision", p.precision}});
    nlohmann::json rel = nlohmann::json::array();
    for (const auto& b : r.reliability)
        rel.push_back({{"lo", b.lo},
                       {"hi", b.hi},
                       {"count", b.count},
                       {"mean_score", b.mean_score},
                       {"pos_frac", b.pos_frac}});
    return nlohmann::json{{"n_windows", r.n_windows},
                          {"n_patients", r.n_patients},
                          {"threshold", r.threshold},
                          {"accuracy", r.accuracy},
                          {"precision", r.precision},
                          {"recall", r.recall},
                          {"f1", r.f1},
                          {"auroc", r.auroc},
                          {"auprc", r.auprc},
                          {"ece", r.ece},
                          {"brier", r.brier},
                          {"roc", roc},
                          {"pr", pr},
                          {"reliability", rel}};
}

void save_predictions(const std::string& path, const Predictions& p) {
    PCGL_CHECK(p.patient_ids.size() == p.labels.size() &&
                   p.labels.size() == p.scores.size(),
               "predictions: ragged columns");
    std::ofstream out(path);
    PCGL_CHECK(out, "cannot write predictions to " << path);
    char buf[64];
    for (std::size_t i = 0; i < p.scores.size(); ++i) {
        PCGL_CHECK(p.patient_ids[i].find(',') == std::string::npos,
                   "predictions: patient id '" << p.patient_ids[i] << "' contains a comma");
        std::snprintf(buf, sizeof buf, "%.17g", p.scores[i]);
        out << p.patient_ids[i] << ',' << p.labels[i] << ',' << buf << '\n';
    }
    PCGL_CHECK(out.good(), "write failed for " << path);
}

Predictions load_predictions(const std::string& path) {
    std::ifstream in(path);
    PCGL_CHECK(in, "cannot open predictions file " << path);
    Predictions p;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::size_t c1 = line.find(',');
        const std::size_t c2 = c1 == std::string::npos ? std::string::npos
                                                       : line.find(',', c1 + 1);
        PCGL_CHECK(c2 != std::string::npos,
                   path << ":" << lineno << ": expected patient_id,true_label,score");
        p.patient_ids.push_back(line.substr(0, c1));
        const std::string lab = line.substr(c1 + 1, c2 - c1 - 1);
        PCGL_CHECK(lab == "0" || lab == "1",
                   path << ":" << lineno << ": label '" << lab << "' not 0 or 1");
        p.labels.push_back(lab == "1" ? 1 : 0);
        std::size_t pos = 0;
        double s = 0;
        const std::string sv = line.substr(c2 + 1);
        try {
            s = std::stod(sv, &pos);
        } catch (const std::exception&) {
            pos = std::string::npos;
        }
        PCGL_CHECK(pos == sv.size(), path << ":" << lineno << ": bad score '" << sv << "'");
        p.scores.push_back(s);
    }
    PCGL_CHECK(!p.scores.empty(), path << ": no predictions");
    return p;
}

}  // namespace pcgl::harness
