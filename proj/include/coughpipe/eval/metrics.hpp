#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace coughpipe::eval {

/// Per-event score: frames x classes probabilities plus their per-class
/// mean (the event-level score of Eq. 1 when class 1 is COVID-19).
struct EventScore {
    std::string event_id;
    std::string patient_id;
    int true_label = 0;
    std::vector<std::vector<double>> per_frame_probs;
    std::vector<double> aggregated;
};

/// Per-class mean over frame probabilities. Uses a shifted sum so a
/// constant column aggregates to exactly that constant.
inline std::vector<double> aggregate(const std::vector<std::vector<double>>& per_frame_probs) {
    if (per_frame_probs.empty()) throw std::invalid_argument("aggregate: no frame rows");
    const std::size_t classes = per_frame_probs.front().size();
    std::vector<double> mean(classes, 0.0);
    for (std::size_t c = 0; c < classes; ++c) {
        const double first = per_frame_probs.front()[c];
        double acc = 0.0;
        for (const auto& row : per_frame_probs) {
            if (row.size() != classes) throw std::invalid_argument("aggregate: ragged rows");
            acc += row[c] - first;
        }
        mean[c] = first + acc / static_cast<double>(per_frame_probs.size());
    }
    return mean;
}

/// Two-class: positive iff the positive-class probability reaches the
/// threshold. Multi-class: argmax with lowest-index tie-break.
inline int classify_event(const std::vector<double>& aggregated, double threshold = 0.5, int positive_class = 1) {
    if (aggregated.empty()) throw std::invalid_argument("classify_event: empty probability vector");
    if (aggregated.size() == 2) {
        return aggregated[static_cast<std::size_t>(positive_class)] >= threshold ? positive_class
                                                                                 : 1 - positive_class;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < aggregated.size(); ++i) {
        if (aggregated[i] > aggregated[best]) best = i;
    }
    return static_cast<int>(best);
}

enum class F1Mode { PositiveClass, Macro };

/// F1 score. Positive-class mode: 2TP/(2TP+FP+FN) for `positive_class`.
/// Macro mode: unweighted mean of per-class F1 over `n_classes` classes
/// (derived from the data when 0); a class with no true or predicted
/// instances contributes 0.
inline double f1_score(const std::vector<int>& predictions, const std::vector<int>& truths, F1Mode mode,
                       int n_classes = 0, int positive_class = 1) {
    if (predictions.empty() || predictions.size() != truths.size()) {
        throw std::invalid_argument("f1_score: need equal nonempty prediction/truth lists");
    }
    if (n_classes == 0) {
        for (std::size_t i = 0; i < truths.size(); ++i) {
            n_classes = std::max({n_classes, truths[i] + 1, predictions[i] + 1});
        }
    }
    auto f1_for = [&](int cls) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < truths.size(); ++i) {
            const bool pred_pos = predictions[i] == cls;
            const bool true_pos = truths[i] == cls;
            if (pred_pos && true_pos) ++tp;
            if (pred_pos && !true_pos) ++fp;
            if (!pred_pos && true_pos) ++fn;
        }
        const double denom = static_cast<double>(2 * tp + fp + fn);
        return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
    };
    if (mode == F1Mode::PositiveClass) return f1_for(positive_class);
    double acc = 0.0;
    for (int c = 0; c < n_classes; ++c) acc += f1_for(c);
    return acc / static_cast<double>(n_classes);
}

inline double accuracy(const std::vector<int>& predictions, const std::vector<int>& truths) {
    if (predictions.empty() || predictions.size() != truths.size()) {
        throw std::invalid_argument("accuracy: need equal nonempty prediction/truth lists");
    }
    std::size_t hit = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (predictions[i] == truths[i]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(truths.size());
}

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;  // +inf on the (0,0) anchor
};

/// Threshold sweep over the unique scores, descending; a point's counts
/// include every score >= its threshold. Anchored at (0,0) and (1,1).
inline std::vector<RocPoint> roc_curve(const std::vector<double>& scores, const std::vector<int>& truths) {
    if (scores.empty() || scores.size() != truths.size()) {
        throw std::invalid_argument("roc_curve: need equal nonempty score/truth lists");
    }
    std::size_t pos = 0, neg = 0;
    for (int t : truths) (t ? pos : neg)++;
    if (pos == 0 || neg == 0) throw std::invalid_argument("roc_curve: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<RocPoint> points;
    points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        while (i < order.size() && scores[order[i]] == threshold) {
            (truths[order[i]] ? tp : fp)++;
            ++i;
        }
        points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos), threshold});
    }
    return points;  // last point is (1,1) at the minimum score
}

/// Trapezoidal area under the curve; equals the tie-adjusted probability
/// that a positive outranks a negative.
inline double auc(const std::vector<RocPoint>& roc) {
    if (roc.size() < 2) throw std::invalid_argument("auc: need at least two ROC points");
    double area = 0.0;
    for (std::size_t i = 1; i < roc.size(); ++i) {
        area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2.0;
    }
    return area;
}

/// Highest attainable sensitivity subject to specificity >= target,
/// linearly interpolating between adjacent ROC points when no point sits
/// exactly at FPR = 1 - target.
inline double sensitivity_at_specificity(const std::vector<RocPoint>& roc, double target_specificity) {
    if (roc.empty()) throw std::invalid_argument("sensitivity_at_specificity: empty ROC");
    if (target_specificity < 0.0 || target_specificity > 1.0) {
        throw std::invalid_argument("sensitivity_at_specificity: target must be in [0, 1]");
    }
    const double fpr_limit = 1.0 - target_specificity;
    std::vector<RocPoint> pts = roc;
    std::sort(pts.begin(), pts.end(), [](const RocPoint& a, const RocPoint& b) {
        return a.fpr != b.fpr ? a.fpr < b.fpr : a.tpr < b.tpr;
    });
    double best = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].fpr <= fpr_limit) {
            best = std::max(best, pts[i].tpr);
        } else if (i > 0 && pts[i - 1].fpr < fpr_limit) {
            const double span = pts[i].fpr - pts[i - 1].fpr;
            const double t = (fpr_limit - pts[i - 1].fpr) / span;
            best = std::max(best, pts[i - 1].tpr + t * (pts[i].tpr - pts[i - 1].tpr));
            break;
        } else {
            break;
        }
    }
    return best;
}

struct TriageResult {
    bool pass = false;
    double sensitivity_at_spec70 = 0.0;
};

/// WHO community triage target: at least 90% sensitivity at 70% specificity
/// (boundary inclusive).
inline TriageResult who_triage_check(const std::vector<RocPoint>& roc) {
    TriageResult r;
    r.sensitivity_at_spec70 = sensitivity_at_specificity(roc, 0.70);
    r.pass = r.sensitivity_at_spec70 >= 0.90;
    return r;
}

inline double population_stddev(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace coughpipe::eval
