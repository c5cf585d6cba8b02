// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace volnet {

/// Operating point "predict positive iff score >= threshold".
struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
    std::size_t false_positives = 0;
    std::size_t true_positives = 0;
};

/// Points ordered by strictly decreasing threshold, starting at the +inf
/// sentinel (0, 0) and ending at the minimum score (1, 1). Tied scores share
/// one point.
struct RocCurve {
    std::vector<RocPoint> points;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

/// Throws DegenerateError when only one class is present, ArgumentError on
/// length mismatch or labels outside {0,1}, NumericError for NaN scores.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

/// Trapezoidal area, evaluated on the integer counts so that it equals the
/// Mann-Whitney statistic with half credit for ties.
double auc(const RocCurve& curve);

struct YoudenPoint {
    double threshold = 0.0;
    double j = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
};

/// Maximizes J = tpr - fpr over the real (non-sentinel) points. Ties go to
/// the higher tpr, then to the lower threshold.
YoudenPoint youden_threshold(const RocCurve& curve);

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    bool operator==(const Confusion&) const = default;
};

Confusion confusion(std::span<const int> predicted, std::span<const int> labels);

/// 2tp / (2tp + fp + fn); 1 when there is nothing to get wrong (tp+fp+fn == 0).
double f1_score(const Confusion& c);
double f1_score(std::span<const int> predicted, std::span<const int> labels);

/// 1 where score >= threshold.
std::vector<int> apply_threshold(std::span<const double> scores, double threshold);

struct EvalReport {
    double auc = 0.0;
    double youden_threshold = 0.0;
    double youden_j = 0.0;
    double f1 = 0.0;
    Confusion confusion;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::vector<double> scores;

    bool operator==(const EvalReport&) const = default;
};

/// ROC on the given scores, Youden cut-off from that same curve, then F1 and
/// the confusion matrix at that cut-off.
EvalReport evaluate(std::span<const double> scores, std::span<const int> labels);

/// Same report, but thresholded at a cut-off chosen elsewhere (e.g. on a
/// validation split); youden_threshold/youden_j then describe that cut-off.
EvalReport evaluate(std::span<const double> scores, std::span<const int> labels, const YoudenPoint& cutoff);

/// Flat `key=value` lines.
std::string format_report(const EvalReport& report);

/// CSV `threshold,fpr,tpr`; the sentinel threshold is written as `inf`.
void write_roc_csv(std::ostream& out, const RocCurve& curve);

}  // namespace volnet
