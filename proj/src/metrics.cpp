// SPDX-License-Identifier: Apache-2.0
#include "volnet/metrics.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "volnet/errors.hpp"

namespace volnet {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw ArgumentError("scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
                            std::to_string(labels.size()) + ")");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw ArgumentError("label at index " + std::to_string(i) + " is not 0 or 1");
        }
        if (std::isnan(scores[i])) {
            throw NumericError("score at index " + std::to_string(i) + " is NaN");
        }
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels);
    RocCurve curve;
    for (int y : labels) {
        (y == 1 ? curve.positives : curve.negatives)++;
    }
    if (curve.positives == 0 || curve.negatives == 0) {
        throw DegenerateError("ROC needs both classes (positives=" + std::to_string(curve.positives) +
                              ", negatives=" + std::to_string(curve.negatives) + ")");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    const double p = static_cast<double>(curve.positives);
    const double n = static_cast<double>(curve.negatives);
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0, 0, 0});
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double t = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == t; ++i) {
            (labels[order[i]] == 1 ? tp : fp)++;
        }
        curve.points.push_back({t, static_cast<double>(fp) / n, static_cast<double>(tp) / p, fp, tp});
    }
    return curve;
}

double auc(const RocCurve& curve) {
    if (curve.points.size() < 2 || curve.positives == 0 || curve.negatives == 0) {
        throw ArgumentError("auc: invalid ROC curve");
    }
    // Twice the area in count units: sum over steps of dFP * (TP_prev + TP_cur).
    std::uint64_t twice_area = 0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        twice_area += static_cast<std::uint64_t>(b.false_positives - a.false_positives) *
                      (a.true_positives + b.true_positives);
    }
    return static_cast<double>(twice_area) /
           (2.0 * static_cast<double>(curve.positives) * static_cast<double>(curve.negatives));
}

YoudenPoint youden_threshold(const RocCurve& curve) {
    if (curve.points.size() < 2) {
        throw ArgumentError("youden_threshold: curve has no real operating point");
    }
    const auto p = static_cast<std::int64_t>(curve.positives);
    const auto n = static_cast<std::int64_t>(curve.negatives);
    // J * P * N = TP * N - FP * P, compared exactly in integers.
    auto scaled_j = [&](const RocPoint& pt) {
        return static_cast<std::int64_t>(pt.true_positives) * n - static_cast<std::int64_t>(pt.false_positives) * p;
    };
    std::size_t best = 1;
    for (std::size_t i = 2; i < curve.points.size(); ++i) {
        const auto& cand = curve.points[i];
        const auto& cur = curve.points[best];
        const std::int64_t jc = scaled_j(cand);
        const std::int64_t jb = scaled_j(cur);
        // Later points have lower thresholds, so ">=" on tpr realizes both tie-breaks.
        if (jc > jb || (jc == jb && cand.true_positives >= cur.true_positives)) {
            best = i;
        }
    }
    const auto& pt = curve.points[best];
    return {pt.threshold, pt.tpr - pt.fpr, pt.tpr, pt.fpr};
}

Confusion confusion(std::span<const int> predicted, std::span<const int> labels) {
    if (predicted.size() != labels.size()) {
        throw ArgumentError("predictions and labels differ in length");
    }
    Confusion c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred = predicted[i] == 1;
        const bool pos = labels[i] == 1;
        if (pred && pos) ++c.tp;
        else if (pred) ++c.fp;
        else if (pos) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double f1_score(const Confusion& c) {
    const std::size_t denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) {
        return 1.0;
    }
    return static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

double f1_score(std::span<const int> predicted, std::span<const int> labels) {
    return f1_score(confusion(predicted, labels));
}

std::vector<int> apply_threshold(std::span<const double> scores, double threshold) {
    std::vector<int> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = scores[i] >= threshold ? 1 : 0;
    }
    return out;
}

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels) {
    return evaluate(scores, labels, youden_threshold(roc_curve(scores, labels)));
}

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels, const YoudenPoint& cutoff) {
    const RocCurve curve = roc_curve(scores, labels);
    const std::vector<int> pred = apply_threshold(scores, cutoff.threshold);
    EvalReport r;
    r.auc = auc(curve);
    r.youden_threshold = cutoff.threshold;
    r.youden_j = cutoff.j;
    r.confusion = confusion(pred, labels);
    r.f1 = f1_score(r.confusion);
    r.positives = curve.positives;
    r.negatives = curve.negatives;
    r.scores.assign(scores.begin(), scores.end());
    return r;
}

std::string format_report(const EvalReport& r) {
    std::ostringstream os;
    os << "samples=" << r.scores.size() << '\n'
       << "positives=" << r.positives << '\n'
       << "negatives=" << r.negatives << '\n'
       << "auc=" << fmt(r.auc) << '\n'
       << "youden_threshold=" << fmt(r.youden_threshold) << '\n'
       << "youden_j=" << fmt(r.youden_j) << '\n'
       << "f1=" << fmt(r.f1) << '\n'
       << "tp=" << r.confusion.tp << '\n'
       << "fp=" << r.confusion.fp << '\n'
       << "tn=" << r.confusion.tn << '\n'
       << "fn=" << r.confusion.fn << '\n';
    return os.str();
}

void write_roc_csv(std::ostream& out, const RocCurve& curve) {
    out << "threshold,fpr,tpr\n";
    char buf[128];
    for (const auto& p : curve.points) {
        if (std::isinf(p.threshold)) {
            std::snprintf(buf, sizeof buf, "inf,%.17g,%.17g\n", p.fpr, p.tpr);
        } else {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
        }
        out << buf;
    }
}

}  // namespace volnet
