// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "doctest.h"
#include "test_util.hpp"
#include "volnet/metrics.hpp"

using namespace volnet;

namespace {

RocCurve curve_of(const std::vector<double>& s, const std::vector<int>& l) { return roc_curve(s, l); }

}  // namespace

TEST_CASE("roc of a perfect classifier") {
    const RocCurve c = curve_of({0.9, 0.1}, {1, 0});
    REQUIRE(c.points.size() == 3);
    CHECK(std::isinf(c.points[0].threshold));
    CHECK(c.points[0].fpr == 0.0);
    CHECK(c.points[0].tpr == 0.0);
    CHECK(c.points[1].fpr == 0.0);
    CHECK(c.points[1].tpr == 1.0);
    CHECK(c.points[2].fpr == 1.0);
    CHECK(c.points[2].tpr == 1.0);
    CHECK(auc(c) == 1.0);
}

TEST_CASE("tied scores collapse into one step") {
    const RocCurve c = curve_of({0.5, 0.5}, {1, 0});
    REQUIRE(c.points.size() == 2);
    CHECK(c.points[1].fpr == 1.0);
    CHECK(c.points[1].tpr == 1.0);
    CHECK(auc(c) == 0.5);
    const YoudenPoint y = youden_threshold(c);
    CHECK(y.j == 0.0);
    CHECK(y.threshold == 0.5);
}

TEST_CASE("roc matches a brute-force threshold oracle") {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s;
        std::vector<int> l;
        testutil::random_scores(rng, 50, s, l);
        const RocCurve c = curve_of(s, l);
        std::set<double, std::greater<>> distinct(s.begin(), s.end());
        REQUIRE(c.points.size() == distinct.size() + 1);
        std::size_t k = 1;
        for (double t : distinct) {
            std::size_t tp = 0, fp = 0, P = 0, N = 0;
            for (std::size_t i = 0; i < s.size(); ++i) {
                (l[i] ? P : N)++;
                if (s[i] >= t) (l[i] ? tp : fp)++;
            }
            CHECK(c.points[k].threshold == t);
            CHECK(c.points[k].true_positives == tp);
            CHECK(c.points[k].false_positives == fp);
            CHECK(c.points[k].tpr == static_cast<double>(tp) / P);
            CHECK(c.points[k].fpr == static_cast<double>(fp) / N);
            ++k;
        }
        CHECK(c.points.back().fpr == 1.0);
        CHECK(c.points.back().tpr == 1.0);
    }
}

TEST_CASE("auc hand case and chance level") {
    CHECK(auc(curve_of({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1})) == 0.75);
    CHECK(auc(curve_of({0.3, 0.3, 0.3, 0.3}, {0, 1, 1, 0})) == 0.5);
}

TEST_CASE("auc equals Mann-Whitney and youden equals the exhaustive scan") {
    Rng rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> s;
        std::vector<int> l;
        testutil::random_scores(rng, 2 + rng.uniform_int(60), s, l);
        const RocCurve c = curve_of(s, l);
        CHECK(std::abs(auc(c) - testutil::mann_whitney_auc(s, l)) <= 1e-12);
        const auto scan = testutil::youden_scan(s, l);
        const YoudenPoint y = youden_threshold(c);
        CHECK(y.threshold == scan.threshold);
        CHECK(y.tpr == static_cast<double>(scan.tp) / c.positives);
        CHECK(y.fpr == static_cast<double>(scan.fp) / c.negatives);
    }
}

TEST_CASE("auc is invariant under increasing transforms") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> s;
        std::vector<int> l;
        testutil::random_scores(rng, 30, s, l);
        std::vector<double> t;
        for (double x : s) t.push_back(std::exp(3.0 * x) - 7.0);
        CHECK(auc(curve_of(s, l)) == auc(curve_of(t, l)));
    }
}

TEST_CASE("youden examples") {
    const YoudenPoint perfect = youden_threshold(curve_of({0.9, 0.7, 0.4, 0.2}, {1, 1, 0, 0}));
    CHECK(perfect.threshold == 0.7);
    CHECK(perfect.j == 1.0);

    const YoudenPoint y = youden_threshold(curve_of({0.9, 0.8, 0.3, 0.2}, {1, 0, 1, 0}));
    CHECK(y.threshold == 0.3);
    CHECK(y.tpr == 1.0);
    CHECK(y.fpr == 0.5);
    CHECK(y.j == 0.5);
}

TEST_CASE("roc errors") {
    CHECK_THROWS_AS(curve_of({0.1, 0.2}, {1, 1}), DegenerateError);
    CHECK_THROWS_AS(curve_of({0.1, 0.2}, {1}), ArgumentError);
    CHECK_THROWS_AS(curve_of({0.1, 0.2}, {1, 3}), ArgumentError);
    CHECK_THROWS_AS(curve_of({std::nan(""), 0.2}, {1, 0}), NumericError);
}

TEST_CASE("confusion and f1") {
    const std::vector<int> labels{1, 1, 0, 1};
    const std::vector<int> preds{1, 0, 0, 1};
    const Confusion c = confusion(preds, labels);
    CHECK(c == Confusion{2, 0, 1, 1});
    CHECK(f1_score(preds, labels) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(f1_score(labels, labels) == 1.0);
    CHECK(f1_score(std::vector<int>{0, 0, 0, 0}, labels) == 0.0);
    CHECK(f1_score(std::vector<int>{0, 0}, std::vector<int>{0, 0}) == 1.0);
    CHECK_THROWS_AS(confusion(preds, std::vector<int>{1}), ArgumentError);
}

TEST_CASE("f1 equals one exactly when predictions match") {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> l, p;
        for (int i = 0; i < 10; ++i) {
            l.push_back(static_cast<int>(rng.uniform_int(2)));
            p.push_back(rng.uniform() < 0.8 ? l.back() : 1 - l.back());
        }
        const double f = f1_score(p, l);
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
        const bool any_positive = std::count(l.begin(), l.end(), 1) + std::count(p.begin(), p.end(), 1) > 0;
        if (any_positive) CHECK((f == 1.0) == (p == l));
    }
}

TEST_CASE("evaluate") {
    const EvalReport sep = evaluate(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0});
    CHECK(sep.auc == 1.0);
    CHECK(sep.f1 == 1.0);

    const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
    const std::vector<int> l{0, 0, 1, 1};
    const EvalReport r = evaluate(s, l);
    CHECK(r.auc == 0.75);
    const auto scan = testutil::youden_scan(s, l);
    CHECK(r.youden_threshold == scan.threshold);
    CHECK(r.confusion.tp == static_cast<std::size_t>(scan.tp));
    CHECK(r.confusion.fp == static_cast<std::size_t>(scan.fp));

    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> rs;
        std::vector<int> rl;
        testutil::random_scores(rng, 25, rs, rl);
        const EvalReport e = evaluate(rs, rl);
        CHECK(e.confusion.tp + e.confusion.fn == static_cast<std::size_t>(std::count(rl.begin(), rl.end(), 1)));
        CHECK(e.confusion.fp + e.confusion.tn == static_cast<std::size_t>(std::count(rl.begin(), rl.end(), 0)));
    }
}

TEST_CASE("evaluate at an external cut-off") {
    const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
    const std::vector<int> l{0, 0, 1, 1};
    YoudenPoint cut;
    cut.threshold = 0.5;
    const EvalReport r = evaluate(s, l, cut);
    CHECK(r.youden_threshold == 0.5);
    CHECK(r.confusion == Confusion{1, 0, 2, 1});
}

TEST_CASE("report and roc csv formats") {
    const EvalReport r = evaluate(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1});
    const std::string text = format_report(r);
    CHECK(text.find("auc=0.75\n") != std::string::npos);
    CHECK(text.find("samples=4\n") != std::string::npos);
    for (const char* key : {"positives=", "negatives=", "youden_threshold=", "youden_j=", "f1=", "tp=", "fp=", "tn=", "fn="})
        CHECK(text.find(key) != std::string::npos);

    std::ostringstream csv;
    write_roc_csv(csv, curve_of({0.9, 0.1}, {1, 0}));
    CHECK(csv.str() == "threshold,fpr,tpr\ninf,0,0\n0.90000000000000002,0,1\n0.10000000000000001,1,1\n");
}
