// SPDX-License-Identifier: Apache-2.0
// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "volnet/checkpoint.hpp"
#include "volnet/ensemble.hpp"
#include "volnet/layers.hpp"
#include "volnet/loss.hpp"
#include "volnet/metrics.hpp"
#include "volnet/preprocess.hpp"
#include "volnet/regnet.hpp"
#include "volnet/trainer.hpp"

using namespace volnet;
using testutil::as_vector;
using testutil::contract;
using testutil::fd_gradient;
using testutil::random_tensor;
using testutil::rel_error;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// 1 ------------------------------------------------------------------------
Outcome conv_oracle() {
    const auto t0 = Clock::now();
    Rng rng(1001);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto c = testutil::random_conv_case(rng);
        const Tensor y = conv3d_forward(c.input, c.layer);
        const auto ref = testutil::naive_conv3d(c.input, c.layer.weight, c.layer.bias ? &*c.layer.bias : nullptr,
                                                c.layer.stride, c.layer.padding, c.layer.groups);
        if (y.shape() != ref.shape()) return {false, "shape mismatch on trial " + std::to_string(trial)};
        worst = std::max(worst, testutil::max_abs_diff(y.cast<double>(), ref));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-5 && secs < 60.0, "200 configs, max |diff| " + fmt("%.3g", worst) + ", " + fmt("%.2f", secs) + " s"};
}

// 2 ------------------------------------------------------------------------
Outcome gradient_suite() {
    const auto t0 = Clock::now();
    const double h = 1e-3;
    const int instances = 20;
    Rng rng(2002);
    std::vector<std::pair<std::string, double>> worst{{"conv3d", 0}, {"batchnorm3d", 0}, {"relu", 0},
                                                      {"global_avg_pool", 0}, {"linear", 0}, {"weighted_bce", 0}};

    for (int i = 0; i < instances; ++i) {
        const auto c = testutil::random_conv_case(rng);
        Conv3dLayer<double> l;
        l.weight = c.layer.weight.cast<double>();
        if (c.layer.bias) l.bias = c.layer.bias->cast<double>();
        l.stride = c.layer.stride;
        l.padding = c.layer.padding;
        l.groups = c.layer.groups;
        auto x = c.input.cast<double>();
        const auto r = random_tensor<double>(conv3d_forward(x, l).shape(), rng);
        const auto g = conv3d_backward(r, x, l);
        auto f = [&] { return contract(conv3d_forward(x, l), r); };
        double e = std::max(rel_error(as_vector(g.weight), fd_gradient(l.weight, f, h)),
                            rel_error(as_vector(g.input), fd_gradient(x, f, h)));
        if (l.bias) e = std::max(e, rel_error(as_vector(*g.bias), fd_gradient(*l.bias, f, h)));
        worst[0].second = std::max(worst[0].second, e);
    }
    for (int i = 0; i < instances; ++i) {
        const Shape shape{1 + rng.uniform_int(2), 1 + rng.uniform_int(4), 1 + rng.uniform_int(3), 2 + rng.uniform_int(2),
                          1 + rng.uniform_int(3)};
        auto layer = BatchNorm3dLayer<double>::make(shape[1]);
        layer.gamma = random_tensor<double>({shape[1]}, rng, 0.5, 2.0);
        layer.beta = random_tensor<double>({shape[1]}, rng);
        auto x = random_tensor<double>(shape, rng, -2.0, 2.0);
        const auto r = random_tensor<double>(shape, rng);
        BatchNormCache<double> cache;
        auto probe = layer;
        batchnorm3d_forward(x, probe, &cache);
        const auto g = batchnorm3d_backward(r, cache, probe);
        auto f = [&] {
            auto l = layer;
            return contract(batchnorm3d_forward(x, l), r);
        };
        const double e = std::max({rel_error(as_vector(g.input), fd_gradient(x, f, h)),
                                   rel_error(as_vector(g.gamma), fd_gradient(layer.gamma, f, h)),
                                   rel_error(as_vector(g.beta), fd_gradient(layer.beta, f, h))});
        worst[1].second = std::max(worst[1].second, e);
    }
    for (int i = 0; i < instances; ++i) {
        auto x = random_tensor<double>({2, 2, 2, 3, 2}, rng);
        for (std::size_t k = 0; k < x.size(); ++k)
            if (std::abs(x[k]) < 10 * h) x[k] = 0.5;
        const auto r = random_tensor<double>(x.shape(), rng);
        auto f = [&] { return contract(relu_forward(x), r); };
        worst[2].second = std::max(worst[2].second, rel_error(as_vector(relu_backward(r, x)), fd_gradient(x, f, h)));
    }
    for (int i = 0; i < instances; ++i) {
        const Shape shape{1 + rng.uniform_int(2), 1 + rng.uniform_int(3), 1 + rng.uniform_int(3), 1 + rng.uniform_int(3),
                          1 + rng.uniform_int(3)};
        auto x = random_tensor<double>(shape, rng);
        const auto r = random_tensor<double>({shape[0], shape[1]}, rng);
        auto f = [&] { return contract(global_avg_pool3d_forward(x), r); };
        worst[3].second = std::max(
            worst[3].second, rel_error(as_vector(global_avg_pool3d_backward(r, shape)), fd_gradient(x, f, h)));
    }
    for (int i = 0; i < instances; ++i) {
        const std::size_t n = 1 + rng.uniform_int(3), in = 1 + rng.uniform_int(5), out = 1 + rng.uniform_int(4);
        LinearLayer<double> l{random_tensor<double>({out, in}, rng), random_tensor<double>({out}, rng)};
        auto x = random_tensor<double>({n, in}, rng);
        const auto r = random_tensor<double>({n, out}, rng);
        const auto g = linear_backward(r, x, l);
        auto f = [&] { return contract(linear_forward(x, l), r); };
        const double e = std::max({rel_error(as_vector(g.weight), fd_gradient(l.weight, f, h)),
                                   rel_error(as_vector(g.bias), fd_gradient(l.bias, f, h)),
                                   rel_error(as_vector(g.input), fd_gradient(x, f, h))});
        worst[4].second = std::max(worst[4].second, e);
    }
    for (int i = 0; i < instances; ++i) {
        const std::size_t n = 1 + rng.uniform_int(4);
        auto z = random_tensor<double>({n, 1}, rng, -4.0, 4.0);
        std::vector<int> labels;
        for (std::size_t k = 0; k < n; ++k) labels.push_back(static_cast<int>(rng.uniform_int(2)));
        const LossConfig cfg{1.0 + 2.0 * rng.uniform()};
        const auto b = weighted_bce_batch(z, std::span<const int>(labels), cfg);
        auto f = [&] { return weighted_bce_batch(z, std::span<const int>(labels), cfg).mean_loss; };
        worst[5].second = std::max(worst[5].second, rel_error(as_vector(b.logits_grad), fd_gradient(z, f, h)));
    }

    // whole tiny model, a few entries of every parameter tensor
    Rng init(2003);
    BasicModel<double> m = Model::build(testutil::tiny_config(), init).cast<double>();
    const auto x = random_tensor<double>({2, 1, 8, 8, 8}, rng);
    const auto r = random_tensor<double>({2, 1}, rng);
    m.forward(x, Mode::train);
    m.backward(r);
    std::vector<double> analytic, numeric;
    for (auto& p : m.parameters()) {
        std::vector<std::size_t> idx;
        for (int k = 0; k < 3; ++k) idx.push_back(rng.uniform_int(p.tensor->size()));
        for (std::size_t i : idx) analytic.push_back(p.tensor->grad()[i]);
        auto f = [&] { return contract(m.forward(x, Mode::train), r); };
        const auto g = fd_gradient(*p.tensor, f, 1e-5, &idx);
        numeric.insert(numeric.end(), g.begin(), g.end());
    }
    const double model_err = rel_error(analytic, numeric);

    bool ok = model_err <= 1e-3;
    std::string detail;
    for (const auto& [name, e] : worst) {
        ok = ok && e <= 1e-4;
        detail += name + " " + fmt("%.2g", e) + ", ";
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < 300.0;
    return {ok, std::to_string(instances) + " instances each: " + detail + "whole model " + fmt("%.2g", model_err) + ", " +
                    fmt("%.2f", secs) + " s"};
}

// 3 ------------------------------------------------------------------------
Outcome metrics_oracles() {
    Rng rng(3003);
    double worst = 0.0;
    int youden_mismatch = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> s;
        std::vector<int> l;
        testutil::random_scores(rng, 2 + rng.uniform_int(60), s, l);
        const RocCurve c = roc_curve(s, l);
        worst = std::max(worst, std::abs(auc(c) - testutil::mann_whitney_auc(s, l)));
        const auto scan = testutil::youden_scan(s, l);
        const YoudenPoint y = youden_threshold(c);
        if (y.threshold != scan.threshold || y.tpr != static_cast<double>(scan.tp) / c.positives ||
            y.fpr != static_cast<double>(scan.fp) / c.negatives)
            ++youden_mismatch;
    }
    const double hand = auc(roc_curve(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}));
    return {worst <= 1e-12 && youden_mismatch == 0 && hand == 0.75,
            "1000 sets, max |AUC - MW| " + fmt("%.3g", worst) + ", Youden mismatches " + std::to_string(youden_mismatch) +
                ", hand case AUC " + fmt("%.17g", hand)};
}

// 4 ------------------------------------------------------------------------
Outcome synthetic_overfit() {
    const auto t0 = Clock::now();
    const auto data = testutil::synthetic_dataset(16, 32, 4004);
    TrainerConfig cfg;
    cfg.optimizer = OptimizerConfig::defaults(OptimizerKind::adam, 1e-3);
    cfg.loss.pos_weight = 3.0;
    cfg.preprocess = testutil::small_preprocess(32);
    cfg.batch_size = 2;
    cfg.seed = 4005;
    Trainer trainer(testutil::tiny_config(), cfg);

    std::vector<Volume> volumes;
    std::vector<int> labels;
    for (const auto& s : data) {
        volumes.push_back(s.volume);
        labels.push_back(s.label);
    }
    double f1 = 0.0;
    int epoch = 0;
    while (epoch < 200 && f1 < 1.0) {
        trainer.train_epoch(data);
        ++epoch;
        f1 = f1_score(apply_threshold(trainer.predict(volumes), 0.5), labels);
    }
    const double secs = seconds_since(t0);
    return {f1 == 1.0 && secs < 600.0,
            "train F1 " + fmt("%.4f", f1) + " after " + std::to_string(epoch) + " epochs, " + fmt("%.1f", secs) + " s"};
}

// 5 ------------------------------------------------------------------------
Outcome ensemble_arithmetic() {
    Rng rng(5005);
    bool exact = true;
    for (std::size_t k = 2; k <= 7; ++k) {
        std::vector<PredictionSet> sets(k);
        for (std::size_t m = 0; m < k; ++m) {
            sets[m].model_id = "m" + std::to_string(m);
            for (int i = 0; i < 100; ++i) sets[m].rows.emplace_back("s" + std::to_string(i), rng.uniform());
        }
        const PredictionSet f = fuse(sets);
        for (int i = 0; i < 100; ++i) {
            std::vector<double> v;
            for (const auto& s : sets) v.push_back(s.rows[i].second);
            std::sort(v.begin(), v.end());
            double mean = 0.0;
            for (std::size_t j = 0; j < v.size(); ++j) mean += (v[j] - mean) / static_cast<double>(j + 1);
            exact = exact && f.rows[i].second == mean;
        }
    }
    PredictionSet single;
    single.model_id = "solo";
    Manifest manifest;
    for (int i = 0; i < 80; ++i) {
        const std::string id = "s" + std::to_string(i);
        single.rows.emplace_back(id, rng.uniform());
        manifest.entries.push_back({id, i % 3 == 0 ? 1 : 0});
    }
    const bool same_report =
        fuse_and_evaluate(std::vector<PredictionSet>{single, single}, manifest) == evaluate_predictions(single, manifest);
    return {exact && same_report, std::string("k=2..7 bit-exact vs oracle: ") + (exact ? "yes" : "no") +
                                      ", self-fusion report identical: " + (same_report ? "yes" : "no")};
}

// 6 ------------------------------------------------------------------------
Outcome parameter_count() {
    // stem conv + BN, then per block reduce/grouped/expand convs with BN and a
    // projection in the first block of a stage, then the linear head
    const std::size_t depths[] = {2, 6, 12, 4}, widths[] = {48, 128, 256, 512};
    const std::size_t g = 8, w0 = 32, n = 1;
    std::size_t expected = 27 * w0 + 2 * w0;
    std::size_t w_in = w0;
    for (int s = 0; s < 4; ++s) {
        const std::size_t w = widths[s];
        for (std::size_t b = 0; b < depths[s]; ++b) {
            const std::size_t cin = b == 0 ? w_in : w;
            expected += cin * w + 2 * w + w * g * 27 + 2 * w + w * w + 2 * w;
            if (b == 0) expected += cin * w + 2 * w;
        }
        w_in = w;
    }
    expected += w_in * n + n;
    Rng rng(6006);
    const std::size_t actual = Model::build(RegNetConfig::reference(), rng).parameter_count();
    return {actual == expected, "model " + std::to_string(actual) + ", oracle " + std::to_string(expected)};
}

// 7 ------------------------------------------------------------------------
Outcome determinism_and_persistence() {
    const auto data = testutil::synthetic_dataset(6, 16, 7007);
    TrainerConfig cfg;
    cfg.optimizer = OptimizerConfig::defaults(OptimizerKind::adam, 1e-3);
    cfg.loss.pos_weight = 3.0;
    cfg.preprocess = testutil::small_preprocess(16);
    cfg.seed = 7008;

    auto run = [&](int epochs) {
        Trainer t(testutil::tiny_config(), cfg);
        for (int e = 0; e < epochs; ++e) t.train_epoch(data);
        return serialize_checkpoint(t.checkpoint());
    };
    const auto a = run(3);
    const bool repeatable = a == run(3);

    testutil::TempDir dir("acceptance");
    Trainer part(testutil::tiny_config(), cfg);
    part.train_epoch(data);
    save_checkpoint(dir / "e1.ckpt", part.checkpoint());
    Trainer resumed = Trainer::resume(load_checkpoint(dir / "e1.ckpt"), cfg);
    resumed.train_epoch(data);
    resumed.train_epoch(data);
    const bool resume_exact = serialize_checkpoint(resumed.checkpoint()) == a;

    const Checkpoint back = load_checkpoint(dir / "e1.ckpt");
    save_checkpoint(dir / "e1b.ckpt", back);
    const bool roundtrip = serialize_checkpoint(load_checkpoint(dir / "e1b.ckpt")) == serialize_checkpoint(part.checkpoint());

    bool pipeline = true;
    PreprocessConfig p;
    p.input_size = {16, 20, 20};
    p.train_crop = {14, 18, 18};
    for (const auto& s : data) {
        pipeline = pipeline && bit_equal(preprocess_volume(s.volume, p, Mode::eval, nullptr),
                                         preprocess_volume(s.volume, p, Mode::eval, nullptr));
    }
    const auto yn = [](bool b) { return b ? std::string("yes") : std::string("no"); };
    return {repeatable && resume_exact && roundtrip && pipeline,
            "repeat run identical: " + yn(repeatable) + ", resume identical: " + yn(resume_exact) +
                ", save/load/save identical: " + yn(roundtrip) + ", eval pipeline identical: " + yn(pipeline)};
}

// 8 ------------------------------------------------------------------------
Outcome pipeline_properties() {
    Rng rng(8008);
    bool flip_ok = true;
    double resize_err = 0.0;
    bool range_ok = true;
    PreprocessConfig p;
    p.input_size = {12, 16, 16};
    p.train_crop = {10, 14, 14};
    for (int i = 0; i < 100; ++i) {
        Volume v(10 + rng.uniform_int(12), 10 + rng.uniform_int(12), 10 + rng.uniform_int(12));
        const double lo = -50.0 * rng.uniform(), hi = lo + 0.01 + 100.0 * rng.uniform();
        for (auto& x : v.voxels) x = static_cast<float>(lo + (hi - lo) * rng.uniform());
        flip_ok = flip_ok && horizontal_flip(horizontal_flip(v)).voxels == v.voxels;
        const Volume same = trilinear_resize(v, v.extents());
        for (std::size_t k = 0; k < v.size(); ++k)
            resize_err = std::max(resize_err, static_cast<double>(std::abs(same.voxels[k] - v.voxels[k])));
        Rng aug(static_cast<std::uint64_t>(i));
        for (const Tensor& t : {preprocess_volume(v, p, Mode::eval, nullptr), preprocess_volume(v, p, Mode::train, &aug)})
            for (float x : t.data()) range_ok = range_ok && std::isfinite(x) && x >= 0.0f && x <= 1.0f;
    }
    return {flip_ok && resize_err <= 1e-6 && range_ok,
            std::string("flip involution exact: ") + (flip_ok ? "yes" : "no") + ", same-size resize max |diff| " +
                fmt("%.3g", resize_err) + ", 100 volumes in [0,1] and finite: " + (range_ok ? "yes" : "no")};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 convolution oracle", conv_oracle},
        {"2 gradient suite", gradient_suite},
        {"3 metrics oracles", metrics_oracles},
        {"4 synthetic overfit", synthetic_overfit},
        {"5 ensemble arithmetic", ensemble_arithmetic},
        {"6 parameter count", parameter_count},
        {"7 determinism and persistence", determinism_and_persistence},
        {"8 data pipeline properties", pipeline_properties},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("[%s] criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
