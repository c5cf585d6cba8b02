// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "test_util.hpp"
#include "volnet/checkpoint.hpp"
#include "volnet/loss.hpp"
#include "volnet/optimizer.hpp"
#include "volnet/trainer.hpp"

using namespace volnet;
using testutil::random_tensor;

namespace {

std::vector<Tensor*> pointers(std::vector<Tensor>& ts) {
    std::vector<Tensor*> out;
    for (auto& t : ts) out.push_back(&t);
    return out;
}

void set_grad(Tensor& t, const std::vector<float>& g) {
    auto buf = t.ensure_grad();
    std::copy(g.begin(), g.end(), buf.begin());
}

TrainerConfig small_trainer(std::uint64_t seed) {
    TrainerConfig c;
    c.optimizer = OptimizerConfig::defaults(OptimizerKind::adam, 1e-3);
    c.loss.pos_weight = 3.0;
    c.preprocess = testutil::small_preprocess(16);
    c.batch_size = 2;
    c.seed = seed;
    return c;
}

bool same_parameters(const Model& a, const Model& b) {
    const auto pa = a.parameters();
    const auto pb = b.parameters();
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i)
        if (!bit_equal(*pa[i].tensor, *pb[i].tensor)) return false;
    const auto ba = a.buffers();
    const auto bb = b.buffers();
    for (std::size_t i = 0; i < ba.size(); ++i)
        if (!bit_equal(*ba[i].tensor, *bb[i].tensor)) return false;
    return true;
}

}  // namespace

TEST_CASE("weighted bce values") {
    CHECK(weighted_bce_with_logit(0.0, 1, 1.0).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(weighted_bce_with_logit(0.0, 1, 3.0).loss == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(weighted_bce_with_logit(0.0, 0, 3.0).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // saturated logits stay finite
    CHECK(std::isfinite(weighted_bce_with_logit(800.0, 0, 1.0).loss));
    CHECK(weighted_bce_with_logit(-800.0, 0, 1.0).loss >= 0.0);

    CHECK_THROWS_AS(weighted_bce_with_logit(std::nan(""), 1, 1.0), NumericError);
    CHECK_THROWS_AS(weighted_bce_with_logit(std::numeric_limits<double>::infinity(), 1, 1.0), NumericError);
    CHECK_THROWS_AS(weighted_bce_with_logit(0.0, 2, 1.0), ArgumentError);
    LossConfig bad{0.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("weighted bce properties") {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const double z = -10.0 + 20.0 * rng.uniform();
        const double w = 0.5 + 4.0 * rng.uniform();
        CHECK(weighted_bce_with_logit(z, 1, 1.0).loss == weighted_bce_with_logit(-z, 0, 1.0).loss);
        CHECK(weighted_bce_with_logit(z, 1, w).loss == w * weighted_bce_with_logit(z, 1, 1.0).loss);
        CHECK(weighted_bce_with_logit(z, 0, 1.0).loss > 0.0);
    }
}

TEST_CASE("weighted bce gradient matches finite differences") {
    auto fd = [](double z, int y, double w) {
        const double h = 1e-6;
        return (weighted_bce_with_logit(z + h, y, w).loss - weighted_bce_with_logit(z - h, y, w).loss) / (2 * h);
    };
    const double g = weighted_bce_with_logit(2.0, 0, 1.0).grad;
    CHECK(std::abs(g - fd(2.0, 0, 1.0)) / std::abs(fd(2.0, 0, 1.0)) <= 1e-6);

    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const double z = -6.0 + 12.0 * rng.uniform();
        const int y = static_cast<int>(rng.uniform_int(2));
        const double w = 1.0 + 2.0 * rng.uniform();
        const double n = fd(z, y, w);
        CHECK(std::abs(weighted_bce_with_logit(z, y, w).grad - n) <= 1e-6 * std::max(1.0, std::abs(n)));
    }
}

TEST_CASE("batch loss is the mean and its gradient is scaled") {
    const Tensor64 logits({3, 1}, std::vector<double>{0.5, -1.0, 2.0});
    const int labels[] = {1, 0, 1};
    const auto b = weighted_bce_batch(logits, std::span<const int>(labels), LossConfig{2.0});
    double mean = 0.0;
    for (int i = 0; i < 3; ++i) {
        const auto v = weighted_bce_with_logit(logits[i], labels[i], 2.0);
        mean += v.loss / 3.0;
        CHECK(b.logits_grad[i] == doctest::Approx(v.grad / 3.0).epsilon(1e-15));
    }
    CHECK(b.mean_loss == doctest::Approx(mean).epsilon(1e-15));
    CHECK_THROWS_AS(weighted_bce_batch(logits, std::span<const int>(labels, 2), LossConfig{}), ShapeError);
}

TEST_CASE("sgd step") {
    std::vector<Tensor> p{Tensor({1}, 1.0f)};
    set_grad(p[0], {0.5f});
    OptimizerState<float> st;
    auto cfg = OptimizerConfig::defaults(OptimizerKind::sgd, 0.1);
    cfg.momentum = 0.0;
    sgd_step<float>(pointers(p), st, cfg);
    CHECK(p[0][0] == doctest::Approx(0.95f));

    // with momentum the velocity accumulates
    std::vector<Tensor> q{Tensor({1}, 1.0f)};
    set_grad(q[0], {1.0f});
    OptimizerState<float> s2;
    cfg.momentum = 0.9;
    sgd_step<float>(pointers(q), s2, cfg);
    sgd_step<float>(pointers(q), s2, cfg);
    CHECK(s2.first[0][0] == doctest::Approx(1.9f));
    CHECK(q[0][0] == doctest::Approx(1.0f - 0.1f - 0.19f));
}

TEST_CASE("adam first step moves each coordinate by lr") {
    Rng rng(3);
    const double lr = 1e-3;
    std::vector<Tensor> p{random_tensor<float>({50}, rng)};
    const Tensor before = p[0];
    std::vector<float> g(50);
    for (auto& v : g) v = static_cast<float>(rng.uniform() < 0.5 ? -(0.1 + rng.uniform()) : 0.1 + rng.uniform());
    set_grad(p[0], g);
    OptimizerState<float> st;
    adam_step<float>(pointers(p), st, OptimizerConfig::defaults(OptimizerKind::adam, lr));
    for (std::size_t i = 0; i < 50; ++i) {
        const double delta = static_cast<double>(p[0][i]) - before[i];
        const double expected = g[i] > 0 ? -lr : lr;
        // float32 parameter rounding adds up to half an ulp of |p|
        CHECK(std::abs(delta - expected) <= lr * 1e-6 + 1e-7);
    }
    CHECK(st.step == 1);
}

TEST_CASE("novograd first step normalizes by the layer gradient norm") {
    std::vector<Tensor> p{Tensor({2}, std::vector<float>{1.0f, 1.0f})};
    set_grad(p[0], {3.0f, 4.0f});
    OptimizerState<float> st;
    const double lr = 0.1;
    novograd_step<float>(pointers(p), st, OptimizerConfig::defaults(OptimizerKind::novograd, lr));
    CHECK(st.first[0][0] == doctest::Approx(3.0 / 5.0).epsilon(1e-6));
    CHECK(st.first[0][1] == doctest::Approx(4.0 / 5.0).epsilon(1e-6));
    CHECK(st.second[0].rank() == 0);
    CHECK(st.second[0][0] == doctest::Approx(25.0));
    CHECK(p[0][0] == doctest::Approx(1.0 - lr * 0.6).epsilon(1e-6));
    CHECK(p[0][1] == doctest::Approx(1.0 - lr * 0.8).epsilon(1e-6));
    CHECK(OptimizerConfig::defaults(OptimizerKind::novograd, 1.0).beta2 == 0.25);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    Rng rng(4);
    for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam, OptimizerKind::novograd}) {
        std::vector<Tensor> p{random_tensor<float>({7}, rng), random_tensor<float>({2, 3}, rng)};
        std::vector<Tensor> before = p;
        set_grad(p[0], std::vector<float>(7, 0.3f));
        set_grad(p[1], std::vector<float>(6, -0.2f));
        OptimizerState<float> st;
        optimizer_step<float>(pointers(p), st, OptimizerConfig::defaults(kind, 0.0));
        CHECK(bit_equal(p[0], before[0]));
        CHECK(bit_equal(p[1], before[1]));
        CHECK(st.step == 1);
    }
}

TEST_CASE("non-finite gradient aborts the step before any update") {
    for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam, OptimizerKind::novograd}) {
        std::vector<Tensor> p{Tensor({2}, 1.0f), Tensor({2}, 1.0f)};
        set_grad(p[0], {0.1f, 0.2f});
        set_grad(p[1], {std::nanf(""), 0.0f});
        OptimizerState<float> st;
        CHECK_THROWS_AS(optimizer_step<float>(pointers(p), st, OptimizerConfig::defaults(kind, 0.1)), NumericError);
        CHECK(p[0][0] == 1.0f);
        CHECK(st.step == 0);
    }
}

TEST_CASE("optimizer config parsing and validation") {
    CHECK(parse_optimizer_kind("novo") == OptimizerKind::novograd);
    CHECK(parse_optimizer_kind("NovoGrad") == OptimizerKind::novograd);
    CHECK(parse_optimizer_kind("adam") == OptimizerKind::adam);
    CHECK_THROWS_AS(parse_optimizer_kind("rmsprop"), ConfigError);
    auto c = OptimizerConfig::defaults(OptimizerKind::adam, -1.0);
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = OptimizerConfig::defaults(OptimizerKind::adam, 1e-3);
    c.beta1 = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("checkpoint round trip is bit exact") {
    testutil::TempDir dir("ckpt");
    Trainer t(testutil::tiny_config(), small_trainer(5));
    const auto data = testutil::synthetic_dataset(4, 16, 6);
    t.train_epoch(data);
    const Checkpoint c = t.checkpoint();
    save_checkpoint(dir / "a.ckpt", c);
    const Checkpoint back = load_checkpoint(dir / "a.ckpt");
    save_checkpoint(dir / "b.ckpt", back);
    CHECK(serialize_checkpoint(c) == serialize_checkpoint(back));

    std::ifstream fa(dir / "a.ckpt", std::ios::binary), fb(dir / "b.ckpt", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);

    REQUIRE(back.parameters.size() == c.parameters.size());
    for (std::size_t i = 0; i < c.parameters.size(); ++i) {
        CHECK(back.parameters[i].name == c.parameters[i].name);
        CHECK(bit_equal(back.parameters[i].tensor, c.parameters[i].tensor));
    }
    CHECK(back.architecture == c.architecture);
    CHECK(back.optimizer == c.optimizer);
    CHECK(back.epoch == 1);
    CHECK(back.rng_state == c.rng_state);
    CHECK(same_parameters(restore_model(back), t.model()));
}

TEST_CASE("checkpoint errors carry distinct codes") {
    Rng rng(7);
    Checkpoint c = make_checkpoint(Model::build(testutil::tiny_config(), rng), OptimizerConfig{},
                                   OptimizerState<float>{}, 0, 0);
    auto bytes = serialize_checkpoint(c);

    auto code_of = [](const std::vector<std::uint8_t>& b) {
        try {
            deserialize_checkpoint(b);
        } catch (const CheckpointError& e) {
            return e.code();
        }
        FAIL("no error");
        return CheckpointErrc::io;
    };
    auto truncated = bytes;
    truncated.pop_back();
    CHECK(code_of(truncated) == CheckpointErrc::truncated);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK(code_of(magic) == CheckpointErrc::bad_magic);
    auto version = bytes;
    version[4] = 9;
    CHECK(code_of(version) == CheckpointErrc::version_mismatch);
    auto trailing = bytes;
    trailing.push_back(0);
    CHECK(code_of(trailing) == CheckpointErrc::malformed);

    testutil::TempDir dir("ckpt_err");
    {
        std::ofstream f(dir / "cut.ckpt", std::ios::binary);
        f.write(reinterpret_cast<const char*>(truncated.data()), static_cast<std::streamsize>(truncated.size()));
    }
    try {
        load_checkpoint(dir / "cut.ckpt");
        FAIL("expected error");
    } catch (const CheckpointError& e) {
        CHECK(e.code() == CheckpointErrc::truncated);
    }
    try {
        load_checkpoint(dir / "missing.ckpt");
        FAIL("expected error");
    } catch (const CheckpointError& e) {
        CHECK(e.code() == CheckpointErrc::io);
    }

    // a tensor with the wrong shape is rejected on restore
    Checkpoint wrong = c;
    wrong.parameters[0].tensor = Tensor({1});
    CHECK_THROWS_AS(restore_model(wrong), CheckpointError);
}

TEST_CASE("single sample with zero learning rate keeps parameters") {
    auto cfg = small_trainer(8);
    cfg.optimizer = OptimizerConfig::defaults(OptimizerKind::sgd, 0.0);
    cfg.batch_size = 1;
    Trainer t(testutil::tiny_config(), cfg);
    const Model before = t.model();
    const auto data = testutil::synthetic_dataset(1, 16, 9);
    const EpochStats s = t.train_epoch(data);
    CHECK(s.samples == 1);
    CHECK(std::isfinite(s.mean_loss));
    CHECK(s.mean_loss > 0.0);
    const auto pa = before.parameters();
    const auto pb = t.model().parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(bit_equal(*pa[i].tensor, *pb[i].tensor));
}

TEST_CASE("same seed gives identical epoch stats and parameters") {
    const auto data = testutil::synthetic_dataset(6, 16, 10);
    Trainer a(testutil::tiny_config(), small_trainer(11));
    Trainer b(testutil::tiny_config(), small_trainer(11));
    for (int e = 0; e < 2; ++e) {
        const auto sa = a.train_epoch(data);
        const auto sb = b.train_epoch(data);
        CHECK(sa.mean_loss == sb.mean_loss);
        CHECK(sa.accuracy == sb.accuracy);
    }
    CHECK(serialize_checkpoint(a.checkpoint()) == serialize_checkpoint(b.checkpoint()));

    Trainer c(testutil::tiny_config(), small_trainer(12));
    c.train_epoch(data);
    c.train_epoch(data);
    CHECK(serialize_checkpoint(a.checkpoint()) != serialize_checkpoint(c.checkpoint()));
}

TEST_CASE("resuming from a checkpoint matches an uninterrupted run") {
    const auto data = testutil::synthetic_dataset(6, 16, 13);
    for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam, OptimizerKind::novograd}) {
        auto cfg = small_trainer(14);
        cfg.optimizer = OptimizerConfig::defaults(kind, 1e-3);
        Trainer straight(testutil::tiny_config(), cfg);
        straight.train_epoch(data);
        straight.train_epoch(data);

        testutil::TempDir dir("resume");
        Trainer first(testutil::tiny_config(), cfg);
        first.train_epoch(data);
        save_checkpoint(dir / "e1.ckpt", first.checkpoint());
        Trainer resumed = Trainer::resume(load_checkpoint(dir / "e1.ckpt"), cfg);
        resumed.train_epoch(data);

        CHECK(resumed.epoch() == 2);
        CHECK(same_parameters(resumed.model(), straight.model()));
        CHECK(serialize_checkpoint(resumed.checkpoint()) == serialize_checkpoint(straight.checkpoint()));
    }
}

TEST_CASE("training loss trends down on the synthetic set") {
    // 16 cubes of 32^3; batches of 8 keep BN batch statistics from dominating the trend
    const auto data = testutil::synthetic_dataset(16, 32, 100);
    auto cfg = small_trainer(0);
    cfg.preprocess = testutil::small_preprocess(32);
    cfg.batch_size = 8;
    Trainer t(testutil::tiny_config(), cfg);
    std::vector<double> losses;
    for (int e = 0; e < 10; ++e) losses.push_back(t.train_epoch(data).mean_loss);
    int rises = 0;
    for (std::size_t i = 1; i < losses.size(); ++i) rises += losses[i] > losses[i - 1];
    CHECK(rises <= 2);
    CHECK(losses.back() < losses.front());
}

TEST_CASE("epoch errors name the samples") {
    auto data = testutil::synthetic_dataset(3, 16, 17);
    data[1].label = 5;
    auto cfg = small_trainer(18);
    cfg.batch_size = 1;
    Trainer t(testutil::tiny_config(), cfg);
    try {
        t.train_epoch(data);
        FAIL("expected an error");
    } catch (const ArgumentError& e) {
        CHECK(std::string(e.what()).find("samples 1") != std::string::npos);
    }
    CHECK_THROWS_AS(t.train_epoch(std::span<const TrainingSample>{}), ArgumentError);
}

TEST_CASE("trainer rejects multi-class heads") {
    auto arch = testutil::tiny_config();
    arch.num_classes = 2;
    CHECK_THROWS_AS(Trainer(arch, small_trainer(1)), ConfigError);
}

TEST_CASE("predictions are probabilities and deterministic") {
    Trainer t(testutil::tiny_config(), small_trainer(19));
    const auto data = testutil::synthetic_dataset(3, 16, 20);
    std::vector<Volume> vols;
    for (const auto& s : data) vols.push_back(s.volume);
    const auto p1 = t.predict(vols);
    const auto p2 = t.predict(vols);
    CHECK(p1 == p2);
    for (double p : p1) {
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
}
