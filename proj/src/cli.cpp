// SPDX-License-Identifier: Apache-2.0
#include "volnet/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "volnet/checkpoint.hpp"
#include "volnet/ensemble.hpp"
#include "volnet/manifest.hpp"
#include "volnet/metrics.hpp"
#include "volnet/run_config.hpp"
#include "volnet/trainer.hpp"
#include "volnet/volume_io.hpp"

namespace volnet {

namespace fs = std::filesystem;

namespace {

struct TrainArgs {
    std::string config;
    RunConfigOverrides overrides;
    std::string resume;
};

struct PredictArgs {
    std::string ckpt;
    std::string manifest;
    std::string out;
    std::string config;
};

struct EvalArgs {
    std::vector<std::string> preds;
    std::string manifest;
    std::string out;
    std::string roc_out;
    std::string val_pred;
    std::string val_manifest;
};

std::string format_double(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

void ensure_parent(const fs::path& file) {
    const fs::path parent = file.parent_path();
    if (!parent.empty()) {
        fs::create_directories(parent);
    }
}

std::ofstream open_output(const fs::path& path, std::ios::openmode mode = std::ios::trunc) {
    ensure_parent(path);
    std::ofstream f(path, std::ios::out | mode);
    if (!f) {
        throw DataError("cannot write " + path.string());
    }
    return f;
}

std::vector<Volume> load_volumes(const Manifest& manifest) {
    std::vector<Volume> vols;
    vols.reserve(manifest.size());
    for (const auto& e : manifest.entries) {
        vols.push_back(load_volume(manifest.resolve(e)));
        vols.back().source_id = e.path;
    }
    return vols;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
    const RunConfig rc = load_run_config(a.config, a.overrides);
    rc.validate(true);
    const Manifest manifest = load_manifest(rc.train_manifest);
    if (manifest.size() == 0) {
        throw DataError("training manifest " + rc.train_manifest.string() + " lists no samples");
    }

    std::vector<TrainingSample> data;
    data.reserve(manifest.size());
    for (const auto& e : manifest.entries) {
        data.push_back({e.path, load_volume(manifest.resolve(e)), e.label});
    }

    fs::create_directories(rc.output_dir);
    {
        auto f = open_output(rc.output_dir / "config.json");
        f << run_config_to_json(rc);
    }

    std::optional<Trainer> trainer;
    if (!a.resume.empty()) {
        const Checkpoint ckpt = load_checkpoint(a.resume);
        if (!(ckpt.architecture == rc.architecture)) {
            throw ConfigError("checkpoint " + a.resume + " was trained with a different architecture");
        }
        trainer.emplace(Trainer::resume(ckpt, rc.trainer_config()));
    } else {
        trainer.emplace(rc.architecture, rc.trainer_config());
    }

    const fs::path log_path = rc.output_dir / "train_log.csv";
    const bool fresh_log = a.resume.empty() || !fs::exists(log_path);
    auto log = open_output(log_path, fresh_log ? std::ios::trunc : std::ios::app);
    if (fresh_log) {
        log << "epoch,mean_loss,train_accuracy\n";
    }

    while (trainer->epoch() < rc.epochs) {
        const EpochStats s = trainer->train_epoch(data);
        log << s.epoch << ',' << format_double("%.17g", s.mean_loss) << ',' << format_double("%.17g", s.accuracy)
            << '\n';
        log.flush();
        save_checkpoint(rc.output_dir / ("epoch_" + std::to_string(s.epoch) + ".ckpt"), trainer->checkpoint());
        out << "epoch " << s.epoch << "/" << rc.epochs << " loss " << format_double("%.6f", s.mean_loss)
            << " accuracy " << format_double("%.4f", s.accuracy) << '\n';
    }
    save_checkpoint(rc.output_dir / "final.ckpt", trainer->checkpoint());
    out << "wrote " << (rc.output_dir / "final.ckpt").string() << '\n';
    return exit_ok;
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(a.ckpt);

    PreprocessConfig preprocess;
    fs::path config_path = a.config;
    if (config_path.empty()) {
        const fs::path beside = fs::path(a.ckpt).parent_path() / "config.json";
        if (fs::is_regular_file(beside)) {
            config_path = beside;
        }
    }
    if (!config_path.empty()) {
        const RunConfig rc = load_run_config(config_path);
        if (!(rc.architecture == ckpt.architecture)) {
            throw ConfigError("architecture in " + config_path.string() + " does not match checkpoint " + a.ckpt);
        }
        preprocess = rc.preprocess;
    }

    Model model = restore_model(ckpt);
    const Manifest manifest = load_manifest(a.manifest);
    const std::vector<Volume> volumes = load_volumes(manifest);
    const std::vector<double> probs = predict_probabilities(model, volumes, preprocess, 2);

    PredictionSet set;
    set.model_id = fs::path(a.ckpt).stem().string();
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        set.rows.emplace_back(manifest.entries[i].path, probs[i]);
    }
    ensure_parent(a.out);
    write_predictions(fs::path(a.out), set);
    out << "wrote " << set.rows.size() << " predictions to " << a.out << '\n';
    return exit_ok;
}

std::vector<double> scores_of(const PredictionSet& set) {
    std::vector<double> scores;
    scores.reserve(set.rows.size());
    for (const auto& r : set.rows) {
        scores.push_back(r.second);
    }
    return scores;
}

void report(const PredictionSet& set, const Manifest& manifest, const std::optional<YoudenPoint>& cutoff,
            const std::string& roc_out, std::ostream& out) {
    set.validate();
    const std::vector<int> labels = aligned_labels(set, manifest);
    const std::vector<double> scores = scores_of(set);
    out << format_report(cutoff ? evaluate(scores, labels, *cutoff) : evaluate(scores, labels));
    if (!roc_out.empty()) {
        auto f = open_output(roc_out);
        write_roc_csv(f, roc_curve(scores, labels));
    }
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const Manifest manifest = load_manifest(a.manifest);
    std::optional<YoudenPoint> cutoff;
    if (!a.val_pred.empty()) {
        if (a.val_manifest.empty()) {
            throw ArgumentError("--val-pred needs --val-manifest");
        }
        const PredictionSet val = read_predictions(a.val_pred);
        val.validate();
        const std::vector<int> val_labels = aligned_labels(val, load_manifest(a.val_manifest));
        cutoff = youden_threshold(roc_curve(scores_of(val), val_labels));
    }
    report(read_predictions(a.preds.front()), manifest, cutoff, a.roc_out, out);
    return exit_ok;
}

int cmd_fuse(const EvalArgs& a, std::ostream& out) {
    if (a.preds.size() < 2) {
        throw ArgumentError("fuse needs at least two --pred files");
    }
    const Manifest manifest = load_manifest(a.manifest);
    std::vector<PredictionSet> sets;
    for (const auto& p : a.preds) {
        sets.push_back(read_predictions(p));
    }
    const PredictionSet fused = fuse(sets);
    ensure_parent(a.out);
    write_predictions(fs::path(a.out), fused);
    report(fused, manifest, std::nullopt, a.roc_out, out);
    return exit_ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"3-D RegNet classifier for volumetric scans", "volnet"};
    app.require_subcommand(1);

    TrainArgs train;
    auto* t = app.add_subcommand("train", "train a model from a JSON run config");
    t->add_option("--config", train.config, "run config (JSON)")->required();
    t->add_option("--lr", train.overrides.learning_rate, "learning rate");
    t->add_option("--loss-weight", train.overrides.pos_weight, "positive-class loss weight");
    t->add_option("--optimizer", train.overrides.optimizer, "sgd | adam | novograd");
    t->add_option("--seed", train.overrides.seed, "random seed");
    t->add_option("--epochs", train.overrides.epochs, "number of epochs");
    t->add_option("--batch-size", train.overrides.batch_size, "samples per step");
    t->add_option("--train-manifest", train.overrides.train_manifest, "training manifest CSV");
    t->add_option("--out-dir", train.overrides.output_dir, "output directory");
    t->add_option("--resume", train.resume, "continue from this checkpoint");

    PredictArgs predict;
    auto* p = app.add_subcommand("predict", "write per-sample probabilities");
    p->add_option("--ckpt", predict.ckpt, "checkpoint")->required();
    p->add_option("--manifest", predict.manifest, "manifest CSV")->required();
    p->add_option("--out", predict.out, "prediction CSV to write")->required();
    p->add_option("--config", predict.config, "run config (default: config.json next to the checkpoint)");

    EvalArgs eval;
    auto* e = app.add_subcommand("eval", "score a prediction file");
    e->add_option("--pred", eval.preds, "prediction CSV")->required()->expected(1);
    e->add_option("--manifest", eval.manifest, "manifest CSV with labels")->required();
    e->add_option("--roc-out", eval.roc_out, "ROC curve CSV to write");
    e->add_option("--val-pred", eval.val_pred, "pick the cut-off on this validation prediction CSV instead");
    e->add_option("--val-manifest", eval.val_manifest, "labels for --val-pred");

    EvalArgs fuse_args;
    auto* f = app.add_subcommand("fuse", "average several prediction files and score the result");
    f->add_option("--pred", fuse_args.preds, "prediction CSV (repeat)")->required()->take_all();
    f->add_option("--manifest", fuse_args.manifest, "manifest CSV with labels")->required();
    f->add_option("--out", fuse_args.out, "fused prediction CSV to write")->required();
    f->add_option("--roc-out", fuse_args.roc_out, "ROC curve CSV to write");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (t->parsed()) return cmd_train(train, out);
        if (p->parsed()) return cmd_predict(predict, out);
        if (e->parsed()) return cmd_eval(eval, out);
        return cmd_fuse(fuse_args, out);
    } catch (const NumericError& ex) {
        err << "error: " << ex.what() << '\n';
        return exit_numeric;
    } catch (const Error& ex) {
        err << "error: " << ex.what() << '\n';
        return exit_usage;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return exit_failure;
    }
}

}  // namespace volnet
