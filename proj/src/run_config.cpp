// SPDX-License-Identifier: Apache-2.0
#include "volnet/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace volnet {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate(bool require_inputs) const {
    architecture.validate();
    optimizer.validate();
    loss.validate();
    preprocess.validate();
    if (batch_size == 0) {
        throw ConfigError("batch_size must be at least 1");
    }
    if (architecture.num_classes != 1) {
        throw ConfigError("num_classes must be 1 for the binary classifier");
    }
    if (require_inputs) {
        if (train_manifest.empty()) {
            throw ConfigError("data.train_manifest is required");
        }
        if (!fs::is_regular_file(train_manifest)) {
            throw ConfigError("training manifest not found: " + train_manifest.string());
        }
    }
}

TrainerConfig RunConfig::trainer_config() const {
    TrainerConfig t;
    t.optimizer = optimizer;
    t.loss = loss;
    t.preprocess = preprocess;
    t.batch_size = batch_size;
    t.seed = seed;
    return t;
}

namespace {

class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError(where() + " must be an object");
        }
    }

    bool has(const char* key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const json& get(const char* key) const { return j_.at(key); }

    double number(const char* key, double fallback) {
        if (!has(key)) {
            return fallback;
        }
        const json& v = j_.at(key);
        if (!v.is_number()) {
            throw ConfigError(where(key) + " must be a number");
        }
        return v.get<double>();
    }

    std::uint64_t count(const char* key, std::uint64_t fallback) {
        if (!has(key)) {
            return fallback;
        }
        return as_count(j_.at(key), where(key));
    }

    bool boolean(const char* key, bool fallback) {
        if (!has(key)) {
            return fallback;
        }
        const json& v = j_.at(key);
        if (!v.is_boolean()) {
            throw ConfigError(where(key) + " must be true or false");
        }
        return v.get<bool>();
    }

    std::string string(const char* key, const std::string& fallback) {
        if (!has(key)) {
            return fallback;
        }
        const json& v = j_.at(key);
        if (!v.is_string()) {
            throw ConfigError(where(key) + " must be a string");
        }
        return v.get<std::string>();
    }

    std::vector<std::size_t> counts(const char* key, const std::vector<std::size_t>& fallback) {
        if (!has(key)) {
            return fallback;
        }
        const json& v = j_.at(key);
        if (!v.is_array()) {
            throw ConfigError(where(key) + " must be an array");
        }
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            out.push_back(as_count(v[i], where(key) + "[" + std::to_string(i) + "]"));
        }
        return out;
    }

    Extent3 extent(const char* key, const Extent3& fallback) {
        if (!has(key)) {
            return fallback;
        }
        auto v = counts(key, {});
        if (v.size() != 3) {
            throw ConfigError(where(key) + " must list three extents [D, H, W]");
        }
        return {v[0], v[1], v[2]};
    }

    void reject_unknown() const {
        for (const auto& item : j_.items()) {
            if (!seen_.contains(item.key())) {
                throw ConfigError("unknown key " + where(item.key().c_str()));
            }
        }
    }

    std::string where(const char* key = nullptr) const {
        std::string p = path_;
        if (key != nullptr) {
            p += p.empty() ? key : "." + std::string(key);
        }
        return p.empty() ? "config" : "'" + p + "'";
    }

private:
    static std::uint64_t as_count(const json& v, const std::string& where) {
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            throw ConfigError(where + " must be a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

fs::path resolve_path(const std::string& p, const fs::path& base) {
    fs::path path(p);
    if (path.is_relative()) {
        path = base / path;
    }
    return path.lexically_normal();
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir, const std::string& source_name,
                           const RunConfigOverrides& ov) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(source_name + ": invalid JSON: " + e.what());
    }
    if (!root.is_object()) {
        throw ConfigError(source_name + ": top level must be an object");
    }

    // Flag overrides are applied to the document so they go through the same checks.
    if (ov.learning_rate) root["optimizer"]["learning_rate"] = *ov.learning_rate;
    if (ov.pos_weight) root["loss"]["pos_weight"] = *ov.pos_weight;
    if (ov.optimizer) root["optimizer"]["kind"] = *ov.optimizer;
    if (ov.seed) root["seed"] = *ov.seed;
    if (ov.epochs) root["epochs"] = *ov.epochs;
    if (ov.batch_size) root["batch_size"] = *ov.batch_size;
    if (ov.train_manifest) root["data"]["train_manifest"] = fs::absolute(*ov.train_manifest).string();
    if (ov.output_dir) root["output_dir"] = fs::absolute(*ov.output_dir).string();

    RunConfig rc;
    try {
        Section top(root, "");
        if (top.has("architecture")) {
            Section a(top.get("architecture"), "architecture");
            RegNetConfig& arch = rc.architecture;
            arch.stage_depths = a.counts("stage_depths", arch.stage_depths);
            arch.stage_widths = a.counts("stage_widths", arch.stage_widths);
            arch.group_widths = a.counts("group_widths", arch.group_widths);
            arch.bottleneck_ratio = a.number("bottleneck_ratio", arch.bottleneck_ratio);
            arch.stem_width = a.count("stem_width", arch.stem_width);
            arch.num_classes = a.count("num_classes", arch.num_classes);
            a.reject_unknown();
        }
        if (top.has("optimizer")) {
            Section o(top.get("optimizer"), "optimizer");
            const std::string kind_name = o.string("kind", to_string(rc.optimizer.kind));
            OptimizerKind kind;
            try {
                kind = parse_optimizer_kind(kind_name);
            } catch (const Error& e) {
                throw ConfigError(o.where("kind") + ": " + e.what());
            }
            const OptimizerConfig d = OptimizerConfig::defaults(kind, rc.optimizer.learning_rate);
            OptimizerConfig& opt = rc.optimizer;
            opt.kind = kind;
            opt.learning_rate = o.number("learning_rate", d.learning_rate);
            opt.momentum = o.number("momentum", d.momentum);
            opt.beta1 = o.number("beta1", d.beta1);
            opt.beta2 = o.number("beta2", d.beta2);
            opt.epsilon = o.number("epsilon", d.epsilon);
            opt.weight_decay = o.number("weight_decay", d.weight_decay);
            o.reject_unknown();
        }
        if (top.has("loss")) {
            Section l(top.get("loss"), "loss");
            rc.loss.pos_weight = l.number("pos_weight", rc.loss.pos_weight);
            l.reject_unknown();
        }
        if (top.has("data")) {
            Section d(top.get("data"), "data");
            PreprocessConfig& p = rc.preprocess;
            if (d.has("train_manifest")) {
                rc.train_manifest = resolve_path(d.string("train_manifest", ""), base_dir);
            }
            p.input_size = d.extent("input_size", p.input_size);
            p.train_crop = d.extent("train_crop", p.train_crop);
            if (d.has("crop_fractions")) {
                Section c(d.get("crop_fractions"), "data.crop_fractions");
                p.crop.depth_low = c.number("depth_low", p.crop.depth_low);
                p.crop.depth_high = c.number("depth_high", p.crop.depth_high);
                p.crop.height_low = c.number("height_low", p.crop.height_low);
                p.crop.height_high = c.number("height_high", p.crop.height_high);
                p.crop.width_low = c.number("width_low", p.crop.width_low);
                p.crop.width_high = c.number("width_high", p.crop.width_high);
                c.reject_unknown();
            }
            if (d.has("contrast_percentiles")) {
                const json& v = d.get("contrast_percentiles");
                if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
                    throw ConfigError(d.where("contrast_percentiles") + " must be [low, high]");
                }
                p.contrast_low = v[0].get<double>();
                p.contrast_high = v[1].get<double>();
            }
            p.augment = d.boolean("augment", p.augment);
            p.flip_probability = d.number("flip_probability", p.flip_probability);
            d.reject_unknown();
        }
        rc.seed = top.count("seed", rc.seed);
        rc.epochs = top.count("epochs", rc.epochs);
        rc.batch_size = top.count("batch_size", rc.batch_size);
        if (top.has("output_dir")) {
            rc.output_dir = resolve_path(top.string("output_dir", ""), base_dir);
        } else {
            rc.output_dir = resolve_path(rc.output_dir.string(), base_dir);
        }
        top.reject_unknown();
        rc.validate(false);
    } catch (const ConfigError& e) {
        throw ConfigError(source_name + ": " + e.what());
    } catch (const Error& e) {
        throw ConfigError(source_name + ": " + e.what());
    }
    return rc;
}

RunConfig load_run_config(const fs::path& path, const RunConfigOverrides& overrides) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str(), fs::absolute(path).parent_path(), path.string(), overrides);
}

std::string run_config_to_json(const RunConfig& rc) {
    const auto& a = rc.architecture;
    const auto& o = rc.optimizer;
    const auto& p = rc.preprocess;
    json j;
    j["architecture"] = {{"stage_depths", a.stage_depths},   {"stage_widths", a.stage_widths},
                         {"group_widths", a.group_widths},   {"bottleneck_ratio", a.bottleneck_ratio},
                         {"stem_width", a.stem_width},       {"num_classes", a.num_classes}};
    j["optimizer"] = {{"kind", to_string(o.kind)}, {"learning_rate", o.learning_rate},
                      {"momentum", o.momentum},    {"beta1", o.beta1},
                      {"beta2", o.beta2},          {"epsilon", o.epsilon},
                      {"weight_decay", o.weight_decay}};
    j["loss"] = {{"pos_weight", rc.loss.pos_weight}};
    j["data"] = {
        {"input_size", p.input_size},
        {"train_crop", p.train_crop},
        {"crop_fractions",
         {{"depth_low", p.crop.depth_low},
          {"depth_high", p.crop.depth_high},
          {"height_low", p.crop.height_low},
          {"height_high", p.crop.height_high},
          {"width_low", p.crop.width_low},
          {"width_high", p.crop.width_high}}},
        {"contrast_percentiles", {p.contrast_low, p.contrast_high}},
        {"augment", p.augment},
        {"flip_probability", p.flip_probability},
    };
    if (!rc.train_manifest.empty()) {
        j["data"]["train_manifest"] = fs::absolute(rc.train_manifest).string();
    }
    j["seed"] = rc.seed;
    j["epochs"] = rc.epochs;
    j["batch_size"] = rc.batch_size;
    j["output_dir"] = fs::absolute(rc.output_dir).string();
    return j.dump(2) + "\n";
}

}  // namespace volnet
