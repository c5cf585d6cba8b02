// SPDX-License-Identifier: Apache-2.0
#include "volnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>

namespace volnet {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'V', 'N', 'T', '1'};

class Writer {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    void tensor_section(const std::vector<NamedTensor>& tensors) {
        u32(checked_u32(tensors.size()));
        for (const auto& t : tensors) {
            u32(checked_u32(t.name.size()));
            bytes(t.name.data(), t.name.size());
            u32(checked_u32(t.tensor.rank()));
            for (std::size_t e : t.tensor.shape()) {
                u32(checked_u32(e));
            }
            for (float v : t.tensor.data()) {
                u32(std::bit_cast<std::uint32_t>(v));
            }
        }
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    static std::uint32_t checked_u32(std::size_t v) {
        if (v > UINT32_MAX) {
            throw CheckpointError(CheckpointErrc::malformed, "value does not fit the checkpoint's u32 field");
        }
        return static_cast<std::uint32_t>(v);
    }
    void put(std::uint64_t v, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            out_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
        }
    }
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::vector<NamedTensor> tensor_section() {
        const std::uint32_t count = u32();
        std::vector<NamedTensor> out;
        for (std::uint32_t i = 0; i < count; ++i) {
            NamedTensor t;
            t.name = str(u32());
            const std::uint32_t rank = u32();
            if (rank > 16) {
                throw CheckpointError(CheckpointErrc::malformed, "tensor '" + t.name + "' has implausible rank");
            }
            Shape shape(rank);
            for (auto& e : shape) {
                e = u32();
            }
            std::size_t n = 0;
            try {
                n = shape_product(shape);
            } catch (const SizeError&) {
                throw CheckpointError(CheckpointErrc::malformed, "tensor '" + t.name + "' is too large");
            }
            need(n * 4);
            std::vector<float> data(n);
            for (auto& v : data) {
                v = std::bit_cast<float>(u32());
            }
            t.tensor = Tensor(std::move(shape), std::move(data));
            out.push_back(std::move(t));
        }
        return out;
    }
    bool at_end() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) {
            throw CheckpointError(CheckpointErrc::truncated, "checkpoint is truncated");
        }
    }
    std::uint64_t get(std::size_t n) {
        need(n);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
        }
        pos_ += n;
        return v;
    }
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
    Writer w;
    w.bytes(kMagic, 4);
    w.u32(kCheckpointVersion);

    const RegNetConfig& a = c.architecture;
    w.u32(static_cast<std::uint32_t>(a.num_stages()));
    for (auto* list : {&a.stage_depths, &a.stage_widths, &a.group_widths}) {
        if (list->size() != a.num_stages()) {
            throw CheckpointError(CheckpointErrc::malformed, "architecture lists differ in length");
        }
        for (std::size_t v : *list) {
            w.u32(static_cast<std::uint32_t>(v));
        }
    }
    w.f64(a.bottleneck_ratio);
    w.u32(static_cast<std::uint32_t>(a.stem_width));
    w.u32(static_cast<std::uint32_t>(a.num_classes));
    w.u32(static_cast<std::uint32_t>(a.input_channels));

    const OptimizerConfig& o = c.optimizer;
    w.u32(static_cast<std::uint32_t>(o.kind));
    w.f64(o.learning_rate);
    w.f64(o.momentum);
    w.f64(o.beta1);
    w.f64(o.beta2);
    w.f64(o.epsilon);
    w.f64(o.weight_decay);
    w.u64(c.optimizer_step);

    w.u64(c.epoch);
    w.u64(c.rng_state);
    w.tensor_section(c.parameters);
    w.tensor_section(c.buffers);
    w.tensor_section(c.optimizer_first);
    w.tensor_section(c.optimizer_second);
    return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) {
        throw CheckpointError(CheckpointErrc::truncated, "checkpoint is truncated");
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw CheckpointError(CheckpointErrc::bad_magic, "not a VNT1 checkpoint");
    }
    Reader r(bytes.subspan(4));
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw CheckpointError(CheckpointErrc::version_mismatch,
                              "checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                  std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint c;
    RegNetConfig& a = c.architecture;
    const std::uint32_t stages = r.u32();
    if (stages > 1024) {
        throw CheckpointError(CheckpointErrc::malformed, "implausible stage count");
    }
    for (auto* list : {&a.stage_depths, &a.stage_widths, &a.group_widths}) {
        list->resize(stages);
        for (auto& v : *list) {
            v = r.u32();
        }
    }
    a.bottleneck_ratio = r.f64();
    a.stem_width = r.u32();
    a.num_classes = r.u32();
    a.input_channels = r.u32();

    OptimizerConfig& o = c.optimizer;
    const std::uint32_t kind = r.u32();
    if (kind > static_cast<std::uint32_t>(OptimizerKind::novograd)) {
        throw CheckpointError(CheckpointErrc::malformed, "unknown optimizer kind " + std::to_string(kind));
    }
    o.kind = static_cast<OptimizerKind>(kind);
    o.learning_rate = r.f64();
    o.momentum = r.f64();
    o.beta1 = r.f64();
    o.beta2 = r.f64();
    o.epsilon = r.f64();
    o.weight_decay = r.f64();
    c.optimizer_step = r.u64();

    c.epoch = r.u64();
    c.rng_state = r.u64();
    c.parameters = r.tensor_section();
    c.buffers = r.tensor_section();
    c.optimizer_first = r.tensor_section();
    c.optimizer_second = r.tensor_section();
    if (!r.at_end()) {
        throw CheckpointError(CheckpointErrc::malformed, "trailing bytes after checkpoint payload");
    }
    return c;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
    const auto bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw CheckpointError(CheckpointErrc::io, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw CheckpointError(CheckpointErrc::io, "write failed for " + path.string());
    }
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError(CheckpointErrc::io, "cannot open " + path.string());
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

Checkpoint make_checkpoint(const Model& model, const OptimizerConfig& optimizer, const OptimizerState<float>& state,
                           std::uint64_t epoch, std::uint64_t rng_state) {
    Checkpoint c;
    c.architecture = model.config();
    c.optimizer = optimizer;
    c.optimizer_step = state.step;
    c.epoch = epoch;
    c.rng_state = rng_state;
    const auto params = model.parameters();
    for (const auto& p : params) {
        c.parameters.push_back({p.name, *p.tensor});
        c.parameters.back().tensor.drop_grad();
    }
    for (const auto& b : model.buffers()) {
        c.buffers.push_back({b.name, *b.tensor});
    }
    for (std::size_t i = 0; i < state.first.size(); ++i) {
        c.optimizer_first.push_back({params.at(i).name, state.first[i]});
    }
    for (std::size_t i = 0; i < state.second.size(); ++i) {
        c.optimizer_second.push_back({params.at(i).name, state.second[i]});
    }
    return c;
}

namespace {

void copy_named(const std::vector<NamedTensor>& src, const std::vector<NamedRef<Tensor>>& dst, const char* what) {
    std::unordered_map<std::string, const Tensor*> by_name;
    for (const auto& t : src) {
        by_name.emplace(t.name, &t.tensor);
    }
    if (by_name.size() != dst.size() || src.size() != dst.size()) {
        throw CheckpointError(CheckpointErrc::malformed, std::string(what) + ": checkpoint holds " +
                                                             std::to_string(src.size()) + " tensors, model expects " +
                                                             std::to_string(dst.size()));
    }
    for (const auto& d : dst) {
        auto it = by_name.find(d.name);
        if (it == by_name.end()) {
            throw CheckpointError(CheckpointErrc::malformed, std::string(what) + ": missing tensor '" + d.name + "'");
        }
        if (it->second->shape() != d.tensor->shape()) {
            throw CheckpointError(CheckpointErrc::malformed, std::string(what) + ": tensor '" + d.name +
                                                                 "' has shape " + shape_to_string(it->second->shape()) +
                                                                 ", model expects " + shape_to_string(d.tensor->shape()));
        }
        *d.tensor = *it->second;
    }
}

std::vector<Tensor> slots_in_parameter_order(const std::vector<NamedTensor>& src, const Model& model,
                                             const char* what) {
    std::vector<Tensor> out;
    if (src.empty()) {
        return out;
    }
    const auto params = model.parameters();
    if (src.size() != params.size()) {
        throw CheckpointError(CheckpointErrc::malformed, std::string(what) + ": slot count does not match parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (src[i].name != params[i].name) {
            throw CheckpointError(CheckpointErrc::malformed,
                                  std::string(what) + ": slot '" + src[i].name + "' out of order");
        }
        out.push_back(src[i].tensor);
    }
    return out;
}

}  // namespace

Model restore_model(const Checkpoint& ckpt) {
    try {
        ckpt.architecture.validate();
    } catch (const ConfigError& e) {
        throw CheckpointError(CheckpointErrc::malformed, std::string("stored architecture is invalid: ") + e.what());
    }
    Rng scratch(0);
    Model model = Model::build(ckpt.architecture, scratch);
    copy_named(ckpt.parameters, model.parameters(), "parameters");
    copy_named(ckpt.buffers, model.buffers(), "buffers");
    return model;
}

OptimizerState<float> restore_optimizer_state(const Checkpoint& ckpt, const Model& model) {
    OptimizerState<float> state;
    state.step = ckpt.optimizer_step;
    state.first = slots_in_parameter_order(ckpt.optimizer_first, model, "optimizer first moment");
    state.second = slots_in_parameter_order(ckpt.optimizer_second, model, "optimizer second moment");
    return state;
}

}  // namespace volnet
