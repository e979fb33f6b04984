#include "kix/optim.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "kix/errors.hpp"

namespace kix {

Tensor ParamSet::add(const std::string& name, const std::vector<int>& shape) {
    if (index_.count(name)) throw NumericError("duplicate parameter name: " + name);
    Entry e;
    e.name = name;
    e.tensor = Tensor::zeros(shape, /*requires_grad=*/true);
    e.m.assign(e.tensor.numel(), 0.0);
    e.v.assign(e.tensor.numel(), 0.0);
    index_[name] = entries_.size();
    entries_.push_back(std::move(e));
    return entries_.back().tensor;
}

Tensor ParamSet::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw NumericError("unknown parameter: " + name);
    return entries_[it->second].tensor;
}

bool ParamSet::contains(const std::string& name) const { return index_.count(name) > 0; }

void ParamSet::zero_grads() {
    for (Entry& e : entries_) {
        auto node = e.tensor.node();
        node->grad.assign(node->value.size(), 0.0);
        node->backward_ran = false;
    }
}

ParamSet ParamSet::clone() const {
    ParamSet out;
    for (const Entry& e : entries_) {
        Tensor t = out.add(e.name, e.tensor.shape());
        t.data() = e.tensor.value();
        out.entries_.back().m = e.m;
        out.entries_.back().v = e.v;
    }
    out.adam_steps_ = adam_steps_;
    return out;
}

void ParamSet::restore(const ParamSet& snapshot) {
    if (snapshot.entries_.size() != entries_.size()) throw NumericError("ParamSet::restore: layout mismatch");
    for (size_t i = 0; i < entries_.size(); ++i) {
        const Entry& src = snapshot.entries_[i];
        Entry& dst = entries_[i];
        if (src.name != dst.name || src.tensor.shape() != dst.tensor.shape()) {
            throw NumericError("ParamSet::restore: layout mismatch at " + dst.name);
        }
        dst.tensor.data() = src.tensor.value();
        dst.m = src.m;
        dst.v = src.v;
    }
    adam_steps_ = snapshot.adam_steps_;
}

void init_uniform_fan_in(ParamSet& params, const std::unordered_map<std::string, int>& fan_in, Rng& rng) {
    for (auto& e : params.entries()) {
        auto it = fan_in.find(e.name);
        if (it == fan_in.end()) throw NumericError("init_uniform_fan_in: no fan-in entry for " + e.name);
        auto& data = e.tensor.data();
        if (it->second <= 0) {
            std::fill(data.begin(), data.end(), 0.0);
            continue;
        }
        const double limit = 1.0 / std::sqrt(static_cast<double>(it->second));
        for (double& v : data) v = quantize_f32(rng.uniform(-limit, limit));
    }
}

std::vector<std::vector<double>> backward_gradients(const Tensor& loss, ParamSet& params) {
    params.zero_grads();
    backward(loss);
    std::vector<std::vector<double>> grads;
    grads.reserve(params.size());
    for (const auto& e : params.entries()) {
        if (e.tensor.has_grad()) {
            grads.push_back(e.tensor.grad());
        } else {
            grads.emplace_back(e.tensor.numel(), 0.0);
        }
    }
    return grads;
}

double gradient_norm(const std::vector<std::vector<double>>& grads) {
    double sq = 0.0;
    for (const auto& g : grads) {
        for (double v : g) sq += v * v;
    }
    return std::sqrt(sq);
}

void clip_gradient_norm(std::vector<std::vector<double>>& grads, double max_norm) {
    const double norm = gradient_norm(grads);
    if (norm <= max_norm || norm == 0.0) return;
    const double scale = max_norm / norm;
    for (auto& g : grads) {
        for (double& v : g) v *= scale;
    }
}

void adam_step(ParamSet& params, const std::vector<std::vector<double>>& grads, const AdamConfig& cfg) {
    if (grads.size() != params.size()) throw NumericError("adam_step: gradient list does not match parameter set");
    const std::int64_t t = params.adam_steps() + 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    auto& entries = params.entries();
    for (size_t p = 0; p < entries.size(); ++p) {
        auto& e = entries[p];
        const auto& g = grads[p];
        if (g.size() != e.tensor.value().size()) {
            throw NumericError("adam_step: gradient size mismatch for " + e.name);
        }
        auto& w = e.tensor.data();
        for (size_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g[i])) throw NumericError("adam_step: non-finite gradient in " + e.name);
            e.m[i] = cfg.beta1 * e.m[i] + (1.0 - cfg.beta1) * g[i];
            e.v[i] = cfg.beta2 * e.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = e.m[i] / bc1;
            const double vhat = e.v[i] / bc2;
            w[i] = quantize_f32(w[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
    params.set_adam_steps(t);
}

namespace {

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("parameter blob truncated");
    return v;
}

}  // namespace

void write_param_blob(std::ostream& os, const ParamSet& params) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    std::uint64_t offset = 0;
    for (const auto& e : params.entries()) {
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(e.tensor.shape().size()));
        for (int d : e.tensor.shape()) write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d));
        write_pod<std::uint64_t>(os, offset);
        offset += e.tensor.numel();
    }
    for (const auto& e : params.entries()) {
        for (double v : e.tensor.value()) {
            write_pod<float>(os, static_cast<float>(v));
        }
    }
}

void read_param_blob(std::istream& is, ParamSet& params) {
    const auto count = read_pod<std::uint32_t>(is);
    if (count != params.size()) {
        throw IoError("parameter blob holds " + std::to_string(count) + " tensors, expected " +
                      std::to_string(params.size()));
    }
    struct ManifestRow {
        std::string name;
        std::vector<int> shape;
        std::uint64_t offset;
    };
    std::vector<ManifestRow> manifest(count);
    for (auto& row : manifest) {
        const auto name_len = read_pod<std::uint32_t>(is);
        row.name.resize(name_len);
        is.read(row.name.data(), name_len);
        if (!is) throw IoError("parameter blob truncated");
        const auto ndim = read_pod<std::uint32_t>(is);
        row.shape.resize(ndim);
        for (auto& d : row.shape) d = static_cast<int>(read_pod<std::uint32_t>(is));
        row.offset = read_pod<std::uint64_t>(is);
    }
    std::uint64_t expected_offset = 0;
    auto& entries = params.entries();
    for (size_t p = 0; p < entries.size(); ++p) {
        const auto& row = manifest[p];
        auto& e = entries[p];
        if (row.name != e.name || row.shape != e.tensor.shape()) {
            throw IoError("parameter manifest mismatch: file has " + row.name + shape_string(row.shape) +
                          ", expected " + e.name + shape_string(e.tensor.shape()));
        }
        if (row.offset != expected_offset) throw IoError("parameter manifest offsets corrupt");
        expected_offset += e.tensor.numel();
    }
    for (auto& e : entries) {
        auto& data = e.tensor.data();
        for (double& v : data) {
            v = static_cast<double>(read_pod<float>(is));
        }
    }
}

}  // namespace kix
