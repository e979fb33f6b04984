#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "kix/rng.hpp"
#include "kix/tensor.hpp"

namespace kix {

// Named parameter collection with Adam state. Iteration order is insertion
// order everywhere (updates, gradient collection, serialization), which keeps
// every consumer deterministic.
//
// Parameter values are kept on the single-precision grid (each write rounds
// through float) while all arithmetic runs in double. Checkpoints store raw
// 32-bit floats, so save -> load restores values bit-exactly.
class ParamSet {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
        std::vector<double> m;  // Adam first moment
        std::vector<double> v;  // Adam second moment
    };

    // Adds a zero-initialized parameter. Names must be unique. Tensors are
    // returned by value (shared handles); entry storage may reallocate.
    Tensor add(const std::string& name, const std::vector<int>& shape);
    Tensor get(const std::string& name) const;
    bool contains(const std::string& name) const;

    size_t size() const { return entries_.size(); }
    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }

    std::int64_t adam_steps() const { return adam_steps_; }
    void set_adam_steps(std::int64_t t) { adam_steps_ = t; }

    // Zeroes gradient buffers of all parameters (stale grads from earlier
    // backward passes would otherwise leak into the next collection).
    void zero_grads();

    // Deep copy of values and optimizer state (tensors are cloned, not shared).
    ParamSet clone() const;
    // Restores values and optimizer state from a snapshot with identical layout.
    void restore(const ParamSet& snapshot);

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, size_t> index_;
    std::int64_t adam_steps_ = 0;
};

// Rounds a double onto the float32 grid.
inline double quantize_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

// Fills every parameter with U(-1/sqrt(fan_in), 1/sqrt(fan_in)) draws, where
// fan_in is supplied per parameter by name. Biases (fan_in 0) become zero.
void init_uniform_fan_in(ParamSet& params,
                         const std::unordered_map<std::string, int>& fan_in, Rng& rng);

// Runs backward from `loss` and returns gradients aligned with the parameter
// order. Parameters the loss does not reach get zero gradients.
std::vector<std::vector<double>> backward_gradients(const Tensor& loss, ParamSet& params);

// Global L2 norm over a gradient list.
double gradient_norm(const std::vector<std::vector<double>>& grads);
// Scales gradients in place so their global norm is at most max_norm.
void clip_gradient_norm(std::vector<std::vector<double>>& grads, double max_norm);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One Adam update with bias correction. `grads` must align with the parameter
// order. Throws NumericError on non-finite gradients.
void adam_step(ParamSet& params, const std::vector<std::vector<double>>& grads, const AdamConfig& cfg);

// --- Parameter blob serialization ---
//
// Layout (all integers little-endian):
//   u32 count, then per parameter: u32 name_len, name bytes, u32 ndim,
//   u32 dims..., u64 flat offset into the value blob; then the value blob as
//   raw 32-bit floats. Callers wrap this in a versioned, checksummed file.

void write_param_blob(std::ostream& os, const ParamSet& params);
// Validates names/shapes against the existing set and loads values.
void read_param_blob(std::istream& is, ParamSet& params);

}  // namespace kix
