#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace kix {

// Minimal reverse-mode automatic differentiation over dense row-major double
// tensors. Every operation allocates a fresh node; parameters are long-lived
// leaf nodes. Graphs are built per forward pass and freed when the last
// downstream Tensor handle goes out of scope.

struct TensorNode {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized lazily by backward()
    bool requires_grad = false;
    bool backward_ran = false;  // set on the loss node after a backward pass
    std::vector<std::shared_ptr<TensorNode>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(TensorNode&)> backward_fn;
};

// Thread-local gradient mode. Rollout workers run forwards with gradients
// disabled; only the single-threaded updater builds tapes.
bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
    NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
    ~NoGradGuard() { set_grad_enabled(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor zeros(const std::vector<int>& shape, bool requires_grad = false);
    static Tensor full(const std::vector<int>& shape, double fill, bool requires_grad = false);
    static Tensor from_data(const std::vector<int>& shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const;
    int ndim() const { return static_cast<int>(shape().size()); }
    int extent(int axis) const;
    long numel() const;

    const std::vector<double>& value() const;
    std::vector<double>& data();  // mutable access for parameter updates
    const std::vector<double>& grad() const;
    bool has_grad() const;
    bool requires_grad() const;

    double item() const;              // scalar tensors only
    double at(int i) const;           // 1-D
    double at(int i, int j) const;    // 2-D

    std::shared_ptr<TensorNode> node() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

// Creates an op result node. When gradients are disabled, or no parent needs
// them, the parents and backward function are dropped and the result is a
// plain constant.
Tensor make_op(std::vector<int> shape, std::vector<double> value,
               std::vector<Tensor> parents, std::function<void(TensorNode&)> backward_fn);

// --- Elementwise and reduction ops ---

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Sum of same-shaped tensors; summation order is the argument order.
Tensor add_n(const std::vector<Tensor>& xs);
// Elementwise min; ties route the gradient to the first argument.
Tensor minimum(const Tensor& a, const Tensor& b);
// Clamps into [lo, hi]; gradient passes where lo <= x <= hi (inclusive).
Tensor clamp(const Tensor& a, double lo, double hi);

// --- Shape and indexing ops ---

Tensor reshape(const Tensor& a, const std::vector<int>& shape);
// Picks one element by flat index; returns a scalar.
Tensor pick(const Tensor& a, long flat_index);
// Stacks n single-element tensors into a 1-D tensor of length n.
Tensor stack_scalars(const std::vector<Tensor>& xs);
// Gathers rows of a 2-D tensor; indices may repeat.
Tensor gather_rows(const Tensor& a, const std::vector<int>& rows);

// --- Linear algebra ---

// a: [m, k], b: [k, n] -> [m, n].
Tensor matmul(const Tensor& a, const Tensor& b);

// Runs reverse-mode accumulation from a finite scalar loss. Gradients of all
// reachable nodes with requires_grad are accumulated into their .grad.
// Calling backward twice on the same loss node is an error.
void backward(const Tensor& loss);

std::string shape_string(const std::vector<int>& shape);

}  // namespace kix
