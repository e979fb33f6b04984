#include "kix/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "kix/errors.hpp"

namespace kix {

namespace {

thread_local bool g_grad_enabled = true;

long shape_numel(const std::vector<int>& shape) {
    long n = 1;
    for (int e : shape) n *= e;
    return n;
}

void check_shape(const std::vector<int>& shape) {
    for (int e : shape) {
        if (e <= 0) throw NumericError("tensor shape has non-positive extent " + shape_string(shape));
    }
}

void ensure_grad_buffer(TensorNode& n) {
    if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

std::string shape_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(const std::vector<int>& shape, bool requires_grad) {
    return from_data(shape, std::vector<double>(shape_numel(shape), 0.0), requires_grad);
}

Tensor Tensor::full(const std::vector<int>& shape, double fill, bool requires_grad) {
    return from_data(shape, std::vector<double>(shape_numel(shape), fill), requires_grad);
}

Tensor Tensor::from_data(const std::vector<int>& shape, std::vector<double> data, bool requires_grad) {
    check_shape(shape);
    if (static_cast<long>(data.size()) != shape_numel(shape)) {
        throw NumericError("tensor data size " + std::to_string(data.size()) +
                           " does not match shape " + shape_string(shape));
    }
    auto node = std::make_shared<TensorNode>();
    node->shape = shape;
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

const std::vector<int>& Tensor::shape() const { return node_->shape; }

int Tensor::extent(int axis) const { return node_->shape.at(axis); }

long Tensor::numel() const { return static_cast<long>(node_->value.size()); }

const std::vector<double>& Tensor::value() const { return node_->value; }

std::vector<double>& Tensor::data() { return node_->value; }

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) throw NumericError("tensor has no gradient buffer; run backward first");
    return node_->grad;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }

bool Tensor::requires_grad() const { return node_->requires_grad; }

double Tensor::item() const {
    if (numel() != 1) throw NumericError("item() on tensor of shape " + shape_string(shape()));
    return node_->value[0];
}

double Tensor::at(int i) const {
    if (ndim() != 1) throw NumericError("at(i) on tensor of shape " + shape_string(shape()));
    return node_->value.at(i);
}

double Tensor::at(int i, int j) const {
    if (ndim() != 2) throw NumericError("at(i,j) on tensor of shape " + shape_string(shape()));
    return node_->value.at(static_cast<size_t>(i) * shape()[1] + j);
}

Tensor make_op(std::vector<int> shape, std::vector<double> value, std::vector<Tensor> parents,
               std::function<void(TensorNode&)> backward_fn) {
    check_shape(shape);
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    bool need = false;
    if (g_grad_enabled) {
        for (const Tensor& p : parents) {
            if (p.node() && p.node()->requires_grad) {
                need = true;
                break;
            }
        }
    }
    if (need) {
        node->requires_grad = true;
        node->parents.reserve(parents.size());
        for (Tensor& p : parents) node->parents.push_back(p.node());
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw NumericError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                           " vs " + shape_string(b.shape()));
    }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.value());
    const auto& bv = b.value();
    for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
        for (int p = 0; p < 2; ++p) {
            TensorNode& par = *self.parents[p];
            if (!par.requires_grad) continue;
            ensure_grad_buffer(par);
            for (size_t i = 0; i < self.grad.size(); ++i) par.grad[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.value());
    const auto& bv = b.value();
    for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        if (pa.requires_grad) {
            ensure_grad_buffer(pa);
            for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
        }
        TensorNode& pb = *self.parents[1];
        if (pb.requires_grad) {
            ensure_grad_buffer(pb);
            for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.value());
    const auto& bv = b.value();
    for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        TensorNode& pb = *self.parents[1];
        if (pa.requires_grad) {
            ensure_grad_buffer(pa);
            for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
            ensure_grad_buffer(pb);
            for (size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.value[i];
        }
    });
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.value());
    for (double& v : out) v += c;
    return make_op(a.shape(), std::move(out), {a}, [](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        ensure_grad_buffer(pa);
        for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    });
}

Tensor mul_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.value());
    for (double& v : out) v *= c;
    return make_op(a.shape(), std::move(out), {a}, [c](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        ensure_grad_buffer(pa);
        for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * c;
    });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor exp_t(const Tensor& a) {
    std::vector<double> out(a.value());
    for (double& v : out) v = std::exp(v);
    return make_op(a.shape(), std::move(out), {a}, [](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        ensure_grad_buffer(pa);
        for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * self.value[i];
    });
}

Tensor log_t(const Tensor& a) {
    std::vector<double> out(a.value());
    for (double& v : out) {
        if (v <= 0.0) throw NumericError("log of non-positive value " + std::to_string(v));
        v = std::log(v);
    }
    return make_op(a.shape(), std::move(out), {a}, [](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        ensure_grad_buffer(pa);
        for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] / pa.value[i];
    });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.value()) s += v;
    return make_op({1}, {s}, {a}, [](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        ensure_grad_buffer(pa);
        for (size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += self.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    double s = 0.0;
    for (double v : a.value()) s += v;
    const double inv = 1.0 / static_cast<double>(a.numel());
    return make_op({1}, {s * inv}, {a}, [inv](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        ensure_grad_buffer(pa);
        for (size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += self.grad[0] * inv;
    });
}

Tensor add_n(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw NumericError("add_n of empty tensor list");
    std::vector<double> out(xs[0].value());
    for (size_t t = 1; t < xs.size(); ++t) {
        require_same_shape(xs[0], xs[t], "add_n");
        const auto& v = xs[t].value();
        for (size_t i = 0; i < out.size(); ++i) out[i] += v[i];
    }
    return make_op(xs[0].shape(), std::move(out), xs, [](TensorNode& self) {
        for (auto& par : self.parents) {
            if (!par->requires_grad) continue;
            ensure_grad_buffer(*par);
            for (size_t i = 0; i < self.grad.size(); ++i) par->grad[i] += self.grad[i];
        }
    });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "minimum");
    const auto& av = a.value();
    const auto& bv = b.value();
    std::vector<double> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::min(av[i], bv[i]);
    return make_op(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        TensorNode& pb = *self.parents[1];
        if (pa.requires_grad) ensure_grad_buffer(pa);
        if (pb.requires_grad) ensure_grad_buffer(pb);
        for (size_t i = 0; i < self.grad.size(); ++i) {
            const bool take_a = pa.value[i] <= pb.value[i];
            if (take_a && pa.requires_grad) pa.grad[i] += self.grad[i];
            if (!take_a && pb.requires_grad) pb.grad[i] += self.grad[i];
        }
    });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (lo > hi) throw NumericError("clamp with lo > hi");
    std::vector<double> out(a.value());
    for (double& v : out) v = std::min(std::max(v, lo), hi);
    return make_op(a.shape(), std::move(out), {a}, [lo, hi](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        ensure_grad_buffer(pa);
        for (size_t i = 0; i < self.grad.size(); ++i) {
            if (pa.value[i] >= lo && pa.value[i] <= hi) pa.grad[i] += self.grad[i];
        }
    });
}

Tensor reshape(const Tensor& a, const std::vector<int>& shape) {
    check_shape(shape);
    if (shape_numel(shape) != a.numel()) {
        throw NumericError("reshape from " + shape_string(a.shape()) + " to " + shape_string(shape) +
                           " changes element count");
    }
    return make_op(shape, a.value(), {a}, [](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        ensure_grad_buffer(pa);
        for (size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    });
}

Tensor pick(const Tensor& a, long flat_index) {
    if (flat_index < 0 || flat_index >= a.numel()) {
        throw NumericError("pick index " + std::to_string(flat_index) + " out of range for " +
                           shape_string(a.shape()));
    }
    return make_op({1}, {a.value()[flat_index]}, {a}, [flat_index](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        ensure_grad_buffer(pa);
        pa.grad[flat_index] += self.grad[0];
    });
}

Tensor stack_scalars(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw NumericError("stack_scalars needs at least one input");
    std::vector<double> out(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) {
        if (xs[i].numel() != 1) {
            throw NumericError("stack_scalars input " + std::to_string(i) + " has shape " +
                               shape_string(xs[i].shape()) + ", expected a single element");
        }
        out[i] = xs[i].value()[0];
    }
    return make_op({static_cast<int>(xs.size())}, std::move(out), xs, [](TensorNode& self) {
        for (size_t i = 0; i < self.parents.size(); ++i) {
            TensorNode& p = *self.parents[i];
            if (!p.requires_grad) continue;
            ensure_grad_buffer(p);
            p.grad[0] += self.grad[i];
        }
    });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& rows) {
    if (a.ndim() != 2) throw NumericError("gather_rows expects 2-D tensor, got " + shape_string(a.shape()));
    const int n = a.extent(0);
    const int f = a.extent(1);
    std::vector<double> out(rows.size() * static_cast<size_t>(f));
    for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] < 0 || rows[r] >= n) {
            throw NumericError("gather_rows index " + std::to_string(rows[r]) + " out of range [0," +
                               std::to_string(n) + ")");
        }
        const double* src = a.value().data() + static_cast<size_t>(rows[r]) * f;
        std::copy(src, src + f, out.begin() + r * f);
    }
    return make_op({static_cast<int>(rows.size()), f}, std::move(out), {a},
                   [rows, f](TensorNode& self) {
                       TensorNode& pa = *self.parents[0];
                       if (!pa.requires_grad) return;
                       ensure_grad_buffer(pa);
                       for (size_t r = 0; r < rows.size(); ++r) {
                           double* dst = pa.grad.data() + static_cast<size_t>(rows[r]) * f;
                           const double* g = self.grad.data() + r * f;
                           for (int i = 0; i < f; ++i) dst[i] += g[i];
                       }
                   });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2) {
        throw NumericError("matmul expects 2-D tensors, got " + shape_string(a.shape()) + " and " +
                           shape_string(b.shape()));
    }
    const int m = a.extent(0), k = a.extent(1);
    const int k2 = b.extent(0), n = b.extent(1);
    if (k != k2) {
        throw NumericError("matmul inner extent mismatch: " + shape_string(a.shape()) + " vs " +
                           shape_string(b.shape()));
    }
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    const auto& av = a.value();
    const auto& bv = b.value();
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
            const double s = av[static_cast<size_t>(i) * k + l];
            if (s == 0.0) continue;
            const double* brow = bv.data() + static_cast<size_t>(l) * n;
            double* orow = out.data() + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += s * brow[j];
        }
    }
    return make_op({m, n}, std::move(out), {a, b}, [m, k, n](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        TensorNode& pb = *self.parents[1];
        if (pa.requires_grad) {
            ensure_grad_buffer(pa);
            // dA = dY * B^T
            for (int i = 0; i < m; ++i) {
                for (int l = 0; l < k; ++l) {
                    double acc = 0.0;
                    const double* g = self.grad.data() + static_cast<size_t>(i) * n;
                    const double* brow = pb.value.data() + static_cast<size_t>(l) * n;
                    for (int j = 0; j < n; ++j) acc += g[j] * brow[j];
                    pa.grad[static_cast<size_t>(i) * k + l] += acc;
                }
            }
        }
        if (pb.requires_grad) {
            ensure_grad_buffer(pb);
            // dB = A^T * dY
            for (int i = 0; i < m; ++i) {
                const double* arow = pa.value.data() + static_cast<size_t>(i) * k;
                const double* g = self.grad.data() + static_cast<size_t>(i) * n;
                for (int l = 0; l < k; ++l) {
                    if (arow[l] == 0.0) continue;
                    double* brow = pb.grad.data() + static_cast<size_t>(l) * n;
                    for (int j = 0; j < n; ++j) brow[j] += arow[l] * g[j];
                }
            }
        }
    });
}

void backward(const Tensor& loss) {
    if (!loss.defined()) throw NumericError("backward on undefined tensor");
    TensorNode* root = loss.node().get();
    if (loss.numel() != 1) throw NumericError("backward requires a scalar loss, got " + shape_string(loss.shape()));
    if (!std::isfinite(loss.item())) throw NumericError("backward on non-finite loss");
    if (root->backward_ran) throw NumericError("backward called twice on the same graph; rerun the forward pass");
    root->backward_ran = true;
    if (!root->requires_grad) return;  // nothing reachable

    // Iterative post-order DFS; deterministic because parents are visited in
    // their stored order.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    struct Frame {
        TensorNode* node;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root, 0});
    seen.insert(root);
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            TensorNode* p = f.node->parents[f.next_parent++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    for (TensorNode* n : order) {
        n->grad.assign(n->value.size(), 0.0);
    }
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

}  // namespace kix
