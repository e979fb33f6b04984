#include "kix/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "kix/errors.hpp"

namespace kix {

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w.ndim() != 2) throw NumericError("linear_forward: weight must be 2-D, got " + shape_string(w.shape()));
    const int in = w.extent(0), out = w.extent(1);
    if (b.ndim() != 1 || b.extent(0) != out) {
        throw NumericError("linear_forward: bias " + shape_string(b.shape()) + " does not match weight " +
                           shape_string(w.shape()));
    }
    const bool vector_input = x.ndim() == 1;
    if ((vector_input && x.extent(0) != in) || (!vector_input && (x.ndim() != 2 || x.extent(1) != in))) {
        throw NumericError("linear_forward: input " + shape_string(x.shape()) + " does not match weight " +
                           shape_string(w.shape()));
    }
    Tensor x2 = vector_input ? reshape(x, {1, x.extent(0)}) : x;
    const int rows = x2.extent(0);
    Tensor y = matmul(x2, w);
    // Broadcast bias over rows.
    std::vector<double> val(y.value());
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < out; ++c) val[static_cast<size_t>(r) * out + c] += b.value()[c];
    }
    Tensor z = make_op({rows, out}, std::move(val), {y, b}, [rows, out](TensorNode& self) {
        TensorNode& py = *self.parents[0];
        TensorNode& pb = *self.parents[1];
        if (py.requires_grad) {
            if (py.grad.size() != py.value.size()) py.grad.assign(py.value.size(), 0.0);
            for (size_t i = 0; i < self.grad.size(); ++i) py.grad[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            if (pb.grad.size() != pb.value.size()) pb.grad.assign(pb.value.size(), 0.0);
            for (int r = 0; r < rows; ++r) {
                for (int c = 0; c < out; ++c) pb.grad[c] += self.grad[static_cast<size_t>(r) * out + c];
            }
        }
    });
    return vector_input ? reshape(z, {out}) : z;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& kernels, int stride) {
    if (x.ndim() != 3) throw NumericError("conv2d_forward: input must be [C,H,W], got " + shape_string(x.shape()));
    if (kernels.ndim() != 4) {
        throw NumericError("conv2d_forward: kernels must be [O,C,kh,kw], got " + shape_string(kernels.shape()));
    }
    if (stride < 1) throw NumericError("conv2d_forward: stride must be >= 1");
    const int ci = x.extent(0), h = x.extent(1), w = x.extent(2);
    const int co = kernels.extent(0), ck = kernels.extent(1), kh = kernels.extent(2), kw = kernels.extent(3);
    if (ck != ci) {
        throw NumericError("conv2d_forward: channel mismatch, input " + shape_string(x.shape()) +
                           " vs kernels " + shape_string(kernels.shape()));
    }
    if (kh > h || kw > w) {
        throw NumericError("conv2d_forward: kernel " + shape_string(kernels.shape()) +
                           " larger than input " + shape_string(x.shape()));
    }
    const int oh = (h - kh) / stride + 1;
    const int ow = (w - kw) / stride + 1;
    std::vector<double> out(static_cast<size_t>(co) * oh * ow, 0.0);
    const auto& xv = x.value();
    const auto& kv = kernels.value();
    for (int o = 0; o < co; ++o) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (int c = 0; c < ci; ++c) {
                    for (int dy = 0; dy < kh; ++dy) {
                        const double* xrow = xv.data() + (static_cast<size_t>(c) * h + oy * stride + dy) * w +
                                             ox * stride;
                        const double* krow = kv.data() +
                                             ((static_cast<size_t>(o) * ci + c) * kh + dy) * kw;
                        for (int dx = 0; dx < kw; ++dx) acc += xrow[dx] * krow[dx];
                    }
                }
                out[(static_cast<size_t>(o) * oh + oy) * ow + ox] = acc;
            }
        }
    }
    return make_op({co, oh, ow}, std::move(out), {x, kernels},
                   [ci, h, w, co, kh, kw, oh, ow, stride](TensorNode& self) {
                       TensorNode& px = *self.parents[0];
                       TensorNode& pk = *self.parents[1];
                       if (px.requires_grad && px.grad.size() != px.value.size())
                           px.grad.assign(px.value.size(), 0.0);
                       if (pk.requires_grad && pk.grad.size() != pk.value.size())
                           pk.grad.assign(pk.value.size(), 0.0);
                       for (int o = 0; o < co; ++o) {
                           for (int oy = 0; oy < oh; ++oy) {
                               for (int ox = 0; ox < ow; ++ox) {
                                   const double g = self.grad[(static_cast<size_t>(o) * oh + oy) * ow + ox];
                                   if (g == 0.0) continue;
                                   for (int c = 0; c < ci; ++c) {
                                       for (int dy = 0; dy < kh; ++dy) {
                                           const size_t xoff =
                                               (static_cast<size_t>(c) * h + oy * stride + dy) * w + ox * stride;
                                           const size_t koff =
                                               ((static_cast<size_t>(o) * ci + c) * kh + dy) * kw;
                                           for (int dx = 0; dx < kw; ++dx) {
                                               if (px.requires_grad)
                                                   px.grad[xoff + dx] += g * pk.value[koff + dx];
                                               if (pk.requires_grad)
                                                   pk.grad[koff + dx] += g * px.value[xoff + dx];
                                           }
                                       }
                                   }
                               }
                           }
                       }
                   });
}

Tensor maxpool2d_forward(const Tensor& x, int window) {
    if (x.ndim() != 3) throw NumericError("maxpool2d_forward: input must be [C,H,W], got " + shape_string(x.shape()));
    if (window < 1) throw NumericError("maxpool2d_forward: window must be >= 1");
    const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
    if (h < window || w < window) {
        throw NumericError("maxpool2d_forward: window " + std::to_string(window) + " larger than input " +
                           shape_string(x.shape()));
    }
    const int oh = h / window, ow = w / window;
    std::vector<double> out(static_cast<size_t>(c) * oh * ow);
    auto argmax = std::make_shared<std::vector<size_t>>(out.size());
    const auto& xv = x.value();
    for (int ch = 0; ch < c; ++ch) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double best = -std::numeric_limits<double>::infinity();
                size_t best_idx = 0;
                for (int dy = 0; dy < window; ++dy) {
                    for (int dx = 0; dx < window; ++dx) {
                        const size_t idx =
                            (static_cast<size_t>(ch) * h + oy * window + dy) * w + ox * window + dx;
                        if (xv[idx] > best) {
                            best = xv[idx];
                            best_idx = idx;
                        }
                    }
                }
                const size_t o = (static_cast<size_t>(ch) * oh + oy) * ow + ox;
                out[o] = best;
                (*argmax)[o] = best_idx;
            }
        }
    }
    return make_op({c, oh, ow}, std::move(out), {x}, [argmax](TensorNode& self) {
        TensorNode& px = *self.parents[0];
        if (!px.requires_grad) return;
        if (px.grad.size() != px.value.size()) px.grad.assign(px.value.size(), 0.0);
        for (size_t o = 0; o < self.grad.size(); ++o) px.grad[(*argmax)[o]] += self.grad[o];
    });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
    if (x.ndim() != 3) throw NumericError("add_channel_bias: input must be [C,H,W], got " + shape_string(x.shape()));
    if (b.ndim() != 1 || b.extent(0) != x.extent(0)) {
        throw NumericError("add_channel_bias: bias shape " + shape_string(b.shape()) + " does not match channels of " +
                           shape_string(x.shape()));
    }
    const int c = x.extent(0);
    const size_t plane = static_cast<size_t>(x.extent(1)) * x.extent(2);
    std::vector<double> out(x.value());
    const auto& bv = b.value();
    for (int ch = 0; ch < c; ++ch) {
        for (size_t i = 0; i < plane; ++i) out[ch * plane + i] += bv[ch];
    }
    return make_op(x.shape(), std::move(out), {x, b}, [c, plane](TensorNode& self) {
        TensorNode& px = *self.parents[0];
        TensorNode& pb = *self.parents[1];
        if (px.requires_grad) {
            if (px.grad.size() != px.value.size()) px.grad.assign(px.value.size(), 0.0);
            for (size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            if (pb.grad.size() != pb.value.size()) pb.grad.assign(pb.value.size(), 0.0);
            for (int ch = 0; ch < c; ++ch) {
                double s = 0.0;
                for (size_t i = 0; i < plane; ++i) s += self.grad[ch * plane + i];
                pb.grad[ch] += s;
            }
        }
    });
}

Tensor elu_forward(const Tensor& x) {
    std::vector<double> out(x.value());
    for (double& v : out) v = v > 0.0 ? v : std::expm1(v);
    return make_op(x.shape(), std::move(out), {x}, [](TensorNode& self) {
        TensorNode& px = *self.parents[0];
        if (!px.requires_grad) return;
        if (px.grad.size() != px.value.size()) px.grad.assign(px.value.size(), 0.0);
        for (size_t i = 0; i < self.grad.size(); ++i) {
            const double d = px.value[i] > 0.0 ? 1.0 : self.value[i] + 1.0;  // exp(x) = elu(x)+1 for x<=0
            px.grad[i] += self.grad[i] * d;
        }
    });
}

Tensor leaky_relu_forward(const Tensor& x, double negative_slope) {
    std::vector<double> out(x.value());
    for (double& v : out) v = v > 0.0 ? v : negative_slope * v;
    return make_op(x.shape(), std::move(out), {x}, [negative_slope](TensorNode& self) {
        TensorNode& px = *self.parents[0];
        if (!px.requires_grad) return;
        if (px.grad.size() != px.value.size()) px.grad.assign(px.value.size(), 0.0);
        for (size_t i = 0; i < self.grad.size(); ++i) {
            px.grad[i] += self.grad[i] * (px.value[i] > 0.0 ? 1.0 : negative_slope);
        }
    });
}

namespace {

// Shared softmax math for one contiguous strided slice.
void softmax_slice(const double* in, double* out, int n, size_t stride) {
    double mx = in[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, in[i * stride]);
    double denom = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e = std::exp(in[i * stride] - mx);
        out[i * stride] = e;
        denom += e;
    }
    for (int i = 0; i < n; ++i) out[i * stride] /= denom;
}

void softmax_backward_slice(const double* y, const double* g, double* dst, int n, size_t stride) {
    double dot = 0.0;
    for (int i = 0; i < n; ++i) dot += g[i * stride] * y[i * stride];
    for (int i = 0; i < n; ++i) dst[i * stride] += y[i * stride] * (g[i * stride] - dot);
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
    if (x.ndim() != 1 && x.ndim() != 2) {
        throw NumericError("softmax supports 1-D and 2-D tensors, got " + shape_string(x.shape()));
    }
    int ax = axis < 0 ? x.ndim() + axis : axis;
    if (ax < 0 || ax >= x.ndim()) throw NumericError("softmax axis out of range");
    std::vector<double> out(x.numel());
    const auto& xv = x.value();
    if (x.ndim() == 1) {
        softmax_slice(xv.data(), out.data(), x.extent(0), 1);
    } else {
        const int rows = x.extent(0), cols = x.extent(1);
        if (ax == 1) {
            for (int r = 0; r < rows; ++r)
                softmax_slice(xv.data() + static_cast<size_t>(r) * cols, out.data() + static_cast<size_t>(r) * cols,
                              cols, 1);
        } else {
            for (int c = 0; c < cols; ++c) softmax_slice(xv.data() + c, out.data() + c, rows, cols);
        }
    }
    const auto shape = x.shape();
    return make_op(shape, std::move(out), {x}, [shape, ax](TensorNode& self) {
        TensorNode& px = *self.parents[0];
        if (!px.requires_grad) return;
        if (px.grad.size() != px.value.size()) px.grad.assign(px.value.size(), 0.0);
        if (shape.size() == 1) {
            softmax_backward_slice(self.value.data(), self.grad.data(), px.grad.data(), shape[0], 1);
        } else {
            const int rows = shape[0], cols = shape[1];
            if (ax == 1) {
                for (int r = 0; r < rows; ++r) {
                    const size_t off = static_cast<size_t>(r) * cols;
                    softmax_backward_slice(self.value.data() + off, self.grad.data() + off, px.grad.data() + off,
                                           cols, 1);
                }
            } else {
                for (int c = 0; c < cols; ++c) {
                    softmax_backward_slice(self.value.data() + c, self.grad.data() + c, px.grad.data() + c, rows,
                                           cols);
                }
            }
        }
    });
}

Tensor log_softmax(const Tensor& x) {
    if (x.ndim() != 1) throw NumericError("log_softmax expects a 1-D tensor, got " + shape_string(x.shape()));
    const int n = x.extent(0);
    const auto& xv = x.value();
    double mx = xv[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, xv[i]);
    double denom = 0.0;
    for (int i = 0; i < n; ++i) denom += std::exp(xv[i] - mx);
    const double lse = mx + std::log(denom);
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = xv[i] - lse;
    return make_op({n}, std::move(out), {x}, [n](TensorNode& self) {
        TensorNode& px = *self.parents[0];
        if (!px.requires_grad) return;
        if (px.grad.size() != px.value.size()) px.grad.assign(px.value.size(), 0.0);
        double gsum = 0.0;
        for (int i = 0; i < n; ++i) gsum += self.grad[i];
        for (int i = 0; i < n; ++i) px.grad[i] += self.grad[i] - std::exp(self.value[i]) * gsum;
    });
}

std::pair<int, double> categorical_sample(const std::vector<double>& probs, Rng& rng) {
    if (probs.empty()) throw NumericError("categorical_sample on empty distribution");
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw NumericError("categorical_sample: negative or NaN probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) {
        throw NumericError("categorical_sample: probabilities sum to " + std::to_string(total));
    }
    const double u = rng.uniform();
    double acc = 0.0;
    int last_positive = -1;
    for (size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] > 0.0) last_positive = static_cast<int>(i);
        acc += probs[i];
        if (u < acc) {
            const int idx = probs[i] > 0.0 ? static_cast<int>(i) : last_positive;
            return {idx, std::log(probs[idx])};
        }
    }
    if (last_positive < 0) throw NumericError("categorical_sample: all probabilities zero");
    return {last_positive, std::log(probs[last_positive])};
}

void GraphBatch::validate() const {
    if (num_nodes <= 0) throw NumericError("graph batch must contain at least one node");
    if (static_cast<long>(node_features.size()) != static_cast<long>(num_nodes) * node_dim) {
        throw NumericError("graph batch node feature size mismatch");
    }
    if (edge_src.size() != edge_dst.size()) throw NumericError("graph batch edge list size mismatch");
    if (static_cast<long>(edge_attrs.size()) != static_cast<long>(edge_src.size()) * edge_dim) {
        throw NumericError("graph batch edge attribute size mismatch");
    }
    for (size_t e = 0; e < edge_src.size(); ++e) {
        if (edge_src[e] < 0 || edge_src[e] >= num_nodes || edge_dst[e] < 0 || edge_dst[e] >= num_nodes) {
            throw NumericError("graph batch edge endpoint out of range");
        }
    }
    if (static_cast<int>(membership.size()) != num_nodes) throw NumericError("graph batch membership size mismatch");
    for (int m : membership) {
        if (m < 0 || m >= num_graphs) throw NumericError("graph batch membership id out of range");
    }
}

Tensor mul_rowvec(const Tensor& x, const Tensor& vec) {
    if (x.ndim() != 2 || vec.ndim() != 1 || vec.extent(0) != x.extent(1)) {
        throw NumericError("mul_rowvec: incompatible shapes " + shape_string(x.shape()) + " and " +
                           shape_string(vec.shape()));
    }
    const int rows = x.extent(0), cols = x.extent(1);
    std::vector<double> out(x.value());
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) out[static_cast<size_t>(r) * cols + c] *= vec.value()[c];
    }
    return make_op(x.shape(), std::move(out), {x, vec}, [rows, cols](TensorNode& self) {
        TensorNode& px = *self.parents[0];
        TensorNode& pv = *self.parents[1];
        if (px.requires_grad) {
            if (px.grad.size() != px.value.size()) px.grad.assign(px.value.size(), 0.0);
            for (int r = 0; r < rows; ++r) {
                for (int c = 0; c < cols; ++c) {
                    const size_t i = static_cast<size_t>(r) * cols + c;
                    px.grad[i] += self.grad[i] * pv.value[c];
                }
            }
        }
        if (pv.requires_grad) {
            if (pv.grad.size() != pv.value.size()) pv.grad.assign(pv.value.size(), 0.0);
            for (int r = 0; r < rows; ++r) {
                for (int c = 0; c < cols; ++c) {
                    const size_t i = static_cast<size_t>(r) * cols + c;
                    pv.grad[c] += self.grad[i] * px.value[i];
                }
            }
        }
    });
}

Tensor fold_cols(const Tensor& x, int group_width) {
    if (x.ndim() != 2 || group_width < 1 || x.extent(1) % group_width != 0) {
        throw NumericError("fold_cols: shape " + shape_string(x.shape()) + " not divisible into groups of " +
                           std::to_string(group_width));
    }
    const int rows = x.extent(0), cols = x.extent(1), groups = cols / group_width;
    std::vector<double> out(static_cast<size_t>(rows) * groups, 0.0);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            out[static_cast<size_t>(r) * groups + c / group_width] += x.value()[static_cast<size_t>(r) * cols + c];
        }
    }
    return make_op({rows, groups}, std::move(out), {x}, [rows, cols, groups, group_width](TensorNode& self) {
        TensorNode& px = *self.parents[0];
        if (!px.requires_grad) return;
        if (px.grad.size() != px.value.size()) px.grad.assign(px.value.size(), 0.0);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                px.grad[static_cast<size_t>(r) * cols + c] +=
                    self.grad[static_cast<size_t>(r) * groups + c / group_width];
            }
        }
    });
}

Tensor segment_softmax(const Tensor& scores, const std::vector<int>& segments, int num_segments) {
    if (scores.ndim() != 2) throw NumericError("segment_softmax expects 2-D scores");
    const int rows = scores.extent(0), cols = scores.extent(1);
    if (static_cast<int>(segments.size()) != rows) throw NumericError("segment_softmax: segment list size mismatch");
    for (int s : segments) {
        if (s < 0 || s >= num_segments) throw NumericError("segment_softmax: segment id out of range");
    }
    // Group rows by segment, preserving row order inside each group.
    auto groups = std::make_shared<std::vector<std::vector<int>>>(num_segments);
    for (int r = 0; r < rows; ++r) (*groups)[segments[r]].push_back(r);

    std::vector<double> out(scores.numel());
    const auto& sv = scores.value();
    for (const auto& rows_in : *groups) {
        if (rows_in.empty()) continue;
        for (int c = 0; c < cols; ++c) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int r : rows_in) mx = std::max(mx, sv[static_cast<size_t>(r) * cols + c]);
            double denom = 0.0;
            for (int r : rows_in) {
                const double e = std::exp(sv[static_cast<size_t>(r) * cols + c] - mx);
                out[static_cast<size_t>(r) * cols + c] = e;
                denom += e;
            }
            for (int r : rows_in) out[static_cast<size_t>(r) * cols + c] /= denom;
        }
    }
    return make_op(scores.shape(), std::move(out), {scores}, [groups, cols](TensorNode& self) {
        TensorNode& px = *self.parents[0];
        if (!px.requires_grad) return;
        if (px.grad.size() != px.value.size()) px.grad.assign(px.value.size(), 0.0);
        for (const auto& rows_in : *groups) {
            if (rows_in.empty()) continue;
            for (int c = 0; c < cols; ++c) {
                double dot = 0.0;
                for (int r : rows_in) {
                    const size_t i = static_cast<size_t>(r) * cols + c;
                    dot += self.grad[i] * self.value[i];
                }
                for (int r : rows_in) {
                    const size_t i = static_cast<size_t>(r) * cols + c;
                    px.grad[i] += self.value[i] * (self.grad[i] - dot);
                }
            }
        }
    });
}

Tensor attn_aggregate(const Tensor& alpha, const Tensor& values, const std::vector<int>& segments,
                      int num_segments) {
    if (alpha.ndim() != 2 || values.ndim() != 2 || alpha.extent(0) != values.extent(0)) {
        throw NumericError("attn_aggregate: incompatible shapes " + shape_string(alpha.shape()) + " and " +
                           shape_string(values.shape()));
    }
    const int rows = alpha.extent(0), heads = alpha.extent(1), width = values.extent(1);
    if (width % heads != 0) throw NumericError("attn_aggregate: value width not divisible by head count");
    const int head_dim = width / heads;
    if (static_cast<int>(segments.size()) != rows) throw NumericError("attn_aggregate: segment list size mismatch");
    std::vector<double> out(static_cast<size_t>(num_segments) * width, 0.0);
    const auto& av = alpha.value();
    const auto& vv = values.value();
    for (int r = 0; r < rows; ++r) {
        const int s = segments[r];
        if (s < 0 || s >= num_segments) throw NumericError("attn_aggregate: segment id out of range");
        for (int h = 0; h < heads; ++h) {
            const double a = av[static_cast<size_t>(r) * heads + h];
            for (int d = 0; d < head_dim; ++d) {
                out[static_cast<size_t>(s) * width + h * head_dim + d] +=
                    a * vv[static_cast<size_t>(r) * width + h * head_dim + d];
            }
        }
    }
    return make_op({num_segments, width}, std::move(out), {alpha, values},
                   [segments, rows, heads, head_dim, width](TensorNode& self) {
                       TensorNode& pa = *self.parents[0];
                       TensorNode& pv = *self.parents[1];
                       if (pa.requires_grad && pa.grad.size() != pa.value.size())
                           pa.grad.assign(pa.value.size(), 0.0);
                       if (pv.requires_grad && pv.grad.size() != pv.value.size())
                           pv.grad.assign(pv.value.size(), 0.0);
                       for (int r = 0; r < rows; ++r) {
                           const int s = segments[r];
                           for (int h = 0; h < heads; ++h) {
                               const size_t ai = static_cast<size_t>(r) * heads + h;
                               for (int d = 0; d < head_dim; ++d) {
                                   const size_t oi = static_cast<size_t>(s) * width + h * head_dim + d;
                                   const size_t vi = static_cast<size_t>(r) * width + h * head_dim + d;
                                   if (pa.requires_grad) pa.grad[ai] += self.grad[oi] * pv.value[vi];
                                   if (pv.requires_grad) pv.grad[vi] += self.grad[oi] * pa.value[ai];
                               }
                           }
                       }
                   });
}

Tensor gatv2_forward(const Tensor& node_feats, const GraphBatch& topology, const Tensor& theta,
                     const Tensor& w_edge, const Tensor& attn, int heads) {
    topology.validate();
    const int n = topology.num_nodes;
    if (node_feats.ndim() != 2 || node_feats.extent(0) != n) {
        throw NumericError("gatv2_forward: node features " + shape_string(node_feats.shape()) +
                           " do not match node count " + std::to_string(n));
    }
    if (theta.ndim() != 2 || theta.extent(0) != node_feats.extent(1)) {
        throw NumericError("gatv2_forward: theta " + shape_string(theta.shape()) + " does not match features " +
                           shape_string(node_feats.shape()));
    }
    const int width = theta.extent(1);
    if (heads < 1 || width % heads != 0) throw NumericError("gatv2_forward: width not divisible by head count");
    if (w_edge.ndim() != 2 || w_edge.extent(0) != topology.edge_dim || w_edge.extent(1) != width) {
        throw NumericError("gatv2_forward: edge weight " + shape_string(w_edge.shape()) +
                           " does not match edge dim " + std::to_string(topology.edge_dim));
    }
    if (attn.ndim() != 1 || attn.extent(0) != width) {
        throw NumericError("gatv2_forward: attention vector " + shape_string(attn.shape()) +
                           " does not match width " + std::to_string(width));
    }

    // Self loops are always injected, with an all-zero edge attribute.
    const int e_in = topology.num_edges();
    std::vector<int> src(topology.edge_src), dst(topology.edge_dst);
    src.reserve(e_in + n);
    dst.reserve(e_in + n);
    for (int v = 0; v < n; ++v) {
        src.push_back(v);
        dst.push_back(v);
    }
    std::vector<double> eattr(static_cast<size_t>(e_in + n) * topology.edge_dim, 0.0);
    std::copy(topology.edge_attrs.begin(), topology.edge_attrs.end(), eattr.begin());
    Tensor edge_attr = Tensor::from_data({e_in + n, topology.edge_dim}, std::move(eattr));

    Tensor h_lin = matmul(node_feats, theta);                 // [N, width]
    Tensor e_src = gather_rows(h_lin, src);                   // [E, width]
    Tensor e_dst = gather_rows(h_lin, dst);                   // [E, width]
    Tensor e_edge = matmul(edge_attr, w_edge);                // [E, width]
    Tensor pre = add(add(e_src, e_dst), e_edge);
    Tensor act = leaky_relu_forward(pre, 0.2);
    Tensor scores = fold_cols(mul_rowvec(act, attn), width / heads);  // [E, heads]
    Tensor alpha = segment_softmax(scores, dst, n);
    return attn_aggregate(alpha, e_src, dst, n);  // [N, width]
}

Tensor global_add_pool(const Tensor& node_feats, const std::vector<int>& membership, int num_graphs) {
    if (node_feats.ndim() != 2) throw NumericError("global_add_pool expects 2-D node features");
    const int n = node_feats.extent(0), f = node_feats.extent(1);
    if (static_cast<int>(membership.size()) != n) throw NumericError("global_add_pool: membership size mismatch");
    if (num_graphs < 1) throw NumericError("global_add_pool: num_graphs must be >= 1");
    std::vector<double> out(static_cast<size_t>(num_graphs) * f, 0.0);
    for (int v = 0; v < n; ++v) {
        const int g = membership[v];
        if (g < 0 || g >= num_graphs) throw NumericError("global_add_pool: membership id out of range");
        for (int c = 0; c < f; ++c) out[static_cast<size_t>(g) * f + c] += node_feats.value()[static_cast<size_t>(v) * f + c];
    }
    return make_op({num_graphs, f}, std::move(out), {node_feats}, [membership, n, f](TensorNode& self) {
        TensorNode& px = *self.parents[0];
        if (!px.requires_grad) return;
        if (px.grad.size() != px.value.size()) px.grad.assign(px.value.size(), 0.0);
        for (int v = 0; v < n; ++v) {
            const int g = membership[v];
            for (int c = 0; c < f; ++c)
                px.grad[static_cast<size_t>(v) * f + c] += self.grad[static_cast<size_t>(g) * f + c];
        }
    });
}

}  // namespace kix
