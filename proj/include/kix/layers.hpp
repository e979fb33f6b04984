#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "kix/rng.hpp"
#include "kix/tensor.hpp"

namespace kix {

// --- Dense layers ---

// y = x W + b. x: [in] or [B, in]; W: [in, out]; b: [out].
Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b);

// Valid (no padding) cross-correlation. x: [C, H, W]; kernels: [O, C, kh, kw].
Tensor conv2d_forward(const Tensor& x, const Tensor& kernels, int stride = 1);

// Non-overlapping max pooling with a square window. Gradient flows to the
// first maximum in row-major window order on ties.
Tensor maxpool2d_forward(const Tensor& x, int window = 2);

// Adds a per-channel bias. x: [C, H, W]; b: [C].
Tensor add_channel_bias(const Tensor& x, const Tensor& b);

Tensor elu_forward(const Tensor& x);
Tensor leaky_relu_forward(const Tensor& x, double negative_slope);

// Numerically stable softmax along `axis` of a 1-D or 2-D tensor.
Tensor softmax(const Tensor& x, int axis = -1);
// Stable log-softmax of a 1-D tensor.
Tensor log_softmax(const Tensor& x);

// Draws an index from an explicit probability vector (must sum to 1 within
// 1e-6). Returns the index and log(p[index]).
std::pair<int, double> categorical_sample(const std::vector<double>& probs, Rng& rng);

// --- Graph batch ---

// Dense node/edge feature arrays with explicit directed edges. Messages flow
// src -> dst. `membership` maps each node to its graph for pooled readout.
struct GraphBatch {
    int num_nodes = 0;
    int node_dim = 0;
    std::vector<double> node_features;  // [num_nodes, node_dim] row-major
    std::vector<int> edge_src;
    std::vector<int> edge_dst;
    int edge_dim = 0;
    std::vector<double> edge_attrs;  // [num_edges, edge_dim]
    std::vector<int> membership;     // [num_nodes]
    int num_graphs = 1;

    int num_edges() const { return static_cast<int>(edge_src.size()); }
    void validate() const;  // throws NumericError on inconsistency
};

// --- Graph attention (GATv2 style, shared source/target transform) ---
//
// Per head h and edge (u -> v):
//   s(u,v) = a_h . leaky_relu(theta_h x_v + theta_h x_u + We_h e_uv, 0.2)
//   alpha  = softmax of s over in-neighbours of v plus an injected self loop
//            (self loops carry an all-zero edge attribute)
//   out_v  = sum_u alpha_uv * theta_h x_u, heads concatenated.
//
// node_feats: [N, F]; theta: [F, heads*head_dim]; w_edge: [Fe, heads*head_dim];
// attn: [heads*head_dim]. Returns [N, heads*head_dim].
Tensor gatv2_forward(const Tensor& node_feats, const GraphBatch& topology, const Tensor& theta,
                     const Tensor& w_edge, const Tensor& attn, int heads);

// Sums node rows per graph id. node_feats: [N, F] -> [num_graphs, F].
Tensor global_add_pool(const Tensor& node_feats, const std::vector<int>& membership, int num_graphs);

// --- Building blocks used by gatv2_forward (exposed for direct testing) ---

// Multiplies every row of x [R, K] elementwise by vec [K].
Tensor mul_rowvec(const Tensor& x, const Tensor& vec);
// Sums groups of `group_width` adjacent columns: [R, G*group_width] -> [R, G].
Tensor fold_cols(const Tensor& x, int group_width);
// Softmax over rows sharing a segment id, independently per column.
Tensor segment_softmax(const Tensor& scores, const std::vector<int>& segments, int num_segments);
// out[seg[r], h*D+d] += alpha[r, h] * values[r, h*D+d]
Tensor attn_aggregate(const Tensor& alpha, const Tensor& values, const std::vector<int>& segments,
                      int num_segments);

}  // namespace kix
