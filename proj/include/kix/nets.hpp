#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "kix/graphs.hpp"
#include "kix/layers.hpp"
#include "kix/optim.hpp"
#include "kix/rng.hpp"
#include "kix/tensor.hpp"

namespace kix {

// --- Policy networks ---
//
// Two architectures cover every policy in the system:
//
//   meta net         graph attention over the 6-node type graph, pooled into a
//                    graph embedding, with actor (5 meta-actions) and critic
//                    heads.
//   grid net         a small conv stack over the egocentric observation tensor
//                    with actor (6 primitive actions) and critic heads. Used
//                    for interaction policies (4 input channels), the
//                    reachability policy (4 channels), and the base agent
//                    (3 channels, no activation plane).
//
// Nets are plain ParamSets with fixed entry names; the forward functions
// take the ParamSet so the same code serves training (with gradients) and
// rollouts (under NoGradGuard).

inline constexpr int kGatDim = 16;       // per-layer output width (heads * head_dim)
inline constexpr int kGatHeads = 4;
inline constexpr int kHeadHidden = 64;   // hidden width of actor/critic heads
inline constexpr int kGridFlat = 64;     // conv stack output: 64 channels at 1x1

// What a policy net computed for one input. `probs` and `log_probs` are 1-D
// over the action vocabulary; `value` has a single element.
struct PolicyOutput {
    Tensor value;
    Tensor probs;
    Tensor log_probs;
};

// Builds the meta-net parameter set: two graph attention layers
// (12 -> 16 -> 16, 4 heads, 4-dim edge features) plus actor and critic heads
// over the pooled 16-dim graph embedding.
ParamSet make_meta_net(Rng& rng);

// Builds a grid-net parameter set for `in_channels` input planes:
// conv 2x2 -> 16ch, maxpool 2, conv 2x2 -> 32ch, conv 2x2 -> 64ch (ELU after
// each stage), then actor and critic heads over the 64-dim flattening.
ParamSet make_grid_net(int in_channels, Rng& rng);

// Runs the meta net on a single encoded type graph (num_graphs must be 1).
// Throws NumericError on feature-dimension mismatch.
PolicyOutput meta_forward(const ParamSet& params, const GraphBatch& batch);

// Runs a grid net on one observation tensor. The input must be [C,7,7] with C
// matching the net's first conv layer; throws NumericError otherwise.
PolicyOutput grid_forward(const ParamSet& params, const Tensor& obs);

// Wraps a meta net as the evaluator consumed by recommend(). Runs without
// gradient tracking.
MetaEvaluator make_meta_evaluator(const ParamSet& params);

// --- Policy repository ---

enum class Variant { KIX1 = 0, KIX2 = 1, BASE = 2 };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// Every net a training variant needs, keyed by role. Hierarchical variants
// hold the meta net plus one interaction net per meta-action; KIX2 adds the
// reachability net; BASE holds only the flat agent net.
struct PolicyRepository {
    Variant variant = Variant::KIX1;
    ParamSet meta;
    std::array<ParamSet, kNumMetaActions> interaction;
    ParamSet reach;
    ParamSet base;

    bool has_meta() const { return variant != Variant::BASE; }
    bool has_reach() const { return variant == Variant::KIX2; }
    bool has_base() const { return variant == Variant::BASE; }
};

// Role keys in repository order: "meta", "interaction.<name>" for each
// meta-action, "reach", "base". Only keys the variant uses are listed.
std::vector<std::string> repository_keys(Variant v);
// The net behind a repository key ("meta" -> meta net, everything else ->
// grid net with 4 or 3 channels). Throws ConfigError on unknown keys.
ParamSet& repository_net(PolicyRepository& repo, const std::string& key);
const ParamSet& repository_net(const PolicyRepository& repo, const std::string& key);

// Deterministically initializes all nets a variant needs. Each net draws from
// its own seed stream, so adding or removing one role never shifts another.
PolicyRepository make_repository(Variant v, std::uint64_t seed);

}  // namespace kix
