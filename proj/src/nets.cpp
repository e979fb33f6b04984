#include "kix/nets.hpp"

#include <unordered_map>
#include <vector>

#include "kix/errors.hpp"

namespace kix {

namespace {

// Shared head geometry: hidden layer with ELU, then a linear output layer.
void add_head(ParamSet& p, std::unordered_map<std::string, int>& fan, const std::string& prefix,
              int in_dim, int out_dim) {
    p.add(prefix + ".h.w", {in_dim, kHeadHidden});
    p.add(prefix + ".h.b", {kHeadHidden});
    p.add(prefix + ".out.w", {kHeadHidden, out_dim});
    p.add(prefix + ".out.b", {out_dim});
    fan[prefix + ".h.w"] = in_dim;
    fan[prefix + ".h.b"] = 0;
    fan[prefix + ".out.w"] = kHeadHidden;
    fan[prefix + ".out.b"] = 0;
}

Tensor head_forward(const ParamSet& p, const std::string& prefix, const Tensor& x) {
    Tensor h = elu_forward(linear_forward(x, p.get(prefix + ".h.w"), p.get(prefix + ".h.b")));
    return linear_forward(h, p.get(prefix + ".out.w"), p.get(prefix + ".out.b"));
}

PolicyOutput assemble_output(const Tensor& logits, const Tensor& value) {
    PolicyOutput out;
    out.value = value;
    out.probs = softmax(logits);
    out.log_probs = log_softmax(logits);
    return out;
}

}  // namespace

ParamSet make_meta_net(Rng& rng) {
    ParamSet p;
    std::unordered_map<std::string, int> fan;
    const int dims[2] = {kNodeFeatureDim, kGatDim};
    for (int layer = 0; layer < 2; ++layer) {
        const std::string prefix = "gat" + std::to_string(layer + 1);
        p.add(prefix + ".theta", {dims[layer], kGatDim});
        p.add(prefix + ".w_edge", {kNumRelations, kGatDim});
        p.add(prefix + ".attn", {kGatDim});
        fan[prefix + ".theta"] = dims[layer];
        fan[prefix + ".w_edge"] = kNumRelations;
        fan[prefix + ".attn"] = kGatDim;
    }
    add_head(p, fan, "actor", kGatDim, kNumMetaActions);
    add_head(p, fan, "critic", kGatDim, 1);
    init_uniform_fan_in(p, fan, rng);
    return p;
}

ParamSet make_grid_net(int in_channels, Rng& rng) {
    if (in_channels < 1) throw ConfigError("grid net needs at least one input channel");
    ParamSet p;
    std::unordered_map<std::string, int> fan;
    const int chans[4] = {in_channels, 16, 32, 64};
    for (int layer = 0; layer < 3; ++layer) {
        const std::string prefix = "conv" + std::to_string(layer + 1);
        p.add(prefix + ".k", {chans[layer + 1], chans[layer], 2, 2});
        p.add(prefix + ".b", {chans[layer + 1]});
        fan[prefix + ".k"] = chans[layer] * 4;
        fan[prefix + ".b"] = 0;
    }
    add_head(p, fan, "actor", kGridFlat, kNumActions);
    add_head(p, fan, "critic", kGridFlat, 1);
    init_uniform_fan_in(p, fan, rng);
    return p;
}

PolicyOutput meta_forward(const ParamSet& params, const GraphBatch& batch) {
    batch.validate();
    if (batch.node_dim != kNodeFeatureDim) {
        throw NumericError("meta_forward: expected " + std::to_string(kNodeFeatureDim) +
                           "-dim node features, got " + std::to_string(batch.node_dim));
    }
    if (batch.edge_dim != kNumRelations) {
        throw NumericError("meta_forward: expected " + std::to_string(kNumRelations) +
                           "-dim edge features, got " + std::to_string(batch.edge_dim));
    }
    if (batch.num_graphs != 1) {
        throw NumericError("meta_forward: expected a single graph, got " + std::to_string(batch.num_graphs));
    }
    Tensor x = Tensor::from_data({batch.num_nodes, batch.node_dim}, batch.node_features);
    Tensor h1 = elu_forward(gatv2_forward(x, batch, params.get("gat1.theta"), params.get("gat1.w_edge"),
                                          params.get("gat1.attn"), kGatHeads));
    Tensor h2 = elu_forward(gatv2_forward(h1, batch, params.get("gat2.theta"), params.get("gat2.w_edge"),
                                          params.get("gat2.attn"), kGatHeads));
    Tensor pooled = reshape(global_add_pool(h2, batch.membership, batch.num_graphs), {kGatDim});
    Tensor logits = head_forward(params, "actor", pooled);
    Tensor value = head_forward(params, "critic", pooled);
    return assemble_output(logits, value);
}

PolicyOutput grid_forward(const ParamSet& params, const Tensor& obs) {
    const Tensor k1 = params.get("conv1.k");
    const int want_c = k1.extent(1);
    if (obs.ndim() != 3 || obs.extent(0) != want_c || obs.extent(1) != 7 || obs.extent(2) != 7) {
        throw NumericError("grid_forward: expected [" + std::to_string(want_c) + ",7,7] input, got " +
                           shape_string(obs.shape()));
    }
    Tensor h = elu_forward(maxpool2d_forward(add_channel_bias(conv2d_forward(obs, k1), params.get("conv1.b"))));
    h = elu_forward(add_channel_bias(conv2d_forward(h, params.get("conv2.k")), params.get("conv2.b")));
    h = elu_forward(add_channel_bias(conv2d_forward(h, params.get("conv3.k")), params.get("conv3.b")));
    Tensor flat = reshape(h, {kGridFlat});
    Tensor logits = head_forward(params, "actor", flat);
    Tensor value = head_forward(params, "critic", flat);
    return assemble_output(logits, value);
}

MetaEvaluator make_meta_evaluator(const ParamSet& params) {
    // The ParamSet is captured by pointer: repositories own their nets for the
    // lifetime of any evaluator built from them.
    const ParamSet* p = &params;
    return [p](const GraphBatch& batch) {
        NoGradGuard guard;
        PolicyOutput out = meta_forward(*p, batch);
        MetaEval eval;
        eval.value = out.value.item();
        const auto& probs = out.probs.value();
        for (int i = 0; i < kNumMetaActions; ++i) eval.lambda_probs[i] = probs[i];
        return eval;
    };
}

// --- Repository ---

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::KIX1: return "kix1";
        case Variant::KIX2: return "kix2";
        case Variant::BASE: return "base";
    }
    throw ConfigError("unknown variant code");
}

Variant variant_from_name(const std::string& name) {
    if (name == "kix1") return Variant::KIX1;
    if (name == "kix2") return Variant::KIX2;
    if (name == "base") return Variant::BASE;
    throw ConfigError("unknown variant '" + name + "' (expected kix1, kix2, or base)");
}

std::vector<std::string> repository_keys(Variant v) {
    if (v == Variant::BASE) return {"base"};
    std::vector<std::string> keys = {"meta"};
    for (int i = 0; i < kNumMetaActions; ++i) {
        keys.push_back(std::string("interaction.") + meta_action_name(static_cast<MetaAction>(i)));
    }
    if (v == Variant::KIX2) keys.push_back("reach");
    return keys;
}

namespace {

template <typename Repo, typename Param>
Param& repository_net_impl(Repo& repo, const std::string& key) {
    const auto keys = repository_keys(repo.variant);
    bool known = false;
    for (const auto& k : keys) known = known || k == key;
    if (!known) {
        throw ConfigError("variant " + std::string(variant_name(repo.variant)) + " has no net '" + key + "'");
    }
    if (key == "meta") return repo.meta;
    if (key == "reach") return repo.reach;
    if (key == "base") return repo.base;
    const std::string name = key.substr(std::string("interaction.").size());
    return repo.interaction[static_cast<int>(meta_action_from_name(name))];
}

}  // namespace

ParamSet& repository_net(PolicyRepository& repo, const std::string& key) {
    return repository_net_impl<PolicyRepository, ParamSet>(repo, key);
}

const ParamSet& repository_net(const PolicyRepository& repo, const std::string& key) {
    return repository_net_impl<const PolicyRepository, const ParamSet>(repo, key);
}

PolicyRepository make_repository(Variant v, std::uint64_t seed) {
    PolicyRepository repo;
    repo.variant = v;
    if (v == Variant::BASE) {
        Rng rng(derive_seed(seed, 400));
        repo.base = make_grid_net(3, rng);
        return repo;
    }
    {
        Rng rng(derive_seed(seed, 100));
        repo.meta = make_meta_net(rng);
    }
    for (int i = 0; i < kNumMetaActions; ++i) {
        Rng rng(derive_seed(seed, 200 + i));
        repo.interaction[i] = make_grid_net(4, rng);
    }
    if (v == Variant::KIX2) {
        Rng rng(derive_seed(seed, 300));
        repo.reach = make_grid_net(4, rng);
    }
    return repo;
}

}  // namespace kix
