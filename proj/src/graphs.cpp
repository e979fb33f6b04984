#include "kix/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "kix/errors.hpp"
#include "kix/tensor.hpp"

namespace kix {

namespace {

int node_type_for_cell(int cell_type, int color) {
    switch (cell_type) {
        case kCellDoor: return kTypeDoor;
        case kCellKey: return kTypeKey;
        case kCellBall: return color == kColorBlue ? kTypeGoalBall : kTypeBall;
        case kCellBox: return kTypeBox;
        default: throw std::runtime_error("cell type has no graph node type");
    }
}

bool is_object_cell(int cell_type) {
    return cell_type == kCellDoor || cell_type == kCellKey || cell_type == kCellBall ||
           cell_type == kCellBox;
}

}  // namespace

const char* node_type_name(int type) {
    switch (type) {
        case kTypeAgent: return "agent";
        case kTypeDoor: return "door";
        case kTypeKey: return "key";
        case kTypeBall: return "ball";
        case kTypeGoalBall: return "goal-ball";
        case kTypeBox: return "box";
        default: return "invalid";
    }
}

const char* relation_name(int relation) {
    switch (relation) {
        case kRelVisible: return "visible";
        case kRelAdjacent: return "adjacent";
        case kRelCarrying: return "carrying";
        case kRelActivated: return "activated";
        default: return "invalid";
    }
}

const char* meta_action_name(int lambda) {
    switch (lambda) {
        case kMetaPickup: return "pickup";
        case kMetaDrop: return "drop";
        case kMetaReveal: return "reveal";
        case kMetaOpen: return "open";
        case kMetaOpenWithKey: return "open-with-key";
        default: return "invalid";
    }
}

int meta_action_from_name(const std::string& name) {
    for (int i = 0; i < kNumMetaActions; ++i)
        if (name == meta_action_name(i)) return i;
    throw ConfigError("unknown interaction '" + name + "'");
}

InstanceGraph build_instance_graph(const Observation& obs, const Inventory& inventory) {
    constexpr int n = Observation::kSize;
    InstanceGraph g;
    g.nodes.push_back(InstanceNode{kTypeAgent, kColorNone, 0, n - 1, n / 2, -1, false});

    // Visible objects in row-major view order, so the node order (and every
    // encoding derived from it) is a pure function of the observation.
    std::array<int, n * n> node_at;
    node_at.fill(-1);
    for (int vr = 0; vr < n; ++vr)
        for (int vc = 0; vc < n; ++vc) {
            const ObsCell& cell = obs.at(vr, vc);
            if (!obs.visible[vr * n + vc] || !is_object_cell(cell.type)) continue;
            node_at[vr * n + vc] = static_cast<int>(g.nodes.size());
            g.nodes.push_back(InstanceNode{node_type_for_cell(cell.type, cell.color), cell.color,
                                           cell.state, vr, vc, cell.object_id, false});
        }
    int carried_node = -1;
    if (inventory.present) {
        carried_node = static_cast<int>(g.nodes.size());
        g.nodes.push_back(InstanceNode{node_type_for_cell(inventory.type, inventory.color),
                                       inventory.color, 0, -1, -1, inventory.id, true});
    }

    for (int i = 1; i < static_cast<int>(g.nodes.size()); ++i)
        if (!g.nodes[i].carried) g.edges.push_back({0, i, kRelVisible});

    // Object-object adjacency over 4-neighbouring cells, both directions.
    for (int vr = 0; vr < n; ++vr)
        for (int vc = 0; vc < n; ++vc) {
            int src = node_at[vr * n + vc];
            if (src < 0) continue;
            if (vc + 1 < n && node_at[vr * n + vc + 1] >= 0) {
                int dst = node_at[vr * n + vc + 1];
                g.edges.push_back({src, dst, kRelAdjacent});
                g.edges.push_back({dst, src, kRelAdjacent});
            }
            if (vr + 1 < n && node_at[(vr + 1) * n + vc] >= 0) {
                int dst = node_at[(vr + 1) * n + vc];
                g.edges.push_back({src, dst, kRelAdjacent});
                g.edges.push_back({dst, src, kRelAdjacent});
            }
        }

    // The agent is adjacent to whatever occupies the cell it faces.
    int faced = node_at[(n - 2) * n + n / 2];
    if (faced >= 0) g.edges.push_back({0, faced, kRelAdjacent});

    if (carried_node >= 0) g.edges.push_back({0, carried_node, kRelCarrying});
    return g;
}

TypeGraph map_to_type_graph(const InstanceGraph& gi) {
    TypeGraph gk;
    for (const InstanceNode& node : gi.nodes)
        if (node.type < 0 || node.type >= kNumNodeTypes)
            throw std::runtime_error("instance node type outside the fixed vocabulary");
    for (const InstanceEdge& e : gi.edges) {
        if (e.src < 0 || e.src >= static_cast<int>(gi.nodes.size()) || e.dst < 0 ||
            e.dst >= static_cast<int>(gi.nodes.size()))
            throw std::runtime_error("instance edge endpoint out of range");
        gk.edges.push_back({gi.nodes[e.src].type, gi.nodes[e.dst].type, e.relation});
    }
    std::sort(gk.edges.begin(), gk.edges.end());
    gk.edges.erase(std::unique(gk.edges.begin(), gk.edges.end()), gk.edges.end());

    if (gi.activated_node >= 0) {
        const InstanceNode& node = gi.nodes[gi.activated_node];
        gk.activated_type = node.type;
        gk.activated_instance = gi.activated_node;
        gk.activated_color = node.color;
        gk.activated_state = node.state;
    }
    return gk;
}

std::pair<InstanceGraph, TypeGraph> activate(const InstanceGraph& gi, const TypeGraph& gk,
                                             int target_node) {
    if (target_node <= 0 || target_node >= static_cast<int>(gi.nodes.size()))
        throw std::logic_error("activation target must be a non-agent instance node");
    if (gi.activated_node >= 0 || gk.activated_type >= 0)
        throw std::logic_error("graph already carries an activation");

    InstanceGraph gi2 = gi;
    gi2.activated_node = target_node;
    gi2.edges.push_back({0, target_node, kRelActivated});

    const InstanceNode& node = gi.nodes[target_node];
    TypeGraph gk2 = gk;
    TypeEdge edge{kTypeAgent, node.type, kRelActivated};
    auto pos = std::lower_bound(gk2.edges.begin(), gk2.edges.end(), edge);
    if (pos == gk2.edges.end() || *pos != edge) gk2.edges.insert(pos, edge);
    gk2.activated_type = node.type;
    gk2.activated_instance = target_node;
    gk2.activated_color = node.color;
    gk2.activated_state = node.state;
    return {std::move(gi2), std::move(gk2)};
}

GraphBatch encode_type_graph(const TypeGraph& gk) {
    GraphBatch batch;
    batch.num_nodes = kNumNodeTypes;
    batch.node_dim = kNumNodeTypes + kNumColors;
    batch.node_features.assign(static_cast<size_t>(batch.num_nodes) * batch.node_dim, 0.0);
    for (int t = 0; t < kNumNodeTypes; ++t)
        batch.node_features[static_cast<size_t>(t) * batch.node_dim + t] = 1.0;
    if (gk.activated_type >= 0 && gk.activated_color != kColorNone)
        batch.node_features[static_cast<size_t>(gk.activated_type) * batch.node_dim +
                            kNumNodeTypes + gk.activated_color] = 1.0;

    batch.edge_dim = kNumRelations;
    for (const TypeEdge& e : gk.edges) {
        batch.edge_src.push_back(e.src_type);
        batch.edge_dst.push_back(e.dst_type);
        for (int r = 0; r < kNumRelations; ++r)
            batch.edge_attrs.push_back(r == e.relation ? 1.0 : 0.0);
    }
    batch.membership.assign(batch.num_nodes, 0);
    batch.num_graphs = 1;
    batch.validate();
    return batch;
}

TypeGraph decode_encoded_graph(const GraphBatch& batch) {
    if (batch.num_nodes != kNumNodeTypes || batch.edge_dim != kNumRelations)
        throw std::runtime_error("batch does not look like an encoded type graph");
    TypeGraph gk;
    for (size_t i = 0; i < batch.edge_src.size(); ++i) {
        int relation = -1;
        for (int r = 0; r < kNumRelations; ++r)
            if (batch.edge_attrs[i * kNumRelations + r] == 1.0) {
                if (relation >= 0) throw std::runtime_error("edge attribute is not one-hot");
                relation = r;
            }
        if (relation < 0) throw std::runtime_error("edge attribute is not one-hot");
        gk.edges.push_back({batch.edge_src[i], batch.edge_dst[i], relation});
        if (relation == kRelActivated) gk.activated_type = batch.edge_dst[i];
    }
    std::sort(gk.edges.begin(), gk.edges.end());
    if (gk.activated_type >= 0)
        for (int c = 0; c < kNumColors; ++c)
            if (batch.node_features[static_cast<size_t>(gk.activated_type) * batch.node_dim +
                                    kNumNodeTypes + c] == 1.0)
                gk.activated_color = c;
    return gk;
}

std::string serialize_instance_graph(const InstanceGraph& gi) {
    std::ostringstream out;
    out << "instance-graph nodes=" << gi.nodes.size() << " edges=" << gi.edges.size() << "\n";
    for (size_t i = 0; i < gi.nodes.size(); ++i) {
        const InstanceNode& n = gi.nodes[i];
        out << "node " << i << " " << node_type_name(n.type) << " color=" << color_name(n.color)
            << " state=" << n.state;
        if (n.carried)
            out << " carried";
        else
            out << " at=(" << n.view_row << "," << n.view_col << ")";
        out << " id=" << n.object_id;
        if (static_cast<int>(i) == gi.activated_node) out << " activated";
        out << "\n";
    }
    std::vector<InstanceEdge> edges = gi.edges;
    std::sort(edges.begin(), edges.end(), [](const InstanceEdge& a, const InstanceEdge& b) {
        return std::tie(a.relation, a.src, a.dst) < std::tie(b.relation, b.src, b.dst);
    });
    for (const InstanceEdge& e : edges)
        out << "edge " << relation_name(e.relation) << " " << e.src << " -> " << e.dst << "\n";
    return out.str();
}

std::string serialize_type_graph(const TypeGraph& gk) {
    std::ostringstream out;
    out << "type-graph nodes=" << kNumNodeTypes << " edges=" << gk.edges.size() << "\n";
    for (int t = 0; t < kNumNodeTypes; ++t) out << "node " << t << " " << node_type_name(t) << "\n";
    for (const TypeEdge& e : gk.edges)
        out << "edge " << relation_name(e.relation) << " " << node_type_name(e.src_type) << " -> "
            << node_type_name(e.dst_type) << "\n";
    if (gk.activated_type >= 0)
        out << "activation type=" << node_type_name(gk.activated_type)
            << " instance=" << gk.activated_instance << " color=" << color_name(gk.activated_color)
            << " state=" << gk.activated_state << "\n";
    return out.str();
}

std::optional<Recommendation> recommend(const InstanceGraph& gi, const TypeGraph& gk,
                                        const MetaEvaluator& eval, ChoiceMode mode, Rng& rng) {
    Recommendation rec;
    for (int i = 1; i < static_cast<int>(gi.nodes.size()); ++i) rec.candidates.push_back(i);
    if (rec.candidates.empty()) return std::nullopt;

    NoGradGuard guard;
    std::vector<GraphBatch> batches;
    std::vector<std::array<double, kNumMetaActions>> lambda_probs;
    for (int node : rec.candidates) {
        auto [gi2, gk2] = activate(gi, gk, node);
        GraphBatch batch = encode_type_graph(gk2);
        MetaEval out = eval(batch);
        rec.values.push_back(out.value);
        lambda_probs.push_back(out.lambda_probs);
        batches.push_back(std::move(batch));
    }

    size_t chosen;
    if (mode == ChoiceMode::Greedy) {
        chosen = static_cast<size_t>(
            std::max_element(rec.values.begin(), rec.values.end()) - rec.values.begin());
    } else {
        Tensor probs = softmax(Tensor::from_data({static_cast<int>(rec.values.size())}, rec.values));
        chosen = static_cast<size_t>(categorical_sample(probs.value(), rng).first);
    }

    rec.target_node = rec.candidates[chosen];
    rec.target_object_id = gi.nodes[rec.target_node].object_id;
    rec.value = rec.values[chosen];
    rec.meta_state = std::move(batches[chosen]);

    const auto& probs = lambda_probs[chosen];
    if (mode == ChoiceMode::Greedy) {
        rec.lambda = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
        rec.lambda_log_prob = std::log(probs[rec.lambda]);
    } else {
        auto [lambda, log_prob] =
            categorical_sample(std::vector<double>(probs.begin(), probs.end()), rng);
        rec.lambda = lambda;
        rec.lambda_log_prob = log_prob;
    }
    return rec;
}

}  // namespace kix
