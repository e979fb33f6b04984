#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kix/env.hpp"
#include "kix/layers.hpp"
#include "kix/rng.hpp"

namespace kix {

// Two graph views of a scene: the instance graph holds one node per observed
// object, the type graph collapses instances onto a fixed six-type node set.

enum NodeType : int {
    kTypeAgent = 0,
    kTypeDoor = 1,
    kTypeKey = 2,
    kTypeBall = 3,
    kTypeGoalBall = 4,  // the blue ball; obstructing balls stay kTypeBall
    kTypeBox = 5,
};
constexpr int kNumNodeTypes = 6;

enum EdgeRelation : int {
    kRelVisible = 0,
    kRelAdjacent = 1,
    kRelCarrying = 2,
    kRelActivated = 3,
};
constexpr int kNumRelations = 4;

enum MetaAction : int {
    kMetaPickup = 0,
    kMetaDrop = 1,
    kMetaReveal = 2,
    kMetaOpen = 3,
    kMetaOpenWithKey = 4,
};
constexpr int kNumMetaActions = 5;

// Width of encoded type-graph node features: type one-hot plus the binding
// color one-hot carried by the activated node.
constexpr int kNodeFeatureDim = kNumNodeTypes + kNumColors;

const char* node_type_name(int type);
const char* relation_name(int relation);
const char* meta_action_name(int lambda);
int meta_action_from_name(const std::string& name);

struct InstanceNode {
    int type = kTypeAgent;   // NodeType
    int color = kColorNone;
    int state = 0;           // door state, 0 otherwise
    int view_row = -1;       // 7x7 view cell; (-1,-1) for the carried object
    int view_col = -1;
    int object_id = -1;      // world binding; -1 for the agent
    bool carried = false;

    bool operator==(const InstanceNode&) const = default;
};

struct InstanceEdge {
    int src = 0;
    int dst = 0;
    int relation = kRelVisible;

    bool operator==(const InstanceEdge&) const = default;
};

struct InstanceGraph {
    std::vector<InstanceNode> nodes;  // node 0 is always the agent
    std::vector<InstanceEdge> edges;
    int activated_node = -1;

    bool operator==(const InstanceGraph&) const = default;
};

struct TypeEdge {
    int src_type = 0;
    int dst_type = 0;
    int relation = 0;

    auto operator<=>(const TypeEdge&) const = default;
};

struct TypeGraph {
    std::vector<TypeEdge> edges;  // sorted, deduplicated
    int activated_type = -1;
    int activated_instance = -1;   // instance-node binding for the activation
    int activated_color = kColorNone;
    int activated_state = 0;

    bool operator==(const TypeGraph&) const = default;
};

// Builds the instance graph of one observation: visible edges agent->object,
// adjacent edges between 4-neighbouring object cells (both directions) and
// agent->object for the faced cell, a carrying edge for the inventory object.
InstanceGraph build_instance_graph(const Observation& obs, const Inventory& inventory);

// Collapses instances to the fixed type node set, deduplicating edges.
// Throws when a node's type falls outside the vocabulary.
TypeGraph map_to_type_graph(const InstanceGraph& gi);

// Marks one non-agent instance node as activated in both graphs (pure copies).
// Throws on the agent node, an out-of-range node, or a second activation.
std::pair<InstanceGraph, TypeGraph> activate(const InstanceGraph& gi, const TypeGraph& gk,
                                             int target_node);

// Fixed-size encoding: 6 nodes with one-hot type (+ one-hot binding color on
// the activated type node), one-hot relation edge attributes, node order by
// type index.
GraphBatch encode_type_graph(const TypeGraph& gk);

// Inverse of encode_type_graph for round-trip checks and inspection.
TypeGraph decode_encoded_graph(const GraphBatch& batch);

// Canonical text form (sorted nodes and edges) for golden tests and the CLI.
std::string serialize_instance_graph(const InstanceGraph& gi);
std::string serialize_type_graph(const TypeGraph& gk);

struct MetaEval {
    double value = 0.0;
    std::array<double, kNumMetaActions> lambda_probs{};
};
using MetaEvaluator = std::function<MetaEval(const GraphBatch&)>;

enum class ChoiceMode { Sample, Greedy };

struct Recommendation {
    int target_node = -1;       // instance node index
    int target_object_id = -1;  // world object behind that node
    int lambda = -1;            // MetaAction
    double lambda_log_prob = 0.0;
    double value = 0.0;             // chosen candidate's state value
    std::vector<int> candidates;    // instance node indices, evaluation order
    std::vector<double> values;     // per-candidate state values
    GraphBatch meta_state;          // encoding of the chosen activated type graph
};

// Evaluates every non-agent node under its activated type graph, picks the
// object by softmax(values, temperature 1) in Sample mode or argmax in Greedy
// mode, then draws lambda from the chosen object's distribution. Returns
// nullopt when the instance graph has no candidate objects.
std::optional<Recommendation> recommend(const InstanceGraph& gi, const TypeGraph& gk,
                                        const MetaEvaluator& eval, ChoiceMode mode, Rng& rng);

}  // namespace kix
