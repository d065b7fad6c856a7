#ifndef PIPECACHE_DAG_HPP
#define PIPECACHE_DAG_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace pipecache {

// A hyperparameter value. Values that render to the same canonical text
// denote the same setting (an integer 2 and the label "2" coincide).
using ParamValue = std::variant<bool, std::int64_t, double, std::string>;

// Canonical textual rendering: round-trip exact for doubles (shortest
// form via to_chars), plain decimal for integers, true/false for bools.
std::string canonical_text(const ParamValue& value);

/*
 * One pipeline stage with concrete hyperparameter settings.  Two
 * signatures are equal iff the operator name and every canonicalized
 * parameter value are equal; params are kept sorted by name.
 */
class OpSignature {
public:
    OpSignature() = default;
    explicit OpSignature(std::string operator_name);
    OpSignature(std::string operator_name,
                std::vector<std::pair<std::string, ParamValue>> params);

    const std::string& operator_name() const { return operator_name_; }
    const std::vector<std::pair<std::string, ParamValue>>& params() const { return params_; }

    // "op(a=1,b=true)"; total order and equality are defined on this text.
    const std::string& canonical_key() const { return key_; }

    bool operator==(const OpSignature& other) const { return key_ == other.key_; }
    bool operator<(const OpSignature& other) const { return key_ < other.key_; }

private:
    std::string operator_name_;
    std::vector<std::pair<std::string, ParamValue>> params_;
    std::string key_;
};

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = static_cast<NodeId>(-1);

// A pipeline-stage computation: cost in time units, size in memory units.
struct Node {
    NodeId id = kNoNode;
    OpSignature signature;
    double cost = 0.0;
    double size = 0.0;
};

// An ordered stage list, source to sink.
struct PipelineSpec {
    std::vector<OpSignature> stages;

    bool operator==(const PipelineSpec& other) const = default;
    std::string canonical_key() const;
};

/*
 * A rooted DAG of pipeline-stage computations.  DAGs built by merging
 * pipelines carry a synthetic zero-cost root standing for the shared raw
 * input; generated and profiled workloads use a real, costed root.
 * Children are kept sorted by canonical signature, which fixes one
 * deterministic depth-first order for everything downstream.
 */
class Dag {
public:
    Dag() = default;

    static Dag with_synthetic_root();
    static Dag with_root(Node root);

    NodeId add_node(NodeId parent, OpSignature signature, double cost, double size);
    void add_edge(NodeId parent, NodeId child);  // extra parents (profiled DAGs)
    void mark_terminal(NodeId node);             // node ends a pipeline

    std::size_t node_count() const { return nodes_.size(); }
    // Operator nodes only; excludes a synthetic root.
    std::size_t operator_node_count() const;
    const Node& node(NodeId id) const { return nodes_[id]; }
    NodeId root() const { return root_; }
    bool has_synthetic_root() const { return synthetic_root_; }

    std::span<const NodeId> children(NodeId id) const { return children_[id]; }
    std::span<const NodeId> parents(NodeId id) const { return parents_[id]; }
    const std::vector<NodeId>& terminals() const { return terminals_; }

    std::vector<std::pair<NodeId, NodeId>> edges() const;
    // Edge count of the stage-node subgraph (root edges excluded when synthetic).
    NodeId find_child(NodeId parent, const OpSignature& sig) const;

    void set_cost(NodeId id, double cost);
    void set_size(NodeId id, double size);

    // Distance from the root; the root itself is depth 0.
    std::size_t depth(NodeId id) const;

    // Throws StructureError on cycles, unreachable nodes, duplicate
    // sibling signatures, or negative cost/size.
    void validate() const;

    bool operator==(const Dag& other) const;

private:
    std::vector<Node> nodes_;
    std::vector<std::vector<NodeId>> children_;
    std::vector<std::vector<NodeId>> parents_;
    std::vector<NodeId> terminals_;
    NodeId root_ = kNoNode;
    bool synthetic_root_ = false;
};

/*
 * A sequence of root-to-sink paths covering every stage node and edge;
 * the order a cache-less executor would compute nodes in.  A synthetic
 * root is omitted from paths.  Step t exposes its active suffix: the
 * executing node and its successors along the step's path.
 */
class ExecutionPlan {
public:
    ExecutionPlan() = default;
    explicit ExecutionPlan(std::vector<std::vector<NodeId>> paths);

    std::size_t step_count() const { return step_path_.size(); }
    std::size_t path_count() const { return paths_.size(); }
    const std::vector<std::vector<NodeId>>& paths() const { return paths_; }

    NodeId node_at(std::size_t t) const;
    // {i_t, ..., sink} along step t's path, in path order.
    std::span<const NodeId> active_suffix(std::size_t t) const;
    std::size_t path_of_step(std::size_t t) const;

    bool operator==(const ExecutionPlan& other) const { return paths_ == other.paths_; }

private:
    std::vector<std::vector<NodeId>> paths_;
    std::vector<std::uint32_t> step_path_;
    std::vector<std::uint32_t> step_offset_;
};

// Cost/size lookup keyed by signature, for costing pipeline lists.
class CostTable {
public:
    struct Entry {
        double cost = 0.0;
        double size = 0.0;
    };

    void set(const OpSignature& sig, double cost, double size = 0.0);
    const Entry& at(const OpSignature& sig) const;  // ConfigError if missing
    bool contains(const OpSignature& sig) const;

private:
    std::map<std::string, Entry> entries_;
};

struct MergeResult {
    Dag dag;
    std::size_t duplicates_dropped = 0;
};

// Collapse shared prefixes: nodes merge iff their whole ancestor chain
// (from the shared synthetic root) and signature agree. Identical
// pipelines are deduplicated and counted, not an error.
MergeResult merge_pipelines(std::span<const PipelineSpec> pipelines);

// Total evaluation time with every pipeline run independently.
double total_cost_independent(std::span<const PipelineSpec> pipelines, const CostTable& costs);

// Sum of node costs over the merged DAG (each node once).
double total_cost_merged(const Dag& dag);

// Ratio of independent to merged evaluation time.
double speedup(std::span<const PipelineSpec> pipelines, const CostTable& costs);

// Upper bound on the uniform-cost equal-length speedup:
// stages*pipelines / (stages + pipelines - 1).
double max_speedup_uniform(std::size_t stage_count, std::size_t pipeline_count);

// Depth-first plan, children in ascending canonical-signature order;
// one root-to-sink path per pipeline, each emitted in full.
ExecutionPlan execution_plan(const Dag& dag);

// Column A_t: the active node and its successors along step t's path.
std::span<const NodeId> active_set(const ExecutionPlan& plan, std::size_t t);

// Sum of step costs over the plan (equals the independent cost for
// merged-pipeline DAGs, where the synthetic root is free).
double plan_cost(const ExecutionPlan& plan, const Dag& dag);

// Assign costs/sizes to the nodes of a merged DAG from a signature table.
void apply_costs(Dag& dag, const CostTable& costs);

// Assign by stage depth: stage i of every pipeline gets costs[i]/sizes[i].
// For synthetic-root DAGs stage 0 is the root's children.
void apply_stage_costs(Dag& dag, std::span<const double> costs, std::span<const double> sizes);

// Root-to-terminal signature chains, in deterministic plan order.
// Synthetic roots are excluded, real roots included.
std::vector<PipelineSpec> extract_pipelines(const Dag& dag);

}

#endif
