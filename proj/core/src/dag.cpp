#include "pipecache/dag.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <stdexcept>

#include "pipecache/errors.hpp"

namespace pipecache {

std::string canonical_text(const ParamValue& value)
{
    struct Render {
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(std::int64_t i) const { return std::to_string(i); }
        std::string operator()(double d) const
        {
            char buf[32];
            auto [end, ec] = std::to_chars(buf, buf + sizeof buf, d);
            if (ec != std::errc{})
                throw ConfigError("unrepresentable parameter value");
            return std::string(buf, end);
        }
        std::string operator()(const std::string& s) const { return s; }
    };
    return std::visit(Render{}, value);
}

OpSignature::OpSignature(std::string operator_name)
    : OpSignature(std::move(operator_name), {})
{
}

OpSignature::OpSignature(std::string operator_name,
                         std::vector<std::pair<std::string, ParamValue>> params)
    : operator_name_(std::move(operator_name)), params_(std::move(params))
{
    std::sort(params_.begin(), params_.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < params_.size(); ++i)
        if (params_[i].first == params_[i - 1].first)
            throw ConfigError("duplicate parameter name '" + params_[i].first +
                              "' in signature " + operator_name_);
    key_ = operator_name_;
    key_ += '(';
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (i > 0)
            key_ += ',';
        key_ += params_[i].first;
        key_ += '=';
        key_ += canonical_text(params_[i].second);
    }
    key_ += ')';
}

std::string PipelineSpec::canonical_key() const
{
    std::string key;
    for (const auto& stage : stages) {
        key += '/';
        key += stage.canonical_key();
    }
    return key;
}

Dag Dag::with_synthetic_root()
{
    Dag dag;
    dag.synthetic_root_ = true;
    dag.root_ = 0;
    dag.nodes_.push_back(Node{0, OpSignature("__root__"), 0.0, 0.0});
    dag.children_.emplace_back();
    dag.parents_.emplace_back();
    return dag;
}

Dag Dag::with_root(Node root)
{
    if (root.cost < 0 || root.size < 0)
        throw StructureError("negative cost or size on root node");
    Dag dag;
    dag.root_ = 0;
    root.id = 0;
    dag.nodes_.push_back(std::move(root));
    dag.children_.emplace_back();
    dag.parents_.emplace_back();
    return dag;
}

NodeId Dag::add_node(NodeId parent, OpSignature signature, double cost, double size)
{
    if (parent >= nodes_.size())
        throw StructureError("add_node: unknown parent id");
    if (cost < 0 || size < 0)
        throw StructureError("negative cost or size on node " + signature.canonical_key());
    const auto id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back(Node{id, std::move(signature), cost, size});
    children_.emplace_back();
    parents_.emplace_back();
    add_edge(parent, id);
    return id;
}

void Dag::add_edge(NodeId parent, NodeId child)
{
    if (parent >= nodes_.size() || child >= nodes_.size())
        throw StructureError("add_edge: unknown node id");
    auto& siblings = children_[parent];
    const auto pos = std::lower_bound(
        siblings.begin(), siblings.end(), child, [this](NodeId a, NodeId b) {
            return nodes_[a].signature.canonical_key() < nodes_[b].signature.canonical_key();
        });
    siblings.insert(pos, child);
    parents_[child].push_back(parent);
}

void Dag::mark_terminal(NodeId node)
{
    if (node >= nodes_.size())
        throw StructureError("mark_terminal: unknown node id");
    if (std::find(terminals_.begin(), terminals_.end(), node) == terminals_.end())
        terminals_.push_back(node);
}

std::size_t Dag::operator_node_count() const
{
    return nodes_.size() - (synthetic_root_ ? 1 : 0);
}

std::vector<std::pair<NodeId, NodeId>> Dag::edges() const
{
    std::vector<std::pair<NodeId, NodeId>> out;
    for (NodeId p = 0; p < nodes_.size(); ++p)
        for (NodeId c : children_[p])
            out.emplace_back(p, c);
    std::sort(out.begin(), out.end());
    return out;
}

NodeId Dag::find_child(NodeId parent, const OpSignature& sig) const
{
    for (NodeId c : children_[parent])
        if (nodes_[c].signature == sig)
            return c;
    return kNoNode;
}

void Dag::set_cost(NodeId id, double cost)
{
    if (cost < 0)
        throw StructureError("negative cost");
    nodes_[id].cost = cost;
}

void Dag::set_size(NodeId id, double size)
{
    if (size < 0)
        throw StructureError("negative size");
    nodes_[id].size = size;
}

std::size_t Dag::depth(NodeId id) const
{
    std::size_t d = 0;
    while (id != root_) {
        if (parents_[id].empty())
            throw StructureError("node unreachable from root");
        id = parents_[id].front();
        ++d;
    }
    return d;
}

void Dag::validate() const
{
    if (nodes_.empty() || root_ == kNoNode)
        throw StructureError("empty dag");
    for (const auto& node : nodes_)
        if (node.cost < 0 || node.size < 0)
            throw StructureError("negative cost or size on node " +
                                 node.signature.canonical_key());
    if (synthetic_root_ &&
        (nodes_[root_].cost != 0.0 || nodes_[root_].size != 0.0))
        throw StructureError("synthetic root must have zero cost and size");

    // Cycle check: iterative DFS with colors over children edges.
    enum class Color : std::uint8_t { White, Grey, Black };
    std::vector<Color> color(nodes_.size(), Color::White);
    std::vector<std::pair<NodeId, std::size_t>> stack{{root_, 0}};
    color[root_] = Color::Grey;
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < children_[node].size()) {
            const NodeId child = children_[node][next++];
            if (color[child] == Color::Grey)
                throw StructureError("cycle detected through node " +
                                     nodes_[child].signature.canonical_key());
            if (color[child] == Color::White) {
                color[child] = Color::Grey;
                stack.emplace_back(child, 0);
            }
        } else {
            color[node] = Color::Black;
            stack.pop_back();
        }
    }
    for (NodeId id = 0; id < nodes_.size(); ++id)
        if (color[id] != Color::Black)
            throw StructureError("node unreachable from root: " +
                                 nodes_[id].signature.canonical_key());

    // Sibling signatures unique (children are sorted by canonical key).
    for (NodeId id = 0; id < nodes_.size(); ++id) {
        const auto& kids = children_[id];
        for (std::size_t i = 1; i < kids.size(); ++i)
            if (nodes_[kids[i]].signature == nodes_[kids[i - 1]].signature)
                throw StructureError("duplicate sibling signature " +
                                     nodes_[kids[i]].signature.canonical_key());
    }
}

bool Dag::operator==(const Dag& other) const
{
    if (nodes_.size() != other.nodes_.size() || root_ != other.root_ ||
        synthetic_root_ != other.synthetic_root_ || terminals_ != other.terminals_ ||
        children_ != other.children_ || parents_ != other.parents_)
        return false;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& a = nodes_[i];
        const auto& b = other.nodes_[i];
        if (a.id != b.id || !(a.signature == b.signature) || a.cost != b.cost ||
            a.size != b.size)
            return false;
    }
    return true;
}

ExecutionPlan::ExecutionPlan(std::vector<std::vector<NodeId>> paths)
    : paths_(std::move(paths))
{
    for (std::uint32_t p = 0; p < paths_.size(); ++p) {
        if (paths_[p].empty())
            throw StructureError("empty path in execution plan");
        for (std::uint32_t i = 0; i < paths_[p].size(); ++i) {
            step_path_.push_back(p);
            step_offset_.push_back(i);
        }
    }
}

NodeId ExecutionPlan::node_at(std::size_t t) const
{
    if (t >= step_path_.size())
        throw std::out_of_range("plan step out of range");
    return paths_[step_path_[t]][step_offset_[t]];
}

std::span<const NodeId> ExecutionPlan::active_suffix(std::size_t t) const
{
    if (t >= step_path_.size())
        throw std::out_of_range("plan step out of range");
    const auto& path = paths_[step_path_[t]];
    return {path.data() + step_offset_[t], path.size() - step_offset_[t]};
}

std::size_t ExecutionPlan::path_of_step(std::size_t t) const
{
    if (t >= step_path_.size())
        throw std::out_of_range("plan step out of range");
    return step_path_[t];
}

void CostTable::set(const OpSignature& sig, double cost, double size)
{
    if (cost < 0 || size < 0)
        throw ConfigError("negative cost or size for " + sig.canonical_key());
    entries_[sig.canonical_key()] = Entry{cost, size};
}

const CostTable::Entry& CostTable::at(const OpSignature& sig) const
{
    const auto it = entries_.find(sig.canonical_key());
    if (it == entries_.end())
        throw ConfigError("no cost assigned for signature " + sig.canonical_key());
    return it->second;
}

bool CostTable::contains(const OpSignature& sig) const
{
    return entries_.count(sig.canonical_key()) != 0;
}

MergeResult merge_pipelines(std::span<const PipelineSpec> pipelines)
{
    MergeResult result;
    result.dag = Dag::with_synthetic_root();
    Dag& dag = result.dag;
    for (const auto& pipeline : pipelines) {
        if (pipeline.stages.empty())
            throw ConfigError("cannot merge an empty pipeline");
        NodeId at = dag.root();
        bool created = false;
        for (const auto& sig : pipeline.stages) {
            NodeId child = dag.find_child(at, sig);
            if (child == kNoNode) {
                child = dag.add_node(at, sig, 0.0, 0.0);
                created = true;
            }
            at = child;
        }
        const auto& terms = dag.terminals();
        const bool already_terminal =
            std::find(terms.begin(), terms.end(), at) != terms.end();
        if (!created && already_terminal)
            ++result.duplicates_dropped;
        else
            dag.mark_terminal(at);
    }
    return result;
}

double total_cost_independent(std::span<const PipelineSpec> pipelines, const CostTable& costs)
{
    double total = 0.0;
    for (const auto& pipeline : pipelines)
        for (const auto& sig : pipeline.stages)
            total += costs.at(sig).cost;
    return total;
}

double total_cost_merged(const Dag& dag)
{
    double total = 0.0;
    for (NodeId id = 0; id < dag.node_count(); ++id)
        total += dag.node(id).cost;
    return total;
}

double speedup(std::span<const PipelineSpec> pipelines, const CostTable& costs)
{
    const double independent = total_cost_independent(pipelines, costs);
    Dag dag = merge_pipelines(pipelines).dag;
    apply_costs(dag, costs);
    const double merged = total_cost_merged(dag);
    if (merged <= 0.0)
        throw ConfigError("speedup undefined: merged evaluation cost is zero");
    return independent / merged;
}

double max_speedup_uniform(std::size_t stage_count, std::size_t pipeline_count)
{
    if (stage_count < 1 || pipeline_count < 1)
        throw ConfigError("max_speedup_uniform requires at least one stage and pipeline");
    const double v = static_cast<double>(stage_count);
    const double p = static_cast<double>(pipeline_count);
    return v * p / (v + p - 1.0);
}

ExecutionPlan execution_plan(const Dag& dag)
{
    dag.validate();
    std::set<NodeId> terminal_set(dag.terminals().begin(), dag.terminals().end());
    if (terminal_set.empty()) {
        // Fall back to sinks (nodes without children).
        for (NodeId id = 0; id < dag.node_count(); ++id)
            if (dag.children(id).empty())
                terminal_set.insert(id);
    }
    if (terminal_set.empty())
        throw StructureError("dag has no sink");

    std::vector<std::vector<NodeId>> paths;
    std::vector<NodeId> current;
    // Children are stored in ascending canonical-signature order, so a
    // plain DFS yields the canonical traversal.
    auto visit = [&](auto&& self, NodeId node) -> void {
        const bool on_path = !(dag.has_synthetic_root() && node == dag.root());
        if (on_path)
            current.push_back(node);
        if (terminal_set.count(node) && on_path)
            paths.push_back(current);
        for (NodeId child : dag.children(node))
            self(self, child);
        if (on_path)
            current.pop_back();
    };
    visit(visit, dag.root());
    return ExecutionPlan(std::move(paths));
}

std::span<const NodeId> active_set(const ExecutionPlan& plan, std::size_t t)
{
    return plan.active_suffix(t);
}

double plan_cost(const ExecutionPlan& plan, const Dag& dag)
{
    double total = 0.0;
    for (std::size_t t = 0; t < plan.step_count(); ++t)
        total += dag.node(plan.node_at(t)).cost;
    return total;
}

void apply_costs(Dag& dag, const CostTable& costs)
{
    for (NodeId id = 0; id < dag.node_count(); ++id) {
        if (dag.has_synthetic_root() && id == dag.root())
            continue;
        const auto& entry = costs.at(dag.node(id).signature);
        dag.set_cost(id, entry.cost);
        dag.set_size(id, entry.size);
    }
}

void apply_stage_costs(Dag& dag, std::span<const double> costs, std::span<const double> sizes)
{
    if (costs.size() != sizes.size())
        throw ConfigError("stage cost and size lists must have equal length");
    for (NodeId id = 0; id < dag.node_count(); ++id) {
        if (dag.has_synthetic_root() && id == dag.root())
            continue;
        const std::size_t stage = dag.depth(id) - (dag.has_synthetic_root() ? 1 : 0);
        if (stage >= costs.size())
            throw ConfigError("node deeper than the stage cost list: " +
                              dag.node(id).signature.canonical_key());
        dag.set_cost(id, costs[stage]);
        dag.set_size(id, sizes[stage]);
    }
}

std::vector<PipelineSpec> extract_pipelines(const Dag& dag)
{
    const auto plan = execution_plan(dag);
    std::vector<PipelineSpec> out;
    out.reserve(plan.path_count());
    for (const auto& path : plan.paths()) {
        PipelineSpec spec;
        spec.stages.reserve(path.size());
        for (NodeId id : path)
            spec.stages.push_back(dag.node(id).signature);
        out.push_back(std::move(spec));
    }
    return out;
}

}
