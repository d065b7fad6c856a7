#include "pipecache/workloads.hpp"

#include <algorithm>
#include <deque>
#include <fstream>

#include "pipecache/errors.hpp"
#include "pipecache/rng.hpp"

namespace pipecache {

namespace {

void check_two_point(double lo, double hi, double p, const char* what)
{
    if (!(lo <= hi))
        throw ConfigError(std::string(what) + ": lo must be <= hi");
    if (!(p >= 0.0 && p <= 1.0))
        throw ConfigError(std::string(what) + ": probability must lie in [0, 1]");
}

struct CostValidator {
    void operator()(const UniformCost& m) const
    {
        if (m.value < 0)
            throw ConfigError("uniform cost must be non-negative");
    }
    void operator()(const RootHeavyCost& m) const
    {
        if (m.root < 0 || m.others < 0)
            throw ConfigError("root-heavy costs must be non-negative");
    }
    void operator()(const TwoPointCost& m) const
    {
        if (m.lo < 0)
            throw ConfigError("two-point cost must be non-negative");
        check_two_point(m.lo, m.hi, m.p_hi, "two-point cost");
    }
};

struct SizeValidator {
    void operator()(const UniformSize& m) const
    {
        if (m.value < 0)
            throw ConfigError("uniform size must be non-negative");
    }
    void operator()(const TwoPointSize& m) const
    {
        if (m.lo < 0)
            throw ConfigError("two-point size must be non-negative");
        check_two_point(m.lo, m.hi, m.p_hi, "two-point size");
    }
};

double cost_for(const CostModel& model, bool is_root, double coin)
{
    struct Eval {
        bool is_root;
        double coin;
        double operator()(const UniformCost& m) const { return m.value; }
        double operator()(const RootHeavyCost& m) const
        {
            return is_root ? m.root : m.others;
        }
        double operator()(const TwoPointCost& m) const
        {
            return coin < m.p_hi ? m.hi : m.lo;
        }
    };
    return std::visit(Eval{is_root, coin}, model);
}

double size_for(const SizeModel& model, double coin)
{
    struct Eval {
        double coin;
        double operator()(const UniformSize& m) const { return m.value; }
        double operator()(const TwoPointSize& m) const
        {
            return coin < m.p_hi ? m.hi : m.lo;
        }
    };
    return std::visit(Eval{coin}, model);
}

}

void TreeSpec::validate() const
{
    if (k < 2)
        throw ConfigError("tree branching factor k must be >= 2");
    if (d < 1)
        throw ConfigError("tree depth d must be >= 1");
    std::visit(CostValidator{}, cost);
    std::visit(SizeValidator{}, size);
}

Dag gen_kary_tree(const TreeSpec& spec)
{
    spec.validate();
    SplitRng rng(spec.seed);

    // One coin per node drawn in creation order; shared between the cost
    // and size models so two-point draws stay correlated.
    const double root_coin = rng.uniform01();
    Dag dag = Dag::with_root(Node{0, OpSignature("s0"),
                                  cost_for(spec.cost, true, root_coin),
                                  size_for(spec.size, root_coin)});

    std::vector<NodeId> frontier{dag.root()};
    for (std::uint32_t level = 1; level <= spec.d; ++level) {
        std::vector<NodeId> next;
        next.reserve(frontier.size() * spec.k);
        const std::string op = "s" + std::to_string(level);
        for (NodeId parent : frontier) {
            for (std::uint32_t b = 0; b < spec.k; ++b) {
                const double coin = rng.uniform01();
                const NodeId child = dag.add_node(
                    parent,
                    OpSignature(op, {{"b", static_cast<std::int64_t>(b)}}),
                    cost_for(spec.cost, false, coin), size_for(spec.size, coin));
                next.push_back(child);
                if (level == spec.d)
                    dag.mark_terminal(child);
            }
        }
        frontier = std::move(next);
    }
    return dag;
}

namespace {

nlohmann::json param_value_to_json(const ParamValue& value)
{
    struct ToJson {
        nlohmann::json operator()(bool b) const { return b; }
        nlohmann::json operator()(std::int64_t i) const { return i; }
        nlohmann::json operator()(double d) const { return d; }
        nlohmann::json operator()(const std::string& s) const { return s; }
    };
    return std::visit(ToJson{}, value);
}

ParamValue param_value_from_json(const nlohmann::json& j, const std::string& record)
{
    if (j.is_boolean())
        return j.get<bool>();
    if (j.is_number_integer())
        return j.get<std::int64_t>();
    if (j.is_number_float())
        return j.get<double>();
    if (j.is_string())
        return j.get<std::string>();
    throw ConfigError("record " + record + ": unsupported parameter value type");
}

}

nlohmann::json profile_to_json(const Dag& dag, const ProfileMetadata& metadata)
{
    nlohmann::json nodes = nlohmann::json::array();
    for (NodeId id = 0; id < dag.node_count(); ++id) {
        const Node& node = dag.node(id);
        nlohmann::json params = nlohmann::json::object();
        for (const auto& [name, value] : node.signature.params())
            params[name] = param_value_to_json(value);
        nlohmann::json parents = nlohmann::json::array();
        for (NodeId p : dag.parents(id))
            parents.push_back(p);
        nodes.push_back({{"id", id},
                         {"operator", node.signature.operator_name()},
                         {"params", params},
                         {"cost", node.cost},
                         {"size", node.size},
                         {"parents", parents}});
    }
    nlohmann::json j{{"version", 1},
                     {"metadata",
                      {{"time_unit", metadata.time_unit},
                       {"memory_unit", metadata.memory_unit},
                       {"dataset", metadata.dataset},
                       {"synthetic_root", dag.has_synthetic_root()}}},
                     {"nodes", nodes}};

    // Terminals are implied by childlessness; record them only when a
    // pipeline ends at an internal node.
    std::vector<NodeId> sinks;
    for (NodeId id = 0; id < dag.node_count(); ++id)
        if (dag.children(id).empty())
            sinks.push_back(id);
    std::vector<NodeId> terminals = dag.terminals();
    std::sort(terminals.begin(), terminals.end());
    if (!terminals.empty() && terminals != sinks)
        j["terminals"] = terminals;
    return j;
}

LoadedProfile profile_from_json(const nlohmann::json& j)
{
    if (!j.is_object())
        throw ConfigError("profile: expected a JSON object");
    const int version = j.value("version", 1);
    if (version != 1)
        throw ConfigError("unsupported profile schema version " + std::to_string(version));
    if (!j.contains("nodes") || !j.at("nodes").is_array() || j.at("nodes").empty())
        throw ConfigError("profile: missing or empty 'nodes' array");

    LoadedProfile out;
    const auto& jm = j.value("metadata", nlohmann::json::object());
    out.metadata.time_unit = jm.value("time_unit", "units");
    out.metadata.memory_unit = jm.value("memory_unit", "units");
    out.metadata.dataset = jm.value("dataset", "");
    const bool synthetic_root = jm.value("synthetic_root", false);

    struct Record {
        std::string id;
        OpSignature signature;
        double cost = 0;
        double size = 0;
        std::vector<std::string> parents;
    };
    std::vector<Record> records;
    std::map<std::string, std::size_t> by_id;
    for (const auto& jn : j.at("nodes")) {
        Record record;
        record.id = jn.at("id").dump();
        if (by_id.count(record.id))
            throw ConfigError("record " + record.id + ": duplicate node id");
        record.cost = jn.at("cost").get<double>();
        record.size = jn.at("size").get<double>();
        if (record.cost < 0 || record.size < 0)
            throw ConfigError("record " + record.id + ": negative cost or size");
        std::vector<std::pair<std::string, ParamValue>> params;
        if (jn.contains("params"))
            for (const auto& [pname, pv] : jn.at("params").items())
                params.emplace_back(pname, param_value_from_json(pv, record.id));
        record.signature = OpSignature(jn.at("operator").get<std::string>(),
                                       std::move(params));
        for (const auto& jp : jn.value("parents", nlohmann::json::array()))
            record.parents.push_back(jp.dump());
        by_id[record.id] = records.size();
        records.push_back(std::move(record));
    }

    std::size_t root_index = records.size();
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].parents.empty())
            continue;
        if (root_index != records.size())
            throw ConfigError("record " + records[i].id +
                              ": orphan node (a root already exists at record " +
                              records[root_index].id + ")");
        root_index = i;
    }
    if (root_index == records.size())
        throw ConfigError("profile has no root (every node has parents)");

    for (const auto& record : records)
        for (const auto& parent : record.parents)
            if (!by_id.count(parent))
                throw ConfigError("record " + record.id + ": unknown parent " + parent);

    // Topological construction; anything left unprocessed sits on a cycle.
    std::vector<std::size_t> pending(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        pending[i] = records[i].parents.size();
    std::vector<NodeId> dag_id(records.size(), kNoNode);

    const Record& root = records[root_index];
    if (synthetic_root) {
        if (root.cost != 0 || root.size != 0)
            throw ConfigError("record " + root.id +
                              ": synthetic root must have zero cost and size");
        out.dag = Dag::with_synthetic_root();
    } else {
        out.dag = Dag::with_root(Node{0, root.signature, root.cost, root.size});
    }
    dag_id[root_index] = out.dag.root();

    std::deque<std::size_t> ready{root_index};
    std::vector<std::vector<std::size_t>> child_records(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        for (const auto& parent : records[i].parents)
            child_records[by_id.at(parent)].push_back(i);

    std::size_t processed = 0;
    while (!ready.empty()) {
        const std::size_t at = ready.front();
        ready.pop_front();
        ++processed;
        for (std::size_t child : child_records[at]) {
            if (dag_id[child] == kNoNode) {
                dag_id[child] = out.dag.add_node(dag_id[at], records[child].signature,
                                                 records[child].cost,
                                                 records[child].size);
            } else {
                out.dag.add_edge(dag_id[at], dag_id[child]);
            }
            if (--pending[child] == 0)
                ready.push_back(child);
        }
    }
    if (processed != records.size())
        for (std::size_t i = 0; i < records.size(); ++i)
            if (dag_id[i] == kNoNode || pending[i] != 0)
                throw ConfigError("record " + records[i].id +
                                  ": unreachable or part of a cycle");

    if (j.contains("terminals")) {
        for (const auto& jt : j.at("terminals")) {
            const auto it = by_id.find(jt.dump());
            if (it == by_id.end())
                throw ConfigError("terminal refers to unknown record " + jt.dump());
            out.dag.mark_terminal(dag_id[it->second]);
        }
    } else {
        for (NodeId id = 0; id < out.dag.node_count(); ++id)
            if (out.dag.children(id).empty())
                out.dag.mark_terminal(id);
    }

    out.dag.validate();
    out.pipelines = extract_pipelines(out.dag);
    return out;
}

LoadedProfile load_profile(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open profile file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
    return profile_from_json(j);
}

void save_profile(const Dag& dag, const ProfileMetadata& metadata,
                  const std::filesystem::path& path)
{
    std::ofstream outfile(path);
    if (!outfile)
        throw ConfigError("cannot write profile file " + path.string());
    outfile << profile_to_json(dag, metadata).dump(2) << '\n';
}

namespace {

// Log-scaled ranges quoted with a zero lower bound are floored here.
constexpr double kLogFloor = 1e-8;

SearchSpace newsgroups_space()
{
    SearchSpace space;
    space.name = "newsgroups";
    space.stages = {
        {"ngrams", {{"ngrams", {{"n", IntegerDomain{2, 4}}}}}},
        {"top_features", {{"top_features", {{"k", IntegerDomain{1000, 100000}}}}}},
        {"train",
         {{"naive_bayes",
           {{"lambda", ContinuousDomain{kLogFloor, 1e4, Scale::Log}}}}}},
    };
    return space;
}

SearchSpace amazon_space()
{
    SearchSpace space;
    space.name = "amazon";
    space.stages = {
        {"ngrams", {{"ngrams", {{"n", IntegerDomain{2, 4}}}}}},
        {"top_features", {{"top_features", {{"k", IntegerDomain{10000, 1000000}}}}}},
        {"train",
         {{"linear_classifier",
           {{"lambda", ContinuousDomain{1e-5, 1e5, Scale::Log}}}}}},
    };
    return space;
}

SearchSpace timit_space()
{
    SearchSpace space;
    space.name = "timit";
    space.stages = {
        {"featurize",
         {{"random_features",
           {{"gamma", ContinuousDomain{5.5e-4, 5.5e4, Scale::Log}},
            {"distribution", CategoricalDomain{{"Cauchy", "Gaussian"}}}}}}},
        {"train",
         {{"lbfgs", {{"lambda", ContinuousDomain{kLogFloor, 1e5, Scale::Log}}}}}},
    };
    return space;
}

SearchSpace openml_micro_space()
{
    SearchSpace space;
    space.name = "openml_micro";
    space.stages = {
        {"preprocess",
         {{"none", {}}, {"standardize", {}}, {"normalize", {}}, {"minmax", {}}}},
        {"featurize",
         {{"pca",
           {{"variance_to_keep", ContinuousDomain{0.5, 1.0, Scale::Linear}},
            {"whiten", BinaryDomain{}}}},
          {"select_percentile",
           {{"percentile", ContinuousDomain{0.01, 1.0, Scale::Linear}}}},
          {"fast_ica",
           {{"n_components", IntegerDomain{10, 2001}},
            {"whiten", BinaryDomain{}}}}}},
        {"classify",
         {{"random_forest",
           {{"min_samples_split", IntegerDomain{2, 21}},
            {"min_samples_leaf", IntegerDomain{1, 20}},
            {"bootstrap", BinaryDomain{}}}},
          {"rbf_svm",
           {{"kernel_scale", ContinuousDomain{1e-4, 10, Scale::Log}},
            {"l2_reg", ContinuousDomain{1e-3, 1e3, Scale::Log}}}}}},
    };
    return space;
}

}

std::map<std::string, SearchSpace> builtin_spaces()
{
    std::map<std::string, SearchSpace> spaces;
    for (auto space : {newsgroups_space(), amazon_space(), timit_space(),
                       openml_micro_space()})
        spaces.emplace(space.name, std::move(space));
    return spaces;
}

nlohmann::json pipelines_to_json(std::span<const PipelineSpec> pipelines)
{
    nlohmann::json out = nlohmann::json::array();
    for (const auto& pipeline : pipelines) {
        nlohmann::json stages = nlohmann::json::array();
        for (const auto& sig : pipeline.stages) {
            nlohmann::json params = nlohmann::json::object();
            for (const auto& [name, value] : sig.params())
                params[name] = param_value_to_json(value);
            stages.push_back({{"operator", sig.operator_name()}, {"params", params}});
        }
        out.push_back({{"stages", stages}});
    }
    return {{"version", 1}, {"pipelines", out}};
}

std::vector<PipelineSpec> pipelines_from_json(const nlohmann::json& j)
{
    if (!j.is_object() || !j.contains("pipelines"))
        throw ConfigError("expected an object with a 'pipelines' array");
    std::vector<PipelineSpec> out;
    for (const auto& jp : j.at("pipelines")) {
        PipelineSpec spec;
        for (const auto& js : jp.at("stages")) {
            std::vector<std::pair<std::string, ParamValue>> params;
            if (js.contains("params"))
                for (const auto& [pname, pv] : js.at("params").items())
                    params.emplace_back(pname, param_value_from_json(pv, "pipeline"));
            spec.stages.emplace_back(js.at("operator").get<std::string>(),
                                     std::move(params));
        }
        out.push_back(std::move(spec));
    }
    return out;
}

}
