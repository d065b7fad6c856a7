#include "pipecache/early_stopping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace pipecache {

namespace {

double ipow(double base, std::uint32_t exp)
{
    double out = 1.0;
    for (std::uint32_t i = 0; i < exp; ++i)
        out *= base;
    return out;
}

// Cumulative resource per configuration in generation g (1-based);
// exactly R in the final generation.
double generation_resource(const SHParams& p, std::uint32_t g)
{
    return p.max_resource / ipow(static_cast<double>(p.eta), p.generations - g);
}

}

void SHParams::validate() const
{
    if (population < 1)
        throw ConfigError("successive halving requires at least one configuration");
    if (!(max_resource > 0))
        throw ConfigError("successive halving requires a positive maximum resource");
    if (eta < 2)
        throw ConfigError("elimination rate eta must be an integer >= 2");
    if (generations < 1)
        throw ConfigError("successive halving requires at least one generation");
    const double needed = ipow(static_cast<double>(eta), generations - 1);
    if (static_cast<double>(population) < needed)
        throw ConfigError("need n >= eta^(G-1) so that at least one configuration "
                          "will be trained for the full resource (n=" +
                          std::to_string(population) + ", eta^(G-1)=" +
                          std::to_string(static_cast<std::uint64_t>(needed)) + ")");
}

double min_resource(const SHParams& params)
{
    params.validate();
    return generation_resource(params, 1);
}

ShBudget sh_budget(const SHParams& params)
{
    params.validate();
    ShBudget budget;
    const double n = static_cast<double>(params.population);
    budget.without_early_stopping = n * params.max_resource;
    budget.with_early_stopping =
        n * min_resource(params) * static_cast<double>(params.generations);
    budget.reduction_ratio = ipow(static_cast<double>(params.eta), params.generations - 1) /
                             static_cast<double>(params.generations);
    return budget;
}

std::vector<std::vector<ConfigId>> SHResult::survivor_sets() const
{
    std::vector<std::vector<ConfigId>> sets;
    sets.reserve(generations.size());
    for (const auto& record : generations)
        sets.push_back(record.population);
    return sets;
}

SHResult successive_halving(std::span<const ConfigId> configs, const SHParams& params,
                            const ScoreOracle& oracle)
{
    params.validate();
    if (configs.size() != params.population)
        throw ConfigError("configuration count " + std::to_string(configs.size()) +
                          " does not match n=" + std::to_string(params.population));

    SHResult result;
    auto step = [&](std::vector<ConfigId>& population, std::uint32_t g) {
        GenerationRecord record;
        record.generation = g;
        record.population = population;
        record.resource = generation_resource(params, g);
        record.scores.reserve(population.size());
        for (ConfigId id : population) {
            try {
                record.scores.push_back(oracle(id, record.resource));
            } catch (const std::exception& e) {
                record.scores.push_back(std::numeric_limits<double>::infinity());
                record.diagnostics.push_back("config " + std::to_string(id) +
                                             ": " + e.what());
            }
        }
        result.generations.push_back(std::move(record));
    };
    auto prune = [&](std::vector<ConfigId> population, std::uint32_t) {
        const auto& record = result.generations.back();
        const std::size_t keep =
            std::max<std::size_t>(1, population.size() / params.eta);
        std::vector<std::size_t> order(population.size());
        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (record.scores[a] != record.scores[b])
                return record.scores[a] < record.scores[b];
            return record.population[a] < record.population[b];
        });
        std::vector<ConfigId> kept;
        kept.reserve(keep);
        for (std::size_t i = 0; i < keep; ++i)
            kept.push_back(record.population[order[i]]);
        std::sort(kept.begin(), kept.end());
        return kept;
    };
    auto populate = [](std::vector<ConfigId> population, std::uint32_t) {
        return population;  // SH only shrinks the population
    };

    std::vector<ConfigId> initial(configs.begin(), configs.end());
    run_early_stopping(std::move(initial), params.generations, step, prune, populate);

    const auto& last = result.generations.back();
    std::size_t best = 0;
    for (std::size_t i = 1; i < last.population.size(); ++i) {
        if (last.scores[i] < last.scores[best] ||
            (last.scores[i] == last.scores[best] &&
             last.population[i] < last.population[best]))
            best = i;
    }
    result.winner = last.population[best];
    return result;
}

namespace {

// Fraction of the full training cost charged in generation g.
double training_scale(const SHParams& params, std::uint32_t g, TrainingMode mode)
{
    const double current = generation_resource(params, g) / params.max_resource;
    if (mode == TrainingMode::Retrain || g == 1)
        return current;
    const double previous = generation_resource(params, g - 1) / params.max_resource;
    return current - previous;
}

void check_survivors(const ExecutionPlan& plan,
                     std::span<const std::vector<std::uint32_t>> survivors,
                     const SHParams& params)
{
    if (survivors.size() != params.generations)
        throw ConfigError("expected one survivor set per generation");
    std::set<std::uint32_t> previous;
    for (std::size_t g = 0; g < survivors.size(); ++g) {
        if (survivors[g].empty())
            throw ConfigError("survivor set for generation " + std::to_string(g + 1) +
                              " is empty");
        for (auto p : survivors[g]) {
            if (p >= plan.path_count())
                throw ConfigError("survivor pipeline " + std::to_string(p) +
                                  " is not present in the dag");
            if (g > 0 && previous.count(p) == 0)
                throw ConfigError("survivor sets must be nested: pipeline " +
                                  std::to_string(p) + " reappears in generation " +
                                  std::to_string(g + 1));
        }
        previous = std::set<std::uint32_t>(survivors[g].begin(), survivors[g].end());
    }
}

}

std::vector<Dag> sh_subdags(const Dag& dag,
                            std::span<const std::vector<std::uint32_t>> survivors_per_generation,
                            const SHParams& params, TrainingMode mode)
{
    params.validate();
    const auto plan = execution_plan(dag);
    check_survivors(plan, survivors_per_generation, params);

    std::vector<Dag> out;
    out.reserve(params.generations);
    for (std::uint32_t g = 1; g <= params.generations; ++g) {
        const double scale = training_scale(params, g, mode);
        Dag sub = dag.has_synthetic_root() ? Dag::with_synthetic_root()
                                           : Dag::with_root(dag.node(dag.root()));
        std::vector<std::uint32_t> survivors = survivors_per_generation[g - 1];
        std::sort(survivors.begin(), survivors.end());
        for (auto p : survivors) {
            const auto& path = plan.paths()[p];
            NodeId at = sub.root();
            for (std::size_t i = 0; i < path.size(); ++i) {
                const Node& src = dag.node(path[i]);
                if (!dag.has_synthetic_root() && i == 0)
                    continue;  // real root already copied
                NodeId child = sub.find_child(at, src.signature);
                if (child == kNoNode) {
                    const bool training = i + 1 == path.size();
                    child = sub.add_node(at, src.signature,
                                         training ? src.cost * scale : src.cost,
                                         src.size);
                }
                at = child;
            }
            sub.mark_terminal(at);
        }
        out.push_back(std::move(sub));
    }
    return out;
}

ShWorkload sh_workload(const Dag& dag,
                       std::span<const std::vector<std::uint32_t>> survivors_per_generation,
                       const SHParams& params, TrainingMode mode)
{
    params.validate();
    const auto base_plan = execution_plan(dag);
    check_survivors(base_plan, survivors_per_generation, params);

    // The combined dag keeps the original nodes and their ids, so the
    // shared preprocessing prefixes are literally the same cache entries
    // across generations. Partially trained models get their own nodes;
    // a full-resource generation reuses the original training node, which
    // also makes a one-generation run identical to the plain workload.
    ShWorkload workload;
    workload.dag = dag;
    Dag& combined = workload.dag;

    std::vector<std::vector<NodeId>> paths;
    for (std::uint32_t g = 1; g <= params.generations; ++g) {
        const double resource = generation_resource(params, g);
        workload.generation_resource.push_back(resource);
        const double scale = training_scale(params, g, mode);
        std::vector<std::uint32_t> survivors = survivors_per_generation[g - 1];
        std::sort(survivors.begin(), survivors.end());
        for (auto p : survivors) {
            const auto& path = base_plan.paths()[p];
            if (path.size() < 2 && !dag.has_synthetic_root())
                throw ConfigError("training node must not be the workload root");
            std::vector<NodeId> sh_path(path.begin(), path.end());
            if (scale != 1.0) {
                const Node& training = dag.node(path.back());
                auto sig_params = training.signature.params();
                for (const auto& [pname, value] : sig_params)
                    if (pname == "resource")
                        throw ConfigError("training signature already carries a "
                                          "'resource' parameter: " +
                                          training.signature.canonical_key());
                sig_params.emplace_back("resource", resource);
                OpSignature scaled_sig(training.signature.operator_name(),
                                       std::move(sig_params));
                const NodeId parent = path.size() >= 2 ? path[path.size() - 2]
                                                       : combined.root();
                NodeId scaled = combined.find_child(parent, scaled_sig);
                if (scaled == kNoNode)
                    scaled = combined.add_node(parent, std::move(scaled_sig),
                                               training.cost * scale, training.size);
                combined.mark_terminal(scaled);
                sh_path.back() = scaled;
            }
            paths.push_back(std::move(sh_path));
        }
    }
    workload.plan = ExecutionPlan(std::move(paths));
    return workload;
}

nlohmann::json sh_result_to_json(const SHResult& result, const SHParams& params)
{
    nlohmann::json generations = nlohmann::json::array();
    for (const auto& record : result.generations) {
        generations.push_back({{"generation", record.generation},
                               {"resource", record.resource},
                               {"population", record.population},
                               {"scores", record.scores},
                               {"diagnostics", record.diagnostics}});
    }
    return {{"params",
             {{"n", params.population},
              {"R", params.max_resource},
              {"eta", params.eta},
              {"G", params.generations}}},
            {"winner", result.winner},
            {"generations", generations}};
}

}
