#ifndef PIPECACHE_EARLY_STOPPING_HPP
#define PIPECACHE_EARLY_STOPPING_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pipecache/dag.hpp"
#include "pipecache/errors.hpp"

namespace pipecache {

/*
 * Generic step/prune/populate evolution loop. `step` trains the current
 * population in place, `prune` eliminates underperformers, `populate`
 * refills the next generation. Prune must never empty the population.
 */
template <typename Elem>
struct EarlyStoppingRun {
    std::vector<Elem> final_population;
    std::vector<std::vector<Elem>> per_generation;  // populations after each generation
};

template <typename Elem, typename StepFn, typename PruneFn, typename PopulateFn>
EarlyStoppingRun<Elem> run_early_stopping(std::vector<Elem> population,
                                          std::uint32_t generations, StepFn&& step,
                                          PruneFn&& prune, PopulateFn&& populate)
{
    if (population.empty())
        throw ConfigError("early stopping requires a non-empty population");
    if (generations < 1)
        throw ConfigError("early stopping requires at least one generation");
    EarlyStoppingRun<Elem> run;
    for (std::uint32_t g = 1; g <= generations; ++g) {
        step(population, g);
        population = prune(std::move(population), g);
        if (population.empty())
            throw ContractViolation("prune emptied the population at generation " +
                                    std::to_string(g));
        population = populate(std::move(population), g);
        if (population.empty())
            throw ContractViolation("populate emptied the population at generation " +
                                    std::to_string(g));
        run.per_generation.push_back(population);
    }
    run.final_population = std::move(population);
    return run;
}

struct SHParams {
    std::size_t population = 0;   // n
    double max_resource = 1.0;    // R
    std::uint32_t eta = 2;        // elimination rate
    std::uint32_t generations = 1;

    // Enforces n >= eta^(G-1) so at least one configuration reaches R.
    void validate() const;
};

// r = R * eta^-(G-1), the first-generation resource per configuration.
double min_resource(const SHParams& params);

struct ShBudget {
    double with_early_stopping = 0;     // n * R * eta^-(G-1) * G
    double without_early_stopping = 0;  // n * R
    double reduction_ratio = 1;         // eta^(G-1) / G
};

ShBudget sh_budget(const SHParams& params);

using ConfigId = std::uint32_t;

// Lower scores are better. Must be deterministic for a given
// (configuration, cumulative resource); throwing marks the
// configuration worst and records a diagnostic.
using ScoreOracle = std::function<double(ConfigId config, double cumulative_resource)>;

struct GenerationRecord {
    std::uint32_t generation = 0;
    std::vector<ConfigId> population;  // configurations trained this generation
    double resource = 0;               // cumulative resource per configuration
    std::vector<double> scores;        // parallel to population
    std::vector<std::string> diagnostics;
};

struct SHResult {
    ConfigId winner = 0;
    std::vector<GenerationRecord> generations;

    // Survivor id sets per generation (the populations that were trained).
    std::vector<std::vector<ConfigId>> survivor_sets() const;
};

// Alg-style successive halving: train survivors at r*eta^(g-1), keep the
// top floor(|P|/eta) by (score, id), never below one. Populate is the
// identity; the population only shrinks.
SHResult successive_halving(std::span<const ConfigId> configs, const SHParams& params,
                            const ScoreOracle& oracle);

/*
 * Training-cost accounting for the per-generation sub-DAGs.  Warm-started
 * training pays only the increment over the previous generation;
 * retraining from scratch pays the full cumulative resource each time.
 */
enum class TrainingMode : std::uint8_t { WarmStart, Retrain };

// Per-generation pruned DAGs: generation g keeps the surviving pipelines
// (indices into the plan's path order) and scales each terminal training
// node's cost by resource_g / R. Non-training nodes keep their costs.
std::vector<Dag> sh_subdags(const Dag& dag,
                            std::span<const std::vector<std::uint32_t>> survivors_per_generation,
                            const SHParams& params, TrainingMode mode);

/*
 * The concatenated multi-generation workload fed to the cache simulator:
 * one DAG sharing all preprocessing nodes across generations, with a
 * distinct resource-scaled training node per (pipeline, generation), plus
 * the plan that replays the surviving paths generation by generation.
 */
struct ShWorkload {
    Dag dag;
    ExecutionPlan plan;
    std::vector<double> generation_resource;  // cumulative resource per config
};

ShWorkload sh_workload(const Dag& dag,
                       std::span<const std::vector<std::uint32_t>> survivors_per_generation,
                       const SHParams& params, TrainingMode mode);

nlohmann::json sh_result_to_json(const SHResult& result, const SHParams& params);

}

#endif
