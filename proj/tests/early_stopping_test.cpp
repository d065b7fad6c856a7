#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "pipecache/early_stopping.hpp"
#include "pipecache/errors.hpp"
#include "pipecache/rng.hpp"
#include "pipecache/search_space.hpp"
#include "test_util.hpp"

using namespace pipecache;
using namespace pipecache::testutil;

namespace {

// 16 three-stage pipelines whose sinks are the training nodes; the
// training cost (2) equals the two preprocessing steps combined.
Dag training_workload()
{
    SearchSpace space;
    space.stages = {
        {"a", {{"A", {{"x", ContinuousDomain{0, 1, Scale::Linear}}}}}},
        {"b", {{"B", {{"y", ContinuousDomain{0, 1, Scale::Linear}}}}}},
        {"train", {{"T", {{"z", ContinuousDomain{0, 1, Scale::Linear}}}}}},
    };
    auto pipelines = sample_gridded_random(space, {4, 4, 1}, 321);
    auto dag = merge_pipelines(pipelines).dag;
    const std::vector<double> costs{1.0, 1.0, 2.0};
    const std::vector<double> sizes{1.0, 1.0, 1.0};
    apply_stage_costs(dag, costs, sizes);
    return dag;
}

double training_cost_sum(const Dag& dag)
{
    double sum = 0.0;
    for (NodeId terminal : dag.terminals())
        sum += dag.node(terminal).cost;
    return sum;
}

std::vector<std::vector<std::uint32_t>> nested_survivors(std::size_t n,
                                                         std::uint32_t eta,
                                                         std::uint32_t generations)
{
    std::vector<std::vector<std::uint32_t>> sets;
    std::size_t count = n;
    for (std::uint32_t g = 0; g < generations; ++g) {
        std::vector<std::uint32_t> set(count);
        for (std::uint32_t i = 0; i < count; ++i)
            set[i] = i;
        sets.push_back(std::move(set));
        count = std::max<std::size_t>(1, count / eta);
    }
    return sets;
}

}

TEST_CASE("minimum resource follows R * eta^-(G-1)")
{
    CHECK(min_resource({16, 1.0, 4, 3}) == 1.0 / 16.0);
    CHECK(min_resource({4, 1.0, 4, 1}) == 1.0);  // one generation = random search
    CHECK(min_resource({256, 1.0, 4, 5}) == 1.0 / 256.0);
}

TEST_CASE("parameter validation enforces the halving assertion")
{
    CHECK_THROWS_WITH_AS(min_resource({8, 1.0, 4, 3}),
                         doctest::Contains("n >= eta^(G-1)"), ConfigError);
    CHECK_THROWS_AS(min_resource({8, 1.0, 1, 2}), ConfigError);
    CHECK_THROWS_AS(min_resource({8, 0.0, 2, 2}), ConfigError);
    CHECK_THROWS_AS(min_resource({8, 1.0, 2, 0}), ConfigError);
    CHECK_NOTHROW(min_resource({9, 1.0, 3, 3}));
}

TEST_CASE("the halving budget and its reduction ratio")
{
    const auto b16 = sh_budget({16, 1.0, 4, 3});
    CHECK(b16.with_early_stopping == 3.0);
    CHECK(b16.without_early_stopping == 16.0);
    CHECK(b16.without_early_stopping / b16.with_early_stopping > 5.0);
    CHECK(b16.reduction_ratio == 16.0 / 3.0);

    const auto b1 = sh_budget({7, 2.0, 4, 1});
    CHECK(b1.with_early_stopping == b1.without_early_stopping);
    CHECK(b1.reduction_ratio == 1.0);

    const auto b256 = sh_budget({256, 1.0, 4, 5});
    CHECK(b256.with_early_stopping == 5.0);
    CHECK(b256.without_early_stopping == 256.0);
}

TEST_CASE("the budget equals the summed per-generation allocations")
{
    for (std::uint32_t eta : {2u, 3u, 4u})
        for (std::uint32_t generations : {1u, 2u, 3u, 4u}) {
            std::size_t n = 1;
            for (std::uint32_t g = 1; g < generations; ++g)
                n *= eta;
            n *= 3;  // exact multiple of eta^(G-1)
            const SHParams params{n, 1.0, eta, generations};
            double summed = 0.0;
            std::size_t survivors = n;
            for (std::uint32_t g = 1; g <= generations; ++g) {
                const double resource =
                    params.max_resource /
                    std::pow(static_cast<double>(eta), generations - g);
                summed += static_cast<double>(survivors) * resource;
                survivors = std::max<std::size_t>(1, survivors / eta);
            }
            CHECK(sh_budget(params).with_early_stopping ==
                  doctest::Approx(summed).epsilon(1e-12));
        }
}

TEST_CASE("the generic loop runs step, prune, populate in order")
{
    int steps = 0;
    auto run = run_early_stopping<int>(
        {1, 2, 3}, 3, [&](std::vector<int>&, std::uint32_t) { ++steps; },
        [](std::vector<int> p, std::uint32_t) { return p; },
        [](std::vector<int> p, std::uint32_t) { return p; });
    CHECK(steps == 3);
    CHECK(run.final_population == std::vector<int>{1, 2, 3});
    CHECK(run.per_generation.size() == 3);
}

TEST_CASE("keeping the best half twice finds the known argmin pair")
{
    // fixed scores: config id 5 is best, 2 second
    const std::vector<double> scores{4.0, 7.0, 1.5, 9.0, 6.0, 0.5, 8.0, 3.0};
    auto run = run_early_stopping<int>(
        {0, 1, 2, 3, 4, 5, 6, 7}, 2, [](std::vector<int>&, std::uint32_t) {},
        [&](std::vector<int> p, std::uint32_t) {
            std::sort(p.begin(), p.end(),
                      [&](int a, int b) { return scores[a] < scores[b]; });
            p.resize(p.size() / 2);
            std::sort(p.begin(), p.end());
            return p;
        },
        [](std::vector<int> p, std::uint32_t) { return p; });
    CHECK(run.final_population == std::vector<int>{2, 5});
}

TEST_CASE("a prune that empties the population is a contract violation")
{
    CHECK_THROWS_AS(
        run_early_stopping<int>(
            {1, 2}, 1, [](std::vector<int>&, std::uint32_t) {},
            [](std::vector<int>, std::uint32_t) { return std::vector<int>{}; },
            [](std::vector<int> p, std::uint32_t) { return p; }),
        ContractViolation);
    CHECK_THROWS_AS(
        run_early_stopping<int>(
            {}, 1, [](std::vector<int>&, std::uint32_t) {},
            [](std::vector<int> p, std::uint32_t) { return p; },
            [](std::vector<int> p, std::uint32_t) { return p; }),
        ConfigError);
}

TEST_CASE("successive halving trains 16 -> 4 -> 1 at R/16, R/4, R")
{
    std::vector<ConfigId> configs(16);
    for (ConfigId i = 0; i < 16; ++i)
        configs[i] = i;
    const SHParams params{16, 1.0, 4, 3};
    // distinct fixed scores: lower id = better
    const auto result = successive_halving(
        configs, params, [](ConfigId id, double) { return static_cast<double>(id); });

    REQUIRE(result.generations.size() == 3);
    CHECK(result.generations[0].population.size() == 16);
    CHECK(result.generations[1].population.size() == 4);
    CHECK(result.generations[2].population.size() == 1);
    CHECK(result.generations[0].resource == 1.0 / 16.0);
    CHECK(result.generations[1].resource == 1.0 / 4.0);
    CHECK(result.generations[2].resource == 1.0);
    CHECK(result.generations[1].population == std::vector<ConfigId>{0, 1, 2, 3});
    CHECK(result.winner == 0);

    // survivor sets are nested and never empty
    const auto sets = result.survivor_sets();
    for (std::size_t g = 1; g < sets.size(); ++g) {
        CHECK(!sets[g].empty());
        std::set<ConfigId> previous(sets[g - 1].begin(), sets[g - 1].end());
        for (ConfigId id : sets[g])
            CHECK(previous.count(id) == 1);
    }
}

TEST_CASE("one generation trains everything at full resource")
{
    std::vector<ConfigId> configs{0, 1, 2, 3};
    const auto result = successive_halving(
        configs, {4, 2.0, 4, 1},
        [](ConfigId id, double) { return 10.0 - static_cast<double>(id); });
    REQUIRE(result.generations.size() == 1);
    CHECK(result.generations[0].population.size() == 4);
    CHECK(result.generations[0].resource == 2.0);
    CHECK(result.winner == 3);
}

TEST_CASE("with resource-independent scores SH finds the global argmin")
{
    SplitRng rng(555);
    for (int round = 0; round < 100; ++round) {
        const std::uint32_t eta = static_cast<std::uint32_t>(rng.uniform_int(2, 4));
        const std::uint32_t generations =
            static_cast<std::uint32_t>(rng.uniform_int(1, 3));
        std::size_t need = 1;
        for (std::uint32_t g = 1; g < generations; ++g)
            need *= eta;
        const std::size_t n =
            need * static_cast<std::size_t>(rng.uniform_int(1, 4));
        std::vector<double> table(n);
        for (auto& score : table)
            score = rng.uniform01();
        std::vector<ConfigId> configs(n);
        for (ConfigId i = 0; i < n; ++i)
            configs[i] = i;
        const auto result = successive_halving(
            configs, {n, 1.0, eta, generations},
            [&](ConfigId id, double) { return table[id]; });
        const auto best =
            std::min_element(table.begin(), table.end()) - table.begin();
        CHECK(result.winner == static_cast<ConfigId>(best));
    }
}

TEST_CASE("a throwing oracle scores worst and leaves a diagnostic")
{
    std::vector<ConfigId> configs{0, 1, 2, 3};
    const auto result = successive_halving(
        configs, {4, 1.0, 2, 2}, [](ConfigId id, double) -> double {
            if (id == 0)
                throw std::runtime_error("lost weights");
            return static_cast<double>(id);
        });
    CHECK(result.generations[0].diagnostics.size() == 1);
    CHECK(result.generations[0].diagnostics[0].find("lost weights") !=
          std::string::npos);
    // config 0 must have been eliminated immediately
    const auto& second = result.generations[1].population;
    CHECK(std::find(second.begin(), second.end(), 0) == second.end());
    CHECK(result.winner == 1);
}

TEST_CASE("retrain-mode sub-dags reproduce the 3R-versus-16R arithmetic")
{
    const Dag dag = training_workload();
    CHECK(training_cost_sum(dag) == 32.0);  // 16 pipelines, full cost 2 each

    const SHParams params{16, 1.0, 4, 3};
    const auto survivors = nested_survivors(16, 4, 3);
    const auto dags = sh_subdags(dag, survivors, params, TrainingMode::Retrain);

    REQUIRE(dags.size() == 3);
    CHECK(dags[0].terminals().size() == 16);
    CHECK(dags[1].terminals().size() == 4);
    CHECK(dags[2].terminals().size() == 1);
    double total_training = 0.0;
    for (const auto& sub : dags) {
        sub.validate();
        total_training += training_cost_sum(sub);
    }
    // 3R in cost units (R = training cost 2) vs 16R unpruned
    CHECK(total_training == 6.0);
    CHECK(training_cost_sum(dag) / total_training > 5.0);
}

TEST_CASE("warm-start sub-dags charge only the resource increments")
{
    const Dag dag = training_workload();
    const SHParams params{16, 1.0, 4, 3};
    const auto survivors = nested_survivors(16, 4, 3);
    const auto dags = sh_subdags(dag, survivors, params, TrainingMode::WarmStart);
    double total_training = 0.0;
    for (const auto& sub : dags)
        total_training += training_cost_sum(sub);
    // 16*(R/16) + 4*(R/4 - R/16) + (R - R/4) = 2.5R, in cost units (R = 2)
    CHECK(total_training == 5.0);
}

TEST_CASE("pruned generations cost less overall whenever halving saves budget")
{
    // distinct computations across the schedule: since survivor sets are
    // nested, no preprocessing chain appears first after generation one,
    // so the union cost is generation one plus later training totals
    const Dag dag = training_workload();
    for (std::uint32_t eta : {2u, 4u})
        for (std::uint32_t generations : {2u, 3u}) {
            const SHParams params{16, 1.0, eta, generations};
            if (sh_budget(params).reduction_ratio <= 1.0)
                continue;
            const auto dags = sh_subdags(dag, nested_survivors(16, eta, generations),
                                         params, TrainingMode::Retrain);
            double union_total = total_cost_merged(dags.front());
            for (std::size_t g = 1; g < dags.size(); ++g)
                union_total += training_cost_sum(dags[g]);
            CHECK(union_total <= total_cost_merged(dag));
        }
}

TEST_CASE("a single generation reproduces the input dag")
{
    const Dag dag = training_workload();
    const SHParams params{16, 1.0, 4, 1};
    const auto survivors = nested_survivors(16, 4, 1);
    const auto dags = sh_subdags(dag, survivors, params, TrainingMode::Retrain);
    REQUIRE(dags.size() == 1);
    CHECK(structure_fingerprint(dags[0]) == structure_fingerprint(dag));
    CHECK(total_cost_merged(dags[0]) == total_cost_merged(dag));
}

TEST_CASE("eta=2 over two generations breaks even on training cost")
{
    SearchSpace space;
    space.stages = {
        {"prep", {{"P", {{"x", ContinuousDomain{0, 1, Scale::Linear}}}}}},
        {"train", {{"T", {{"z", ContinuousDomain{0, 1, Scale::Linear}}}}}},
    };
    auto pipelines = sample_gridded_random(space, {4, 1}, 9);
    auto dag = merge_pipelines(pipelines).dag;
    const std::vector<double> costs{1.0, 1.0};
    const std::vector<double> sizes{1.0, 1.0};
    apply_stage_costs(dag, costs, sizes);

    const SHParams params{4, 1.0, 2, 2};
    const auto dags =
        sh_subdags(dag, nested_survivors(4, 2, 2), params, TrainingMode::Retrain);
    double total_training = 0.0;
    for (const auto& sub : dags)
        total_training += training_cost_sum(sub);
    CHECK(total_training == 4.0);  // 4*(R/2) + 2*R with R = 1
    CHECK(training_cost_sum(dag) == 4.0);
    CHECK(sh_budget(params).reduction_ratio == 1.0);
}

TEST_CASE("sub-dag construction rejects inconsistent survivor sets")
{
    const Dag dag = training_workload();
    const SHParams params{16, 1.0, 4, 3};
    auto bad = nested_survivors(16, 4, 3);
    bad[1].push_back(99);  // not a pipeline of this dag
    CHECK_THROWS_AS(sh_subdags(dag, bad, params, TrainingMode::Retrain), ConfigError);

    auto unnested = nested_survivors(16, 4, 3);
    unnested[2] = {7};  // pruned in generation 2 but pretending to survive
    CHECK_THROWS_AS(sh_subdags(dag, unnested, params, TrainingMode::Retrain),
                    ConfigError);
}

TEST_CASE("the combined workload shares prefixes and scales training per generation")
{
    const Dag dag = training_workload();
    const SHParams params{16, 1.0, 4, 3};
    const auto survivors = nested_survivors(16, 4, 3);
    const auto workload = sh_workload(dag, survivors, params, TrainingMode::Retrain);

    workload.dag.validate();
    CHECK(workload.generation_resource ==
          std::vector<double>{1.0 / 16.0, 1.0 / 4.0, 1.0});
    // one path per surviving pipeline per generation
    CHECK(workload.plan.path_count() == 16 + 4 + 1);
    CHECK(workload.plan.step_count() == (16 + 4 + 1) * 3);

    // the original dag (root, 4 + 16 preprocessing, 16 training nodes)
    // plus one scaled training copy per below-full-resource survivor; the
    // final generation reuses the original full-resource training node
    CHECK(workload.dag.node_count() == 1 + 4 + 16 + 16 + (16 + 4));

    // plan cost = preprocessing replay + scaled training per generation
    const double prep_gen1 = 16 * 2.0, prep_gen2 = 4 * 2.0, prep_gen3 = 1 * 2.0;
    const double training = 16 * (2.0 / 16) + 4 * (2.0 / 4) + 1 * 2.0;
    CHECK(plan_cost(workload.plan, workload.dag) ==
          prep_gen1 + prep_gen2 + prep_gen3 + training);
}
