#include <benchmark/benchmark.h>

#include "pipecache/cache_sim.hpp"
#include "pipecache/early_stopping.hpp"
#include "pipecache/opt_cache.hpp"
#include "pipecache/search_space.hpp"
#include "pipecache/workloads.hpp"

namespace {

using namespace pipecache;

SearchSpace bench_space()
{
    SearchSpace space;
    space.stages = {
        {"featurize", {{"F", {{"gamma", ContinuousDomain{1e-3, 1e3, Scale::Log}}}}}},
        {"reduce", {{"R", {{"k", IntegerDomain{8, 512}}}}}},
        {"train", {{"T", {{"lambda", ContinuousDomain{1e-3, 1e3, Scale::Log}}}}}},
    };
    return space;
}

void BM_GriddedSample(benchmark::State& state)
{
    const auto space = bench_space();
    const BranchingPlan branching{static_cast<std::uint32_t>(state.range(0)), 5, 5};
    for (auto _ : state)
        benchmark::DoNotOptimize(sample_gridded_random(space, branching, 42));
}
BENCHMARK(BM_GriddedSample)->Arg(4)->Arg(8)->Arg(16);

void BM_MergePipelines(benchmark::State& state)
{
    const auto space = bench_space();
    const auto pipelines = sample_gridded_random(
        space, {static_cast<std::uint32_t>(state.range(0)), 5, 5}, 42);
    for (auto _ : state)
        benchmark::DoNotOptimize(merge_pipelines(pipelines));
}
BENCHMARK(BM_MergePipelines)->Arg(4)->Arg(8)->Arg(16);

void BM_ExecutionPlan(benchmark::State& state)
{
    TreeSpec spec;
    spec.k = 3;
    spec.d = static_cast<std::uint32_t>(state.range(0));
    const auto dag = gen_kary_tree(spec);
    for (auto _ : state)
        benchmark::DoNotOptimize(execution_plan(dag));
}
BENCHMARK(BM_ExecutionPlan)->Arg(3)->Arg(5);

void BM_Simulate(benchmark::State& state)
{
    TreeSpec spec;
    spec.k = 3;
    spec.d = 3;
    spec.cost = RootHeavyCost{100.0, 1.0};
    spec.size = UniformSize{10.0};
    const auto dag = gen_kary_tree(spec);
    const auto plan = execution_plan(dag);
    const char* names[] = {"lru", "reciprocal", "wreciprocal"};
    const auto policy_name = names[state.range(0)];
    std::uint64_t seed = 0;
    for (auto _ : state) {
        auto policy = make_policy(policy_name);
        benchmark::DoNotOptimize(
            simulate(plan, dag, *policy,
                     {.capacity = 100.0, .seed = seed++, .record_trace = false}));
    }
    state.SetLabel(policy_name);
}
BENCHMARK(BM_Simulate)->Arg(0)->Arg(1)->Arg(2);

void BM_SolveExact(benchmark::State& state)
{
    TreeSpec spec;
    spec.k = static_cast<std::uint32_t>(state.range(0));
    spec.d = 2;
    spec.cost = RootHeavyCost{100.0, 1.0};
    spec.size = UniformSize{10.0};
    const auto dag = gen_kary_tree(spec);
    const auto plan = execution_plan(dag);
    const auto inst = build_instance(dag, plan, 30.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(solve_exact(inst));
}
BENCHMARK(BM_SolveExact)->Arg(2)->Arg(3)->Arg(4);

void BM_ShWorkload(benchmark::State& state)
{
    const auto space = bench_space();
    auto merged = merge_pipelines(sample_gridded_random(space, {4, 4, 4}, 7)).dag;
    const std::vector<double> costs{1.0, 1.0, 8.0};
    const std::vector<double> sizes{4.0, 4.0, 1.0};
    apply_stage_costs(merged, costs, sizes);
    const SHParams params{64, 1.0, 4, 4};
    std::vector<std::vector<std::uint32_t>> survivors;
    std::size_t count = 64;
    for (std::uint32_t g = 0; g < 4; ++g) {
        std::vector<std::uint32_t> set(count);
        for (std::uint32_t i = 0; i < count; ++i)
            set[i] = i;
        survivors.push_back(std::move(set));
        count = std::max<std::size_t>(1, count / 4);
    }
    for (auto _ : state)
        benchmark::DoNotOptimize(
            sh_workload(merged, survivors, params, TrainingMode::Retrain));
}
BENCHMARK(BM_ShWorkload);

}

BENCHMARK_MAIN();
