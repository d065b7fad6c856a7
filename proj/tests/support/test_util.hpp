#ifndef PIPECACHE_TESTS_TEST_UTIL_HPP
#define PIPECACHE_TESTS_TEST_UTIL_HPP

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "pipecache/dag.hpp"
#include "pipecache/rng.hpp"

namespace pipecache::testutil {

// The three-pipeline toy workload: one shared A, two B settings, three C
// settings; merged form has 6 operator nodes.
inline std::vector<PipelineSpec> toy_pipelines()
{
    const OpSignature a("A", {{"p", 0.1}});
    const OpSignature b2("B", {{"p", std::int64_t{2}}});
    const OpSignature b4("B", {{"p", std::int64_t{4}}});
    const OpSignature c10("C", {{"p", std::int64_t{10}}});
    const OpSignature c5("C", {{"p", std::int64_t{5}}});
    const OpSignature c8("C", {{"p", std::int64_t{8}}});
    return {PipelineSpec{{a, b2, c10}}, PipelineSpec{{a, b2, c5}},
            PipelineSpec{{a, b4, c8}}};
}

inline CostTable unit_costs(std::span<const PipelineSpec> pipelines, double size = 1.0)
{
    CostTable table;
    for (const auto& pipeline : pipelines)
        for (const auto& sig : pipeline.stages)
            table.set(sig, 1.0, size);
    return table;
}

// Independent oracle for merged node counts: distinct canonical prefixes
// across all pipelines, counted per length.
inline std::size_t distinct_prefix_count(std::span<const PipelineSpec> pipelines)
{
    std::set<std::string> prefixes;
    for (const auto& pipeline : pipelines) {
        std::string key;
        for (const auto& sig : pipeline.stages) {
            key += '/';
            key += sig.canonical_key();
            prefixes.insert(key);
        }
    }
    return prefixes.size();
}

// Random equal-length pipelines over small per-stage alphabets (small
// alphabets force prefix collisions). Pipelines are pairwise distinct;
// the count is clamped to the number of distinct pipelines that exist.
inline std::vector<PipelineSpec> random_pipelines(SplitRng& rng, std::size_t count,
                                                  std::size_t stages,
                                                  std::int64_t alphabet)
{
    double distinct = 1;
    for (std::size_t s = 0; s < stages && distinct < 1e6; ++s)
        distinct *= static_cast<double>(alphabet);
    count = std::min(count, static_cast<std::size_t>(distinct));
    std::set<std::string> seen;
    std::vector<PipelineSpec> out;
    while (out.size() < count) {
        PipelineSpec spec;
        for (std::size_t s = 0; s < stages; ++s)
            spec.stages.emplace_back(
                "op" + std::to_string(s),
                std::vector<std::pair<std::string, ParamValue>>{
                    {"v", rng.uniform_int(0, alphabet - 1)}});
        if (seen.insert(spec.canonical_key()).second)
            out.push_back(std::move(spec));
    }
    return out;
}

// Equal-length pipelines sharing everything but the last stage.
inline std::vector<PipelineSpec> maximally_redundant(std::size_t stages,
                                                     std::size_t count)
{
    std::vector<PipelineSpec> out;
    for (std::size_t p = 0; p < count; ++p) {
        PipelineSpec spec;
        for (std::size_t s = 0; s + 1 < stages; ++s)
            spec.stages.emplace_back(
                "shared" + std::to_string(s),
                std::vector<std::pair<std::string, ParamValue>>{{"v", std::int64_t{0}}});
        spec.stages.emplace_back(
            "last", std::vector<std::pair<std::string, ParamValue>>{
                        {"v", static_cast<std::int64_t>(p)}});
        out.push_back(std::move(spec));
    }
    return out;
}

// Structure fingerprint that ignores node ids: sorted root-to-terminal
// canonical chains plus the node count.
inline std::string structure_fingerprint(const Dag& dag)
{
    auto pipelines = extract_pipelines(dag);
    std::vector<std::string> keys;
    keys.reserve(pipelines.size());
    for (const auto& pipeline : pipelines)
        keys.push_back(pipeline.canonical_key());
    std::sort(keys.begin(), keys.end());
    std::string out = std::to_string(dag.node_count()) + "#";
    for (const auto& key : keys)
        out += key + "|";
    return out;
}

// Per-depth signature counts of the stage nodes (root excluded for
// synthetic-root dags, included otherwise).
inline std::vector<std::size_t> level_sizes(const Dag& dag)
{
    std::vector<std::size_t> levels;
    for (NodeId id = 0; id < dag.node_count(); ++id) {
        if (dag.has_synthetic_root() && id == dag.root())
            continue;
        const std::size_t depth =
            dag.depth(id) - (dag.has_synthetic_root() ? 1 : 0);
        if (levels.size() <= depth)
            levels.resize(depth + 1, 0);
        ++levels[depth];
    }
    return levels;
}

}

#endif
