#ifndef PIPECACHE_TOOLS_WORKLOAD_HPP
#define PIPECACHE_TOOLS_WORKLOAD_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "pipecache/dag.hpp"
#include "pipecache/workloads.hpp"

namespace pipecache::tools {

/*
 * Workload specs:
 *   tree:k=3,d=3,costs=root:100:1,sizes=uniform:10[,seed=N]
 *   profile:PATH.json
 *   space:NAME_OR_PATH   (+ --sampler, --branching/--n/--grid-counts,
 *                          --stage-costs, --stage-sizes)
 * Cost models: uniform:C | root:ROOT:OTHERS | twopoint:LO:HI:P_HI
 * Size models: uniform:M | twopoint:LO:HI:P_HI
 */
struct WorkloadOptions {
    std::string spec;
    std::string sampler;  // random | grid | gridded
    std::vector<std::uint32_t> branching;
    std::vector<std::uint32_t> grid_counts;
    std::size_t sample_count = 0;
    std::vector<double> stage_costs;
    std::vector<double> stage_sizes;
    std::uint64_t seed = 0;
};

struct ResolvedWorkload {
    Dag dag;
    ExecutionPlan plan;
    double independent_cost = 0.0;  // sum of step costs over the plan
    std::size_t pipeline_count = 0;
    std::size_t duplicates_dropped = 0;
    std::string description;
};

ResolvedWorkload resolve_workload(const WorkloadOptions& options);

TreeSpec parse_tree_spec(const std::string& body);
CostModel parse_cost_model(const std::string& text);
SizeModel parse_size_model(const std::string& text);

// Builtin name or a path to a search-space JSON file.
SearchSpace resolve_space(const std::string& name_or_path);

// "0,10,20" or "geo:LO:HI:POINTS" (log-spaced, LO > 0).
std::vector<double> parse_capacities(const std::string& text);

std::vector<std::string> split(const std::string& text, char sep);

}

#endif
