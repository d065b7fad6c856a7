#ifndef PIPECACHE_OPT_CACHE_HPP
#define PIPECACHE_OPT_CACHE_HPP

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pipecache/dag.hpp"

namespace pipecache {

/*
 * The generalized-paging program over an execution plan: per-step costs
 * and sizes, per-step active sets, and a cache capacity. Node indices are
 * instance-local and dense over the nodes that appear in the plan.
 */
struct IlpInstance {
    std::vector<std::uint32_t> step_node;             // i_t, instance-local
    std::vector<double> step_cost;                    // c_t
    std::vector<double> step_size;                    // m_t
    std::vector<std::vector<std::uint32_t>> active_sets;  // A_t as index lists
    std::vector<double> node_cost;                    // per instance-local node
    std::vector<double> node_size;
    std::vector<NodeId> node_origin;                  // instance index -> dag id
    double capacity = 0.0;

    std::size_t steps() const { return step_node.size(); }
    std::size_t node_count() const { return node_origin.size(); }
    // The cache-state variable count |V| * T.
    std::size_t x_variable_count() const { return node_count() * steps(); }
    void validate() const;
};

IlpInstance build_instance(const Dag& dag, const ExecutionPlan& plan, double capacity);

// +1 admits the step's active node, -1 evicts a resident node.
struct CacheAction {
    std::uint32_t step = 0;
    std::uint32_t node = 0;  // instance-local index
    int delta = 0;
};

struct DeltaSchedule {
    std::vector<CacheAction> actions;
};

struct OptResult {
    double optimal_cost = 0.0;
    DeltaSchedule schedule;
    bool proved_optimal = false;
    std::uint64_t explored_states = 0;
    double wall_seconds = 0.0;
};

/*
 * Exact optimum by memoized branch-and-bound over (step, resident-set)
 * states. Pays c_t when no active-set node was resident before step t
 * (the same strict-past rule the simulator uses), then branches over
 * admitting i_t combined with minimal sufficient eviction sets. Admits at
 * most 64 distinct plan nodes. On timeout the best incumbent is returned
 * with proved_optimal = false.
 */
OptResult solve_exact(const IlpInstance& instance,
                      std::chrono::duration<double> time_limit =
                          std::chrono::duration<double>::max());

struct Violation {
    std::string constraint;
    std::uint32_t step = 0;
    std::uint32_t node = 0;
    std::string detail;
};

struct ScheduleCheck {
    bool feasible = false;
    double cost = 0.0;
    std::vector<Violation> violations;
};

// Checks every constraint family (initial emptiness, admit-only-active,
// evict-only-resident, delta bounds, integrality, cumulative state,
// capacity) and prices feasible schedules.
ScheduleCheck validate_delta(const IlpInstance& instance, const DeltaSchedule& schedule);

/*
 * CPLEX-LP rendering of the program with the step costs linearized via
 * z_t >= 1 - (cache before t) . A_t. Variables: x_j_t is the cache state
 * after step t for node j, d_j_t the step-t change, z_t the per-step
 * payment indicator; j is the instance-local node index and t is
 * 1-based.
 */
std::string export_milp(const IlpInstance& instance);

nlohmann::json schedule_to_json(const DeltaSchedule& schedule);
DeltaSchedule schedule_from_json(const nlohmann::json& j);
nlohmann::json opt_result_to_json(const OptResult& result, const IlpInstance& instance);

}

#endif
