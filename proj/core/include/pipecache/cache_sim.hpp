#ifndef PIPECACHE_CACHE_SIM_HPP
#define PIPECACHE_CACHE_SIM_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pipecache/dag.hpp"
#include "pipecache/rng.hpp"

namespace pipecache {

// Per-node bookkeeping maintained by the simulator and visible to
// policies. last_use is the step at which the node was last computed,
// admitted, or served a hit; references counts those events.
struct NodeStats {
    std::int64_t last_use = -1;
    double cost = 0.0;
    double size = 0.0;
    std::uint64_t references = 0;
};

// Read-only view of the cache handed to policies.
class CacheContents {
public:
    CacheContents(const std::vector<bool>& resident, const std::vector<NodeId>& ordered,
                  double used, double capacity)
        : resident_(resident), ordered_(ordered), used_(used), capacity_(capacity) {}

    bool resident(NodeId id) const { return id < resident_.size() && resident_[id]; }
    // Resident ids in ascending order.
    std::span<const NodeId> residents() const { return ordered_; }
    double used() const { return used_; }
    double capacity() const { return capacity_; }

private:
    const std::vector<bool>& resident_;
    const std::vector<NodeId>& ordered_;
    double used_;
    double capacity_;
};

struct PolicyContext {
    std::span<const NodeStats> stats;
    SplitRng& rng;
    std::uint64_t step;
};

// What to do with the incoming node. Evictions are applied only when
// admit is true; a declined admission must not evict.
struct AdmissionPlan {
    bool admit = false;
    std::vector<NodeId> evictions;
};

class CachePolicy {
public:
    virtual ~CachePolicy() = default;
    virtual std::string_view name() const = 0;
    virtual AdmissionPlan plan_admission(NodeId incoming, const CacheContents& cache,
                                         PolicyContext& ctx) = 0;
};

// Always admits; evicts residents in ascending last-use order until the
// incoming node fits.
std::unique_ptr<CachePolicy> make_lru();

// Eviction lottery weighted 1/max(cost, eps); the incoming node competes
// in the lottery, so admission itself is probabilistic.
std::unique_ptr<CachePolicy> make_reciprocal();

// Lottery weighted size/max(cost, eps).
std::unique_ptr<CachePolicy> make_wreciprocal();

// Lookup by name: lru | reciprocal | wreciprocal.
std::unique_ptr<CachePolicy> make_policy(std::string_view name);

enum class StepOutcome : std::uint8_t { Computed, Skipped };

struct StepTrace {
    std::uint32_t step = 0;
    NodeId node = kNoNode;
    StepOutcome outcome = StepOutcome::Computed;
    double paid = 0.0;
    std::vector<NodeId> admitted;
    std::vector<NodeId> evicted;
};

struct SimResult {
    double total_cost = 0.0;
    std::vector<StepTrace> trace;
    std::string policy;
    std::uint64_t seed = 0;
};

struct SimOptions {
    double capacity = 0.0;
    std::uint64_t seed = 0;
    bool record_trace = true;
};

/*
 * Replay the plan against a bounded cache. Step t pays C(i_t) unless a
 * node of the active suffix was already resident before the step (the
 * cache state excludes the step's own admission); the policy is then
 * consulted about admitting i_t. Nodes larger than the capacity are never
 * admitted, and the cache starts empty.
 */
SimResult simulate(const ExecutionPlan& plan, const Dag& dag, CachePolicy& policy,
                   const SimOptions& options);

// Recompute the total cost from a recorded trace's admissions/evictions.
double replay_cost(const ExecutionPlan& plan, const Dag& dag,
                   std::span<const StepTrace> trace);

struct TrialSummary {
    std::string policy;
    double capacity = 0.0;
    std::size_t trials = 0;
    double mean = 0.0;
    double stdev = 0.0;
    double min = 0.0;
    double median = 0.0;
    double max = 0.0;
};

using PolicyFactory = std::function<std::unique_ptr<CachePolicy>()>;

// Independent seeded simulations; deterministic for a fixed base seed.
TrialSummary run_trials(const ExecutionPlan& plan, const Dag& dag,
                        const PolicyFactory& factory, double capacity,
                        std::size_t trials, std::uint64_t base_seed);

// One StepTrace per line.
std::string trace_to_jsonl(const SimResult& result);

// Canonical columns: policy,capacity,trials,mean_cost,stdev,speedup_vs_independent.
std::string summaries_to_csv(std::span<const TrialSummary> summaries,
                             double independent_cost);

// Shortest round-trip decimal rendering (stable across reruns).
std::string format_double(double value);

}

#endif
