#include "pipecache/cache_sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "pipecache/errors.hpp"

namespace pipecache {

namespace {

class LruPolicy final : public CachePolicy {
public:
    std::string_view name() const override { return "lru"; }

    AdmissionPlan plan_admission(NodeId incoming, const CacheContents& cache,
                                 PolicyContext& ctx) override
    {
        AdmissionPlan plan;
        plan.admit = true;
        double need = cache.used() + ctx.stats[incoming].size - cache.capacity();
        if (need <= 0)
            return plan;
        std::vector<NodeId> order(cache.residents().begin(), cache.residents().end());
        std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
            if (ctx.stats[a].last_use != ctx.stats[b].last_use)
                return ctx.stats[a].last_use < ctx.stats[b].last_use;
            return a < b;
        });
        for (NodeId victim : order) {
            if (need <= 0)
                break;
            plan.evictions.push_back(victim);
            need -= ctx.stats[victim].size;
        }
        return plan;
    }
};

// Shared lottery machinery for the randomized policies. The incoming
// node joins the candidate pool; drawing it abandons the admission and
// rolls back any tentative evictions from this step.
class LotteryPolicy : public CachePolicy {
public:
    AdmissionPlan plan_admission(NodeId incoming, const CacheContents& cache,
                                 PolicyContext& ctx) override
    {
        AdmissionPlan plan;
        double need = cache.used() + ctx.stats[incoming].size - cache.capacity();
        if (need <= 0) {
            plan.admit = true;
            return plan;
        }
        std::vector<NodeId> pool(cache.residents().begin(), cache.residents().end());
        pool.push_back(incoming);
        std::vector<NodeId> evictions;
        while (need > 0) {
            const NodeId drawn = draw(pool, ctx);
            if (drawn == incoming)
                return AdmissionPlan{};  // rejected; nothing evicted
            evictions.push_back(drawn);
            need -= ctx.stats[drawn].size;
            pool.erase(std::find(pool.begin(), pool.end(), drawn));
        }
        plan.admit = true;
        plan.evictions = std::move(evictions);
        return plan;
    }

protected:
    virtual long double weight(const NodeStats& stats) const = 0;

    static long double clamped_cost(const NodeStats& stats)
    {
        return std::max<long double>(stats.cost, std::numeric_limits<double>::min());
    }

private:
    NodeId draw(const std::vector<NodeId>& pool, PolicyContext& ctx) const
    {
        long double total = 0.0L;
        for (NodeId id : pool)
            total += weight(ctx.stats[id]);
        const long double u = static_cast<long double>(ctx.rng.uniform01()) * total;
        long double acc = 0.0L;
        for (NodeId id : pool) {
            acc += weight(ctx.stats[id]);
            if (u < acc)
                return id;
        }
        return pool.back();
    }
};

class ReciprocalPolicy final : public LotteryPolicy {
public:
    std::string_view name() const override { return "reciprocal"; }

protected:
    long double weight(const NodeStats& stats) const override
    {
        return 1.0L / clamped_cost(stats);
    }
};

class WReciprocalPolicy final : public LotteryPolicy {
public:
    std::string_view name() const override { return "wreciprocal"; }

protected:
    long double weight(const NodeStats& stats) const override
    {
        return static_cast<long double>(stats.size) / clamped_cost(stats);
    }
};

}

std::unique_ptr<CachePolicy> make_lru() { return std::make_unique<LruPolicy>(); }
std::unique_ptr<CachePolicy> make_reciprocal() { return std::make_unique<ReciprocalPolicy>(); }
std::unique_ptr<CachePolicy> make_wreciprocal() { return std::make_unique<WReciprocalPolicy>(); }

std::unique_ptr<CachePolicy> make_policy(std::string_view name)
{
    if (name == "lru")
        return make_lru();
    if (name == "reciprocal")
        return make_reciprocal();
    if (name == "wreciprocal")
        return make_wreciprocal();
    throw ConfigError("unknown cache policy '" + std::string(name) + "'");
}

namespace {

class CacheState {
public:
    CacheState(std::size_t node_count, double capacity)
        : resident_(node_count, false), capacity_(capacity) {}

    bool resident(NodeId id) const { return resident_[id]; }
    double used() const { return used_; }

    void admit(NodeId id, double size)
    {
        resident_[id] = true;
        ordered_.insert(std::lower_bound(ordered_.begin(), ordered_.end(), id), id);
        used_ += size;
    }

    void evict(NodeId id, double size)
    {
        resident_[id] = false;
        ordered_.erase(std::find(ordered_.begin(), ordered_.end(), id));
        used_ -= size;
        if (used_ < 0)
            used_ = 0;  // absorb rounding residue from repeated +/-
    }

    CacheContents view() const { return CacheContents(resident_, ordered_, used_, capacity_); }

private:
    std::vector<bool> resident_;
    std::vector<NodeId> ordered_;
    double used_ = 0.0;
    double capacity_ = 0.0;
};

}

SimResult simulate(const ExecutionPlan& plan, const Dag& dag, CachePolicy& policy,
                   const SimOptions& options)
{
    if (options.capacity < 0)
        throw ConfigError("cache capacity must be non-negative");
    for (std::size_t t = 0; t < plan.step_count(); ++t)
        if (plan.node_at(t) >= dag.node_count())
            throw StructureError("plan references a node outside the dag");

    SimResult result;
    result.policy = std::string(policy.name());
    result.seed = options.seed;

    std::vector<NodeStats> stats(dag.node_count());
    for (NodeId id = 0; id < dag.node_count(); ++id) {
        stats[id].cost = dag.node(id).cost;
        stats[id].size = dag.node(id).size;
    }

    SplitRng rng(options.seed);
    CacheState cache(dag.node_count(), options.capacity);

    for (std::size_t t = 0; t < plan.step_count(); ++t) {
        const NodeId node = plan.node_at(t);
        const auto suffix = plan.active_suffix(t);

        // The deepest resident node on the active suffix covers this step.
        NodeId covering = kNoNode;
        for (std::size_t i = suffix.size(); i > 0; --i) {
            if (cache.resident(suffix[i - 1])) {
                covering = suffix[i - 1];
                break;
            }
        }

        StepTrace step;
        step.step = static_cast<std::uint32_t>(t);
        step.node = node;
        if (covering == kNoNode) {
            step.outcome = StepOutcome::Computed;
            step.paid = stats[node].cost;
            result.total_cost += step.paid;
            stats[node].last_use = static_cast<std::int64_t>(t);
            ++stats[node].references;
        } else {
            step.outcome = StepOutcome::Skipped;
            stats[covering].last_use = static_cast<std::int64_t>(t);
            ++stats[covering].references;
        }

        // Only a freshly computed output can enter the cache; skipped
        // steps materialize nothing.
        if (covering == kNoNode && stats[node].size <= options.capacity) {
            PolicyContext ctx{stats, rng, t};
            AdmissionPlan admission = policy.plan_admission(node, cache.view(), ctx);
            if (!admission.admit && !admission.evictions.empty())
                throw ContractViolation("policy '" + result.policy +
                                        "' evicted without admitting at step " +
                                        std::to_string(t));
            if (admission.admit) {
                std::set<NodeId> seen;
                for (NodeId victim : admission.evictions) {
                    if (victim >= dag.node_count() || !cache.resident(victim) ||
                        !seen.insert(victim).second)
                        throw ContractViolation(
                            "policy '" + result.policy +
                            "' evicted a non-resident node at step " + std::to_string(t));
                    cache.evict(victim, stats[victim].size);
                    step.evicted.push_back(victim);
                }
                if (cache.used() + stats[node].size > options.capacity)
                    throw ContractViolation("policy '" + result.policy +
                                            "' overfilled the cache at step " +
                                            std::to_string(t));
                cache.admit(node, stats[node].size);
                step.admitted.push_back(node);
                stats[node].last_use = static_cast<std::int64_t>(t);
            }
        }

        if (options.record_trace)
            result.trace.push_back(std::move(step));
    }
    return result;
}

double replay_cost(const ExecutionPlan& plan, const Dag& dag,
                   std::span<const StepTrace> trace)
{
    if (trace.size() != plan.step_count())
        throw ConfigError("trace length does not match the plan");
    std::vector<bool> resident(dag.node_count(), false);
    double total = 0.0;
    for (std::size_t t = 0; t < plan.step_count(); ++t) {
        const auto suffix = plan.active_suffix(t);
        bool covered = false;
        for (NodeId id : suffix)
            if (resident[id]) {
                covered = true;
                break;
            }
        if (!covered)
            total += dag.node(plan.node_at(t)).cost;
        for (NodeId id : trace[t].evicted)
            resident[id] = false;
        for (NodeId id : trace[t].admitted)
            resident[id] = true;
    }
    return total;
}

TrialSummary run_trials(const ExecutionPlan& plan, const Dag& dag,
                        const PolicyFactory& factory, double capacity,
                        std::size_t trials, std::uint64_t base_seed)
{
    if (trials < 1)
        throw ConfigError("run_trials requires at least one trial");
    const SplitRng seeder(base_seed);
    std::vector<double> costs;
    costs.reserve(trials);
    TrialSummary summary;
    for (std::size_t i = 0; i < trials; ++i) {
        auto policy = factory();
        if (summary.policy.empty())
            summary.policy = std::string(policy->name());
        SimOptions options;
        options.capacity = capacity;
        options.seed = seeder.spawn(i).base_seed();
        options.record_trace = false;
        costs.push_back(simulate(plan, dag, *policy, options).total_cost);
    }
    summary.capacity = capacity;
    summary.trials = trials;
    double sum = 0.0;
    for (double c : costs)
        sum += c;
    summary.mean = sum / static_cast<double>(trials);
    double sq = 0.0;
    for (double c : costs)
        sq += (c - summary.mean) * (c - summary.mean);
    summary.stdev = std::sqrt(sq / static_cast<double>(trials));
    std::sort(costs.begin(), costs.end());
    summary.min = costs.front();
    summary.max = costs.back();
    summary.median = trials % 2 == 1
                         ? costs[trials / 2]
                         : 0.5 * (costs[trials / 2 - 1] + costs[trials / 2]);
    return summary;
}

std::string format_double(double value)
{
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{})
        return "nan";
    return std::string(buf, end);
}

std::string trace_to_jsonl(const SimResult& result)
{
    std::string out;
    for (const auto& step : result.trace) {
        nlohmann::json j{
            {"t", step.step},
            {"node", step.node},
            {"outcome", step.outcome == StepOutcome::Computed ? "computed" : "skipped"},
            {"paid", step.paid},
            {"admitted", step.admitted},
            {"evicted", step.evicted},
        };
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string summaries_to_csv(std::span<const TrialSummary> summaries,
                             double independent_cost)
{
    std::string out = "policy,capacity,trials,mean_cost,stdev,speedup_vs_independent\n";
    for (const auto& s : summaries) {
        out += s.policy;
        out += ',';
        out += format_double(s.capacity);
        out += ',';
        out += std::to_string(s.trials);
        out += ',';
        out += format_double(s.mean);
        out += ',';
        out += format_double(s.stdev);
        out += ',';
        out += format_double(s.mean > 0 ? independent_cost / s.mean : 1.0);
        out += '\n';
    }
    return out;
}

}
