#include "pipecache/opt_cache.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "pipecache/errors.hpp"

namespace pipecache {

void IlpInstance::validate() const
{
    const std::size_t T = steps();
    if (step_cost.size() != T || step_size.size() != T || active_sets.size() != T)
        throw ConfigError("instance step vectors have inconsistent lengths");
    if (node_cost.size() != node_count() || node_size.size() != node_count())
        throw ConfigError("instance node vectors have inconsistent lengths");
    if (capacity < 0)
        throw ConfigError("cache capacity must be non-negative");
    for (std::size_t t = 0; t < T; ++t) {
        if (step_cost[t] < 0 || step_size[t] < 0)
            throw ConfigError("negative cost or size at step " + std::to_string(t));
        if (step_node[t] >= node_count())
            throw ConfigError("step node index out of range");
        for (auto j : active_sets[t])
            if (j >= node_count())
                throw ConfigError("active set index out of range");
    }
}

IlpInstance build_instance(const Dag& dag, const ExecutionPlan& plan, double capacity)
{
    if (capacity < 0)
        throw ConfigError("cache capacity must be non-negative");
    IlpInstance inst;
    inst.capacity = capacity;

    std::vector<NodeId> distinct;
    for (std::size_t t = 0; t < plan.step_count(); ++t) {
        if (plan.node_at(t) >= dag.node_count())
            throw StructureError("plan references a node outside the dag");
        distinct.push_back(plan.node_at(t));
    }
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    inst.node_origin = distinct;

    std::unordered_map<NodeId, std::uint32_t> local;
    for (std::uint32_t j = 0; j < distinct.size(); ++j) {
        local[distinct[j]] = j;
        inst.node_cost.push_back(dag.node(distinct[j]).cost);
        inst.node_size.push_back(dag.node(distinct[j]).size);
    }

    for (std::size_t t = 0; t < plan.step_count(); ++t) {
        const NodeId id = plan.node_at(t);
        inst.step_node.push_back(local.at(id));
        inst.step_cost.push_back(dag.node(id).cost);
        inst.step_size.push_back(dag.node(id).size);
        std::vector<std::uint32_t> active;
        for (NodeId a : plan.active_suffix(t))
            active.push_back(local.at(a));
        inst.active_sets.push_back(std::move(active));
    }
    inst.validate();
    return inst;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ExactSolver {
    const IlpInstance& inst;
    std::size_t T;
    std::size_t n;
    std::vector<std::uint64_t> active_mask;   // per step
    std::vector<std::uint64_t> useful_from;   // union of active masks from step t on
    std::vector<double> lower_bound;          // mandatory payments from step t on
    std::vector<std::unordered_map<std::uint64_t, double>> memo;
    std::chrono::steady_clock::time_point deadline;
    bool timed_out = false;
    std::uint64_t expansions = 0;

    explicit ExactSolver(const IlpInstance& instance,
                         std::chrono::duration<double> time_limit)
        : inst(instance), T(instance.steps()), n(instance.node_count())
    {
        active_mask.resize(T, 0);
        for (std::size_t t = 0; t < T; ++t)
            for (auto j : inst.active_sets[t])
                active_mask[t] |= std::uint64_t{1} << j;
        useful_from.assign(T + 1, 0);
        for (std::size_t t = T; t > 0; --t)
            useful_from[t - 1] = useful_from[t] | active_mask[t - 1];

        std::vector<std::size_t> first_occ(n, T);
        for (std::size_t t = T; t > 0; --t)
            first_occ[inst.step_node[t - 1]] = t - 1;
        lower_bound.assign(T + 1, 0.0);
        for (std::size_t t = T; t > 0; --t) {
            const std::size_t s = t - 1;
            bool mandatory = first_occ[inst.step_node[s]] == s;
            if (mandatory)
                for (auto j : inst.active_sets[s])
                    if (first_occ[j] < s) {
                        mandatory = false;
                        break;
                    }
            lower_bound[s] = lower_bound[t] + (mandatory ? inst.step_cost[s] : 0.0);
        }

        memo.resize(T);
        if (time_limit == std::chrono::duration<double>::max()) {
            deadline = std::chrono::steady_clock::time_point::max();
        } else if (time_limit.count() <= 0.0) {
            timed_out = true;
            deadline = std::chrono::steady_clock::now();
        } else {
            deadline = std::chrono::steady_clock::now() +
                       std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                           time_limit);
        }
    }

    double used_memory(std::uint64_t mask) const
    {
        double used = 0.0;
        while (mask != 0) {
            const int j = std::countr_zero(mask);
            used += inst.node_size[static_cast<std::size_t>(j)];
            mask &= mask - 1;
        }
        return used;
    }

    bool out_of_time()
    {
        if (timed_out)
            return true;
        if ((++expansions & 1023) == 0 &&
            std::chrono::steady_clock::now() >= deadline)
            timed_out = true;
        return timed_out;
    }

    // Enumerate the successor masks of (t, canonical mask): declining the
    // admission, then admitting with each minimal sufficient eviction set
    // (largest candidates first).
    template <typename Fn>
    void for_each_action(std::size_t t, std::uint64_t cmask, Fn&& fn) const
    {
        fn(cmask, std::uint64_t{0}, false);  // no admission

        const std::uint32_t node = inst.step_node[t];
        const std::uint64_t bit = std::uint64_t{1} << node;
        const double m = inst.step_size[t];
        if (m > inst.capacity || (cmask & bit))
            return;
        const double need = used_memory(cmask) + m - inst.capacity;
        if (need <= 0) {
            fn(cmask | bit, std::uint64_t{0}, true);
            return;
        }
        std::vector<std::uint32_t> candidates;
        for (std::uint64_t rest = cmask; rest != 0; rest &= rest - 1)
            candidates.push_back(static_cast<std::uint32_t>(std::countr_zero(rest)));
        std::sort(candidates.begin(), candidates.end(),
                  [&](std::uint32_t a, std::uint32_t b) {
                      if (inst.node_size[a] != inst.node_size[b])
                          return inst.node_size[a] > inst.node_size[b];
                      return a < b;
                  });
        std::vector<double> rest_sum(candidates.size() + 1, 0.0);
        for (std::size_t i = candidates.size(); i > 0; --i)
            rest_sum[i - 1] = rest_sum[i] + inst.node_size[candidates[i - 1]];

        // Descending-size recursion: every emitted set became sufficient
        // with its smallest member, so each is minimal and distinct.
        std::vector<std::uint32_t> chosen;
        auto rec = [&](auto&& self, std::size_t i, double freed) -> void {
            if (freed >= need) {
                std::uint64_t evict = 0;
                for (auto j : chosen)
                    evict |= std::uint64_t{1} << j;
                fn((cmask & ~evict) | bit, evict, true);
                return;
            }
            if (i == candidates.size() || freed + rest_sum[i] < need)
                return;
            chosen.push_back(candidates[i]);
            self(self, i + 1, freed + inst.node_size[candidates[i]]);
            chosen.pop_back();
            self(self, i + 1, freed);
        };
        rec(rec, 0, 0.0);
    }

    double solve(std::size_t t, std::uint64_t mask)
    {
        if (t == T)
            return 0.0;
        const std::uint64_t cmask = mask & useful_from[t];
        if (auto it = memo[t].find(cmask); it != memo[t].end())
            return it->second;
        if (out_of_time())
            return kInf;

        const double paid = (cmask & active_mask[t]) ? 0.0 : inst.step_cost[t];
        double best_tail = kInf;
        bool complete = true;
        for_each_action(t, cmask, [&](std::uint64_t next, std::uint64_t, bool) {
            if (best_tail <= lower_bound[t + 1])
                return;  // cannot improve further
            if (timed_out) {
                complete = false;
                return;
            }
            const double tail = solve(t + 1, next);
            if (timed_out)
                complete = false;
            if (tail < best_tail)
                best_tail = tail;
        });
        const double value = paid + best_tail;
        if (complete && !timed_out)
            memo[t].insert({cmask, value});
        return value;
    }

    // Replays the memoized argmin choices, emitting explicit actions.
    DeltaSchedule reconstruct()
    {
        DeltaSchedule schedule;
        std::uint64_t mask = 0;
        for (std::size_t t = 0; t < T; ++t) {
            const std::uint64_t cmask = mask & useful_from[t];
            // Canonically dropped nodes become real evictions now.
            for (std::uint64_t dropped = mask & ~cmask; dropped != 0;
                 dropped &= dropped - 1)
                schedule.actions.push_back(
                    {static_cast<std::uint32_t>(t),
                     static_cast<std::uint32_t>(std::countr_zero(dropped)), -1});
            // Revisit actions in the same order and with the same cut as
            // the search, so every memo lookup is a state it explored.
            double best_tail = kInf;
            bool chosen = false;
            std::uint64_t next_mask = cmask;
            std::uint64_t evictions = 0;
            bool admit = false;
            for_each_action(t, cmask, [&](std::uint64_t next, std::uint64_t evict,
                                          bool admitted) {
                if (best_tail <= lower_bound[t + 1])
                    return;
                const double tail =
                    t + 1 == T ? 0.0 : memo[t + 1].at(next & useful_from[t + 1]);
                if (tail < best_tail) {
                    best_tail = tail;
                    chosen = true;
                    next_mask = next;
                    evictions = evict;
                    admit = admitted;
                }
            });
            if (!chosen)
                throw Error("internal: schedule reconstruction lost the optimum");
            for (std::uint64_t e = evictions; e != 0; e &= e - 1)
                schedule.actions.push_back(
                    {static_cast<std::uint32_t>(t),
                     static_cast<std::uint32_t>(std::countr_zero(e)), -1});
            if (admit)
                schedule.actions.push_back(
                    {static_cast<std::uint32_t>(t), inst.step_node[t], 1});
            mask = next_mask;
        }
        return schedule;
    }
};

// Always-admit fallback used when the search times out: evicts the
// stalest residents first.
std::pair<double, DeltaSchedule> greedy_schedule(const IlpInstance& inst)
{
    const std::size_t T = inst.steps();
    const std::size_t n = inst.node_count();
    std::vector<bool> resident(n, false);
    std::vector<std::int64_t> last_use(n, -1);
    double used = 0.0;
    double cost = 0.0;
    DeltaSchedule schedule;
    for (std::size_t t = 0; t < T; ++t) {
        bool covered = false;
        for (auto j : inst.active_sets[t])
            if (resident[j]) {
                covered = true;
                break;
            }
        if (!covered)
            cost += inst.step_cost[t];
        const auto node = inst.step_node[t];
        if (!resident[node] && inst.step_size[t] <= inst.capacity) {
            std::vector<std::uint32_t> order;
            for (std::uint32_t j = 0; j < n; ++j)
                if (resident[j])
                    order.push_back(j);
            std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
                if (last_use[a] != last_use[b])
                    return last_use[a] < last_use[b];
                return a < b;
            });
            for (auto victim : order) {
                if (used + inst.step_size[t] <= inst.capacity)
                    break;
                resident[victim] = false;
                used -= inst.node_size[victim];
                schedule.actions.push_back({static_cast<std::uint32_t>(t), victim, -1});
            }
            resident[node] = true;
            used += inst.node_size[node];
            schedule.actions.push_back({static_cast<std::uint32_t>(t), node, 1});
        }
        last_use[node] = static_cast<std::int64_t>(t);
    }
    return {cost, std::move(schedule)};
}

}

OptResult solve_exact(const IlpInstance& instance, std::chrono::duration<double> time_limit)
{
    instance.validate();
    if (instance.node_count() > 64)
        throw ConfigError("exact solver handles at most 64 distinct plan nodes; got " +
                          std::to_string(instance.node_count()));

    const auto start = std::chrono::steady_clock::now();
    ExactSolver solver(instance, time_limit);
    const double value = solver.solve(0, 0);

    OptResult result;
    result.explored_states = solver.expansions;
    if (!solver.timed_out && value < kInf) {
        result.schedule = solver.reconstruct();
        // Price the schedule in forward step order, the same accumulation
        // the validator uses, so round trips are bit-exact.
        const auto check = validate_delta(instance, result.schedule);
        if (!check.feasible)
            throw Error("internal: exact solver produced an infeasible schedule");
        result.optimal_cost = check.cost;
        result.proved_optimal = true;
    } else {
        auto [greedy_cost, greedy] = greedy_schedule(instance);
        double plain_cost = 0.0;
        for (double c : instance.step_cost)
            plain_cost += c;
        if (greedy_cost <= plain_cost) {
            result.optimal_cost = greedy_cost;
            result.schedule = std::move(greedy);
        } else {
            result.optimal_cost = plain_cost;
            result.schedule = DeltaSchedule{};
        }
        result.proved_optimal = false;
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

ScheduleCheck validate_delta(const IlpInstance& instance, const DeltaSchedule& schedule)
{
    instance.validate();
    ScheduleCheck check;
    const std::size_t T = instance.steps();
    const std::size_t n = instance.node_count();

    // Net per-(step, node) change; duplicates collapse into one delta.
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> net;
    for (const auto& action : schedule.actions) {
        if (action.step >= T || action.node >= n) {
            check.violations.push_back({"index-range", action.step, action.node,
                                        "action outside the instance"});
            continue;
        }
        if (action.delta != 1 && action.delta != -1) {
            check.violations.push_back({"integrality", action.step, action.node,
                                        "delta must be +1 or -1"});
            continue;
        }
        net[{action.step, action.node}] += action.delta;
    }
    for (const auto& [key, delta] : net)
        if (delta < -1 || delta > 1)
            check.violations.push_back({"delta-bounds", key.first, key.second,
                                        "net change outside [-1, 1]"});

    std::vector<int> state(n, 0);  // initially empty cache
    double cost = 0.0;
    for (std::uint32_t t = 0; t < T; ++t) {
        bool covered = false;
        for (auto j : instance.active_sets[t])
            if (state[j] > 0) {
                covered = true;
                break;
            }
        if (!covered)
            cost += instance.step_cost[t];

        for (std::uint32_t j = 0; j < n; ++j) {
            const auto it = net.find({t, j});
            if (it == net.end() || it->second == 0)
                continue;
            const int delta = it->second;
            if (delta > 0 && j != instance.step_node[t])
                check.violations.push_back({"admit-only-active", t, j,
                                            "added a node other than the active one"});
            if (delta < 0 && state[j] <= 0)
                check.violations.push_back({"evict-only-resident", t, j,
                                            "removed a node that is not cached"});
            state[j] += delta;
            if (state[j] < 0 || state[j] > 1)
                check.violations.push_back({"state-bounds", t, j,
                                            "cache state left {0, 1}"});
        }

        double used = 0.0;
        for (std::uint32_t j = 0; j < n; ++j)
            if (state[j] > 0)
                used += instance.node_size[j];
        if (used > instance.capacity)
            check.violations.push_back({"capacity", t, instance.step_node[t],
                                        "cache exceeds its capacity"});
    }

    check.feasible = check.violations.empty();
    check.cost = check.feasible ? cost : 0.0;
    return check;
}

namespace {

std::string lp_number(double v)
{
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{})
        throw ConfigError("unrepresentable coefficient in LP export");
    return std::string(buf, end);
}

}

std::string export_milp(const IlpInstance& instance)
{
    instance.validate();
    const std::size_t T = instance.steps();
    const std::size_t n = instance.node_count();
    std::string lp;
    lp += "\\ cache-dependent generalized paging\n";
    lp += "\\ x_j_t: node j cached after step t; d_j_t: step-t change; z_t: payment\n";
    lp += "\\ t is 1-based; node j maps to dag node id:\n";
    for (std::size_t j = 0; j < n; ++j)
        lp += "\\   j=" + std::to_string(j) + " -> " +
              std::to_string(instance.node_origin[j]) + "\n";

    lp += "Minimize\n obj:";
    for (std::size_t t = 1; t <= T; ++t)
        lp += (t > 1 ? " + " : " ") + lp_number(instance.step_cost[t - 1]) + " z_" +
              std::to_string(t);
    lp += "\nSubject To\n";

    const auto x = [](std::size_t j, std::size_t t) {
        return "x_" + std::to_string(j) + "_" + std::to_string(t);
    };
    const auto d = [](std::size_t j, std::size_t t) {
        return "d_" + std::to_string(j) + "_" + std::to_string(t);
    };

    for (std::size_t t = 1; t <= T; ++t)
        for (std::size_t j = 0; j < n; ++j) {
            lp += " state_" + std::to_string(j) + "_" + std::to_string(t) + ": " +
                  x(j, t);
            if (t > 1)
                lp += " - " + x(j, t - 1);
            lp += " - " + d(j, t) + " = 0\n";
        }

    for (std::size_t t = 1; t <= T; ++t) {
        lp += " pay_" + std::to_string(t) + ": z_" + std::to_string(t);
        if (t > 1)
            for (auto j : instance.active_sets[t - 1])
                lp += " + " + x(j, t - 1);
        lp += " >= 1\n";
    }

    for (std::size_t t = 1; t <= T; ++t) {
        lp += " cap_" + std::to_string(t) + ":";
        bool first = true;
        for (std::size_t j = 0; j < n; ++j) {
            lp += (first ? " " : " + ") + lp_number(instance.node_size[j]) + " " + x(j, t);
            first = false;
        }
        lp += " <= " + lp_number(instance.capacity) + "\n";
    }

    // Evictions require residency; the active node may only be added.
    for (std::size_t t = 1; t <= T; ++t)
        for (std::size_t j = 0; j < n; ++j) {
            if (j == instance.step_node[t - 1])
                continue;
            lp += " evict_" + std::to_string(j) + "_" + std::to_string(t) + ": " +
                  d(j, t);
            if (t > 1)
                lp += " + " + x(j, t - 1);
            lp += " >= 0\n";
        }

    lp += "Bounds\n";
    for (std::size_t t = 1; t <= T; ++t) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j == instance.step_node[t - 1])
                lp += " 0 <= " + d(j, t) + " <= 1\n";
            else
                lp += " -1 <= " + d(j, t) + " <= 0\n";
        }
        lp += " 0 <= z_" + std::to_string(t) + " <= 1\n";
    }

    lp += "Binaries\n";
    for (std::size_t t = 1; t <= T; ++t)
        for (std::size_t j = 0; j < n; ++j)
            lp += " " + x(j, t) + "\n";
    lp += "Generals\n";
    for (std::size_t t = 1; t <= T; ++t)
        for (std::size_t j = 0; j < n; ++j)
            lp += " " + d(j, t) + "\n";
    lp += "End\n";
    return lp;
}

nlohmann::json schedule_to_json(const DeltaSchedule& schedule)
{
    nlohmann::json actions = nlohmann::json::array();
    for (const auto& action : schedule.actions)
        actions.push_back({{"t", action.step}, {"node", action.node},
                           {"delta", action.delta}});
    return {{"actions", actions}};
}

DeltaSchedule schedule_from_json(const nlohmann::json& j)
{
    DeltaSchedule schedule;
    if (!j.is_object() || !j.contains("actions") || !j.at("actions").is_array())
        throw ConfigError("schedule JSON must contain an 'actions' array");
    for (const auto& ja : j.at("actions"))
        schedule.actions.push_back({ja.at("t").get<std::uint32_t>(),
                                    ja.at("node").get<std::uint32_t>(),
                                    ja.at("delta").get<int>()});
    return schedule;
}

// wall_seconds is deliberately not serialized: command outputs must be
// bit-identical across reruns with the same flags.
nlohmann::json opt_result_to_json(const OptResult& result, const IlpInstance& instance)
{
    return {{"optimal_cost", result.optimal_cost},
            {"proved_optimal", result.proved_optimal},
            {"explored_states", result.explored_states},
            {"capacity", instance.capacity},
            {"steps", instance.steps()},
            {"nodes", instance.node_count()},
            {"schedule", schedule_to_json(result.schedule)}};
}

}
