#include "commands.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "pipecache/cache_sim.hpp"
#include "pipecache/early_stopping.hpp"
#include "pipecache/errors.hpp"
#include "pipecache/opt_cache.hpp"
#include "pipecache/rng.hpp"

namespace pipecache::tools {

namespace {

// OPT is solved automatically only below this scale; larger instances
// need --force-opt and a time limit.
constexpr std::size_t kOptMaxNodes = 40;
constexpr std::size_t kOptMaxSteps = 200;

void write_output(const OutputOptions& output, const std::string& content)
{
    if (output.out.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream file(output.out, std::ios::binary);
    if (!file)
        throw ConfigError("cannot write output file " + output.out);
    file << content;
}

void run_indexed(std::size_t count, std::size_t workers,
                 const std::function<void(std::size_t)>& fn)
{
    if (workers == 0)
        workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

struct SweepRow {
    std::string policy;
    double capacity = 0.0;
    std::size_t trials = 0;
    double mean = 0.0;
    double stdev = 0.0;
    std::string status = "ok";
};

std::string rows_to_csv(const std::vector<SweepRow>& rows, double independent_cost)
{
    std::string out =
        "policy,capacity,trials,mean_cost,stdev,speedup_vs_independent,status\n";
    for (const auto& row : rows) {
        out += row.policy;
        out += ',';
        out += format_double(row.capacity);
        out += ',';
        if (row.status == "skipped") {
            out += "0,,,,";
        } else {
            out += std::to_string(row.trials);
            out += ',';
            out += format_double(row.mean);
            out += ',';
            out += format_double(row.stdev);
            out += ',';
            out += format_double(row.mean > 0 ? independent_cost / row.mean : 1.0);
            out += ',';
        }
        out += row.status;
        out += '\n';
    }
    return out;
}

nlohmann::json rows_to_json(const std::vector<SweepRow>& rows, double independent_cost)
{
    nlohmann::json out = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json j{{"policy", row.policy},
                         {"capacity", row.capacity},
                         {"status", row.status}};
        if (row.status != "skipped") {
            j["trials"] = row.trials;
            j["mean_cost"] = row.mean;
            j["stdev"] = row.stdev;
            j["speedup_vs_independent"] =
                row.mean > 0 ? independent_cost / row.mean : 1.0;
        }
        out.push_back(std::move(j));
    }
    return out;
}

// Sweep (policy x capacity); rows are ordered by the input lists no
// matter how the workers are scheduled, and every point derives its
// seeds from its index alone.
std::vector<SweepRow> run_sweep(const ResolvedWorkload& workload,
                                const std::vector<std::string>& policies,
                                const std::vector<double>& capacities,
                                std::size_t trials, std::uint64_t seed,
                                double time_limit_seconds, bool force_opt,
                                std::size_t workers)
{
    struct Point {
        std::string policy;
        double capacity;
    };
    std::vector<Point> points;
    for (const auto& policy : policies)
        for (double capacity : capacities)
            points.push_back({policy, capacity});

    std::vector<SweepRow> rows(points.size());
    const SplitRng seeder(seed);
    run_indexed(points.size(), workers, [&](std::size_t i) {
        const auto& point = points[i];
        SweepRow row;
        row.policy = point.policy;
        row.capacity = point.capacity;
        if (point.policy == "opt") {
            const auto instance =
                build_instance(workload.dag, workload.plan, point.capacity);
            if (!force_opt && (instance.node_count() > kOptMaxNodes ||
                               instance.steps() > kOptMaxSteps)) {
                row.status = "skipped";
            } else {
                const auto result = solve_exact(
                    instance, std::chrono::duration<double>(time_limit_seconds));
                row.trials = 1;
                row.mean = result.optimal_cost;
                row.stdev = 0.0;
                row.status = result.proved_optimal ? "ok" : "timeout";
            }
        } else {
            const auto factory = [&point] { return make_policy(point.policy); };
            const auto summary =
                run_trials(workload.plan, workload.dag, factory, point.capacity,
                           trials, seeder.spawn(i).base_seed());
            row.trials = summary.trials;
            row.mean = summary.mean;
            row.stdev = summary.stdev;
        }
        rows[i] = std::move(row);
    });
    return rows;
}

}

int cmd_merge_report(const MergeReportOptions& options)
{
    const auto workload = resolve_workload(options.workload);
    const double merged_cost = total_cost_merged(workload.dag);
    if (merged_cost <= 0)
        throw ConfigError("speedup undefined: merged evaluation cost is zero");

    nlohmann::json report{
        {"workload", workload.description},
        {"pipelines", workload.pipeline_count},
        {"duplicates_dropped", workload.duplicates_dropped},
        {"unmerged_nodes", workload.plan.step_count()},
        {"merged_nodes", workload.dag.operator_node_count()},
        {"tp_independent", workload.independent_cost},
        {"tp_merged", merged_cost},
        {"speedup", workload.independent_cost / merged_cost},
    };
    // The uniform-cost bound applies when every pipeline has equal length.
    const auto& paths = workload.plan.paths();
    bool equal_length = true;
    for (const auto& path : paths)
        if (path.size() != paths.front().size())
            equal_length = false;
    if (equal_length && !paths.empty())
        report["max_speedup_uniform"] =
            max_speedup_uniform(paths.front().size(), paths.size());

    if (options.output.format == "json") {
        write_output(options.output, report.dump(2) + "\n");
    } else {
        std::string csv = "key,value\n";
        for (const auto& [key, value] : report.items())
            csv += key + "," +
                   (value.is_string() ? value.get<std::string>() : value.dump()) + "\n";
        write_output(options.output, csv);
    }
    return 0;
}

int cmd_simulate(const SimulateOptions& options)
{
    if (options.policies.empty())
        throw ConfigError("select at least one policy");
    if (options.trials < 1)
        throw ConfigError("--trials must be >= 1");
    const auto workload = resolve_workload(options.workload);
    const auto capacities = parse_capacities(options.capacities);
    const auto rows =
        run_sweep(workload, options.policies, capacities, options.trials,
                  options.seed, options.time_limit_seconds, options.force_opt,
                  options.workers);
    if (options.output.format == "json")
        write_output(options.output,
                     rows_to_json(rows, workload.independent_cost).dump(2) + "\n");
    else
        write_output(options.output, rows_to_csv(rows, workload.independent_cost));
    return 0;
}

namespace {

SHParams parse_sh_params(const std::string& text, std::size_t pipeline_count)
{
    const auto parts = split(text, ',');
    if (parts.size() != 4)
        throw ConfigError("--sh expects n,R,eta,G");
    SHParams params;
    try {
        params.population = std::stoull(parts[0]);
        params.max_resource = std::stod(parts[1]);
        params.eta = static_cast<std::uint32_t>(std::stoul(parts[2]));
        params.generations = static_cast<std::uint32_t>(std::stoul(parts[3]));
    } catch (const std::exception&) {
        throw ConfigError("cannot parse --sh '" + text + "'");
    }
    params.validate();
    if (params.population != pipeline_count)
        throw ConfigError("--sh n=" + std::to_string(params.population) +
                          " must equal the workload's pipeline count (" +
                          std::to_string(pipeline_count) + ")");
    return params;
}

}

int cmd_sh(const ShOptions& options)
{
    const auto workload = resolve_workload(options.sim.workload);
    const auto params = parse_sh_params(options.sh_params, workload.pipeline_count);
    TrainingMode mode;
    if (options.mode == "warmstart")
        mode = TrainingMode::WarmStart;
    else if (options.mode == "retrain")
        mode = TrainingMode::Retrain;
    else
        throw ConfigError("--mode must be warmstart or retrain");

    // Synthetic resource-independent scores stand in for real training:
    // deterministic per (seed, pipeline), so SH picks a stable winner.
    const SplitRng oracle_rng(splitmix64(options.sim.seed ^ 0x0a11ce5ull));
    const auto oracle = [&oracle_rng](ConfigId config, double) {
        return SplitRng(oracle_rng.spawn(config).base_seed()).uniform01();
    };
    std::vector<ConfigId> configs(params.population);
    for (ConfigId i = 0; i < configs.size(); ++i)
        configs[i] = i;
    const auto sh = successive_halving(configs, params, oracle);
    const auto survivors = sh.survivor_sets();
    const auto sh_load = sh_workload(workload.dag, survivors, params, mode);

    if (!options.dump_dags_dir.empty()) {
        std::filesystem::create_directories(options.dump_dags_dir);
        const auto dags = sh_subdags(workload.dag, survivors, params, mode);
        for (std::size_t g = 0; g < dags.size(); ++g) {
            ProfileMetadata meta;
            meta.dataset = "sh_generation_" + std::to_string(g + 1);
            save_profile(dags[g], meta,
                         std::filesystem::path(options.dump_dags_dir) /
                             ("generation_" + std::to_string(g + 1) + ".json"));
        }
    }

    const auto capacities = parse_capacities(options.sim.capacities);
    ResolvedWorkload sh_resolved;
    sh_resolved.dag = sh_load.dag;
    sh_resolved.plan = sh_load.plan;
    sh_resolved.independent_cost = workload.independent_cost;
    sh_resolved.pipeline_count = workload.pipeline_count;
    const auto rows = run_sweep(sh_resolved, options.sim.policies, capacities,
                                options.sim.trials, options.sim.seed,
                                options.sim.time_limit_seconds,
                                options.sim.force_opt, options.sim.workers);

    const auto budget = sh_budget(params);
    nlohmann::json summary{
        {"params", sh_result_to_json(sh, params)["params"]},
        {"mode", options.mode},
        {"winner", sh.winner},
        {"min_resource", min_resource(params)},
        {"training_budget_sh", budget.with_early_stopping},
        {"training_budget_independent", budget.without_early_stopping},
        {"budget_reduction_ratio", budget.reduction_ratio},
        {"sh_plan_steps", sh_load.plan.step_count()},
        {"sh_plan_cost", plan_cost(sh_load.plan, sh_load.dag)},
        {"baseline_independent_cost", workload.independent_cost},
    };

    if (options.sim.output.format == "json") {
        nlohmann::json out{{"summary", summary},
                           {"rows", rows_to_json(rows, workload.independent_cost)}};
        write_output(options.sim.output, out.dump(2) + "\n");
    } else {
        std::string csv = rows_to_csv(rows, workload.independent_cost);
        std::cerr << "sh budget: " << format_double(budget.with_early_stopping)
                  << " vs " << format_double(budget.without_early_stopping)
                  << " without early stopping (reduction "
                  << format_double(budget.reduction_ratio) << ")\n";
        write_output(options.sim.output, csv);
    }
    return 0;
}

int cmd_opt(const OptOptions& options)
{
    const auto workload = resolve_workload(options.workload);
    const auto capacities = parse_capacities(options.capacities);
    if (!options.export_milp_path.empty() && capacities.size() != 1)
        throw ConfigError("--export-milp needs exactly one capacity");

    nlohmann::json results = nlohmann::json::array();
    for (double capacity : capacities) {
        const auto instance = build_instance(workload.dag, workload.plan, capacity);
        if (!options.force && (instance.node_count() > kOptMaxNodes ||
                               instance.steps() > kOptMaxSteps))
            throw ConfigError("instance too large for the exact solver (" +
                              std::to_string(instance.node_count()) + " nodes, " +
                              std::to_string(instance.steps()) +
                              " steps); pass --force to try anyway");
        if (!options.export_milp_path.empty()) {
            std::ofstream lp(options.export_milp_path, std::ios::binary);
            if (!lp)
                throw ConfigError("cannot write " + options.export_milp_path);
            lp << export_milp(instance);
        }
        const auto result = solve_exact(
            instance, std::chrono::duration<double>(options.time_limit_seconds));
        results.push_back(opt_result_to_json(result, instance));
    }
    write_output(options.output, results.dump(2) + "\n");
    return 0;
}

int cmd_sample(const SampleOptions& options)
{
    WorkloadOptions workload = options.workload;
    if (workload.spec.rfind("space:", 0) != 0)
        throw ConfigError("sample expects a space: workload");
    const SearchSpace space = resolve_space(workload.spec.substr(6));
    std::vector<PipelineSpec> pipelines;
    if (workload.sampler == "random") {
        if (workload.sample_count < 1)
            throw ConfigError("random sampling needs --n >= 1");
        pipelines = sample_random(space, workload.sample_count, workload.seed);
    } else if (workload.sampler == "grid") {
        pipelines = sample_grid(space, workload.grid_counts);
    } else if (workload.sampler == "gridded") {
        pipelines = sample_gridded_random(space, workload.branching, workload.seed);
    } else {
        throw ConfigError("sample needs --sampler random|grid|gridded");
    }
    write_output(options.output, pipelines_to_json(pipelines).dump(2) + "\n");
    return 0;
}

int cmd_gen_tree(const GenTreeOptions& options)
{
    TreeSpec spec;
    spec.k = options.k;
    spec.d = options.d;
    spec.cost = parse_cost_model(options.cost_model);
    spec.size = parse_size_model(options.size_model);
    spec.seed = options.seed;
    spec.validate();
    const Dag dag = gen_kary_tree(spec);
    ProfileMetadata meta;
    meta.dataset = "tree_k" + std::to_string(spec.k) + "_d" + std::to_string(spec.d);
    write_output(options.output, profile_to_json(dag, meta).dump(2) + "\n");
    return 0;
}

}
