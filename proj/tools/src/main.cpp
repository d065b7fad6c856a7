#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "pipecache/errors.hpp"

namespace {

using namespace pipecache;
using namespace pipecache::tools;

void add_workload_flags(CLI::App* cmd, WorkloadOptions& options)
{
    auto* workload = cmd->add_option("--workload", options.spec,
                                     "tree:..., profile:PATH, or space:NAME");
    cmd->add_option_function<std::string>(
           "--space",
           [&options](const std::string& name) { options.spec = "space:" + name; },
           "search space name or file (same as --workload space:NAME)")
        ->excludes(workload);
    cmd->final_callback([&options, cmd] {
        if (options.spec.empty())
            throw CLI::RequiredError(cmd->get_name() +
                                     " needs --workload or --space");
    });
    cmd->add_option("--sampler", options.sampler, "random | grid | gridded");
    cmd->add_option("--branching", options.branching,
                    "per-stage branching factors (gridded)")
        ->delimiter(',');
    cmd->add_option("--grid-counts", options.grid_counts,
                    "per-parameter value counts (grid)")
        ->delimiter(',');
    cmd->add_option("--n", options.sample_count, "configuration count (random)");
    cmd->add_option("--stage-costs", options.stage_costs,
                    "per-stage node cost for sampled workloads")
        ->delimiter(',');
    cmd->add_option("--stage-sizes", options.stage_sizes,
                    "per-stage node size for sampled workloads")
        ->delimiter(',');
}

void add_output_flags(CLI::App* cmd, OutputOptions& options)
{
    cmd->add_option("--out", options.out, "output path (default: stdout)");
    cmd->add_option("--format", options.format, "csv | json")
        ->check(CLI::IsMember({"csv", "json"}));
}

}

int main(int argc, char** argv)
{
    CLI::App app{"pipeline-aware tuning workbench: merge pipeline DAGs, schedule "
                 "successive halving, and quantify cache reuse"};
    app.require_subcommand(1);

    MergeReportOptions merge_options;
    auto* merge = app.add_subcommand("merge-report",
                                     "merge a workload and report reuse potential");
    add_workload_flags(merge, merge_options.workload);
    merge->add_option("--seed", merge_options.workload.seed, "sampling seed");
    add_output_flags(merge, merge_options.output);

    SimulateOptions sim_options;
    auto* sim = app.add_subcommand("simulate",
                                   "sweep cache policies over capacities");
    add_workload_flags(sim, sim_options.workload);
    sim->add_option("--policies", sim_options.policies,
                    "lru | reciprocal | wreciprocal | opt")
        ->delimiter(',');
    sim->add_option("--capacities", sim_options.capacities,
                    "comma list or geo:LO:HI:POINTS")
        ->required();
    sim->add_option("--trials", sim_options.trials, "simulations per point");
    sim->add_option("--seed", sim_options.seed, "base seed");
    sim->add_option("--time-limit", sim_options.time_limit_seconds,
                    "seconds per exact solve");
    sim->add_option("--workers", sim_options.workers, "worker threads (0 = auto)");
    sim->add_flag("--force-opt", sim_options.force_opt,
                  "solve OPT even past the size guardrail");
    add_output_flags(sim, sim_options.output);

    ShOptions sh_options;
    auto* sh = app.add_subcommand("sh", "successive-halving schedule + cache sweep");
    add_workload_flags(sh, sh_options.sim.workload);
    sh->add_option("--sh", sh_options.sh_params, "n,R,eta,G")->required();
    sh->add_option("--mode", sh_options.mode, "warmstart | retrain")
        ->check(CLI::IsMember({"warmstart", "retrain"}));
    sh->add_option("--policies", sh_options.sim.policies,
                   "lru | reciprocal | wreciprocal | opt")
        ->delimiter(',');
    sh->add_option("--capacities", sh_options.sim.capacities,
                   "comma list or geo:LO:HI:POINTS")
        ->required();
    sh->add_option("--trials", sh_options.sim.trials, "simulations per point");
    sh->add_option("--seed", sh_options.sim.seed, "base seed");
    sh->add_option("--time-limit", sh_options.sim.time_limit_seconds,
                   "seconds per exact solve");
    sh->add_option("--workers", sh_options.sim.workers, "worker threads (0 = auto)");
    sh->add_flag("--force-opt", sh_options.sim.force_opt,
                 "solve OPT even past the size guardrail");
    sh->add_option("--dump-dags", sh_options.dump_dags_dir,
                   "write per-generation pruned DAG profiles here");
    add_output_flags(sh, sh_options.sim.output);

    OptOptions opt_options;
    auto* opt = app.add_subcommand("opt", "exact optimal cache schedule");
    add_workload_flags(opt, opt_options.workload);
    opt->add_option("--seed", opt_options.workload.seed, "sampling seed");
    opt->add_option("--capacities", opt_options.capacities,
                    "comma list or geo:LO:HI:POINTS")
        ->required();
    opt->add_option("--time-limit", opt_options.time_limit_seconds,
                    "seconds per capacity");
    opt->add_flag("--force", opt_options.force, "ignore the size guardrail");
    opt->add_option("--export-milp", opt_options.export_milp_path,
                    "also write the model in LP format (single capacity)");
    add_output_flags(opt, opt_options.output);

    SampleOptions sample_options;
    auto* sample = app.add_subcommand("sample", "emit sampled pipelines as JSON");
    add_workload_flags(sample, sample_options.workload);
    sample->add_option("--seed", sample_options.workload.seed, "sampling seed");
    add_output_flags(sample, sample_options.output);

    GenTreeOptions tree_options;
    auto* tree = app.add_subcommand("gen-tree", "emit a k-ary tree profile");
    tree->add_option("--k", tree_options.k, "branching factor")->required();
    tree->add_option("--d", tree_options.d, "depth")->required();
    tree->add_option("--cost-model", tree_options.cost_model,
                     "uniform:C | root:R:O | twopoint:LO:HI:P");
    tree->add_option("--size-model", tree_options.size_model,
                     "uniform:M | twopoint:LO:HI:P");
    tree->add_option("--seed", tree_options.seed, "cost/size seed");
    add_output_flags(tree, tree_options.output);

    // seeds also drive sampling inside simulate/sh workload resolution
    sim->callback([&] { sim_options.workload.seed = sim_options.seed; });
    sh->callback([&] { sh_options.sim.workload.seed = sh_options.sim.seed; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*merge)
            return cmd_merge_report(merge_options);
        if (*sim)
            return cmd_simulate(sim_options);
        if (*sh)
            return cmd_sh(sh_options);
        if (*opt)
            return cmd_opt(opt_options);
        if (*sample)
            return cmd_sample(sample_options);
        if (*tree)
            return cmd_gen_tree(tree_options);
    } catch (const ContractViolation& e) {
        std::cerr << "contract violation: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
