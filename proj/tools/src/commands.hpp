#ifndef PIPECACHE_TOOLS_COMMANDS_HPP
#define PIPECACHE_TOOLS_COMMANDS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "workload.hpp"

namespace pipecache::tools {

struct OutputOptions {
    std::string out;            // empty = stdout
    std::string format = "csv"; // csv | json
};

struct SimulateOptions {
    WorkloadOptions workload;
    std::vector<std::string> policies{"lru", "reciprocal", "wreciprocal"};
    std::string capacities;
    std::size_t trials = 1;
    std::uint64_t seed = 0;
    double time_limit_seconds = 60.0;
    std::size_t workers = 0;  // 0 = hardware concurrency
    bool force_opt = false;
    OutputOptions output;
};

struct ShOptions {
    SimulateOptions sim;
    std::string sh_params;  // "n,R,eta,G"
    std::string mode = "warmstart";
    std::string dump_dags_dir;
};

struct OptOptions {
    WorkloadOptions workload;
    std::string capacities;
    double time_limit_seconds = 300.0;
    bool force = false;
    std::string export_milp_path;
    OutputOptions output;
};

struct MergeReportOptions {
    WorkloadOptions workload;
    OutputOptions output;
};

struct SampleOptions {
    WorkloadOptions workload;  // spec must be space:...
    OutputOptions output;
};

struct GenTreeOptions {
    std::uint32_t k = 2;
    std::uint32_t d = 1;
    std::string cost_model = "uniform:1";
    std::string size_model = "uniform:1";
    std::uint64_t seed = 0;
    OutputOptions output;
};

int cmd_merge_report(const MergeReportOptions& options);
int cmd_simulate(const SimulateOptions& options);
int cmd_sh(const ShOptions& options);
int cmd_opt(const OptOptions& options);
int cmd_sample(const SampleOptions& options);
int cmd_gen_tree(const GenTreeOptions& options);

}

#endif
