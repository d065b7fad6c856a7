#include "workload.hpp"

#include <cmath>
#include <filesystem>

#include "pipecache/errors.hpp"
#include "pipecache/search_space.hpp"

namespace pipecache::tools {

std::vector<std::string> split(const std::string& text, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find(sep, start);
        if (end == std::string::npos) {
            out.push_back(text.substr(start));
            break;
        }
        out.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

namespace {

double to_double(const std::string& text, const std::string& what)
{
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size())
            throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse number '" + text + "' in " + what);
    }
}

std::uint64_t to_u64(const std::string& text, const std::string& what)
{
    try {
        std::size_t pos = 0;
        const auto v = std::stoull(text, &pos);
        if (pos != text.size())
            throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse integer '" + text + "' in " + what);
    }
}

}

CostModel parse_cost_model(const std::string& text)
{
    const auto parts = split(text, ':');
    if (parts.empty())
        throw ConfigError("empty cost model");
    if (parts[0] == "uniform" && parts.size() == 2)
        return UniformCost{to_double(parts[1], "cost model")};
    if (parts[0] == "root" && parts.size() == 3)
        return RootHeavyCost{to_double(parts[1], "cost model"),
                             to_double(parts[2], "cost model")};
    if (parts[0] == "twopoint" && parts.size() == 4)
        return TwoPointCost{to_double(parts[1], "cost model"),
                            to_double(parts[2], "cost model"),
                            to_double(parts[3], "cost model")};
    throw ConfigError("unknown cost model '" + text +
                      "' (expected uniform:C, root:R:O, or twopoint:LO:HI:P)");
}

SizeModel parse_size_model(const std::string& text)
{
    const auto parts = split(text, ':');
    if (parts.empty())
        throw ConfigError("empty size model");
    if (parts[0] == "uniform" && parts.size() == 2)
        return UniformSize{to_double(parts[1], "size model")};
    if (parts[0] == "twopoint" && parts.size() == 4)
        return TwoPointSize{to_double(parts[1], "size model"),
                            to_double(parts[2], "size model"),
                            to_double(parts[3], "size model")};
    throw ConfigError("unknown size model '" + text +
                      "' (expected uniform:M or twopoint:LO:HI:P)");
}

TreeSpec parse_tree_spec(const std::string& body)
{
    TreeSpec spec;
    for (const auto& field : split(body, ',')) {
        if (field.empty())
            continue;
        const auto eq = field.find('=');
        if (eq == std::string::npos)
            throw ConfigError("tree spec field '" + field + "' is not key=value");
        const std::string key = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        if (key == "k")
            spec.k = static_cast<std::uint32_t>(to_u64(value, "tree spec"));
        else if (key == "d")
            spec.d = static_cast<std::uint32_t>(to_u64(value, "tree spec"));
        else if (key == "costs")
            spec.cost = parse_cost_model(value);
        else if (key == "sizes")
            spec.size = parse_size_model(value);
        else if (key == "seed")
            spec.seed = to_u64(value, "tree spec");
        else
            throw ConfigError("unknown tree spec field '" + key + "'");
    }
    spec.validate();
    return spec;
}

SearchSpace resolve_space(const std::string& name_or_path)
{
    const auto spaces = builtin_spaces();
    if (const auto it = spaces.find(name_or_path); it != spaces.end())
        return it->second;
    if (std::filesystem::exists(name_or_path))
        return load_space_file(name_or_path);
    std::string known;
    for (const auto& [name, space] : spaces)
        known += (known.empty() ? "" : ", ") + name;
    throw ConfigError("unknown search space '" + name_or_path +
                      "' (builtins: " + known + ")");
}

std::vector<double> parse_capacities(const std::string& text)
{
    if (text.empty())
        throw ConfigError("capacity sweep must not be empty");
    std::vector<double> out;
    if (text.rfind("geo:", 0) == 0) {
        const auto parts = split(text, ':');
        if (parts.size() != 4)
            throw ConfigError("geometric sweep must be geo:LO:HI:POINTS");
        const double lo = to_double(parts[1], "capacity sweep");
        const double hi = to_double(parts[2], "capacity sweep");
        const auto points = to_u64(parts[3], "capacity sweep");
        if (!(lo > 0) || !(hi >= lo) || points < 1)
            throw ConfigError("geometric sweep needs 0 < LO <= HI and POINTS >= 1");
        for (std::uint64_t i = 0; i < points; ++i) {
            const double f = points == 1 ? 0.0
                                         : static_cast<double>(i) /
                                               static_cast<double>(points - 1);
            out.push_back(std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo))));
        }
        return out;
    }
    for (const auto& field : split(text, ','))
        out.push_back(to_double(field, "capacity sweep"));
    for (double c : out)
        if (c < 0)
            throw ConfigError("capacities must be non-negative");
    return out;
}

namespace {

ResolvedWorkload from_dag(Dag dag, std::size_t duplicates, std::string description)
{
    ResolvedWorkload workload;
    workload.dag = std::move(dag);
    workload.plan = execution_plan(workload.dag);
    workload.independent_cost = plan_cost(workload.plan, workload.dag);
    workload.pipeline_count = workload.plan.path_count();
    workload.duplicates_dropped = duplicates;
    workload.description = std::move(description);
    return workload;
}

}

ResolvedWorkload resolve_workload(const WorkloadOptions& options)
{
    const auto colon = options.spec.find(':');
    if (colon == std::string::npos)
        throw ConfigError("workload spec must start with tree:, profile:, or space:");
    const std::string kind = options.spec.substr(0, colon);
    const std::string body = options.spec.substr(colon + 1);

    if (kind == "tree") {
        TreeSpec spec = parse_tree_spec(body);
        return from_dag(gen_kary_tree(spec), 0, options.spec);
    }
    if (kind == "profile") {
        auto loaded = load_profile(body);
        return from_dag(std::move(loaded.dag), 0, options.spec);
    }
    if (kind == "space") {
        const SearchSpace space = resolve_space(body);
        std::vector<PipelineSpec> pipelines;
        if (options.sampler == "random") {
            if (options.sample_count < 1)
                throw ConfigError("random sampling needs --n >= 1");
            pipelines = sample_random(space, options.sample_count, options.seed);
        } else if (options.sampler == "grid") {
            pipelines = sample_grid(space, options.grid_counts);
        } else if (options.sampler == "gridded") {
            pipelines = sample_gridded_random(space, options.branching, options.seed);
        } else {
            throw ConfigError("space workloads need --sampler random|grid|gridded");
        }
        auto merged = merge_pipelines(pipelines);
        std::vector<double> costs = options.stage_costs;
        std::vector<double> sizes = options.stage_sizes;
        if (costs.empty())
            costs.assign(space.stage_count(), 1.0);
        if (sizes.empty())
            sizes.assign(space.stage_count(), 1.0);
        if (costs.size() != space.stage_count() || sizes.size() != space.stage_count())
            throw ConfigError("--stage-costs/--stage-sizes must list one value per "
                              "stage (" + std::to_string(space.stage_count()) + ")");
        apply_stage_costs(merged.dag, costs, sizes);
        return from_dag(std::move(merged.dag), merged.duplicates_dropped, options.spec);
    }
    throw ConfigError("unknown workload kind '" + kind + "'");
}

}
