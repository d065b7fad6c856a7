#ifndef PIPECACHE_WORKLOADS_HPP
#define PIPECACHE_WORKLOADS_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pipecache/dag.hpp"
#include "pipecache/search_space.hpp"

namespace pipecache {

struct UniformCost {
    double value = 1.0;
};
struct RootHeavyCost {
    double root = 100.0;
    double others = 1.0;
};
// hi with probability p_hi, lo otherwise. When both the cost and the size
// of a node are two-point, they share the node's coin, so a heavy output
// is also the expensive one.
struct TwoPointCost {
    double lo = 1.0;
    double hi = 100.0;
    double p_hi = 0.5;
};
using CostModel = std::variant<UniformCost, RootHeavyCost, TwoPointCost>;

struct UniformSize {
    double value = 1.0;
};
struct TwoPointSize {
    double lo = 10.0;
    double hi = 50.0;
    double p_hi = 0.5;
};
using SizeModel = std::variant<UniformSize, TwoPointSize>;

// Perfect k-ary tree workload; the root is a real, costed node.
struct TreeSpec {
    std::uint32_t k = 2;
    std::uint32_t d = 1;
    CostModel cost = UniformCost{};
    SizeModel size = UniformSize{};
    std::uint64_t seed = 0;

    void validate() const;
};

// (k^(d+1) - 1) / (k - 1) nodes, k^d pipelines, each of depth d.
Dag gen_kary_tree(const TreeSpec& spec);

struct ProfileMetadata {
    std::string time_unit = "units";
    std::string memory_unit = "units";
    std::string dataset;
};

struct LoadedProfile {
    Dag dag;
    std::vector<PipelineSpec> pipelines;
    ProfileMetadata metadata;
};

/*
 * Profile files are flat versioned records: every node carries its
 * operator, params, cost, size, and explicit parent ids. Cycles, orphan
 * nodes, and negative costs/sizes are load errors naming the record.
 */
nlohmann::json profile_to_json(const Dag& dag, const ProfileMetadata& metadata);
LoadedProfile profile_from_json(const nlohmann::json& j);
LoadedProfile load_profile(const std::filesystem::path& path);
void save_profile(const Dag& dag, const ProfileMetadata& metadata,
                  const std::filesystem::path& path);

// The shipped example search spaces: newsgroups, amazon, timit,
// openml_micro (ill-posed zero log bounds are floored at 1e-8).
std::map<std::string, SearchSpace> builtin_spaces();

nlohmann::json pipelines_to_json(std::span<const PipelineSpec> pipelines);
std::vector<PipelineSpec> pipelines_from_json(const nlohmann::json& j);

}

#endif
