#ifndef PIPECACHE_SEARCH_SPACE_HPP
#define PIPECACHE_SEARCH_SPACE_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pipecache/dag.hpp"

namespace pipecache {

enum class Scale : std::uint8_t { Linear, Log };

struct ContinuousDomain {
    double lo = 0.0;
    double hi = 1.0;
    Scale scale = Scale::Linear;
};

struct IntegerDomain {
    std::int64_t lo = 0;
    std::int64_t hi = 1;
};

struct CategoricalDomain {
    std::vector<std::string> labels;
};

struct BinaryDomain {};

using ParamDomain = std::variant<ContinuousDomain, IntegerDomain, CategoricalDomain, BinaryDomain>;

// Throws ConfigError when bounds are inverted, a log scale has a
// non-positive lower bound, or a categorical has no labels.
void validate_domain(const ParamDomain& domain, const std::string& name);

struct OperatorChoice {
    std::string name;
    std::vector<std::pair<std::string, ParamDomain>> params;
};

struct StageSpec {
    std::string name;
    std::vector<OperatorChoice> choices;
};

struct SearchSpace {
    std::string name;
    std::vector<StageSpec> stages;

    std::size_t stage_count() const { return stages.size(); }
    // Flat parameter count across stages and operator choices, in
    // declaration order; grid counts are matched against this order.
    std::size_t param_count() const;
    void validate() const;
};

// Per-stage branching factors for gridded random search.
using BranchingPlan = std::vector<std::uint32_t>;

void validate_branching(const SearchSpace& space, const BranchingPlan& plan);

// n independent configurations; log-scaled params uniform in exponent.
std::vector<PipelineSpec> sample_random(const SearchSpace& space, std::size_t n,
                                        std::uint64_t seed);

/*
 * Full Cartesian product of evenly spaced per-parameter value grids.
 * Counts are consumed in declaration order (one per parameter). The same
 * value set appears under every parent, which is what distinguishes grid
 * structure from gridded random structure once merged.
 */
std::vector<PipelineSpec> sample_grid(const SearchSpace& space,
                                      std::span<const std::uint32_t> per_param_counts,
                                      std::size_t product_cap = 1000000);

/*
 * Gridded random search: stage k of each partial pipeline draws b_k fresh
 * random settings, independently per parent. Produces prod(b_k) pipelines
 * whose merged DAG is a perfect (b_1, ..., b_k) tree as long as sampled
 * sibling settings are distinct. A stage's branching factor is split as
 * evenly as possible across its operator choices, remainder placed by a
 * seeded shuffle.
 */
std::vector<PipelineSpec> sample_gridded_random(const SearchSpace& space,
                                                const BranchingPlan& branching,
                                                std::uint64_t seed);

SearchSpace space_from_json(const nlohmann::json& j);
nlohmann::json space_to_json(const SearchSpace& space);
SearchSpace load_space_file(const std::filesystem::path& path);

}

#endif
