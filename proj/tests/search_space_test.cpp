#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "pipecache/errors.hpp"
#include "pipecache/search_space.hpp"
#include "pipecache/workloads.hpp"
#include "test_util.hpp"

using namespace pipecache;
using namespace pipecache::testutil;

namespace {

// Two single-operator stages, one continuous param each.
SearchSpace two_stage_continuous()
{
    SearchSpace space;
    space.name = "toy";
    space.stages = {
        {"a", {{"A", {{"x", ContinuousDomain{0.0, 1.0, Scale::Linear}}}}}},
        {"b", {{"B", {{"y", ContinuousDomain{0.0, 1.0, Scale::Linear}}}}}},
    };
    return space;
}

bool value_in_domain(const ParamValue& value, const ParamDomain& domain)
{
    struct Check {
        const ParamValue& value;
        bool operator()(const ContinuousDomain& d) const
        {
            const double* v = std::get_if<double>(&value);
            return v != nullptr && *v >= d.lo && *v <= d.hi;
        }
        bool operator()(const IntegerDomain& d) const
        {
            const std::int64_t* v = std::get_if<std::int64_t>(&value);
            return v != nullptr && *v >= d.lo && *v <= d.hi;
        }
        bool operator()(const CategoricalDomain& d) const
        {
            const std::string* v = std::get_if<std::string>(&value);
            return v != nullptr &&
                   std::find(d.labels.begin(), d.labels.end(), *v) != d.labels.end();
        }
        bool operator()(const BinaryDomain&) const
        {
            return std::holds_alternative<bool>(value);
        }
    };
    return std::visit(Check{value}, domain);
}

void check_pipelines_in_domain(const SearchSpace& space,
                               std::span<const PipelineSpec> pipelines)
{
    for (const auto& pipeline : pipelines) {
        REQUIRE(pipeline.stages.size() == space.stages.size());
        for (std::size_t s = 0; s < pipeline.stages.size(); ++s) {
            const auto& sig = pipeline.stages[s];
            const auto& stage = space.stages[s];
            const auto choice = std::find_if(
                stage.choices.begin(), stage.choices.end(),
                [&](const auto& c) { return c.name == sig.operator_name(); });
            REQUIRE(choice != stage.choices.end());
            REQUIRE(sig.params().size() == choice->params.size());
            for (const auto& [name, value] : sig.params()) {
                const auto domain = std::find_if(
                    choice->params.begin(), choice->params.end(),
                    [&](const auto& p) { return p.first == name; });
                REQUIRE(domain != choice->params.end());
                CHECK(value_in_domain(value, domain->second));
            }
        }
    }
}

}

TEST_CASE("domain validation rejects ill-posed bounds")
{
    CHECK_THROWS_AS(validate_domain(ContinuousDomain{2.0, 1.0, Scale::Linear}, "x"),
                    ConfigError);
    CHECK_THROWS_AS(validate_domain(ContinuousDomain{0.0, 1.0, Scale::Log}, "x"),
                    ConfigError);
    CHECK_THROWS_AS(validate_domain(IntegerDomain{5, 5}, "x"), ConfigError);
    CHECK_THROWS_AS(validate_domain(CategoricalDomain{}, "x"), ConfigError);
    CHECK_NOTHROW(validate_domain(ContinuousDomain{1e-8, 1e5, Scale::Log}, "x"));
}

TEST_CASE("random sampling stays inside its domains and is seed-deterministic")
{
    const auto spaces = builtin_spaces();
    for (const auto& [name, space] : spaces) {
        const auto pipelines = sample_random(space, 50, 42);
        CHECK(pipelines.size() == 50);
        check_pipelines_in_domain(space, pipelines);
        const auto again = sample_random(space, 50, 42);
        CHECK(pipelines == again);
        const auto other = sample_random(space, 50, 43);
        CHECK(pipelines != other);
    }
    CHECK_THROWS_AS(sample_random(two_stage_continuous(), 0, 1), ConfigError);
    CHECK(sample_random(two_stage_continuous(), 1, 9).size() == 1);
}

TEST_CASE("random sampling over continuous stages yields disjoint merged dags")
{
    // timit's first stage has a continuous param, so 100 random configs
    // almost surely have 100 distinct first-stage signatures.
    const auto space = builtin_spaces().at("timit");
    const auto pipelines = sample_random(space, 100, 7);
    const auto dag = merge_pipelines(pipelines).dag;
    CHECK(level_sizes(dag) == std::vector<std::size_t>{100, 100});
}

TEST_CASE("log-scaled draws are uniform in the exponent")
{
    SearchSpace space;
    space.stages = {
        {"s", {{"op", {{"lambda", ContinuousDomain{1e-5, 1e5, Scale::Log}}}}}}};
    const auto pipelines = sample_random(space, 10000, 1234);

    std::vector<int> buckets(10, 0);
    for (const auto& pipeline : pipelines) {
        const double v = std::get<double>(pipeline.stages[0].params()[0].second);
        REQUIRE(v >= 1e-5);
        REQUIRE(v <= 1e5);
        const double exponent = std::log10(v);  // in [-5, 5]
        const int bucket = std::min(9, static_cast<int>(std::floor(exponent + 5.0)));
        ++buckets[bucket];
    }
    for (int count : buckets) {
        CHECK(count > 850);
        CHECK(count < 1150);
    }
}

TEST_CASE("grid sampling is the cartesian product of shared value sets")
{
    const auto space = two_stage_continuous();
    const std::vector<std::uint32_t> counts{2, 2};
    const auto pipelines = sample_grid(space, counts);
    CHECK(pipelines.size() == 4);

    const auto dag = merge_pipelines(pipelines).dag;
    CHECK(level_sizes(dag) == std::vector<std::size_t>{2, 4});

    // value sets repeat across parents: only 2 distinct B signatures
    std::set<std::string> b_values;
    for (const auto& pipeline : pipelines)
        b_values.insert(pipeline.stages[1].canonical_key());
    CHECK(b_values.size() == 2);
}

TEST_CASE("grid covers binaries, spaces counts evenly, and dedups integers")
{
    SearchSpace space;
    space.stages = {{"s", {{"op", {{"flag", BinaryDomain{}}}}}}};
    const std::vector<std::uint32_t> two{2};
    const auto pipelines = sample_grid(space, two);
    REQUIRE(pipelines.size() == 2);
    CHECK(std::get<bool>(pipelines[0].stages[0].params()[0].second) == false);
    CHECK(std::get<bool>(pipelines[1].stages[0].params()[0].second) == true);

    SearchSpace pair;
    pair.stages = {
        {"a", {{"A", {{"x", ContinuousDomain{0.0, 1.0, Scale::Linear}}}}}},
        {"b", {{"B", {{"y", ContinuousDomain{0.0, 3.0, Scale::Linear}}}}}},
    };
    const std::vector<std::uint32_t> counts{2, 3};
    const auto grid = sample_grid(pair, counts);
    CHECK(grid.size() == 6);
    std::set<std::string> first;
    for (const auto& pipeline : grid)
        first.insert(pipeline.stages[0].canonical_key());
    CHECK(first.size() == 2);

    SearchSpace ints;
    ints.stages = {{"s", {{"op", {{"n", IntegerDomain{2, 4}}}}}}};
    const std::vector<std::uint32_t> five{5};
    CHECK(sample_grid(ints, five).size() == 3);  // {2, 3, 4} after dedup

    const std::vector<std::uint32_t> big{1000, 1000};
    CHECK_THROWS_AS(sample_grid(pair, big, 1000), ConfigError);
}

TEST_CASE("gridded random produces a perfect tree with fresh values per parent")
{
    const auto space = two_stage_continuous();
    const auto pipelines = sample_gridded_random(space, {2, 2}, 5);
    CHECK(pipelines.size() == 4);
    check_pipelines_in_domain(space, pipelines);

    const auto dag = merge_pipelines(pipelines).dag;
    CHECK(level_sizes(dag) == std::vector<std::size_t>{2, 4});

    // unlike grid search, children of different parents draw fresh values
    std::set<std::string> b_values;
    for (const auto& pipeline : pipelines)
        b_values.insert(pipeline.stages[1].canonical_key());
    CHECK(b_values.size() == 4);
    for (NodeId id = 0; id < dag.node_count(); ++id)
        if (id != dag.root())
            CHECK(dag.children(id).size() == (dag.depth(id) == 1 ? 2 : 0));
}

TEST_CASE("gridded random matches the documented branching structure")
{
    const auto space = builtin_spaces().at("openml_micro");
    const auto pipelines = sample_gridded_random(space, {4, 5, 5}, 2024);
    CHECK(pipelines.size() == 100);
    const auto dag = merge_pipelines(pipelines).dag;
    CHECK(level_sizes(dag) == std::vector<std::size_t>{4, 20, 100});

    // the four parameter-free preprocessors split a branching of 4 evenly
    std::set<std::string> preprocessors;
    for (const auto& pipeline : pipelines)
        preprocessors.insert(pipeline.stages[0].operator_name());
    CHECK(preprocessors.size() == 4);
}

TEST_CASE("gridded random with all-ones branching is a single random pipeline")
{
    const auto space = two_stage_continuous();
    const auto pipelines = sample_gridded_random(space, {1, 1}, 77);
    REQUIRE(pipelines.size() == 1);
    check_pipelines_in_domain(space, pipelines);
    CHECK(sample_gridded_random(space, {1, 1}, 77) == pipelines);
}

TEST_CASE("gridded random splits a stage budget across operator choices evenly")
{
    SearchSpace space;
    space.stages = {
        {"s",
         {{"op_a", {{"x", ContinuousDomain{0, 1, Scale::Linear}}}},
          {"op_b", {{"x", ContinuousDomain{0, 1, Scale::Linear}}}},
          {"op_c", {{"x", ContinuousDomain{0, 1, Scale::Linear}}}}}},
    };
    const auto pipelines = sample_gridded_random(space, {5}, 3);
    REQUIRE(pipelines.size() == 5);
    std::map<std::string, int> ops;
    for (const auto& pipeline : pipelines)
        ++ops[pipeline.stages[0].operator_name()];
    std::multiset<int> counts;
    for (const auto& [name, count] : ops)
        counts.insert(count);
    CHECK(counts == std::multiset<int>{1, 2, 2});
}

TEST_CASE("adding a sibling branch does not perturb existing draws")
{
    const auto space = two_stage_continuous();
    const auto narrow = sample_gridded_random(space, {2, 2}, 99);
    const auto wide = sample_gridded_random(space, {2, 3}, 99);
    // the first child under each stage-1 node is unchanged
    CHECK(wide[0].stages[0] == narrow[0].stages[0]);
    CHECK(wide[0].stages[1] == narrow[0].stages[1]);
    CHECK(wide[3].stages[0] == narrow[2].stages[0]);
    CHECK(wide[3].stages[1] == narrow[2].stages[1]);
}

TEST_CASE("branching plans must match the space")
{
    const auto space = two_stage_continuous();
    CHECK_THROWS_AS(sample_gridded_random(space, {2}, 1), ConfigError);
    CHECK_THROWS_AS(sample_gridded_random(space, {2, 0}, 1), ConfigError);
}

TEST_CASE("spaces round-trip through JSON")
{
    for (const auto& [name, space] : builtin_spaces()) {
        const auto j = space_to_json(space);
        const auto back = space_from_json(j);
        CHECK(space_to_json(back) == j);
    }
    CHECK_THROWS_AS(space_from_json(nlohmann::json::array()), ConfigError);
    CHECK_THROWS_AS(space_from_json(nlohmann::json{{"version", 9}}), ConfigError);
    CHECK_THROWS_AS(space_from_json(nlohmann::json{{"version", 1}}), ConfigError);
}
