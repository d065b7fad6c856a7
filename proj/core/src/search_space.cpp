#include "pipecache/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "pipecache/errors.hpp"
#include "pipecache/rng.hpp"

namespace pipecache {

namespace {

struct DomainValidator {
    const std::string& name;

    void operator()(const ContinuousDomain& d) const
    {
        if (!(d.lo < d.hi))
            throw ConfigError("continuous domain '" + name + "': lo must be < hi");
        if (d.scale == Scale::Log && !(d.lo > 0))
            throw ConfigError("continuous domain '" + name +
                              "': log scale needs a positive lower bound");
    }
    void operator()(const IntegerDomain& d) const
    {
        if (!(d.lo < d.hi))
            throw ConfigError("integer domain '" + name + "': lo must be < hi");
    }
    void operator()(const CategoricalDomain& d) const
    {
        if (d.labels.empty())
            throw ConfigError("categorical domain '" + name + "' has no labels");
    }
    void operator()(const BinaryDomain&) const {}
};

ParamValue draw_value(const ParamDomain& domain, SplitRng& rng)
{
    struct Draw {
        SplitRng& rng;
        ParamValue operator()(const ContinuousDomain& d) const
        {
            return d.scale == Scale::Log ? rng.log_uniform(d.lo, d.hi)
                                         : rng.uniform_real(d.lo, d.hi);
        }
        ParamValue operator()(const IntegerDomain& d) const
        {
            return rng.uniform_int(d.lo, d.hi);
        }
        ParamValue operator()(const CategoricalDomain& d) const
        {
            return d.labels[rng.pick_index(d.labels.size())];
        }
        ParamValue operator()(const BinaryDomain&) const { return rng.bernoulli(0.5); }
    };
    return std::visit(Draw{rng}, domain);
}

OpSignature draw_operator(const OperatorChoice& choice, SplitRng& rng)
{
    std::vector<std::pair<std::string, ParamValue>> params;
    params.reserve(choice.params.size());
    for (const auto& [name, domain] : choice.params)
        params.emplace_back(name, draw_value(domain, rng));
    return OpSignature(choice.name, std::move(params));
}

// Odometer step over mixed radices; false once every digit has wrapped.
bool advance_odometer(std::vector<std::size_t>& odo,
                      const std::vector<std::size_t>& radix)
{
    for (std::size_t d = odo.size(); d > 0; --d) {
        if (++odo[d - 1] < radix[d - 1])
            return true;
        odo[d - 1] = 0;
    }
    return false;
}

std::vector<ParamValue> grid_values(const ParamDomain& domain, std::uint32_t count)
{
    struct Grid {
        std::uint32_t count;
        std::vector<ParamValue> operator()(const ContinuousDomain& d) const
        {
            std::vector<ParamValue> out;
            const double lo = d.scale == Scale::Log ? std::log(d.lo) : d.lo;
            const double hi = d.scale == Scale::Log ? std::log(d.hi) : d.hi;
            if (count == 1) {
                const double mid = 0.5 * (lo + hi);
                out.push_back(d.scale == Scale::Log ? std::exp(mid) : mid);
                return out;
            }
            for (std::uint32_t i = 0; i < count; ++i) {
                const double v = lo + (hi - lo) * static_cast<double>(i) /
                                          static_cast<double>(count - 1);
                out.push_back(d.scale == Scale::Log ? std::exp(v) : v);
            }
            return out;
        }
        std::vector<ParamValue> operator()(const IntegerDomain& d) const
        {
            std::vector<std::int64_t> points;
            if (count == 1) {
                points.push_back(d.lo + (d.hi - d.lo) / 2);
            } else {
                const double span = static_cast<double>(d.hi - d.lo);
                for (std::uint32_t i = 0; i < count; ++i)
                    points.push_back(d.lo + static_cast<std::int64_t>(std::llround(
                                                span * static_cast<double>(i) /
                                                static_cast<double>(count - 1))));
            }
            points.erase(std::unique(points.begin(), points.end()), points.end());
            return {points.begin(), points.end()};
        }
        std::vector<ParamValue> operator()(const CategoricalDomain& d) const
        {
            std::vector<ParamValue> out;
            const std::size_t take = std::min<std::size_t>(count, d.labels.size());
            for (std::size_t i = 0; i < take; ++i)
                out.emplace_back(d.labels[i]);
            return out;
        }
        std::vector<ParamValue> operator()(const BinaryDomain&) const
        {
            if (count >= 2)
                return {false, true};
            return {false};
        }
    };
    return std::visit(Grid{count}, domain);
}

}

void validate_domain(const ParamDomain& domain, const std::string& name)
{
    std::visit(DomainValidator{name}, domain);
}

std::size_t SearchSpace::param_count() const
{
    std::size_t n = 0;
    for (const auto& stage : stages)
        for (const auto& choice : stage.choices)
            n += choice.params.size();
    return n;
}

void SearchSpace::validate() const
{
    if (stages.empty())
        throw ConfigError("search space '" + name + "' has no stages");
    for (const auto& stage : stages) {
        if (stage.choices.empty())
            throw ConfigError("stage '" + stage.name + "' has no operator choices");
        for (const auto& choice : stage.choices)
            for (const auto& [pname, domain] : choice.params)
                validate_domain(domain, choice.name + "." + pname);
    }
}

void validate_branching(const SearchSpace& space, const BranchingPlan& plan)
{
    if (plan.size() != space.stages.size())
        throw ConfigError("branching plan length " + std::to_string(plan.size()) +
                          " does not match stage count " +
                          std::to_string(space.stages.size()));
    for (auto b : plan)
        if (b < 1)
            throw ConfigError("branching factors must be >= 1");
}

std::vector<PipelineSpec> sample_random(const SearchSpace& space, std::size_t n,
                                        std::uint64_t seed)
{
    space.validate();
    if (n < 1)
        throw ConfigError("sample_random requires n >= 1");
    const SplitRng root(seed);
    std::vector<PipelineSpec> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        SplitRng rng = root.spawn(i);
        PipelineSpec spec;
        spec.stages.reserve(space.stages.size());
        for (const auto& stage : space.stages) {
            const auto& choice = stage.choices[rng.pick_index(stage.choices.size())];
            spec.stages.push_back(draw_operator(choice, rng));
        }
        out.push_back(std::move(spec));
    }
    return out;
}

std::vector<PipelineSpec> sample_grid(const SearchSpace& space,
                                      std::span<const std::uint32_t> per_param_counts,
                                      std::size_t product_cap)
{
    space.validate();
    if (per_param_counts.size() != space.param_count())
        throw ConfigError("expected one grid count per parameter (" +
                          std::to_string(space.param_count()) + "), got " +
                          std::to_string(per_param_counts.size()));
    for (auto c : per_param_counts)
        if (c < 1)
            throw ConfigError("grid counts must be >= 1");

    // Per-stage signature menus: every operator choice contributes the
    // product of its parameter grids.
    std::size_t next_count = 0;
    std::vector<std::vector<OpSignature>> stage_menus;
    for (const auto& stage : space.stages) {
        std::vector<OpSignature> menu;
        for (const auto& choice : stage.choices) {
            std::vector<std::vector<ParamValue>> grids;
            grids.reserve(choice.params.size());
            for (const auto& [pname, domain] : choice.params)
                grids.push_back(grid_values(domain, per_param_counts[next_count++]));
            std::vector<std::size_t> radix;
            for (const auto& g : grids)
                radix.push_back(g.size());
            std::vector<std::size_t> odo(grids.size(), 0);
            do {
                std::vector<std::pair<std::string, ParamValue>> params;
                params.reserve(grids.size());
                for (std::size_t i = 0; i < grids.size(); ++i)
                    params.emplace_back(choice.params[i].first, grids[i][odo[i]]);
                menu.emplace_back(choice.name, std::move(params));
                if (menu.size() > product_cap)
                    throw ConfigError("grid size exceeds cap of " +
                                      std::to_string(product_cap));
            } while (advance_odometer(odo, radix));
        }
        stage_menus.push_back(std::move(menu));
    }

    std::size_t total = 1;
    for (const auto& menu : stage_menus) {
        if (menu.empty())
            throw ConfigError("empty grid menu for a stage");
        if (total > product_cap / menu.size())
            throw ConfigError("grid size exceeds cap of " + std::to_string(product_cap));
        total *= menu.size();
    }

    std::vector<PipelineSpec> out;
    out.reserve(total);
    std::vector<std::size_t> radix;
    for (const auto& menu : stage_menus)
        radix.push_back(menu.size());
    std::vector<std::size_t> odo(stage_menus.size(), 0);
    do {
        PipelineSpec spec;
        spec.stages.reserve(stage_menus.size());
        for (std::size_t s = 0; s < stage_menus.size(); ++s)
            spec.stages.push_back(stage_menus[s][odo[s]]);
        out.push_back(std::move(spec));
    } while (advance_odometer(odo, radix));
    return out;
}

namespace {

// Split a stage's branching factor across operator choices as evenly as
// possible; the remainder goes to choices picked by a seeded shuffle.
std::vector<std::uint32_t> allocate_choices(std::size_t choice_count, std::uint32_t budget,
                                            SplitRng& rng)
{
    std::vector<std::uint32_t> alloc(choice_count,
                                     budget / static_cast<std::uint32_t>(choice_count));
    std::vector<std::size_t> order(choice_count);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const auto remainder = budget % static_cast<std::uint32_t>(choice_count);
    for (std::uint32_t r = 0; r < remainder; ++r)
        ++alloc[order[r]];
    return alloc;
}

void gridded_expand(const SearchSpace& space, const BranchingPlan& branching,
                    std::size_t stage_index, const SplitRng& node_rng,
                    PipelineSpec& prefix, std::vector<PipelineSpec>& out)
{
    if (stage_index == space.stages.size()) {
        out.push_back(prefix);
        return;
    }
    const auto& stage = space.stages[stage_index];
    const std::uint32_t budget = branching[stage_index];
    SplitRng alloc_rng = node_rng.spawn(budget);
    const auto alloc = allocate_choices(stage.choices.size(), budget, alloc_rng);

    std::uint32_t child_index = 0;
    for (std::size_t c = 0; c < stage.choices.size(); ++c) {
        for (std::uint32_t j = 0; j < alloc[c]; ++j) {
            SplitRng child_rng = node_rng.spawn(child_index++);
            prefix.stages.push_back(draw_operator(stage.choices[c], child_rng));
            gridded_expand(space, branching, stage_index + 1, child_rng, prefix, out);
            prefix.stages.pop_back();
        }
    }
}

}

std::vector<PipelineSpec> sample_gridded_random(const SearchSpace& space,
                                                const BranchingPlan& branching,
                                                std::uint64_t seed)
{
    space.validate();
    validate_branching(space, branching);
    std::vector<PipelineSpec> out;
    std::size_t total = 1;
    for (auto b : branching)
        total *= b;
    out.reserve(total);
    PipelineSpec prefix;
    gridded_expand(space, branching, 0, SplitRng(seed), prefix, out);
    return out;
}

namespace {

ParamDomain domain_from_json(const nlohmann::json& j, const std::string& name)
{
    if (!j.is_object() || !j.contains("kind"))
        throw ConfigError("parameter '" + name + "': expected an object with a 'kind'");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "continuous") {
        ContinuousDomain d;
        d.lo = j.at("lo").get<double>();
        d.hi = j.at("hi").get<double>();
        const std::string scale = j.value("scale", "linear");
        if (scale == "log")
            d.scale = Scale::Log;
        else if (scale != "linear")
            throw ConfigError("parameter '" + name + "': unknown scale '" + scale + "'");
        return d;
    }
    if (kind == "integer")
        return IntegerDomain{j.at("lo").get<std::int64_t>(), j.at("hi").get<std::int64_t>()};
    if (kind == "categorical")
        return CategoricalDomain{j.at("labels").get<std::vector<std::string>>()};
    if (kind == "binary")
        return BinaryDomain{};
    throw ConfigError("parameter '" + name + "': unknown kind '" + kind + "'");
}

nlohmann::json domain_to_json(const ParamDomain& domain)
{
    struct ToJson {
        nlohmann::json operator()(const ContinuousDomain& d) const
        {
            nlohmann::json j{{"kind", "continuous"}, {"lo", d.lo}, {"hi", d.hi}};
            j["scale"] = d.scale == Scale::Log ? "log" : "linear";
            return j;
        }
        nlohmann::json operator()(const IntegerDomain& d) const
        {
            return {{"kind", "integer"}, {"lo", d.lo}, {"hi", d.hi}};
        }
        nlohmann::json operator()(const CategoricalDomain& d) const
        {
            return {{"kind", "categorical"}, {"labels", d.labels}};
        }
        nlohmann::json operator()(const BinaryDomain&) const
        {
            return {{"kind", "binary"}};
        }
    };
    return std::visit(ToJson{}, domain);
}

}

SearchSpace space_from_json(const nlohmann::json& j)
{
    if (!j.is_object())
        throw ConfigError("search space: expected a JSON object");
    const int version = j.value("version", 1);
    if (version != 1)
        throw ConfigError("unsupported search space schema version " +
                          std::to_string(version));
    SearchSpace space;
    space.name = j.value("name", "");
    if (!j.contains("stages") || !j.at("stages").is_array())
        throw ConfigError("search space: missing 'stages' array");
    for (const auto& js : j.at("stages")) {
        StageSpec stage;
        stage.name = js.value("name", "");
        for (const auto& jo : js.at("operators")) {
            OperatorChoice choice;
            choice.name = jo.at("name").get<std::string>();
            if (jo.contains("params"))
                for (const auto& [pname, pj] : jo.at("params").items())
                    choice.params.emplace_back(pname, domain_from_json(pj, pname));
            stage.choices.push_back(std::move(choice));
        }
        space.stages.push_back(std::move(stage));
    }
    space.validate();
    return space;
}

nlohmann::json space_to_json(const SearchSpace& space)
{
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& stage : space.stages) {
        nlohmann::json operators = nlohmann::json::array();
        for (const auto& choice : stage.choices) {
            nlohmann::json params = nlohmann::json::object();
            for (const auto& [pname, domain] : choice.params)
                params[pname] = domain_to_json(domain);
            operators.push_back({{"name", choice.name}, {"params", params}});
        }
        stages.push_back({{"name", stage.name}, {"operators", operators}});
    }
    return {{"version", 1}, {"name", space.name}, {"stages", stages}};
}

SearchSpace load_space_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open search space file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
    return space_from_json(j);
}

}
