#pragma once

// Command implementations behind the dynprior CLI. Each command takes parsed
// options, writes its artifacts, and returns a process exit code:
//   0 success, 1 threshold failure (validate --strict), 2 usage/config error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dynprior/errors.hpp"
#include "dynprior/prior_solver.hpp"
#include "dynprior/simulation.hpp"
#include "dynprior/validation.hpp"

namespace dynprior::app {

using json = nlohmann::json;
namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kThresholdFailure = 1, kUsageError = 2 };

struct CommonOptions {
    std::optional<fs::path> config_path;
    fs::path output_dir = ".";
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;  // key=value
};

// ---------------------------------------------------------------------------
// Config layering: documented defaults < config file < --set / --seed
// ---------------------------------------------------------------------------

inline json default_validation_json() {
    const ValidationConfig d;
    const CalibrationThresholds t;
    return json{{"p_values", d.p_values},
                {"n_values", d.n_values},
                {"epsilon_values", d.epsilon_values},
                {"r_values", d.r_values},
                {"mc_samples", d.mc_samples},
                {"seed", d.master_seed},
                {"threads", d.threads},
                {"thresholds",
                 {{"mean_deviation_below", t.mean_deviation_below},
                  {"max_deviation_at_most", t.max_deviation_at_most},
                  {"min_fraction_within_2se", t.min_fraction_within_2se}}}};
}

inline json policy_to_json(const PolicySpec& policy) {
    struct Visitor {
        json operator()(const DynamicPriorPolicy& p) const {
            return {{"kind", "dynamic"}, {"epsilon", p.prior.epsilon}, {"r", p.prior.r}};
        }
        json operator()(const UniformPriorPolicy&) const { return {{"kind", "uniform"}}; }
        json operator()(const ForcedExplorationPolicy& p) const {
            return {{"kind", "forced"},
                    {"alpha", p.alpha},
                    {"k_batches", p.k_batches},
                    {"base_prior", {p.base_prior.alpha, p.base_prior.beta}}};
        }
        json operator()(const HardResetPolicy&) const { return {{"kind", "hard_reset"}}; }
    };
    return std::visit(Visitor{}, policy);
}

inline json default_simulation_json() {
    const SimConfig d;
    json policies = json::array();
    for (const auto& p : comparison_policies()) policies.push_back(policy_to_json(p));
    return json{{"true_rates", d.environment.true_rates},
                {"insertion_batch", *d.environment.insertion_batch},
                {"inserted_rate", d.environment.inserted_rate},
                {"num_batches", d.num_batches},
                {"pulls_per_batch", d.pulls_per_batch},
                {"replications", d.replications},
                {"seed", d.master_seed},
                {"threads", d.threads},
                {"policies", std::move(policies)}};
}

namespace detail {

inline json parse_override_value(const std::string& text) {
    json parsed = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_discarded()) return parsed;
    // Bare comma-separated list of numbers: 0.01,0.05
    if (text.find(',') != std::string::npos) {
        json list = json::parse("[" + text + "]", nullptr, false);
        if (!list.is_discarded()) return list;
    }
    return json(text);
}

// Recursive merge where `patch` wins; objects merge key by key, everything
// else is replaced wholesale. Unknown keys are rejected.
inline void merge_into(json& base, const json& patch, const std::string& where) {
    if (!patch.is_object()) throw config_error(where + ": expected a JSON object");
    for (const auto& [key, value] : patch.items()) {
        if (!base.contains(key)) throw config_error("unknown config key '" + where + key + "'");
        if (base[key].is_object() && value.is_object())
            merge_into(base[key], value, where + key + ".");
        else
            base[key] = value;
    }
}

inline void apply_override(json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw config_error("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    json* node = &cfg;
    std::string path;
    std::istringstream parts(key);
    std::string part;
    std::vector<std::string> segments;
    while (std::getline(parts, part, '.')) segments.push_back(part);
    for (std::size_t i = 0; i < segments.size(); ++i) {
        path += (i ? "." : "") + segments[i];
        if (!node->is_object() || !node->contains(segments[i]))
            throw config_error("unknown config key '" + path + "'");
        node = &(*node)[segments[i]];
    }
    *node = parse_override_value(assignment.substr(eq + 1));
}

inline json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw config_error("config file " + path.string() + " is not valid JSON");
    return j;
}

template <class T>
T get_as(const json& cfg, const char* key) {
    try {
        return cfg.at(key).get<T>();
    } catch (const json::exception&) {
        throw config_error(std::string("config key '") + key + "' has the wrong type");
    }
}

}  // namespace detail

/// Defaults, then the config file, then --seed and --set overrides.
inline json layered_config(json defaults, const CommonOptions& opts) {
    if (opts.config_path) detail::merge_into(defaults, detail::read_json_file(*opts.config_path), "");
    if (opts.seed) defaults["seed"] = *opts.seed;
    for (const auto& o : opts.overrides) detail::apply_override(defaults, o);
    return defaults;
}

inline std::pair<ValidationConfig, CalibrationThresholds> validation_config_from_json(const json& j) {
    ValidationConfig cfg;
    cfg.p_values = detail::get_as<std::vector<double>>(j, "p_values");
    cfg.n_values = detail::get_as<std::vector<std::uint64_t>>(j, "n_values");
    cfg.epsilon_values = detail::get_as<std::vector<double>>(j, "epsilon_values");
    cfg.r_values = detail::get_as<std::vector<double>>(j, "r_values");
    cfg.mc_samples = detail::get_as<std::uint64_t>(j, "mc_samples");
    cfg.master_seed = detail::get_as<std::uint64_t>(j, "seed");
    cfg.threads = detail::get_as<std::size_t>(j, "threads");
    const json& t = j.at("thresholds");
    CalibrationThresholds th;
    th.mean_deviation_below = detail::get_as<double>(t, "mean_deviation_below");
    th.max_deviation_at_most = detail::get_as<double>(t, "max_deviation_at_most");
    th.min_fraction_within_2se = detail::get_as<double>(t, "min_fraction_within_2se");
    require_valid(cfg);
    return {cfg, th};
}

inline PolicySpec policy_from_json(const json& p) {
    const auto kind = detail::get_as<std::string>(p, "kind");
    if (kind == "dynamic")
        return DynamicPriorPolicy{{detail::get_as<double>(p, "epsilon"), detail::get_as<double>(p, "r")}};
    if (kind == "uniform") return UniformPriorPolicy{};
    if (kind == "hard_reset") return HardResetPolicy{};
    if (kind == "forced") {
        ForcedExplorationPolicy f;
        f.alpha = detail::get_as<double>(p, "alpha");
        f.k_batches = detail::get_as<std::uint64_t>(p, "k_batches");
        if (p.contains("base_prior")) {
            const auto bp = detail::get_as<std::vector<double>>(p, "base_prior");
            if (bp.size() != 2) throw config_error("base_prior must be [alpha, beta]");
            f.base_prior = {bp[0], bp[1]};
        }
        return f;
    }
    throw config_error("unknown policy kind '" + kind + "'");
}

/// One SimConfig per listed policy, sharing the environment and run shape.
inline std::vector<SimConfig> simulation_configs_from_json(const json& j) {
    SimConfig base;
    base.environment.true_rates = detail::get_as<std::vector<double>>(j, "true_rates");
    if (j.at("insertion_batch").is_null())
        base.environment.insertion_batch.reset();
    else {
        const auto at = detail::get_as<std::int64_t>(j, "insertion_batch");
        if (at < 0) throw config_error("insertion batch lies before batch 0");
        base.environment.insertion_batch = static_cast<std::uint64_t>(at);
    }
    base.environment.inserted_rate = detail::get_as<double>(j, "inserted_rate");
    base.num_batches = detail::get_as<std::uint64_t>(j, "num_batches");
    base.pulls_per_batch = detail::get_as<std::uint64_t>(j, "pulls_per_batch");
    base.replications = detail::get_as<std::uint64_t>(j, "replications");
    base.master_seed = detail::get_as<std::uint64_t>(j, "seed");
    base.threads = detail::get_as<std::size_t>(j, "threads");

    const json& policies = j.at("policies");
    if (!policies.is_array() || policies.empty()) throw config_error("policies must be a non-empty list");
    std::vector<SimConfig> out;
    for (const auto& p : policies) {
        SimConfig cfg = base;
        cfg.policy = policy_from_json(p);
        require_valid(cfg);
        out.push_back(std::move(cfg));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline void write_text(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot write " + path.string());
    out << content;
}

inline json stats_json(const DeviationStats& s) {
    return {{"count", s.count},
            {"mean_deviation", s.mean_deviation},
            {"max_deviation", s.max_deviation},
            {"fraction_within_2se", s.fraction_within_2se}};
}

inline json validation_summary_json(const ValidationSummary& s, const ValidationConfig& cfg,
                                    const CalibrationThresholds& t) {
    json by_eps = json::array();
    for (const auto& [eps, st] : s.by_epsilon) {
        json row = stats_json(st);
        row["epsilon"] = eps;
        by_eps.push_back(std::move(row));
    }
    json by_n = json::array();
    for (const auto& [n, st] : s.by_n) {
        json row = stats_json(st);
        row["n"] = n;
        by_n.push_back(std::move(row));
    }
    json by_source = json::object();
    for (const auto& [src, count] : s.by_source) by_source[std::string(to_string(src))] = count;
    return {{"rows", s.rows},
            {"grid_size", cfg.grid_size()},
            {"failed_rows", s.failed_rows},
            {"mc_samples", cfg.mc_samples},
            {"seed", cfg.master_seed},
            {"overall", stats_json(s.overall)},
            {"thresholds",
             {{"mean_deviation_below", t.mean_deviation_below},
              {"max_deviation_at_most", t.max_deviation_at_most},
              {"min_fraction_within_2se", t.min_fraction_within_2se}}},
            {"checks",
             {{"mean_deviation", s.mean_ok(t)},
              {"max_deviation", s.max_ok(t)},
              {"within_2se", s.within_2se_ok(t)}}},
            {"passed", s.passes(t)},
            {"by_epsilon", std::move(by_eps)},
            {"by_n", std::move(by_n)},
            {"by_source", std::move(by_source)}};
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct PriorArgs {
    std::uint64_t n_k = 0;
    std::uint64_t successes = 0;
    double epsilon = 0.05;
    double r = 0.01;
    std::uint64_t samples = 100'000;
    std::uint64_t seed = kDefaultSeed;
};

/// Solves the prior for one incumbent and attaches a Monte Carlo sanity check.
inline json prior_report(const PriorArgs& a) {
    if (a.n_k == 0) throw insufficient_data("n must be at least 1");
    if (a.successes > a.n_k) throw invalid_parameter("successes cannot exceed n");
    const double p_hat = static_cast<double>(a.successes) / static_cast<double>(a.n_k);
    const PriorPolicyConfig cfg{a.epsilon, a.r};
    const PriorSolution sol = solve_prior_mean(a.n_k, p_hat, cfg);
    const BetaParams incumbent = incumbent_posterior_with_prior(a.n_k, p_hat, sol.prior);
    RngStream rng(a.seed, {static_cast<std::uint64_t>(StreamTag::PriorCheck)});
    const McEstimate mc = exploration_probability_mc(sol.prior, incumbent, a.samples, rng);
    return {{"n_k", a.n_k},
            {"successes", a.successes},
            {"p_hat", p_hat},
            {"epsilon", a.epsilon},
            {"r", a.r},
            {"q_j", sol.q_j},
            {"prior", {sol.prior.alpha, sol.prior.beta}},
            {"source", std::string(to_string(sol.source))},
            {"conservative", sol.conservative},
            {"incumbent_with_prior", {incumbent.alpha, incumbent.beta}},
            {"mc_samples", a.samples},
            {"mc_probability", mc.probability},
            {"mc_std_error", mc.std_error}};
}

inline int cmd_prior(const PriorArgs& args, std::ostream& out, std::ostream& err) {
    try {
        out << prior_report(args).dump(2) << '\n';
        return kOk;
    } catch (const error& e) {
        err << "prior: " << e.what() << '\n';
        return kUsageError;
    }
}

inline int cmd_validate(const CommonOptions& opts, bool strict, std::ostream& out, std::ostream& err) {
    ValidationConfig cfg;
    CalibrationThresholds thresholds;
    try {
        std::tie(cfg, thresholds) =
            validation_config_from_json(layered_config(default_validation_json(), opts));
    } catch (const error& e) {
        err << "validate: " << e.what() << '\n';
        return kUsageError;
    }

    const auto rows = run_validation_grid(cfg);
    const auto summary = summarize_validation(rows);

    std::ostringstream csv;
    write_validation_csv(csv, rows);
    write_text(opts.output_dir / "validation.csv", csv.str());
    write_text(opts.output_dir / "summary.json",
               validation_summary_json(summary, cfg, thresholds).dump(2) + "\n");

    out << "validate: " << summary.rows << " rows, mean deviation "
        << format_real(summary.overall.mean_deviation) << ", max deviation "
        << format_real(summary.overall.max_deviation) << ", within 2 SE "
        << format_real(summary.overall.fraction_within_2se) << '\n';
    if (!summary.passes(thresholds)) {
        err << "validate: calibration thresholds not met"
            << (summary.mean_ok(thresholds) ? "" : " [mean deviation]")
            << (summary.max_ok(thresholds) ? "" : " [max deviation]")
            << (summary.within_2se_ok(thresholds) ? "" : " [within 2 SE]")
            << (summary.failed_rows ? " [solver failures]" : "") << '\n';
        if (strict) return kThresholdFailure;
    }
    return kOk;
}

inline json experiment_json(const SimConfig& cfg, const ExperimentResult& r) {
    const PolicyLabel label = policy_label(cfg.policy);
    return {{"key", policy_key(cfg.policy)},
            {"policy", policy_to_json(cfg.policy)},
            {"method", label.method},
            {"param1", label.param1},
            {"param2", label.param2},
            {"final_reward_mean", r.summary.final_reward_mean},
            {"final_reward_se", r.summary.final_reward_se},
            {"ci_lower", r.summary.ci_lower},
            {"ci_upper", r.summary.ci_upper},
            {"regretted_fraction_mean", r.summary.regretted_fraction_mean},
            {"final_rewards", r.final_rewards},
            {"regretted_fractions", r.regretted_fractions}};
}

inline int cmd_simulate(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
    std::vector<SimConfig> configs;
    json resolved;
    try {
        resolved = layered_config(default_simulation_json(), opts);
        configs = simulation_configs_from_json(resolved);
    } catch (const error& e) {
        err << "simulate: " << e.what() << '\n';
        return kUsageError;
    }

    std::vector<TableRow> table;
    json policies = json::array();
    for (const auto& cfg : configs) {
        const ExperimentResult result = run_experiment(cfg);
        const std::string key = policy_key(cfg.policy);
        for (std::size_t rep = 0; rep < result.traces.size(); ++rep) {
            std::ostringstream csv;
            write_trace_csv(csv, rep, result.traces[rep]);
            char name[32];
            std::snprintf(name, sizeof(name), "_rep%03zu.csv", rep);
            write_text(opts.output_dir / "traces" / (key + name), csv.str());
        }
        table.push_back({policy_label(cfg.policy), result.summary});
        policies.push_back(experiment_json(cfg, result));
        out << "simulate: " << key << " final reward " << format_real(result.summary.final_reward_mean)
            << '\n';
    }

    std::ostringstream csv;
    write_table_csv(csv, table);
    write_text(opts.output_dir / "simulation_summary.csv", csv.str());
    resolved.erase("threads");  // execution detail, not part of the result
    write_text(opts.output_dir / "simulation.json",
               json{{"config", resolved}, {"policies", std::move(policies)}}.dump(2) + "\n");
    return kOk;
}

/// Dynamic prior entry used as the headline comparison: epsilon = 0.01,
/// r = 0.001 when present, otherwise the best dynamic entry.
inline const json* headline_dynamic(const json& policies) {
    const json* best = nullptr;
    for (const auto& p : policies) {
        const json& spec = p.at("policy");
        if (spec.at("kind") != "dynamic") continue;
        if (spec.at("epsilon").get<double>() == 0.01 && spec.at("r").get<double>() == 0.001) return &p;
        if (!best || p.at("final_reward_mean").get<double>() > best->at("final_reward_mean").get<double>())
            best = &p;
    }
    return best;
}

inline json build_report(const json& validation, const json& simulation) {
    json report{{"validation", validation}};
    json sim_rows = json::array();
    const json& policies = simulation.at("policies");
    for (const auto& p : policies) {
        json row = p;
        row.erase("final_rewards");
        row.erase("regretted_fractions");
        sim_rows.push_back(std::move(row));
    }
    report["simulation"] = std::move(sim_rows);

    const json* dynamic = headline_dynamic(policies);
    const json* uniform = nullptr;
    for (const auto& p : policies)
        if (p.at("policy").at("kind") == "uniform") uniform = &p;

    json cmp = json::object();
    if (dynamic && uniform) {
        const double d = dynamic->at("final_reward_mean").get<double>();
        const double u = uniform->at("final_reward_mean").get<double>();
        cmp["dynamic_key"] = dynamic->at("key");
        cmp["relative_improvement"] = u != 0.0 ? d / u - 1.0 : 0.0;
        cmp["ci_disjoint"] = dynamic->at("ci_lower").get<double>() > uniform->at("ci_upper").get<double>();
        cmp["regretted_fraction_dynamic"] = dynamic->at("regretted_fraction_mean");
        cmp["regretted_fraction_uniform"] = uniform->at("regretted_fraction_mean");
        const auto rd = dynamic->at("regretted_fractions").get<std::vector<double>>();
        const auto ru = uniform->at("regretted_fractions").get<std::vector<double>>();
        const std::size_t pairs = std::min(rd.size(), ru.size());
        std::size_t lower = 0;
        for (std::size_t i = 0; i < pairs; ++i) lower += rd[i] < ru[i] ? 1 : 0;
        cmp["paired_replications"] = pairs;
        cmp["dynamic_lower_regret_count"] = lower;
    }
    report["comparison"] = std::move(cmp);
    return report;
}

inline int cmd_report(const fs::path& input_dir, const fs::path& output_dir, std::ostream& out,
                      std::ostream& err) {
    const fs::path validation_path = input_dir / "summary.json";
    const fs::path simulation_path = input_dir / "simulation.json";
    std::vector<std::string> missing;
    if (!fs::is_regular_file(validation_path)) missing.push_back(validation_path.string());
    if (!fs::is_regular_file(simulation_path)) missing.push_back(simulation_path.string());
    if (!missing.empty()) {
        err << "report: missing inputs:";
        for (const auto& m : missing) err << ' ' << m;
        err << '\n';
        return kUsageError;
    }
    json report;
    try {
        report = build_report(detail::read_json_file(validation_path),
                              detail::read_json_file(simulation_path));
    } catch (const std::exception& e) {
        err << "report: malformed input: " << e.what() << '\n';
        return kUsageError;
    }
    const std::string text = report.dump(2) + "\n";
    write_text(output_dir / "report.json", text);
    out << text;
    return kOk;
}

}  // namespace dynprior::app
