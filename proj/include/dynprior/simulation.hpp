#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dynprior/beta.hpp"
#include "dynprior/errors.hpp"
#include "dynprior/format.hpp"
#include "dynprior/parallel.hpp"
#include "dynprior/prior_solver.hpp"
#include "dynprior/rng.hpp"
#include "dynprior/thompson.hpp"
#include "dynprior/validation.hpp"

namespace dynprior {

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

/// New arm gets the closed-form dynamic prior against the best observed arm.
struct DynamicPriorPolicy {
    PriorPolicyConfig prior;
};

/// New arm gets Beta(1,1); existing arms keep their posteriors.
struct UniformPriorPolicy {};

/// For k_batches batches from insertion, each pull goes to the new arm with
/// probability alpha and otherwise to Thompson selection over the existing
/// arms; afterwards plain Thompson Sampling over all arms.
struct ForcedExplorationPolicy {
    double alpha = 0.01;
    std::uint64_t k_batches = 1;
    BetaParams base_prior = uniform_prior();
};

/// Every arm, new and old, restarts from Beta(1,1) and observed stats are dropped.
struct HardResetPolicy {};

using PolicySpec =
    std::variant<DynamicPriorPolicy, UniformPriorPolicy, ForcedExplorationPolicy, HardResetPolicy>;

inline void require_valid(const PolicySpec& policy) {
    if (const auto* d = std::get_if<DynamicPriorPolicy>(&policy)) {
        try {
            require_valid(d->prior);
        } catch (const invalid_parameter& e) {
            throw config_error(e.what());
        }
    } else if (const auto* f = std::get_if<ForcedExplorationPolicy>(&policy)) {
        if (!(f->alpha > 0.0 && f->alpha < 1.0))
            throw config_error("forced exploration alpha must lie in (0, 1)");
        if (f->k_batches < 1) throw config_error("forced exploration needs k_batches >= 1");
        if (!f->base_prior.valid()) throw config_error("forced exploration base prior is invalid");
    }
}

/// Table-1 style labels: method name and two parameter columns.
struct PolicyLabel {
    std::string method;
    std::string param1;
    std::string param2;
};

inline PolicyLabel policy_label(const PolicySpec& policy) {
    struct Visitor {
        PolicyLabel operator()(const DynamicPriorPolicy& p) const {
            return {"Dynamic Prior", "epsilon=" + format_real(p.prior.epsilon),
                    "r=" + format_real(p.prior.r)};
        }
        PolicyLabel operator()(const UniformPriorPolicy&) const {
            return {"Uniform Prior", "Parameter-Independent", ""};
        }
        PolicyLabel operator()(const ForcedExplorationPolicy& p) const {
            return {"Fixed Horizon Forced Exploration", "alpha=" + format_real(p.alpha),
                    "K=" + format_count(p.k_batches)};
        }
        PolicyLabel operator()(const HardResetPolicy&) const { return {"Hard Reset", "", ""}; }
    };
    return std::visit(Visitor{}, policy);
}

/// Stable identifier used in file names and stream derivation.
inline std::string policy_key(const PolicySpec& policy) {
    struct Visitor {
        std::string operator()(const DynamicPriorPolicy& p) const {
            return "dynamic_eps" + format_real(p.prior.epsilon) + "_r" + format_real(p.prior.r);
        }
        std::string operator()(const UniformPriorPolicy&) const { return "uniform"; }
        std::string operator()(const ForcedExplorationPolicy& p) const {
            return "forced_alpha" + format_real(p.alpha) + "_K" + format_count(p.k_batches) +
                   "_prior" + format_real(p.base_prior.alpha) + "-" + format_real(p.base_prior.beta);
        }
        std::string operator()(const HardResetPolicy&) const { return "hard_reset"; }
    };
    return std::visit(Visitor{}, policy);
}

// ---------------------------------------------------------------------------
// Configuration and traces
// ---------------------------------------------------------------------------

struct SimEnvironment {
    std::vector<double> true_rates{0.05, 0.06, 0.07, 0.08, 0.09};
    std::optional<std::uint64_t> insertion_batch = 5;
    double inserted_rate = 0.01;

    std::size_t arm_slots() const noexcept {
        return true_rates.size() + (insertion_batch ? 1 : 0);
    }
    double rate(std::size_t arm) const noexcept {
        return arm < true_rates.size() ? true_rates[arm] : inserted_rate;
    }
};

struct SimConfig {
    SimEnvironment environment;
    std::uint64_t num_batches = 10;
    std::uint64_t pulls_per_batch = 10'000;
    std::uint64_t replications = 10;
    std::uint64_t master_seed = kDefaultSeed;
    PolicySpec policy = UniformPriorPolicy{};
    std::size_t threads = 1;  // 0 = hardware concurrency; never affects results
};

inline void require_valid(const SimConfig& cfg) {
    const auto& env = cfg.environment;
    if (env.true_rates.empty()) throw config_error("environment needs at least one arm");
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!std::ranges::all_of(env.true_rates, in_unit))
        throw config_error("true rates must lie in [0, 1]");
    if (cfg.num_batches < 1) throw config_error("num_batches must be >= 1");
    if (cfg.pulls_per_batch < 1) throw config_error("pulls_per_batch must be >= 1");
    if (cfg.replications < 1) throw config_error("replications must be >= 1");
    if (env.insertion_batch) {
        if (*env.insertion_batch >= cfg.num_batches)
            throw config_error("insertion batch lies outside the run");
        if (!in_unit(env.inserted_rate)) throw config_error("inserted rate must lie in [0, 1]");
    }
    require_valid(cfg.policy);
}

struct BatchTrace {
    std::uint64_t batch_index = 0;
    std::vector<std::uint64_t> per_arm_pulls;      // one slot per arm, inserted arm last
    std::vector<std::uint64_t> per_arm_successes;
    std::uint64_t batch_reward = 0;
    std::uint64_t cumulative_reward = 0;
};

struct RunSummary {
    double final_reward_mean = 0.0;
    double final_reward_se = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    double regretted_fraction_mean = 0.0;
};

struct NoObserver {
    void operator()(std::uint64_t, std::span<const ArmPosterior>) const noexcept {}
};

/// Source of randomness for the simulator: posterior draws plus uniforms for
/// Bernoulli rewards and forced routing.
template <class S>
concept SimulationSource = PosteriorSampler<S> && requires(S& s) {
    { s.uniform() } -> std::convertible_to<double>;
};

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Batched Thompson Sampling with one mid-flight insertion.
///
/// Posteriors are frozen within a batch: every pull samples from the state at
/// the batch start and the tallies are folded in with batch_apply at the end.
/// The observer sees the frozen posteriors before each pull.
template <SimulationSource Source, class Observer = NoObserver>
std::vector<BatchTrace> simulate_batches(const SimConfig& cfg, Source& source,
                                         Observer&& observer = {}) {
    require_valid(cfg);
    const SimEnvironment& env = cfg.environment;
    const std::size_t slots = env.arm_slots();
    const std::size_t initial = env.true_rates.size();

    std::vector<ArmPosterior> arms(initial, fresh_arm(uniform_prior()));
    std::vector<BatchTrace> traces;
    traces.reserve(cfg.num_batches);
    std::uint64_t cumulative = 0;

    const auto* forced = std::get_if<ForcedExplorationPolicy>(&cfg.policy);

    for (std::uint64_t b = 0; b < cfg.num_batches; ++b) {
        if (env.insertion_batch && b == *env.insertion_batch) {
            std::visit(
                [&](const auto& p) {
                    using P = std::decay_t<decltype(p)>;
                    if constexpr (std::is_same_v<P, DynamicPriorPolicy>) {
                        arms.push_back(fresh_arm(dynamic_prior_for(arms, p.prior).prior));
                    } else if constexpr (std::is_same_v<P, ForcedExplorationPolicy>) {
                        arms.push_back(fresh_arm(p.base_prior));
                    } else if constexpr (std::is_same_v<P, HardResetPolicy>) {
                        for (auto& a : arms) a = fresh_arm(uniform_prior());
                        arms.push_back(fresh_arm(uniform_prior()));
                    } else {
                        arms.push_back(fresh_arm(uniform_prior()));
                    }
                },
                cfg.policy);
        }

        const bool forcing = forced && env.insertion_batch && b >= *env.insertion_batch &&
                             b < *env.insertion_batch + forced->k_batches;
        const std::size_t new_arm = arms.size() - 1;
        const std::span<const ArmPosterior> frozen(arms);
        const std::span<const ArmPosterior> incumbents = frozen.first(initial);

        BatchTrace trace;
        trace.batch_index = b;
        trace.per_arm_pulls.assign(slots, 0);
        trace.per_arm_successes.assign(slots, 0);

        for (std::uint64_t pull = 0; pull < cfg.pulls_per_batch; ++pull) {
            observer(b, frozen);
            std::size_t arm = 0;
            if (forcing)
                arm = source.uniform() < forced->alpha ? new_arm : select_arm(incumbents, source);
            else
                arm = select_arm(frozen, source);
            const bool success = source.uniform() < env.rate(arm);
            ++trace.per_arm_pulls[arm];
            if (success) ++trace.per_arm_successes[arm];
        }

        for (std::size_t a = 0; a < arms.size(); ++a) {
            const std::uint64_t s = trace.per_arm_successes[a];
            arms[a] = batch_apply(arms[a], s, trace.per_arm_pulls[a] - s);
        }
        trace.batch_reward = std::accumulate(trace.per_arm_successes.begin(),
                                             trace.per_arm_successes.end(), std::uint64_t{0});
        cumulative += trace.batch_reward;
        trace.cumulative_reward = cumulative;
        traces.push_back(std::move(trace));
    }
    return traces;
}

inline RngStream replication_stream(const SimConfig& cfg, std::uint64_t rep_index) {
    return RngStream(cfg.master_seed, {static_cast<std::uint64_t>(StreamTag::Simulation),
                                       fnv1a64(policy_key(cfg.policy)), rep_index});
}

inline std::vector<BatchTrace> run_replication(const SimConfig& cfg, std::uint64_t rep_index) {
    RngStream rng = replication_stream(cfg, rep_index);
    StreamSampler source{rng};
    return simulate_batches(cfg, source);
}

/// Fraction of pulls that went to arms other than `winner`.
inline double regretted_impressions(std::span<const BatchTrace> traces, std::size_t winner) {
    if (traces.empty()) throw empty_input("regretted_impressions: no traces");
    std::uint64_t total = 0, to_winner = 0;
    for (const auto& t : traces) {
        if (winner >= t.per_arm_pulls.size())
            throw invalid_parameter("regretted_impressions: winner index out of range");
        total += std::accumulate(t.per_arm_pulls.begin(), t.per_arm_pulls.end(), std::uint64_t{0});
        to_winner += t.per_arm_pulls[winner];
    }
    if (total == 0) throw empty_input("regretted_impressions: no pulls recorded");
    return 1.0 - static_cast<double>(to_winner) / static_cast<double>(total);
}

/// Winner by true rate (lowest index on ties).
inline std::size_t true_winner(const SimEnvironment& env) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < env.arm_slots(); ++a)
        if (env.rate(a) > env.rate(best)) best = a;
    return best;
}

/// Winner by final observed success rate, for when true rates are unknown.
inline std::size_t observed_winner(std::span<const BatchTrace> traces) {
    if (traces.empty()) throw empty_input("observed_winner: no traces");
    const std::size_t slots = traces.front().per_arm_pulls.size();
    std::vector<std::uint64_t> pulls(slots, 0), wins(slots, 0);
    for (const auto& t : traces)
        for (std::size_t a = 0; a < slots; ++a) {
            pulls[a] += t.per_arm_pulls[a];
            wins[a] += t.per_arm_successes[a];
        }
    std::size_t best = 0;
    double best_rate = -1.0;
    for (std::size_t a = 0; a < slots; ++a) {
        if (pulls[a] == 0) continue;
        const double rate = static_cast<double>(wins[a]) / static_cast<double>(pulls[a]);
        if (rate > best_rate) {
            best_rate = rate;
            best = a;
        }
    }
    return best;
}

/// Per batch, per arm share of that batch's pulls.
inline std::vector<std::vector<double>> allocation_table(std::span<const BatchTrace> traces) {
    if (traces.empty()) throw empty_input("allocation_table: no traces");
    std::vector<std::vector<double>> table;
    table.reserve(traces.size());
    for (const auto& t : traces) {
        const double total = static_cast<double>(
            std::accumulate(t.per_arm_pulls.begin(), t.per_arm_pulls.end(), std::uint64_t{0}));
        std::vector<double> row(t.per_arm_pulls.size(), 0.0);
        if (total > 0)
            for (std::size_t a = 0; a < row.size(); ++a)
                row[a] = static_cast<double>(t.per_arm_pulls[a]) / total;
        table.push_back(std::move(row));
    }
    return table;
}

struct ExperimentResult {
    std::vector<std::vector<BatchTrace>> traces;  // [replication][batch]
    std::vector<double> final_rewards;
    std::vector<double> regretted_fractions;
    RunSummary summary;
};

/// Mean, standard error and normal 95% interval over replications.
inline RunSummary summarize_rewards(std::span<const double> finals, std::span<const double> regretted) {
    if (finals.empty()) throw empty_input("summarize_rewards: no replications");
    RunSummary s;
    const double n = static_cast<double>(finals.size());
    s.final_reward_mean = std::accumulate(finals.begin(), finals.end(), 0.0) / n;
    if (finals.size() > 1) {
        double ss = 0.0;
        for (double x : finals) ss += (x - s.final_reward_mean) * (x - s.final_reward_mean);
        s.final_reward_se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    s.ci_lower = s.final_reward_mean - 1.96 * s.final_reward_se;
    s.ci_upper = s.final_reward_mean + 1.96 * s.final_reward_se;
    if (!regretted.empty())
        s.regretted_fraction_mean =
            std::accumulate(regretted.begin(), regretted.end(), 0.0) /
            static_cast<double>(regretted.size());
    return s;
}

inline ExperimentResult run_experiment(const SimConfig& cfg) {
    require_valid(cfg);
    ExperimentResult out;
    out.traces.resize(cfg.replications);
    parallel_for(cfg.replications, cfg.threads,
                 [&](std::size_t rep) { out.traces[rep] = run_replication(cfg, rep); });

    const std::size_t winner = true_winner(cfg.environment);
    for (const auto& reps : out.traces) {
        out.final_rewards.push_back(static_cast<double>(reps.back().cumulative_reward));
        out.regretted_fractions.push_back(regretted_impressions(reps, winner));
    }
    out.summary = summarize_rewards(out.final_rewards, out.regretted_fractions);
    return out;
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

inline constexpr const char* kTraceCsvHeader =
    "replication,batch,arm,pulls,successes,batch_reward,cumulative_reward";
inline constexpr const char* kTableCsvHeader =
    "method,param1,param2,final_reward,std_error,ci_lower,ci_upper";

inline void write_trace_csv(std::ostream& os, std::uint64_t replication,
                            std::span<const BatchTrace> traces) {
    os << kTraceCsvHeader << '\n';
    for (const auto& t : traces)
        for (std::size_t a = 0; a < t.per_arm_pulls.size(); ++a)
            os << replication << ',' << t.batch_index << ',' << a << ',' << t.per_arm_pulls[a] << ','
               << t.per_arm_successes[a] << ',' << t.batch_reward << ',' << t.cumulative_reward
               << '\n';
}

struct TableRow {
    PolicyLabel label;
    RunSummary summary;
};

/// Table-1 shaped summary, sorted by final reward (descending, stable).
inline void write_table_csv(std::ostream& os, std::vector<TableRow> rows) {
    std::ranges::stable_sort(rows, [](const TableRow& a, const TableRow& b) {
        return a.summary.final_reward_mean > b.summary.final_reward_mean;
    });
    os << kTableCsvHeader << '\n';
    for (const auto& row : rows)
        os << row.label.method << ',' << row.label.param1 << ',' << row.label.param2 << ','
           << format_real(row.summary.final_reward_mean) << ','
           << format_real(row.summary.final_reward_se) << ',' << format_real(row.summary.ci_lower)
           << ',' << format_real(row.summary.ci_upper) << '\n';
}

/// Policies in the published comparison: 4 epsilon x 2 r dynamic priors,
/// 4 alpha x 2 K forced exploration, and the uniform baseline.
inline std::vector<PolicySpec> comparison_policies() {
    std::vector<PolicySpec> out;
    for (double eps : {0.01, 0.03, 0.05, 0.1})
        for (double r : {0.01, 0.001}) out.emplace_back(DynamicPriorPolicy{{eps, r}});
    for (double alpha : {0.01, 0.03, 0.05, 0.1})
        for (std::uint64_t k : {1u, 2u})
            out.emplace_back(ForcedExplorationPolicy{alpha, k, uniform_prior()});
    out.emplace_back(UniformPriorPolicy{});
    return out;
}

}  // namespace dynprior
