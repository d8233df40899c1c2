#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dynprior/beta.hpp"
#include "dynprior/errors.hpp"
#include "dynprior/format.hpp"
#include "dynprior/parallel.hpp"
#include "dynprior/prior_solver.hpp"
#include "dynprior/rng.hpp"

namespace dynprior {

inline constexpr std::uint64_t kDefaultSeed = 20250101;

struct ValidationConfig {
    std::vector<double> p_values{0.005, 0.01, 0.02, 0.03, 0.05};
    std::vector<std::uint64_t> n_values{10'000, 100'000, 1'000'000, 10'000'000};
    std::vector<double> epsilon_values{0.01, 0.03, 0.05, 0.1};
    std::vector<double> r_values{0.01, 0.05};
    std::uint64_t mc_samples = 100'000;
    std::uint64_t master_seed = kDefaultSeed;
    std::size_t threads = 1;  // 0 = hardware concurrency; never affects results

    std::size_t grid_size() const noexcept {
        return p_values.size() * n_values.size() * epsilon_values.size() * r_values.size();
    }
};

inline void require_valid(const ValidationConfig& cfg) {
    if (cfg.p_values.empty() || cfg.n_values.empty() || cfg.epsilon_values.empty() ||
        cfg.r_values.empty())
        throw config_error("validation grid lists must be non-empty");
    if (cfg.mc_samples < 1000) throw config_error("mc_samples must be at least 1000");
}

struct ValidationRow {
    double p = 0.0;
    std::uint64_t n = 0;
    double epsilon = 0.0;
    double r = 0.0;
    double q_j = std::numeric_limits<double>::quiet_NaN();
    double empirical_prob = std::numeric_limits<double>::quiet_NaN();
    double std_error = std::numeric_limits<double>::quiet_NaN();
    double deviation = std::numeric_limits<double>::quiet_NaN();
    std::optional<PriorSource> source;  // empty when the solver raised
    std::string error;

    bool ok() const noexcept { return source.has_value(); }
};

struct McEstimate {
    double probability = 0.0;
    double std_error = 0.0;
};

/// Fraction of paired draws with x > y (strict), and its binomial standard error.
inline McEstimate exploration_probability_mc(const BetaParams& new_prior, const BetaParams& incumbent,
                                             std::uint64_t samples, RngStream& rng) {
    require_valid(new_prior);
    require_valid(incumbent);
    if (samples == 0) throw invalid_parameter("samples must be positive");
    std::uint64_t wins = 0;
    for (std::uint64_t i = 0; i < samples; ++i) {
        const double x = beta_sample(new_prior, rng);
        const double y = beta_sample(incumbent, rng);
        wins += x > y ? 1 : 0;
    }
    const double m = static_cast<double>(samples);
    const double prob = static_cast<double>(wins) / m;
    return {prob, std::sqrt(prob * (1.0 - prob) / m)};
}

/// One grid point: solve the prior, then measure P(X > Y) by Monte Carlo.
inline ValidationRow validate_configuration(double p, std::uint64_t n, double epsilon, double r,
                                            std::uint64_t samples, RngStream& rng) {
    ValidationRow row;
    row.p = p;
    row.n = n;
    row.epsilon = epsilon;
    row.r = r;
    try {
        const PriorPolicyConfig cfg{epsilon, r};
        const PriorSolution sol = solve_prior_mean(n, p, cfg);
        const BetaParams incumbent = incumbent_posterior_with_prior(n, p, sol.prior);
        const McEstimate est = exploration_probability_mc(sol.prior, incumbent, samples, rng);
        row.q_j = sol.q_j;
        row.empirical_prob = est.probability;
        row.std_error = est.std_error;
        row.deviation = std::abs(est.probability - epsilon);
        row.source = sol.source;
    } catch (const error& e) {
        row.error = e.what();
    }
    return row;
}

/// Sweeps the (p, n, epsilon, r) grid in lexicographic order. Row i draws from
/// its own stream (master_seed, {Validation, i}).
inline std::vector<ValidationRow> run_validation_grid(ValidationConfig cfg) {
    require_valid(cfg);
    std::ranges::sort(cfg.p_values);
    std::ranges::sort(cfg.n_values);
    std::ranges::sort(cfg.epsilon_values);
    std::ranges::sort(cfg.r_values);

    struct Point {
        double p;
        std::uint64_t n;
        double eps;
        double r;
    };
    std::vector<Point> points;
    points.reserve(cfg.grid_size());
    for (double p : cfg.p_values)
        for (std::uint64_t n : cfg.n_values)
            for (double e : cfg.epsilon_values)
                for (double r : cfg.r_values) points.push_back({p, n, e, r});

    std::vector<ValidationRow> rows(points.size());
    parallel_for(points.size(), cfg.threads, [&](std::size_t i) {
        RngStream rng(cfg.master_seed, {static_cast<std::uint64_t>(StreamTag::Validation), i});
        const Point& pt = points[i];
        rows[i] = validate_configuration(pt.p, pt.n, pt.eps, pt.r, cfg.mc_samples, rng);
    });
    return rows;
}

struct DeviationStats {
    std::size_t count = 0;
    double mean_deviation = 0.0;
    double max_deviation = 0.0;
    double fraction_within_2se = 0.0;
};

struct CalibrationThresholds {
    double mean_deviation_below = 0.01;
    double max_deviation_at_most = 0.02;
    double min_fraction_within_2se = 0.90;
};

struct ValidationSummary {
    std::size_t rows = 0;
    std::size_t failed_rows = 0;
    DeviationStats overall;
    std::map<double, DeviationStats> by_epsilon;
    std::map<std::uint64_t, DeviationStats> by_n;
    std::map<PriorSource, std::size_t> by_source;

    bool mean_ok(const CalibrationThresholds& t) const noexcept {
        return overall.count > 0 && overall.mean_deviation < t.mean_deviation_below;
    }
    bool max_ok(const CalibrationThresholds& t) const noexcept {
        return overall.count > 0 && overall.max_deviation <= t.max_deviation_at_most;
    }
    bool within_2se_ok(const CalibrationThresholds& t) const noexcept {
        return overall.count > 0 && overall.fraction_within_2se >= t.min_fraction_within_2se;
    }
    bool passes(const CalibrationThresholds& t = {}) const noexcept {
        return failed_rows == 0 && mean_ok(t) && max_ok(t) && within_2se_ok(t);
    }
};

namespace detail {

struct DeviationAccumulator {
    std::size_t count = 0;
    std::size_t within = 0;
    double sum = 0.0;
    double max = 0.0;

    void add(const ValidationRow& row) {
        ++count;
        sum += row.deviation;
        max = std::max(max, row.deviation);
        if (row.deviation <= 2.0 * row.std_error) ++within;
    }
    DeviationStats finish() const {
        DeviationStats s;
        s.count = count;
        if (count == 0) return s;
        s.mean_deviation = sum / static_cast<double>(count);
        s.max_deviation = max;
        s.fraction_within_2se = static_cast<double>(within) / static_cast<double>(count);
        return s;
    }
};

}  // namespace detail

inline ValidationSummary summarize_validation(const std::vector<ValidationRow>& rows) {
    if (rows.empty()) throw empty_input("summarize_validation: no rows");
    ValidationSummary out;
    out.rows = rows.size();
    detail::DeviationAccumulator all;
    std::map<double, detail::DeviationAccumulator> eps;
    std::map<std::uint64_t, detail::DeviationAccumulator> ns;
    for (const auto& row : rows) {
        if (!row.ok()) {
            ++out.failed_rows;
            continue;
        }
        all.add(row);
        eps[row.epsilon].add(row);
        ns[row.n].add(row);
        ++out.by_source[*row.source];
    }
    out.overall = all.finish();
    for (const auto& [k, acc] : eps) out.by_epsilon[k] = acc.finish();
    for (const auto& [k, acc] : ns) out.by_n[k] = acc.finish();
    return out;
}

inline constexpr const char* kValidationCsvHeader =
    "p,n,epsilon,r,q_j,empirical_prob,std_error,deviation,source";

inline void write_validation_csv(std::ostream& os, const std::vector<ValidationRow>& rows) {
    os << kValidationCsvHeader << '\n';
    for (const auto& row : rows) {
        os << format_real(row.p) << ',' << row.n << ',' << format_real(row.epsilon) << ','
           << format_real(row.r) << ',' << format_real(row.q_j) << ','
           << format_real(row.empirical_prob) << ',' << format_real(row.std_error) << ','
           << format_real(row.deviation) << ','
           << (row.source ? to_string(*row.source) : std::string_view("Error")) << '\n';
    }
}

}  // namespace dynprior
