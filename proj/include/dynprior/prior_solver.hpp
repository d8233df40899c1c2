#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "dynprior/beta.hpp"
#include "dynprior/errors.hpp"
#include "dynprior/normal.hpp"

namespace dynprior {

/// Target exploration probability and prior strength for a new arm.
struct PriorPolicyConfig {
    double epsilon = 0.05;  // designed P(new draw > incumbent draw)
    double r = 0.01;        // prior carries an effective sample size of n_k * r

    friend bool operator==(const PriorPolicyConfig&, const PriorPolicyConfig&) = default;
};

inline void require_valid(const PriorPolicyConfig& cfg) {
    if (!(std::isfinite(cfg.epsilon) && cfg.epsilon > 0.0 && cfg.epsilon < 1.0))
        throw invalid_parameter("epsilon must lie in (0, 1)");
    if (!(std::isfinite(cfg.r) && cfg.r > 0.0)) throw invalid_parameter("r must be positive");
}

/// Coefficients of A q^2 + B q + C = 0 obtained by squaring the
/// normal-approximation constraint, together with the intermediates.
struct QuadraticCoefficients {
    double a_q = 0.0;
    double b_q = 0.0;
    double c_q = 0.0;
    double t_z_eps = 0.0;  // z_eps^2
    double c_nk = 0.0;     // n_k r (n_k + n_k r)
    double z_eps = 0.0;    // Phi^{-1}(epsilon)
    // B^2 - 4AC expanded into a sum of non-negative terms, each proportional
    // to z_eps^2, so it stays accurate near the double root at epsilon = 0.5.
    double disc = 0.0;

    double discriminant() const noexcept { return disc; }
};

/// Normal moments of the new-arm prior and of the incumbent with prior influence.
struct ApproxMoments {
    double mu_new = 0.0;
    double var_new = 0.0;
    double mu_win = 0.0;
    double var_win = 0.0;
};

enum class PriorSource { ClosedForm, Fallback, Default };

inline constexpr std::string_view to_string(PriorSource s) noexcept {
    switch (s) {
        case PriorSource::ClosedForm: return "ClosedForm";
        case PriorSource::Fallback: return "Fallback";
        case PriorSource::Default: return "Default";
    }
    return "?";
}

struct PriorSolution {
    double q_j = 0.5;
    BetaParams prior = uniform_prior();
    PriorSource source = PriorSource::Default;
    // false when epsilon >= 0.5; q_j < p_hat_k is only promised below 0.5.
    bool conservative = true;
};

namespace detail {

inline void require_incumbent(std::uint64_t n_k, double p_hat_k) {
    if (n_k == 0) throw insufficient_data("incumbent arm has no observations");
    if (!(p_hat_k >= 0.0 && p_hat_k <= 1.0))
        throw invalid_parameter("observed success rate must lie in [0, 1]");
}

}  // namespace detail

inline QuadraticCoefficients quadratic_coefficients(std::uint64_t n_k, double p_hat_k,
                                                    const PriorPolicyConfig& cfg) {
    require_valid(cfg);
    detail::require_incumbent(n_k, p_hat_k);

    const double n = static_cast<double>(n_k);
    const double r = cfg.r;
    const double p = p_hat_k;
    const double nr = n * r;
    const double one_r = 1.0 + r;

    QuadraticCoefficients k;
    k.z_eps = normal_quantile(cfg.epsilon);
    k.t_z_eps = k.z_eps * k.z_eps;
    k.c_nk = nr * (n + nr);
    const double t = k.t_z_eps;
    k.a_q = k.c_nk + t * one_r * one_r * (n + nr) + t * nr * r * r;
    k.b_q = -2.0 * k.c_nk * p - t * one_r * one_r * (n + nr) - t * nr * r * (one_r - 2.0 * p);
    k.c_q = k.c_nk * p * p - t * nr * p * (one_r - p);

    const double u = t * one_r * one_r * (n + nr);
    const double v = t * nr;
    const double half = 0.5 * (u + v * r * (one_r - 2.0 * p));
    k.disc = 4.0 * (k.c_nk * p * (1.0 - p) * (u + v * one_r * one_r) + half * half +
                    u * v * p * (one_r - p) + v * v * r * r * p * (one_r - p));
    return k;
}

inline ApproxMoments approx_moments(std::uint64_t n_k, double p_hat_k, const PriorPolicyConfig& cfg,
                                    double q) {
    require_valid(cfg);
    detail::require_incumbent(n_k, p_hat_k);
    if (!(q > 0.0 && q < 1.0)) throw domain_error("prior mean must lie in (0, 1)");
    const double n = static_cast<double>(n_k);
    const double r = cfg.r;
    ApproxMoments m;
    m.mu_new = q;
    m.var_new = q * (1.0 - q) / (n * r);
    m.mu_win = (p_hat_k + r * q) / (1.0 + r);
    m.var_win = m.mu_win * (1.0 - m.mu_win) / (n * (1.0 + r));
    return m;
}

/// Signed residual of the un-squared constraint,
/// (mu_new - mu_win) / sqrt(var_new + var_win) - z_eps.
inline double constraint_residual(std::uint64_t n_k, double p_hat_k, const PriorPolicyConfig& cfg,
                                  double q) {
    const ApproxMoments m = approx_moments(n_k, p_hat_k, cfg, q);
    const double sd = std::sqrt(m.var_new + m.var_win);
    if (!(sd > 0.0)) throw domain_error("degenerate variance in constraint");
    return (m.mu_new - m.mu_win) / sd - normal_quantile(cfg.epsilon);
}

inline BetaParams prior_params(std::uint64_t n_k, double r, double q_j) {
    const double mass = static_cast<double>(n_k) * r;
    BetaParams p{mass * q_j, mass * (1.0 - q_j)};
    require_valid(p);
    return p;
}

inline BetaParams incumbent_posterior_with_prior(std::uint64_t n_k, double p_hat_k,
                                                 const BetaParams& prior) {
    detail::require_incumbent(n_k, p_hat_k);
    const double n = static_cast<double>(n_k);
    BetaParams out{n * p_hat_k + prior.alpha, n * (1.0 - p_hat_k) + prior.beta};
    require_valid(out);
    return out;
}

/// The "-sqrt" root of the quadratic, or nothing when the discriminant is
/// negative. Evaluated as 2C / (-B + sqrt(D)) to avoid cancellation.
inline std::optional<double> conservative_root(const QuadraticCoefficients& k) {
    const double disc = k.discriminant();
    if (!std::isfinite(disc) || disc < 0.0) return std::nullopt;
    const double s = std::sqrt(disc);
    double q = 0.0;
    if (-k.b_q + s > 0.0)
        q = 2.0 * k.c_q / (-k.b_q + s);
    else
        q = (-k.b_q - s) / (2.0 * k.a_q);
    if (!std::isfinite(q)) return std::nullopt;
    return q;
}

/// Tolerance on |constraint_residual| for accepting the closed-form root.
inline constexpr double kResidualTolerance = 1e-6;

inline PriorSolution solve_prior_mean(std::uint64_t n_k, double p_hat_k,
                                      const PriorPolicyConfig& cfg) {
    require_valid(cfg);
    detail::require_incumbent(n_k, p_hat_k);

    PriorSolution sol;
    sol.conservative = cfg.epsilon < 0.5;
    if (p_hat_k == 0.0) return sol;  // Default, Beta(1,1)

    const QuadraticCoefficients k = quadratic_coefficients(n_k, p_hat_k, cfg);
    if (auto q = conservative_root(k)) {
        bool ok = *q > 0.0 && *q < 1.0;
        if (ok && sol.conservative) ok = *q < p_hat_k;
        if (ok) ok = std::abs(constraint_residual(n_k, p_hat_k, cfg, *q)) < kResidualTolerance;
        if (ok) {
            const BetaParams prior = prior_params(n_k, cfg.r, *q);
            if (prior.valid()) {
                sol.q_j = *q;
                sol.prior = prior;
                sol.source = PriorSource::ClosedForm;
                return sol;
            }
        }
    }

    const double q = cfg.epsilon * p_hat_k;
    const BetaParams prior{static_cast<double>(n_k) * cfg.r * q,
                           static_cast<double>(n_k) * cfg.r * (1.0 - q)};
    if (!(q > 0.0) || !prior.valid()) return sol;
    sol.q_j = q;
    sol.prior = prior;
    sol.source = PriorSource::Fallback;
    return sol;
}

/// Arm with the highest observed success rate; arms without data are skipped
/// and ties go to the lowest index.
inline std::optional<std::size_t> best_observed_arm(std::span<const ArmPosterior> arms) {
    std::optional<std::size_t> best;
    double best_rate = -1.0;
    for (std::size_t i = 0; i < arms.size(); ++i) {
        const auto rate = arms[i].stats.p_hat();
        if (rate && *rate > best_rate) {
            best_rate = *rate;
            best = i;
        }
    }
    return best;
}

/// Prior for a newly inserted arm given the current arms. Falls back to the
/// Default Beta(1,1) when no existing arm has observations yet.
inline PriorSolution dynamic_prior_for(std::span<const ArmPosterior> arms,
                                       const PriorPolicyConfig& cfg) {
    require_valid(cfg);
    const auto k = best_observed_arm(arms);
    if (!k) {
        PriorSolution sol;
        sol.conservative = cfg.epsilon < 0.5;
        return sol;
    }
    const ArmStats& s = arms[*k].stats;
    return solve_prior_mean(s.n, *s.p_hat(), cfg);
}

}  // namespace dynprior
