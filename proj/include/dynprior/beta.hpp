#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>

#include "dynprior/errors.hpp"
#include "dynprior/rng.hpp"

namespace dynprior {

/// Shape parameters of a Beta distribution over a success rate.
struct BetaParams {
    double alpha = 1.0;  // pseudo-success mass
    double beta = 1.0;   // pseudo-failure mass

    double mean() const noexcept { return alpha / (alpha + beta); }
    double variance() const noexcept {
        const double s = alpha + beta;
        return alpha * beta / (s * s * (s + 1.0));
    }
    double mass() const noexcept { return alpha + beta; }

    bool valid() const noexcept {
        return std::isfinite(alpha) && std::isfinite(beta) && alpha > 0.0 && beta > 0.0;
    }

    friend bool operator==(const BetaParams&, const BetaParams&) = default;
};

inline void require_valid(const BetaParams& p) {
    if (!p.valid()) {
        std::ostringstream os;
        os << "invalid Beta shape (" << p.alpha << ", " << p.beta << ")";
        throw invalid_parameter(os.str());
    }
}

/// Checked constructor for BetaParams.
inline BetaParams make_beta(double alpha, double beta) {
    BetaParams p{alpha, beta};
    require_valid(p);
    return p;
}

inline constexpr BetaParams uniform_prior() noexcept { return {1.0, 1.0}; }

/// Raw observed counts for one arm. Prior mass is never folded in here.
struct ArmStats {
    std::uint64_t n = 0;
    std::uint64_t successes = 0;

    /// Observed success rate; empty when the arm has no observations.
    std::optional<double> p_hat() const noexcept {
        if (n == 0) return std::nullopt;
        return static_cast<double>(successes) / static_cast<double>(n);
    }

    friend bool operator==(const ArmStats&, const ArmStats&) = default;
};

struct ArmPosterior {
    BetaParams params = uniform_prior();
    ArmStats stats{};

    friend bool operator==(const ArmPosterior&, const ArmPosterior&) = default;
};

inline ArmPosterior fresh_arm(const BetaParams& prior) {
    require_valid(prior);
    return ArmPosterior{prior, ArmStats{}};
}

/// Single Bernoulli observation: alpha += r, beta += 1 - r.
inline ArmPosterior update(const ArmPosterior& post, bool success) noexcept {
    ArmPosterior out = post;
    if (success) {
        out.params.alpha += 1.0;
        ++out.stats.successes;
    } else {
        out.params.beta += 1.0;
    }
    ++out.stats.n;
    return out;
}

/// Fold a batch tally into the posterior; same result as that many `update` calls.
inline ArmPosterior batch_apply(const ArmPosterior& post, std::uint64_t successes,
                                std::uint64_t failures) noexcept {
    ArmPosterior out = post;
    out.params.alpha += static_cast<double>(successes);
    out.params.beta += static_cast<double>(failures);
    out.stats.n += successes + failures;
    out.stats.successes += successes;
    return out;
}

namespace detail {

// Marsaglia-Tsang squeeze for shape >= 1.
inline double gamma_mt(double shape, RngStream& rng) noexcept {
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = 0.0, v = 0.0;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
}

// log of a Gamma(shape, 1) variate; small shapes use G(a) = G(a+1) * U^(1/a)
// in log space so the draw never underflows.
inline double log_gamma_variate(double shape, RngStream& rng) noexcept {
    if (shape >= 1.0) return std::log(gamma_mt(shape, rng));
    const double g = gamma_mt(shape + 1.0, rng);
    return std::log(g) + std::log(rng.uniform()) / shape;
}

inline double clamp_open_unit(double x) noexcept {
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - 0x1.0p-53;
    if (!(x > lo)) return lo;
    if (x > hi) return hi;
    return x;
}

}  // namespace detail

/// One exact draw from Beta(alpha, beta) as a ratio of Gamma variates.
inline double beta_sample(const BetaParams& params, RngStream& rng) {
    require_valid(params);
    if (params.alpha >= 1.0 && params.beta >= 1.0) {
        const double ga = detail::gamma_mt(params.alpha, rng);
        const double gb = detail::gamma_mt(params.beta, rng);
        return detail::clamp_open_unit(ga / (ga + gb));
    }
    const double la = detail::log_gamma_variate(params.alpha, rng);
    const double lb = detail::log_gamma_variate(params.beta, rng);
    // a / (a + b) = 1 / (1 + exp(lb - la))
    return detail::clamp_open_unit(1.0 / (1.0 + std::exp(lb - la)));
}

}  // namespace dynprior
