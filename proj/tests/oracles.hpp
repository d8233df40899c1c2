#pragma once

// Reference computations used only by the tests. Each one is an independent
// route to a value the library computes: nothing here calls into the code
// path it checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace oracle {

// ---------------------------------------------------------------------------
// Standard normal
// ---------------------------------------------------------------------------

inline double normal_cdf_erf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Normal quantile by plain bisection on the erfc-based CDF.
inline double normal_quantile_bisect(double p) {
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 300 && hi - lo > 0.0; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (normal_cdf_erf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Quadratic coefficients in 50-digit arithmetic
// ---------------------------------------------------------------------------

using big = boost::multiprecision::cpp_bin_float_50;

struct BigCoefficients {
    big a, b, c;
};

inline BigCoefficients coefficients_extended(std::uint64_t n_k, double p_hat, double r_in, double z) {
    const big n = big(n_k);
    const big p = big(p_hat);
    const big r = big(r_in);
    const big t = big(z) * big(z);
    const big nr = n * r;
    const big cnk = nr * (n + nr);
    const big one_r = 1 + r;
    BigCoefficients k;
    k.a = cnk + t * one_r * one_r * (n + nr) + t * nr * r * r;
    k.b = -2 * cnk * p - t * one_r * one_r * (n + nr) - t * nr * r * (one_r - 2 * p);
    k.c = cnk * p * p - t * nr * p * (one_r - p);
    return k;
}

// ---------------------------------------------------------------------------
// Un-squared constraint and its bisection root
// ---------------------------------------------------------------------------

inline long double constraint_g(std::uint64_t n_k, long double p, long double eps_z, long double r,
                                long double q) {
    const long double n = static_cast<long double>(n_k);
    const long double var_new = q * (1 - q) / (n * r);
    const long double mu_win = (p + r * q) / (1 + r);
    const long double var_win = mu_win * (1 - mu_win) / (n * (1 + r));
    return (q - mu_win) / std::sqrt(var_new + var_win) - eps_z;
}

/// Root of the un-squared constraint on (0, p_hat) by bisection; NaN when
/// the constraint does not change sign there.
inline double bisect_prior_mean(std::uint64_t n_k, double p_hat, double epsilon, double r) {
    const long double z = normal_quantile_bisect(epsilon);
    long double lo = std::ldexp(static_cast<long double>(p_hat), -60);
    long double hi = p_hat;
    const long double glo = constraint_g(n_k, p_hat, z, r, lo);
    if (!(glo < 0)) return std::nan("");
    for (int i = 0; i < 400; ++i) {
        const long double mid = 0.5L * (lo + hi);
        if (mid == lo || mid == hi) break;
        (constraint_g(n_k, p_hat, z, r, mid) < 0 ? lo : hi) = mid;
    }
    return static_cast<double>(0.5L * (lo + hi));
}

// ---------------------------------------------------------------------------
// Beta CDF by Gauss-Legendre quadrature of the density
// ---------------------------------------------------------------------------

struct GaussLegendre {
    static constexpr int order = 20;
    std::array<double, order> nodes{};
    std::array<double, order> weights{};

    GaussLegendre() {
        // Newton iteration on P_n from the Chebyshev initial guess.
        for (int i = 0; i < order; ++i) {
            double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= order; ++k) {
                    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = pk;
                }
                dp = order * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }

    template <class F>
    double integrate(F&& f, double lo, double hi) const {
        const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
        double s = 0.0;
        for (int i = 0; i < order; ++i) s += weights[i] * f(mid + half * nodes[i]);
        return s * half;
    }
};

inline const GaussLegendre& gauss_legendre() {
    static const GaussLegendre gl;
    return gl;
}

namespace detail {

// Cumulative integral of the Beta(a, b) density from 0 to each of the sorted
// points xs (all <= 0.5). For a < 1 the substitution t = u^(1/a) removes the
// singularity at 0: the integrand becomes (1/a) (1 - u^(1/a))^(b-1) / B(a,b).
inline std::vector<double> lower_cumulative(double a, double b, std::span<const double> xs) {
    const double log_beta_fn = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const auto& gl = gauss_legendre();
    std::vector<double> out(xs.size());
    double acc = 0.0;
    if (a < 1.0) {
        auto f = [&](double u) {
            const double t = std::pow(u, 1.0 / a);
            return std::exp((b - 1.0) * std::log1p(-t) - log_beta_fn) / a;
        };
        double prev = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double u = std::pow(xs[i], a);
            acc += gl.integrate(f, prev, u);
            prev = u;
            out[i] = acc;
        }
    } else {
        auto f = [&](double t) {
            if (t <= 0.0) return 0.0;
            return std::exp((a - 1.0) * std::log(t) + (b - 1.0) * std::log1p(-t) - log_beta_fn);
        };
        double prev = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            // Split long gaps so a steep tail is not under-resolved.
            const double gap = xs[i] - prev;
            const int pieces = gap > 1e-3 ? 64 : 1;
            for (int k = 0; k < pieces; ++k)
                acc += gl.integrate(f, prev + gap * k / pieces, prev + gap * (k + 1) / pieces);
            prev = xs[i];
            out[i] = acc;
        }
    }
    return out;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b) at every point of `sorted_xs`
/// (ascending). Points above 1/2 use the reflection I_x(a,b) = 1 - I_{1-x}(b,a).
inline std::vector<double> beta_cdf_sorted(double a, double b, std::span<const double> sorted_xs) {
    const auto split = std::ranges::upper_bound(sorted_xs, 0.5) - sorted_xs.begin();
    std::vector<double> out(sorted_xs.size());

    const auto lower = detail::lower_cumulative(a, b, sorted_xs.first(split));
    std::copy(lower.begin(), lower.end(), out.begin());

    std::vector<double> mirrored;
    for (std::size_t i = sorted_xs.size(); i-- > static_cast<std::size_t>(split);)
        mirrored.push_back(1.0 - sorted_xs[i]);
    const auto upper = detail::lower_cumulative(b, a, mirrored);
    for (std::size_t j = 0; j < mirrored.size(); ++j) out[sorted_xs.size() - 1 - j] = 1.0 - upper[j];
    return out;
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against the Beta CDF.
inline double ks_statistic_beta(double a, double b, std::vector<double> samples) {
    std::ranges::sort(samples);
    const auto cdf = beta_cdf_sorted(a, b, samples);
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        d = std::max(d, std::abs(cdf[i] - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - cdf[i]));
    }
    return d;
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

/// Pearson chi-square statistic against equal expected frequencies.
inline double chi_square_uniform(std::span<const std::uint64_t> counts) {
    double total = 0.0;
    for (auto c : counts) total += static_cast<double>(c);
    const double expected = total / static_cast<double>(counts.size());
    double chi2 = 0.0;
    for (auto c : counts) chi2 += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
    return chi2;
}

/// Upper 1% points of chi-square for small degrees of freedom.
inline double chi_square_critical_1pct(int dof) {
    static constexpr double table[] = {0.0, 6.635, 9.210, 11.345, 13.277, 15.086};
    return table[dof];
}

/// The published validation grid.
struct GridPoint {
    double p;
    std::uint64_t n;
    double epsilon;
    double r;
};

inline std::vector<GridPoint> default_grid() {
    std::vector<GridPoint> g;
    for (double p : {0.005, 0.01, 0.02, 0.03, 0.05})
        for (std::uint64_t n : {10'000ULL, 100'000ULL, 1'000'000ULL, 10'000'000ULL})
            for (double e : {0.01, 0.03, 0.05, 0.1})
                for (double r : {0.01, 0.05}) g.push_back({p, n, e, r});
    return g;
}

}  // namespace oracle
