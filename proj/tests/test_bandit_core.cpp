#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "dynprior/beta.hpp"
#include "dynprior/rng.hpp"
#include "dynprior/thompson.hpp"
#include "oracles.hpp"

using namespace dynprior;
using Catch::Approx;

namespace {

std::vector<double> draws(const BetaParams& p, std::size_t count, std::uint64_t seed) {
    RngStream rng(seed, {1, 2, 3});
    std::vector<double> out(count);
    for (auto& x : out) x = beta_sample(p, rng);
    return out;
}

double mean_of(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Replays a fixed list of draws, cycling.
struct ScriptedSampler {
    std::vector<double> script;
    std::size_t pos = 0;
    double draw_beta(const BetaParams&) { return script[pos++ % script.size()]; }
};

}  // namespace

TEST_CASE("RngStream is reproducible per (seed, stream id)", "[rng]") {
    RngStream a(42, {1, 7, 3});
    RngStream b(42, {1, 7, 3});
    RngStream c(42, {1, 7, 4});
    RngStream d(43, {1, 7, 3});
    bool differs_c = false, differs_d = false;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a();
        REQUIRE(x == b());
        differs_c |= x != c();
        differs_d |= x != d();
    }
    CHECK(differs_c);
    CHECK(differs_d);
}

TEST_CASE("RngStream uniform stays inside the open unit interval", "[rng]") {
    RngStream rng(1, {});
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("beta_sample means", "[beta_sample]") {
    CHECK(mean_of(draws({1, 1}, 100000, 11)) == Approx(0.5).margin(0.005));
    CHECK(mean_of(draws({2, 8}, 100000, 12)) == Approx(0.2).margin(0.004));
}

TEST_CASE("beta_sample matches the quadrature CDF (KS, 1%)", "[beta_sample]") {
    const auto xs = draws({3.7, 41.2}, 100000, 13);
    const double d = oracle::ks_statistic_beta(3.7, 41.2, xs);
    CHECK(d < oracle::ks_critical_1pct(xs.size()));
}

TEST_CASE("beta_sample moments within 4 standard errors", "[beta_sample]") {
    const std::array<BetaParams, 6> cases{{{0.5, 0.5}, {2, 8}, {0.05, 3}, {3, 0.2}, {150, 4000}, {1e6, 2e6}}};
    std::uint64_t seed = 100;
    for (const auto& p : cases) {
        const auto xs = draws(p, 100000, seed++);
        const double n = static_cast<double>(xs.size());
        const double m = p.mean();
        const double v = p.variance();
        const double sample_mean = mean_of(xs);
        double m2 = 0.0, m4 = 0.0;
        for (double x : xs) {
            const double d = x - sample_mean;
            m2 += d * d;
            m4 += d * d * d * d;
        }
        m2 /= n - 1.0;
        m4 /= n;
        INFO("alpha=" << p.alpha << " beta=" << p.beta);
        CHECK(std::abs(sample_mean - m) < 4.0 * std::sqrt(v / n));
        CHECK(std::abs(m2 - v) < 4.0 * std::sqrt((m4 - v * v) / n));
    }
}

TEST_CASE("beta_sample stays in (0,1) for extreme shapes", "[beta_sample]") {
    RngStream rng(5, {});
    for (const BetaParams p : {BetaParams{1e-3, 1e-3}, BetaParams{0.01, 1e6}, BetaParams{1e6, 0.01}}) {
        for (int i = 0; i < 10000; ++i) {
            const double x = beta_sample(p, rng);
            REQUIRE(x > 0.0);
            REQUIRE(x < 1.0);
        }
    }
}

TEST_CASE("beta_sample rejects invalid shapes", "[beta_sample]") {
    RngStream rng(5, {});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();
    for (const BetaParams p : {BetaParams{0, 1}, BetaParams{1, 0}, BetaParams{-1, 2}, BetaParams{nan, 1},
                               BetaParams{1, inf}}) {
        CHECK_THROWS_AS(beta_sample(p, rng), invalid_parameter);
    }
    CHECK_THROWS_AS(make_beta(0.0, 1.0), invalid_parameter);
}

TEST_CASE("beta_sample is seed deterministic", "[beta_sample]") {
    CHECK(draws({0.3, 7.0}, 1000, 77) == draws({0.3, 7.0}, 1000, 77));
}

TEST_CASE("select_arm picks the dominant posterior", "[select_arm]") {
    const std::vector<ArmPosterior> arms{fresh_arm({1e6, 1}), fresh_arm({1, 1e6})};
    RngStream rng(3, {});
    int zero = 0;
    for (int i = 0; i < 10000; ++i) zero += select_arm(arms, rng) == 0;
    CHECK(zero >= 9999);
}

TEST_CASE("select_arm with one arm", "[select_arm]") {
    const std::vector<ArmPosterior> arms{fresh_arm({2, 3})};
    RngStream rng(3, {});
    for (int i = 0; i < 100; ++i) REQUIRE(select_arm(arms, rng) == 0);
}

TEST_CASE("select_arm on identical posteriors is uniform (chi-square, 1%)", "[select_arm]") {
    const std::vector<ArmPosterior> arms(4, fresh_arm({5, 5}));
    RngStream rng(9, {});
    std::array<std::uint64_t, 4> counts{};
    for (int i = 0; i < 100000; ++i) ++counts[select_arm(arms, rng)];
    CHECK(oracle::chi_square_uniform(counts) < oracle::chi_square_critical_1pct(3));
}

TEST_CASE("select_arm returns argmax of injected draws, lowest index on ties", "[select_arm]") {
    const std::vector<ArmPosterior> arms(4, fresh_arm({1, 1}));
    ScriptedSampler s{{0.2, 0.7, 0.1, 0.5}};
    CHECK(select_arm(arms, s) == 1);
    ScriptedSampler tie{{0.3, 0.9, 0.9, 0.9}};
    CHECK(select_arm(arms, tie) == 1);
    ScriptedSampler all_equal{{0.4}};
    CHECK(select_arm(arms, all_equal) == 0);

    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        ScriptedSampler random{{u(gen), u(gen), u(gen), u(gen)}};
        const auto expected = static_cast<std::size_t>(
            std::max_element(random.script.begin(), random.script.end()) - random.script.begin());
        REQUIRE(select_arm(arms, random) == expected);
    }
}

TEST_CASE("select_arm rejects an empty collection", "[select_arm]") {
    std::vector<ArmPosterior> none;
    RngStream rng(1, {});
    CHECK_THROWS_AS(select_arm(none, rng), empty_input);
}

TEST_CASE("update applies the Bernoulli rule", "[update]") {
    const ArmPosterior start = fresh_arm(uniform_prior());
    const ArmPosterior win = update(start, true);
    CHECK(win.params == BetaParams{2, 1});
    CHECK(win.stats.n == 1);
    CHECK(win.stats.successes == 1);
    CHECK(*win.stats.p_hat() == 1.0);

    const ArmPosterior loss = update(start, false);
    CHECK(loss.params == BetaParams{1, 2});
    CHECK(loss.stats.n == 1);
    CHECK(*loss.stats.p_hat() == 0.0);

    CHECK_FALSE(start.stats.p_hat().has_value());
}

TEST_CASE("update conserves counts", "[update]") {
    std::mt19937_64 gen(4);
    std::bernoulli_distribution coin(0.3);
    const BetaParams prior{0.7, 3.1};
    ArmPosterior post = fresh_arm(prior);
    for (int i = 0; i < 1000; ++i) {
        const double before = post.params.mass();
        post = update(post, coin(gen));
        REQUIRE(post.params.mass() == Approx(before + 1.0).epsilon(1e-15));
        REQUIRE((post.params.alpha - prior.alpha) + (post.params.beta - prior.beta) ==
                Approx(static_cast<double>(post.stats.n)).epsilon(1e-12));
        REQUIRE(post.stats.successes <= post.stats.n);
    }
}

TEST_CASE("batch_apply adds tallies", "[batch_apply]") {
    const ArmPosterior start = fresh_arm(uniform_prior());
    const ArmPosterior out = batch_apply(start, 3, 7);
    CHECK(out.params == BetaParams{4, 8});
    CHECK(out.stats.n == 10);
    CHECK(*out.stats.p_hat() == Approx(0.3));

    const ArmPosterior some{{2.5, 4.0}, {12, 5}};
    CHECK(batch_apply(some, 0, 0) == some);
}

TEST_CASE("batch_apply equals a fold of single updates", "[batch_apply]") {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> shape(0.1, 50.0);
    std::uniform_int_distribution<std::uint64_t> count(0, 200);
    for (int trial = 0; trial < 100; ++trial) {
        ArmPosterior p{{shape(gen), shape(gen)}, {count(gen), 0}};
        p.stats.successes = p.stats.n / 3;
        const std::uint64_t s = count(gen), f = count(gen);
        ArmPosterior folded = p;
        for (std::uint64_t i = 0; i < s; ++i) folded = update(folded, true);
        for (std::uint64_t i = 0; i < f; ++i) folded = update(folded, false);
        const ArmPosterior batched = batch_apply(p, s, f);
        REQUIRE(batched.stats == folded.stats);
        REQUIRE(batched.params.alpha == Approx(folded.params.alpha).epsilon(1e-12));
        REQUIRE(batched.params.beta == Approx(folded.params.beta).epsilon(1e-12));
    }
}
