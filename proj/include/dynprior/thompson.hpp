#pragma once

#include <concepts>
#include <cstddef>
#include <span>

#include "dynprior/beta.hpp"
#include "dynprior/errors.hpp"
#include "dynprior/rng.hpp"

namespace dynprior {

/// Anything that can produce one posterior draw. RngStream is the production
/// source; tests plug in deterministic stubs.
template <class S>
concept PosteriorSampler = requires(S& s, const BetaParams& p) {
    { s.draw_beta(p) } -> std::convertible_to<double>;
};

/// Adapts an RngStream to PosteriorSampler.
struct StreamSampler {
    RngStream& rng;
    double draw_beta(const BetaParams& p) { return beta_sample(p, rng); }
    double uniform() { return rng.uniform(); }
};

/// Thompson selection: one draw per arm, argmax wins, lowest index on ties.
template <PosteriorSampler S>
std::size_t select_arm(std::span<const ArmPosterior> posteriors, S& sampler) {
    if (posteriors.empty()) throw empty_input("select_arm: no arms");
    std::size_t best = 0;
    double best_draw = sampler.draw_beta(posteriors[0].params);
    for (std::size_t i = 1; i < posteriors.size(); ++i) {
        const double d = sampler.draw_beta(posteriors[i].params);
        if (d > best_draw) {
            best_draw = d;
            best = i;
        }
    }
    return best;
}

inline std::size_t select_arm(std::span<const ArmPosterior> posteriors, RngStream& rng) {
    StreamSampler s{rng};
    return select_arm(posteriors, s);
}

}  // namespace dynprior
