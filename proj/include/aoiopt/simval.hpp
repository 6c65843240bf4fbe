#pragma once

#include <cstdint>

#include "aoiopt/errors.hpp"
#include "aoiopt/model.hpp"
#include "aoiopt/rng.hpp"

// Monte Carlo oracles for the analytical building blocks: the geometric
// collision-delay mean, the Gilbert chain's stationary split, and the
// frame-failure recursion. Fixed seed means bit-identical output.

namespace aoiopt::simval {

struct McConfig {
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 1;

  void validate() const {
    if (samples < 1) throw ConfigError("McConfig: samples must be >= 1");
  }
};

// Sample mean of the extra delay caused by a geometric number of lost rounds,
// each costing one RRI.
inline double mc_extra_delay(double rri_ms, double p_coll, const McConfig& mc) {
  mc.validate();
  if (!(p_coll >= 0.0)) throw DomainError("mc_extra_delay: negative probability");
  if (p_coll >= 1.0) throw DivergenceError("mc_extra_delay: p_coll >= 1 diverges");
  Rng rng(mc.seed);
  double total = 0.0;
  for (std::uint64_t i = 0; i < mc.samples; ++i) {
    std::uint64_t failures = 0;
    while (rng.uniform() < p_coll) ++failures;
    total += static_cast<double>(failures) * rri_ms;
  }
  return total / static_cast<double>(mc.samples);
}

struct GilbertEstimate {
  double stationary_adverse = 0.0;
  double first_failure = 0.0;
};

// Simulates the two-state chain. stationary_adverse: adverse fraction over a
// single long run of `samples` steps started in the ideal state.
// first_failure: fraction of `samples` episodes of `frames` steps, started
// ideal, in which the chain visits the adverse state at least once (frames
// sent from the adverse state always fail).
inline GilbertEstimate mc_gilbert(const model::MarkovChannel& ch, int frames,
                                  const McConfig& mc) {
  mc.validate();
  if (frames < 1) throw DomainError("mc_gilbert: frames must be >= 1");
  const double pp = ch.stay_adverse;
  const double pi = ch.stay_ideal;
  if (pp < 0.0 || pp > 1.0 || pi < 0.0 || pi > 1.0)
    throw DomainError("mc_gilbert: stay probabilities outside [0, 1]");
  if (pp >= 1.0 || pi >= 1.0)
    throw AbsorbingChainError("mc_gilbert: chain has an absorbing state");
  Rng rng(mc.seed);
  Rng chain_rng = rng.split();
  Rng episode_rng = rng.split();

  GilbertEstimate est;
  bool adverse = false;
  std::uint64_t adverse_steps = 0;
  for (std::uint64_t i = 0; i < mc.samples; ++i) {
    const double u = chain_rng.uniform();
    adverse = adverse ? (u < pp) : !(u < pi);
    if (adverse) ++adverse_steps;
  }
  est.stationary_adverse =
      static_cast<double>(adverse_steps) / static_cast<double>(mc.samples);

  std::uint64_t failed = 0;
  for (std::uint64_t i = 0; i < mc.samples; ++i) {
    bool state_adverse = false;
    for (int f = 0; f < frames; ++f) {
      const double u = episode_rng.uniform();
      state_adverse = state_adverse ? (u < pp) : !(u < pi);
      if (state_adverse) {
        ++failed;
        break;
      }
    }
  }
  est.first_failure = static_cast<double>(failed) / static_cast<double>(mc.samples);
  return est;
}

}  // namespace aoiopt::simval
