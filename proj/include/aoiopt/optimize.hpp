#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aoiopt/errors.hpp"
#include "aoiopt/model.hpp"
#include "aoiopt/rng.hpp"
#include "aoiopt/trace.hpp"

// Derivative-free optimizers over the (speed, RRI) box: exhaustive grid
// search (the reference answer) and a real-coded genetic algorithm baseline.

namespace aoiopt::optimize {

struct SearchSpace {
  model::ScenarioConfig scenario;
  double rri_step_ms = 5.0;
  double speed_step_kmh = 1.0;

  void validate() const {
    scenario.validate();
    if (!(rri_step_ms > 0.0) || !(speed_step_kmh > 0.0))
      throw ConfigError("SearchSpace: steps must be positive");
  }
};

struct Candidate {
  model::Decision decision;
  double aoi_ms = 0.0;
};

struct GaConfig {
  int population = 50;
  int generations = 50;
  double crossover_prob = 0.9;
  double mutation_sigma_frac = 0.05;
  int tournament_size = 3;
  int elites = 1;
  std::uint64_t seed = 1;

  void validate() const {
    if (population < 2) throw ConfigError("GaConfig: population must be >= 2");
    if (elites < 0 || elites >= population)
      throw ConfigError("GaConfig: elites must be in [0, population)");
    if (generations < 0) throw ConfigError("GaConfig: negative generations");
    if (crossover_prob < 0.0 || crossover_prob > 1.0)
      throw ConfigError("GaConfig: crossover_prob outside [0, 1]");
    if (!(mutation_sigma_frac >= 0.0))
      throw ConfigError("GaConfig: negative mutation_sigma_frac");
    if (tournament_size < 1) throw ConfigError("GaConfig: tournament_size must be >= 1");
  }
};

// Speeds compatible with both the speed bounds and the density coupling.
inline model::Bounds feasible_speed_interval(const SearchSpace& s) {
  s.validate();
  return model::feasible_speed_bounds(s.scenario);
}

// Pure AoI objective with per-run memoization keyed on the exact bit pattern
// of the decision pair. Every evaluation goes through model::aoi and thus
// asserts feasibility.
class Objective {
 public:
  Objective(const model::ScenarioConfig& scenario, const model::ChannelConfig& channel,
            const model::RadioConfig& radio)
      : scenario_(scenario), channel_(channel), radio_(radio) {}

  // Points where the collision model breaks down (pool exhaustion, too few
  // neighbors) evaluate to infinity: inside the bounds but never optimal.
  // Bound violations still throw.
  double operator()(double speed_kmh, double rri_ms) {
    const Key key{std::bit_cast<std::uint64_t>(speed_kmh),
                  std::bit_cast<std::uint64_t>(rri_ms)};
    const auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    double aoi;
    try {
      aoi = model::aoi({speed_kmh, rri_ms}, scenario_, channel_, radio_).aoi_ms;
    } catch (const ResourceExhaustionError&) {
      aoi = std::numeric_limits<double>::infinity();
    } catch (const DegenerateScenarioError&) {
      aoi = std::numeric_limits<double>::infinity();
    }
    cache_.emplace(key, aoi);
    ++evaluations_;
    return aoi;
  }

  long evaluations() const { return evaluations_; }

 private:
  using Key = std::pair<std::uint64_t, std::uint64_t>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return std::hash<std::uint64_t>()(k.first * 0x9e3779b97f4a7c15ULL ^ k.second);
    }
  };

  model::ScenarioConfig scenario_;
  model::ChannelConfig channel_;
  model::RadioConfig radio_;
  std::unordered_map<Key, double, KeyHash> cache_;
  long evaluations_ = 0;
};

namespace detail {

// lo, lo + step, ...; the upper endpoint is always included.
inline std::vector<double> axis(double lo, double hi, double step) {
  std::vector<double> v;
  for (double x = lo; x <= hi + 1e-9; x += step) v.push_back(std::min(x, hi));
  if (v.empty() || v.back() < hi - 1e-9) v.push_back(hi);
  return v;
}

inline bool better(double aoi, const model::Decision& d, double best_aoi,
                   const model::Decision& best) {
  if (aoi != best_aoi) return aoi < best_aoi;
  if (d.rri_ms != best.rri_ms) return d.rri_ms < best.rri_ms;
  return d.speed_kmh < best.speed_kmh;
}

}  // namespace detail

// Evaluates every grid point and returns the exact grid minimum. Ties break
// toward smaller rri, then smaller speed, so the result is independent of
// evaluation order.
inline std::pair<Candidate, OptimizerTrace> grid_search(
    const SearchSpace& s, const model::ChannelConfig& channel,
    const model::RadioConfig& radio) {
  const model::Bounds speeds = feasible_speed_interval(s);
  const auto speed_axis = detail::axis(speeds.lo, speeds.hi, s.speed_step_kmh);
  const auto rri_axis =
      detail::axis(s.scenario.rri_ms.lo, s.scenario.rri_ms.hi, s.rri_step_ms);

  Objective objective(s.scenario, channel, radio);
  Candidate best;
  best.aoi_ms = std::numeric_limits<double>::infinity();
  OptimizerTrace trace;
  trace.method = "grid";
  int iter = 0;
  for (const double rri : rri_axis) {
    for (const double speed : speed_axis) {
      const double aoi = objective(speed, rri);
      if (detail::better(aoi, {speed, rri}, best.aoi_ms, best.decision)) {
        best.decision = {speed, rri};
        best.aoi_ms = aoi;
      }
      trace.points.push_back(
          {iter++, best.aoi_ms, best.decision.speed_kmh, best.decision.rri_ms});
    }
  }
  if (!std::isfinite(best.aoi_ms))
    throw InfeasibleSpaceError("grid_search: no evaluable point on the grid");
  trace.evaluations = objective.evaluations();
  return {best, trace};
}

// Real-coded GA: tournament selection, uniform crossover, additive Gaussian
// mutation, elitism. Offspring are clamped back into the feasible box, so
// every evaluated decision satisfies the constraints. A nonempty
// initial_population seeds the first generation (padded by sampling).
inline std::pair<Candidate, OptimizerTrace> ga_optimize(
    const SearchSpace& s, const GaConfig& g, const model::ChannelConfig& channel,
    const model::RadioConfig& radio,
    const std::vector<model::Decision>& initial_population = {}) {
  g.validate();
  const model::Bounds speeds = feasible_speed_interval(s);
  const model::Bounds rris = s.scenario.rri_ms;
  Objective objective(s.scenario, channel, radio);
  Rng rng(g.seed);

  struct Individual {
    model::Decision d;
    double aoi = 0.0;
  };
  const auto clamp_into = [&](model::Decision d) {
    d.speed_kmh = std::clamp(d.speed_kmh, speeds.lo, speeds.hi);
    d.rri_ms = std::clamp(d.rri_ms, rris.lo, rris.hi);
    return d;
  };

  std::vector<Individual> pop;
  pop.reserve(g.population);
  for (int i = 0; i < g.population; ++i) {
    model::Decision d;
    if (i < static_cast<int>(initial_population.size()))
      d = clamp_into(initial_population[i]);
    else
      d = {rng.uniform(speeds.lo, speeds.hi), rng.uniform(rris.lo, rris.hi)};
    pop.push_back({d, objective(d.speed_kmh, d.rri_ms)});
  }

  Candidate best;
  best.aoi_ms = std::numeric_limits<double>::infinity();
  const auto track_best = [&](const Individual& ind) {
    if (detail::better(ind.aoi, ind.d, best.aoi_ms, best.decision)) {
      best.decision = ind.d;
      best.aoi_ms = ind.aoi;
    }
  };
  for (const auto& ind : pop) track_best(ind);

  OptimizerTrace trace;
  trace.method = "ga";
  trace.points.push_back({0, best.aoi_ms, best.decision.speed_kmh, best.decision.rri_ms});

  const auto by_aoi = [](const Individual& a, const Individual& b) {
    return a.aoi < b.aoi;
  };
  const auto tournament = [&]() -> const Individual& {
    const Individual* winner = &pop[rng.uniform_int(pop.size())];
    for (int i = 1; i < g.tournament_size; ++i) {
      const Individual& challenger = pop[rng.uniform_int(pop.size())];
      if (challenger.aoi < winner->aoi) winner = &challenger;
    }
    return *winner;
  };

  const double sigma_speed = g.mutation_sigma_frac * (speeds.hi - speeds.lo);
  const double sigma_rri = g.mutation_sigma_frac * (rris.hi - rris.lo);

  for (int gen = 1; gen <= g.generations; ++gen) {
    std::vector<Individual> next;
    next.reserve(g.population);
    std::vector<Individual> sorted = pop;
    std::sort(sorted.begin(), sorted.end(), by_aoi);
    for (int e = 0; e < g.elites; ++e) next.push_back(sorted[e]);
    while (static_cast<int>(next.size()) < g.population) {
      const Individual& p1 = tournament();
      const Individual& p2 = tournament();
      model::Decision child = p1.d;
      if (rng.uniform() < g.crossover_prob) {
        if (rng.uniform() < 0.5) child.speed_kmh = p2.d.speed_kmh;
        if (rng.uniform() < 0.5) child.rri_ms = p2.d.rri_ms;
      }
      child.speed_kmh += rng.normal() * sigma_speed;
      child.rri_ms += rng.normal() * sigma_rri;
      child = clamp_into(child);
      next.push_back({child, objective(child.speed_kmh, child.rri_ms)});
    }
    pop = std::move(next);
    for (const auto& ind : pop) track_best(ind);
    trace.points.push_back(
        {gen, best.aoi_ms, best.decision.speed_kmh, best.decision.rri_ms});
  }
  if (!std::isfinite(best.aoi_ms))
    throw InfeasibleSpaceError("ga_optimize: no evaluable point found");
  trace.evaluations = objective.evaluations();
  return {best, trace};
}

}  // namespace aoiopt::optimize
