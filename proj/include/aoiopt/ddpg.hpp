#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "aoiopt/errors.hpp"
#include "aoiopt/mlp.hpp"
#include "aoiopt/model.hpp"
#include "aoiopt/optimize.hpp"
#include "aoiopt/rng.hpp"
#include "aoiopt/trace.hpp"

// Self-contained DDPG over the (RRI, speed) action box: tiny actor/critic
// networks, replay buffer, OU exploration, target networks with soft updates.

namespace aoiopt::rl {

struct RlState {
  double speed_kmh = 0.0;
  double density_veh_km = 0.0;
  double rri_ms = 0.0;
  double packet_loss = 0.0;
  double collision = 0.0;  // mean collision probability over the neighborhood
};

struct RlAction {
  double next_rri_ms = 0.0;
  double next_speed_kmh = 0.0;
};

struct RewardConfig {
  double n1 = 100.0;
  double n2 = 1.0;
  double a1 = 0.0;  // <= 0 means derive from the scenario (60th percentile)
  double a2 = 0.0;  // <= 0 means derive from the scenario (30th percentile)
  enum class Mode { verbatim, continuous } mode = Mode::continuous;
  double error_floor = -100.0;  // reward substituted when the model errors out

  void validate() const {
    if (!(n1 > 0.0)) throw ConfigError("RewardConfig: n1 must be positive");
    if (a1 > 0.0 || a2 > 0.0) {
      if (!(a2 < a1)) throw ConfigError("RewardConfig: requires a2 < a1");
      if (!(a2 > 0.0)) throw ConfigError("RewardConfig: thresholds must be positive");
    }
  }
};

// Piecewise reward with three slopes. Verbatim mode uses the constant
// (a2 - a1) in the third branch, which leaves a downward jump of 2 (a1 - a2)
// at a2; continuous mode uses (a1 - a2), making the function continuous at
// both thresholds.
inline double reward(double aoi_ms, const RewardConfig& rc) {
  rc.validate();
  if (!(rc.a2 < rc.a1) || !(rc.a2 > 0.0))
    throw ConfigError("reward: thresholds not resolved");
  if (!(aoi_ms >= 0.0)) throw DomainError("reward: negative aoi");
  const double base = -rc.a1 / rc.n1 + rc.n2;
  if (aoi_ms > rc.a1) return -aoi_ms / rc.n1 + rc.n2;
  if (aoi_ms > rc.a2) return base + (rc.a1 - aoi_ms);
  const double jump = rc.mode == RewardConfig::Mode::verbatim ? (rc.a2 - rc.a1)
                                                              : (rc.a1 - rc.a2);
  return base + jump + 3.0 * (rc.a2 - aoi_ms);
}

// Fills a1/a2 from the 60th/30th percentiles of AoI over the default
// evaluation grid when they were left unset.
inline RewardConfig resolve_reward(const RewardConfig& rc,
                                   const model::ScenarioConfig& scenario,
                                   const model::ChannelConfig& channel,
                                   const model::RadioConfig& radio) {
  RewardConfig out = rc;
  if (out.a1 > 0.0 && out.a2 > 0.0) return out;
  optimize::SearchSpace space;
  space.scenario = scenario;
  const model::Bounds speeds = optimize::feasible_speed_interval(space);
  std::vector<double> values;
  for (double r = scenario.rri_ms.lo; r <= scenario.rri_ms.hi + 1e-9; r += 5.0)
    for (double v = speeds.lo; v <= speeds.hi + 1e-9; v += 1.0)
      values.push_back(model::aoi({std::min(v, speeds.hi), std::min(r, scenario.rri_ms.hi)},
                                  scenario, channel, radio)
                           .aoi_ms);
  std::sort(values.begin(), values.end());
  const auto pct = [&](double q) {
    return values[static_cast<std::size_t>(q * (values.size() - 1))];
  };
  out.a2 = pct(0.30);
  out.a1 = pct(0.60);
  out.validate();
  return out;
}

struct DdpgConfig {
  double gamma = 0.99;
  double tau = 0.005;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  int batch = 64;
  int buffer_capacity = 50000;
  int episodes = 50;
  int steps_per_episode = 100;
  double ou_theta = 0.15;
  double ou_sigma = 0.2;
  double ou_sigma_final = 0.02;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("DdpgConfig: gamma outside (0, 1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("DdpgConfig: tau outside (0, 1]");
    if (batch < 1) throw ConfigError("DdpgConfig: batch must be >= 1");
    if (buffer_capacity < batch) throw ConfigError("DdpgConfig: buffer smaller than batch");
    if (episodes < 0 || steps_per_episode < 1)
      throw ConfigError("DdpgConfig: invalid episode shape");
    if (!(actor_lr > 0.0) || !(critic_lr > 0.0))
      throw ConfigError("DdpgConfig: learning rates must be positive");
  }
};

struct Transition {
  std::array<double, 5> state;   // normalized
  std::array<double, 2> action;  // normalized, as executed
  double reward = 0.0;
  std::array<double, 5> next_state;
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ < 1) throw ConfigError("ReplayBuffer: capacity must be >= 1");
    ring_.reserve(capacity_);
  }

  void push(const Transition& t) {
    if (ring_.size() < capacity_) {
      ring_.push_back(t);
    } else {
      ring_[cursor_] = t;
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  std::size_t size() const { return ring_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return ring_[i]; }

  // Uniform sample of n distinct indices (Floyd's algorithm).
  std::vector<const Transition*> sample(Rng& rng, int n) const {
    if (n < 1 || static_cast<std::size_t>(n) > ring_.size())
      throw DomainError("ReplayBuffer::sample: bad batch size");
    std::unordered_set<std::size_t> chosen;
    std::vector<const Transition*> out;
    out.reserve(n);
    for (std::size_t j = ring_.size() - n; j < ring_.size(); ++j) {
      const std::size_t t = rng.uniform_int(j + 1);
      const std::size_t pick = chosen.contains(t) ? j : t;
      chosen.insert(pick);
      out.push_back(&ring_[pick]);
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> ring_;
};

struct OuNoise {
  double theta = 0.15;
  double sigma = 0.2;
  std::array<double, 2> x{0.0, 0.0};

  void reset() { x = {0.0, 0.0}; }

  std::array<double, 2> step(Rng& rng) {
    for (auto& v : x) v += theta * (-v) + sigma * rng.normal();
    return x;
  }
};

// The actor's squashed output is mapped onto a slightly over-ranged copy of
// the normalized action box, then clamped, so saturating the squash can
// reach the exact bounds.
inline constexpr double kActionOverRange = 0.55;

// MDP wrapper around the analytic model: fixed-horizon episodes, actions
// projected into the feasible box, rewards from the AoI.
class Environment {
 public:
  Environment(const model::ScenarioConfig& scenario, const model::ChannelConfig& channel,
              const model::RadioConfig& radio, const RewardConfig& resolved_reward,
              int horizon)
      : scenario_(scenario),
        channel_(channel),
        radio_(radio),
        reward_(resolved_reward),
        horizon_(horizon),
        speed_iv_(model::feasible_speed_bounds(scenario)) {
    reward_.validate();
    if (!(reward_.a2 < reward_.a1) || !(reward_.a2 > 0.0))
      throw ConfigError("Environment: reward thresholds must be resolved");
  }

  const model::Bounds& speed_interval() const { return speed_iv_; }
  const model::ScenarioConfig& scenario() const { return scenario_; }
  int horizon() const { return horizon_; }

  RlState make_state(double speed_kmh, double rri_ms) const {
    const auto b = model::aoi({speed_kmh, rri_ms}, scenario_, channel_, radio_);
    return {b.speed_kmh, b.density_veh_km, b.rri_ms, b.packet_loss, b.mean_collision};
  }

  RlState initial_state() const {
    return make_state(0.5 * (speed_iv_.lo + speed_iv_.hi),
                      0.5 * (scenario_.rri_ms.lo + scenario_.rri_ms.hi));
  }

  RlAction project(const RlAction& a) const {
    return {std::clamp(a.next_rri_ms, scenario_.rri_ms.lo, scenario_.rri_ms.hi),
            std::clamp(a.next_speed_kmh, speed_iv_.lo, speed_iv_.hi)};
  }

  std::array<double, 5> normalize(const RlState& s) const {
    const auto unit = [](double v, const model::Bounds& b) {
      // A collapsed bounds pair pins the dimension; report it as mid-range.
      if (b.hi - b.lo <= 0.0) return 0.5;
      return (v - b.lo) / (b.hi - b.lo);
    };
    return {unit(s.speed_kmh, speed_iv_), unit(s.density_veh_km, scenario_.density_veh_km),
            unit(s.rri_ms, scenario_.rri_ms), s.packet_loss, s.collision};
  }

  // Normalized action in [0, 1]^2 (order: rri, speed) to physical units.
  RlAction denormalize(const std::array<double, 2>& u) const {
    const double ur = std::clamp(u[0], 0.0, 1.0);
    const double uv = std::clamp(u[1], 0.0, 1.0);
    return {scenario_.rri_ms.lo + ur * (scenario_.rri_ms.hi - scenario_.rri_ms.lo),
            speed_iv_.lo + uv * (speed_iv_.hi - speed_iv_.lo)};
  }

  std::array<double, 2> normalize_action(const RlAction& a) const {
    return {(a.next_rri_ms - scenario_.rri_ms.lo) /
                (scenario_.rri_ms.hi - scenario_.rri_ms.lo),
            (a.next_speed_kmh - speed_iv_.lo) / (speed_iv_.hi - speed_iv_.lo)};
  }

  struct StepResult {
    RlState next;
    double reward = 0.0;
    bool done = false;
    double aoi_ms = 0.0;
    bool model_error = false;
  };

  void reset() { steps_taken_ = 0; }

  StepResult step(const RlState& current, const RlAction& raw_action) {
    if (!std::isfinite(raw_action.next_rri_ms) || !std::isfinite(raw_action.next_speed_kmh))
      throw DomainError("Environment::step: non-finite action");
    StepResult r;
    const RlAction a = project(raw_action);
    try {
      r.next = make_state(a.next_speed_kmh, a.next_rri_ms);
      const auto b = model::aoi({a.next_speed_kmh, a.next_rri_ms}, scenario_, channel_,
                                radio_);
      r.aoi_ms = b.aoi_ms;
      r.reward = reward(r.aoi_ms, reward_);
    } catch (const Error&) {
      r.next = current;
      r.reward = reward_.error_floor;
      r.model_error = true;
    }
    ++steps_taken_;
    r.done = steps_taken_ >= horizon_;
    return r;
  }

 private:
  model::ScenarioConfig scenario_;
  model::ChannelConfig channel_;
  model::RadioConfig radio_;
  RewardConfig reward_;
  int horizon_;
  int steps_taken_ = 0;
  model::Bounds speed_iv_;
};

// Actor forward pass to a normalized action, optionally with OU noise.
inline std::array<double, 2> policy_action(const Mlp& actor,
                                           const std::array<double, 5>& state_norm,
                                           OuNoise* noise, Rng* rng) {
  const std::vector<double> x(state_norm.begin(), state_norm.end());
  const auto out = actor.predict(x);
  std::array<double, 2> u{0.5 + kActionOverRange * out[0],
                          0.5 + kActionOverRange * out[1]};
  if (noise != nullptr && rng != nullptr) {
    const auto n = noise->step(*rng);
    u[0] += n[0];
    u[1] += n[1];
  }
  u[0] = std::clamp(u[0], 0.0, 1.0);
  u[1] = std::clamp(u[1], 0.0, 1.0);
  return u;
}

inline RlAction select_action(const Mlp& actor, const Environment& env,
                              const RlState& state, OuNoise* noise, Rng* rng) {
  return env.project(env.denormalize(policy_action(actor, env.normalize(state), noise, rng)));
}

// y_t = r_t + (1 - d_t) gamma Q'(s_{t+1}, mu'(s_{t+1})); target networks only.
inline std::vector<double> critic_targets(const std::vector<const Transition*>& batch,
                                          const Mlp& actor_target,
                                          const Mlp& critic_target, double gamma) {
  if (batch.empty()) throw DomainError("critic_targets: empty batch");
  std::vector<double> ys;
  ys.reserve(batch.size());
  for (const Transition* t : batch) {
    double y = t->reward;
    if (!t->done) {
      const std::vector<double> s2(t->next_state.begin(), t->next_state.end());
      const auto mu = actor_target.predict(s2);
      std::vector<double> sa(s2);
      sa.push_back(std::clamp(0.5 + kActionOverRange * mu[0], 0.0, 1.0));
      sa.push_back(std::clamp(0.5 + kActionOverRange * mu[1], 0.0, 1.0));
      y += gamma * critic_target.predict(sa)[0];
    }
    ys.push_back(y);
  }
  return ys;
}

// One mean-squared-error step on the critic; returns the pre-step loss.
inline double critic_update(const std::vector<const Transition*>& batch, Mlp& critic,
                            const std::vector<double>& targets, double lr) {
  if (batch.empty() || batch.size() != targets.size())
    throw DomainError("critic_update: batch/target size mismatch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  MlpGrads grads = MlpGrads::zeros_like(critic);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition* t = batch[i];
    std::vector<double> sa(t->state.begin(), t->state.end());
    sa.push_back(t->action[0]);
    sa.push_back(t->action[1]);
    const auto acts = critic.forward(sa);
    const double resid = acts.back()[0] - targets[i];
    loss += resid * resid;
    backprop(critic, acts, {2.0 * resid * inv_n}, grads);
  }
  loss *= inv_n;
  if (!std::isfinite(loss)) throw TrainingDivergenceError("critic_update: non-finite loss");
  sgd_step(critic, grads, lr);
  return loss;
}

// Deterministic policy gradient ascent on the mean critic value; the critic's
// parameters are left untouched. Returns the pre-step mean Q estimate.
inline double actor_update(const std::vector<const Transition*>& batch, Mlp& actor,
                           const Mlp& critic, double lr) {
  if (batch.empty()) throw DomainError("actor_update: empty batch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  MlpGrads actor_grads = MlpGrads::zeros_like(actor);
  MlpGrads critic_scratch = MlpGrads::zeros_like(critic);
  double mean_q = 0.0;
  for (const Transition* t : batch) {
    const std::vector<double> s(t->state.begin(), t->state.end());
    const auto acts_a = actor.forward(s);
    const auto& mu = acts_a.back();
    std::vector<double> sa(s);
    sa.push_back(0.5 + kActionOverRange * mu[0]);
    sa.push_back(0.5 + kActionOverRange * mu[1]);
    const auto acts_c = critic.forward(sa);
    mean_q += acts_c.back()[0];
    const auto g_in = backprop(critic, acts_c, {inv_n}, critic_scratch);
    // dQ/du through the affine map; negated for gradient ascent via sgd_step.
    std::vector<double> g_mu{-g_in[5] * kActionOverRange, -g_in[6] * kActionOverRange};
    if (!std::isfinite(g_mu[0]) || !std::isfinite(g_mu[1]))
      throw TrainingDivergenceError("actor_update: non-finite gradient");
    backprop(actor, acts_a, g_mu, actor_grads);
  }
  sgd_step(actor, actor_grads, lr);
  return mean_q * inv_n;
}

struct TrainResult {
  Mlp actor;
  Mlp critic;
  OptimizerTrace trace;
  double final_greedy_aoi = 0.0;
  model::Decision final_decision;
};

// Full training loop. The trace reports up to 50 epochs of the greedy
// policy's AoI (noise off, canonical start state), recorded as best-so-far;
// final_greedy_aoi is the last epoch's greedy value.
inline TrainResult train(const DdpgConfig& cfg, const RewardConfig& rc,
                         const model::ScenarioConfig& scenario,
                         const model::ChannelConfig& channel = {},
                         const model::RadioConfig& radio = {}) {
  cfg.validate();
  scenario.validate();
  const RewardConfig reward_cfg = resolve_reward(rc, scenario, channel, radio);
  Environment env(scenario, channel, radio, reward_cfg, cfg.steps_per_episode);

  Rng rng(cfg.seed);
  TrainResult result;
  result.actor = Mlp::make({5, 64, 64, 2}, OutputActivation::squash, rng);
  result.critic = Mlp::make({7, 64, 64, 1}, OutputActivation::identity, rng);
  Mlp actor_target = result.actor;
  Mlp critic_target = result.critic;
  ReplayBuffer buffer(cfg.buffer_capacity);
  result.trace.method = "ddpg";

  const auto greedy_eval = [&]() {
    const RlState probe = env.initial_state();
    const auto u = policy_action(result.actor, env.normalize(probe), nullptr, nullptr);
    const RlAction a = env.project(env.denormalize(u));
    const auto b = model::aoi({a.next_speed_kmh, a.next_rri_ms}, scenario, channel, radio);
    return std::pair<double, model::Decision>{b.aoi_ms, {a.next_speed_kmh, a.next_rri_ms}};
  };

  {
    const auto [aoi, decision] = greedy_eval();
    result.final_greedy_aoi = aoi;
    result.final_decision = decision;
  }
  const long total_steps =
      static_cast<long>(cfg.episodes) * cfg.steps_per_episode;
  const int epochs = std::min(50, std::max(cfg.episodes, 1));
  const int group = cfg.episodes > 0 ? std::max(1, cfg.episodes / epochs) : 1;
  long tstep = 0;
  int consecutive_bad = 0;
  double best_aoi = std::numeric_limits<double>::infinity();
  model::Decision best_decision;
  OuNoise noise;
  noise.theta = cfg.ou_theta;

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    env.reset();
    noise.reset();
    RlState state = env.initial_state();
    for (int st = 0; st < cfg.steps_per_episode; ++st, ++tstep) {
      noise.sigma = cfg.ou_sigma +
                    (cfg.ou_sigma_final - cfg.ou_sigma) *
                        (total_steps > 1 ? static_cast<double>(tstep) / (total_steps - 1)
                                         : 0.0);
      const auto u = policy_action(result.actor, env.normalize(state), &noise, &rng);
      const auto sr = env.step(state, env.denormalize(u));
      Transition t;
      t.state = env.normalize(state);
      t.action = u;
      t.reward = sr.reward;
      t.next_state = env.normalize(sr.next);
      t.done = sr.done;
      buffer.push(t);
      state = sr.next;
      result.trace.evaluations += 1;
      if (buffer.size() >= static_cast<std::size_t>(cfg.batch)) {
        const auto batch = buffer.sample(rng, cfg.batch);
        const auto ys = critic_targets(batch, actor_target, critic_target, cfg.gamma);
        double loss;
        try {
          loss = critic_update(batch, result.critic, ys, cfg.critic_lr);
          consecutive_bad = 0;
        } catch (const TrainingDivergenceError&) {
          if (++consecutive_bad >= 10)
            throw TrainingDivergenceError("train: losses non-finite for 10 updates");
          continue;
        }
        (void)loss;
        actor_update(batch, result.actor, result.critic, cfg.actor_lr);
        soft_update(result.actor, actor_target, cfg.tau);
        soft_update(result.critic, critic_target, cfg.tau);
      }
    }
    if ((ep + 1) % group == 0 || ep + 1 == cfg.episodes) {
      const auto [aoi, decision] = greedy_eval();
      result.final_greedy_aoi = aoi;
      result.final_decision = decision;
      if (aoi < best_aoi) {
        best_aoi = aoi;
        best_decision = decision;
      }
      result.trace.points.push_back({static_cast<int>(result.trace.points.size()),
                                     best_aoi, best_decision.speed_kmh,
                                     best_decision.rri_ms});
    }
  }
  return result;
}

}  // namespace aoiopt::rl
