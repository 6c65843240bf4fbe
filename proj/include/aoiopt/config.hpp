#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "aoiopt/ddpg.hpp"
#include "aoiopt/errors.hpp"
#include "aoiopt/llm.hpp"
#include "aoiopt/model.hpp"
#include "aoiopt/optimize.hpp"
#include "json.hpp"

// One configuration object for the whole toolchain. Every field has a
// default; a config file overrides only the keys it mentions, and CLI flags
// override the file.

namespace aoiopt::config {

struct RunConfig {
  model::ScenarioConfig scenario;
  model::ChannelConfig channel;
  model::RadioConfig radio;
  rl::RewardConfig reward;
  optimize::GaConfig ga;
  rl::DdpgConfig ddpg;
  llm::LlmEndpointConfig llm;
  llm::ConvergenceRule convergence;
  double grid_rri_step_ms = 5.0;
  double grid_speed_step_kmh = 1.0;
  std::string output_dir = "out";
  std::uint64_t seed = 1;

  void validate() const {
    scenario.validate();
    channel.validate();
    radio.validate();
    reward.validate();
    ga.validate();
    ddpg.validate();
    llm.validate();
    convergence.validate();
    if (!(grid_rri_step_ms > 0.0) || !(grid_speed_step_kmh > 0.0))
      throw ConfigError("RunConfig: grid steps must be positive");
  }

  optimize::SearchSpace search_space() const {
    optimize::SearchSpace s;
    s.scenario = scenario;
    s.rri_step_ms = grid_rri_step_ms;
    s.speed_step_kmh = grid_speed_step_kmh;
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    j["scenario"] = {{"flow_veh_h", scenario.flow_veh_h},
                     {"half_length_m", scenario.half_length_m},
                     {"sensing_range_m", scenario.sensing_range_m},
                     {"rbgs_per_slot", scenario.rbgs_per_slot},
                     {"slot_ms", scenario.slot_ms},
                     {"gap_min_ms", scenario.gap_min_ms},
                     {"speed_kmh", {scenario.speed_kmh.lo, scenario.speed_kmh.hi}},
                     {"density_veh_km",
                      {scenario.density_veh_km.lo, scenario.density_veh_km.hi}},
                     {"rri_ms", {scenario.rri_ms.lo, scenario.rri_ms.hi}}};
    j["channel"] = {{"carrier_freq_hz", channel.carrier_freq_hz},
                    {"fading_margin", channel.fading_margin},
                    {"packet_duration_ms", channel.packet_duration_ms},
                    {"frames_per_packet", channel.frames_per_packet},
                    {"doppler_multiplier", channel.doppler_multiplier}};
    j["radio"] = {{"bandwidth_hz", radio.bandwidth_hz},
                  {"tx_power_w", radio.tx_power_w},
                  {"channel_gain", radio.channel_gain},
                  {"noise_psd_w_hz", radio.noise_psd_w_hz},
                  {"payload_bits", radio.payload_bits}};
    j["reward"] = {{"n1", reward.n1},
                   {"n2", reward.n2},
                   {"a1", reward.a1},
                   {"a2", reward.a2},
                   {"mode", reward.mode == rl::RewardConfig::Mode::verbatim
                                ? "verbatim"
                                : "continuous"},
                   {"error_floor", reward.error_floor}};
    j["grid"] = {{"rri_step_ms", grid_rri_step_ms},
                 {"speed_step_kmh", grid_speed_step_kmh}};
    j["ga"] = {{"population", ga.population},
               {"generations", ga.generations},
               {"crossover_prob", ga.crossover_prob},
               {"mutation_sigma_frac", ga.mutation_sigma_frac},
               {"tournament_size", ga.tournament_size},
               {"elites", ga.elites},
               {"seed", ga.seed}};
    j["ddpg"] = {{"gamma", ddpg.gamma},
                 {"tau", ddpg.tau},
                 {"actor_lr", ddpg.actor_lr},
                 {"critic_lr", ddpg.critic_lr},
                 {"batch", ddpg.batch},
                 {"buffer_capacity", ddpg.buffer_capacity},
                 {"episodes", ddpg.episodes},
                 {"steps_per_episode", ddpg.steps_per_episode},
                 {"ou_theta", ddpg.ou_theta},
                 {"ou_sigma", ddpg.ou_sigma},
                 {"ou_sigma_final", ddpg.ou_sigma_final},
                 {"seed", ddpg.seed}};
    j["llm"] = {{"base_url", llm.base_url},
                {"model_name", llm.model_name},
                {"api_key_env", llm.api_key_env},
                {"temperature", llm.temperature},
                {"samples_per_iter", llm.samples_per_iter},
                {"max_history", llm.max_history},
                {"timeout_s", llm.timeout_s},
                {"max_retries", llm.max_retries},
                {"retry_backoff_ms", llm.retry_backoff_ms}};
    j["convergence"] = {{"min_improvement", convergence.min_improvement},
                        {"patience", convergence.patience},
                        {"max_iters", convergence.max_iters}};
    return j;
  }

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    const auto get = [](const nlohmann::json& obj, const char* key, auto& into) {
      if (obj.contains(key)) into = obj[key].template get<std::decay_t<decltype(into)>>();
    };
    const auto get_bounds = [](const nlohmann::json& obj, const char* key,
                               model::Bounds& into) {
      if (obj.contains(key)) {
        const auto arr = obj[key];
        if (!arr.is_array() || arr.size() != 2)
          throw ConfigError(std::string("RunConfig: ") + key +
                            " must be a [lo, hi] pair");
        into.lo = arr[0].get<double>();
        into.hi = arr[1].get<double>();
      }
    };
    get(j, "seed", c.seed);
    get(j, "output_dir", c.output_dir);
    if (j.contains("scenario")) {
      const auto& s = j["scenario"];
      get(s, "flow_veh_h", c.scenario.flow_veh_h);
      get(s, "half_length_m", c.scenario.half_length_m);
      get(s, "sensing_range_m", c.scenario.sensing_range_m);
      get(s, "rbgs_per_slot", c.scenario.rbgs_per_slot);
      get(s, "slot_ms", c.scenario.slot_ms);
      get(s, "gap_min_ms", c.scenario.gap_min_ms);
      get_bounds(s, "speed_kmh", c.scenario.speed_kmh);
      get_bounds(s, "density_veh_km", c.scenario.density_veh_km);
      get_bounds(s, "rri_ms", c.scenario.rri_ms);
    }
    if (j.contains("channel")) {
      const auto& s = j["channel"];
      get(s, "carrier_freq_hz", c.channel.carrier_freq_hz);
      get(s, "fading_margin", c.channel.fading_margin);
      get(s, "packet_duration_ms", c.channel.packet_duration_ms);
      get(s, "frames_per_packet", c.channel.frames_per_packet);
      get(s, "doppler_multiplier", c.channel.doppler_multiplier);
    }
    if (j.contains("radio")) {
      const auto& s = j["radio"];
      get(s, "bandwidth_hz", c.radio.bandwidth_hz);
      get(s, "tx_power_w", c.radio.tx_power_w);
      get(s, "channel_gain", c.radio.channel_gain);
      get(s, "noise_psd_w_hz", c.radio.noise_psd_w_hz);
      get(s, "payload_bits", c.radio.payload_bits);
    }
    if (j.contains("reward")) {
      const auto& s = j["reward"];
      get(s, "n1", c.reward.n1);
      get(s, "n2", c.reward.n2);
      get(s, "a1", c.reward.a1);
      get(s, "a2", c.reward.a2);
      get(s, "error_floor", c.reward.error_floor);
      if (s.contains("mode")) {
        const std::string mode = s["mode"].get<std::string>();
        if (mode == "verbatim")
          c.reward.mode = rl::RewardConfig::Mode::verbatim;
        else if (mode == "continuous")
          c.reward.mode = rl::RewardConfig::Mode::continuous;
        else
          throw ConfigError("RunConfig: reward mode must be verbatim or continuous");
      }
    }
    if (j.contains("grid")) {
      const auto& s = j["grid"];
      get(s, "rri_step_ms", c.grid_rri_step_ms);
      get(s, "speed_step_kmh", c.grid_speed_step_kmh);
    }
    if (j.contains("ga")) {
      const auto& s = j["ga"];
      get(s, "population", c.ga.population);
      get(s, "generations", c.ga.generations);
      get(s, "crossover_prob", c.ga.crossover_prob);
      get(s, "mutation_sigma_frac", c.ga.mutation_sigma_frac);
      get(s, "tournament_size", c.ga.tournament_size);
      get(s, "elites", c.ga.elites);
      get(s, "seed", c.ga.seed);
    }
    if (j.contains("ddpg")) {
      const auto& s = j["ddpg"];
      get(s, "gamma", c.ddpg.gamma);
      get(s, "tau", c.ddpg.tau);
      get(s, "actor_lr", c.ddpg.actor_lr);
      get(s, "critic_lr", c.ddpg.critic_lr);
      get(s, "batch", c.ddpg.batch);
      get(s, "buffer_capacity", c.ddpg.buffer_capacity);
      get(s, "episodes", c.ddpg.episodes);
      get(s, "steps_per_episode", c.ddpg.steps_per_episode);
      get(s, "ou_theta", c.ddpg.ou_theta);
      get(s, "ou_sigma", c.ddpg.ou_sigma);
      get(s, "ou_sigma_final", c.ddpg.ou_sigma_final);
      get(s, "seed", c.ddpg.seed);
    }
    if (j.contains("llm")) {
      const auto& s = j["llm"];
      get(s, "base_url", c.llm.base_url);
      get(s, "model_name", c.llm.model_name);
      get(s, "api_key_env", c.llm.api_key_env);
      get(s, "temperature", c.llm.temperature);
      get(s, "samples_per_iter", c.llm.samples_per_iter);
      get(s, "max_history", c.llm.max_history);
      get(s, "timeout_s", c.llm.timeout_s);
      get(s, "max_retries", c.llm.max_retries);
      get(s, "retry_backoff_ms", c.llm.retry_backoff_ms);
    }
    if (j.contains("convergence")) {
      const auto& s = j["convergence"];
      get(s, "min_improvement", c.convergence.min_improvement);
      get(s, "patience", c.convergence.patience);
      get(s, "max_iters", c.convergence.max_iters);
    }
    return c;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("RunConfig: cannot open config file " + path);
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded())
      throw ConfigError("RunConfig: config file is not valid JSON: " + path);
    return from_json(j);
  }
};

}  // namespace aoiopt::config
