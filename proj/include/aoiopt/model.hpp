#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>

#include "aoiopt/errors.hpp"
#include "aoiopt/numerics.hpp"
#include "json.hpp"

// Closed-form AoI pipeline for SPS broadcast on a highway segment: speed and
// density are coupled through a fixed traffic flow, collisions come from the
// shared resource pool, and channel failures from a two-state Markov model of
// Doppler-correlated fading. Public configuration uses km/h, veh/km and ms;
// conversions to veh/m and m/s happen at the boundary of each operation.

namespace aoiopt::model {

inline constexpr double kSpeedOfLightMps = 2.998e8;
inline constexpr double kPi = 3.14159265358979323846;

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
};

struct ScenarioConfig {
  double flow_veh_h = 6000.0;      // Q
  double half_length_m = 1000.0;   // highway spans [-L, L]
  double sensing_range_m = 220.0;  // R_s
  int rbgs_per_slot = 5;           // n_s
  double slot_ms = 1.0;            // t_s
  double gap_min_ms = 1.0;         // t_GAP
  Bounds speed_kmh{30.0, 120.0};
  Bounds density_veh_km{50.0, 200.0};
  Bounds rri_ms{10.0, 100.0};

  void validate() const {
    if (!(flow_veh_h > 0.0) || !(half_length_m > 0.0) || !(sensing_range_m > 0.0) ||
        rbgs_per_slot <= 0 || !(slot_ms > 0.0) || !(gap_min_ms > 0.0))
      throw ConfigError("ScenarioConfig: all scalar parameters must be positive");
    for (const auto* b : {&speed_kmh, &density_veh_km, &rri_ms})
      if (!(b->lo > 0.0) || b->lo > b->hi)
        throw ConfigError("ScenarioConfig: bounds must be positive with lo <= hi");
    // The coupling rho = Q/v must admit at least one feasible speed.
    const double lo = std::max(speed_kmh.lo, flow_veh_h / density_veh_km.hi);
    const double hi = std::min(speed_kmh.hi, flow_veh_h / density_veh_km.lo);
    if (lo > hi)
      throw ConfigError("ScenarioConfig: speed and density bounds admit no feasible speed");
  }
};

struct ChannelConfig {
  double carrier_freq_hz = 5.9e9;  // f_c
  double fading_margin = 10.0;     // F, linear
  double packet_duration_ms = 0.5; // 1/theta
  int frames_per_packet = 10;      // link-layer frames per packet
  double doppler_multiplier = 1.0; // for relative-speed experiments

  void validate() const {
    if (!(carrier_freq_hz > 0.0) || !(fading_margin > 0.0) ||
        !(packet_duration_ms > 0.0) || frames_per_packet < 1 ||
        !(doppler_multiplier > 0.0))
      throw ConfigError("ChannelConfig: invalid parameter");
  }
};

struct RadioConfig {
  double bandwidth_hz = 1.0e7;     // B
  double tx_power_w = 0.2;         // P
  double channel_gain = 3.0e-12;   // G, linear
  double noise_psd_w_hz = 4.0e-21; // N_0
  double payload_bits = 2400.0;    // omega

  void validate() const {
    if (!(bandwidth_hz > 0.0) || !(tx_power_w > 0.0) || !(channel_gain > 0.0) ||
        !(noise_psd_w_hz > 0.0) || !(payload_bits > 0.0))
      throw ConfigError("RadioConfig: all parameters must be strictly positive");
  }
};

// The optimization variable: a (speed, RRI) pair. Density is implied by the
// flow coupling and is not stored.
struct Decision {
  double speed_kmh = 0.0;
  double rri_ms = 0.0;
};

struct MarkovChannel {
  double doppler_hz = 0.0;      // f_d
  double loss_in_adverse = 0.0; // p_e
  double correlation = 0.0;     // rho = J0(2 pi f_d / theta)
  double eta = 0.0;
  double stay_adverse = 0.0;    // p_p
  double stay_ideal = 0.0;      // p_i
};

struct AoiBreakdown {
  double speed_kmh = 0.0;
  double rri_ms = 0.0;
  double density_veh_km = 0.0;
  int sensed_count = 0;     // N_s
  int pool_size = 0;        // N_r
  double mean_collision = 0.0;
  double packet_loss = 0.0;
  double queuing_delay_ms = 0.0;
  double tx_delay_ms = 0.0;
  double aoi_ms = 0.0;

  nlohmann::json to_json() const {
    return {{"speed_kmh", speed_kmh},   {"rri_ms", rri_ms},
            {"density_veh_km", density_veh_km},
            {"n_s", sensed_count},      {"n_r", pool_size},
            {"mean_p_coll", mean_collision},
            {"p_d", packet_loss},       {"t_q_ms", queuing_delay_ms},
            {"t_t_ms", tx_delay_ms},    {"aoi_ms", aoi_ms}};
  }

  static std::string csv_header() {
    return "speed_kmh,rri_ms,density_veh_km,n_s,n_r,mean_p_coll,p_d,t_q_ms,"
           "t_t_ms,aoi_ms";
  }

  std::string csv_row() const {
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "%.10g,%.10g,%.10g,%d,%d,%.10g,%.10g,%.10g,%.10g,%.10g",
                  speed_kmh, rri_ms, density_veh_km, sensed_count, pool_size,
                  mean_collision, packet_loss, queuing_delay_ms, tx_delay_ms,
                  aoi_ms);
    return buf;
  }
};

// rho = Q / v.
inline double density_from_speed(double flow_veh_h, double speed_kmh) {
  if (!(speed_kmh > 0.0)) throw DomainError("density_from_speed: speed must be positive");
  return flow_veh_h / speed_kmh;
}

// m_total = 2 rho L, rounded to the nearest vehicle.
inline long vehicle_count(const ScenarioConfig& cfg, double density_veh_km) {
  if (!cfg.density_veh_km.contains(density_veh_km))
    throw DomainError("vehicle_count: density outside configured bounds");
  return std::lround(2.0 * (density_veh_km / 1000.0) * cfg.half_length_m);
}

// N_s = 2 rho R_s, floored to an even integer >= 2 so the collision sums run
// over an integer N_s/2.
inline int sensed_neighbors(double density_veh_km, double sensing_range_m) {
  if (!(density_veh_km > 0.0) || !(sensing_range_m > 0.0))
    throw DomainError("sensed_neighbors: arguments must be positive");
  int n = static_cast<int>(std::floor(2.0 * (density_veh_km / 1000.0) * sensing_range_m));
  if (n % 2 != 0) --n;
  if (n < 2)
    throw DegenerateScenarioError("sensed_neighbors: fewer than two neighbors in range");
  return n;
}

// N_r = RRI n_s / t_s, the RBGs available in one selection window.
inline int pool_size(double rri_ms, const ScenarioConfig& cfg) {
  if (!cfg.rri_ms.contains(rri_ms))
    throw DomainError("pool_size: rri outside configured bounds");
  return static_cast<int>(std::floor(rri_ms * cfg.rbgs_per_slot / cfg.slot_ms));
}

// P_coll = 1 - (1 - 1/(N_r - N_s/2))^m for the m-th nearest transmitter.
inline double collision_probability(int m, int pool, int sensed) {
  if (m < 1 || m > sensed / 2)
    throw DomainError("collision_probability: m must satisfy 1 <= m <= sensed/2");
  const double free_rbgs = pool - sensed / 2.0;
  if (free_rbgs < 2.0)
    throw ResourceExhaustionError(
        "collision_probability: selection window leaves fewer than two free RBGs");
  return 1.0 - std::pow(1.0 - 1.0 / free_rbgs, m);
}

// E[T_a] = RRI P / (1 - P): mean of the geometric number of lost rounds.
inline double extra_collision_delay(double rri_ms, double p_coll) {
  if (!(p_coll >= 0.0)) throw DomainError("extra_collision_delay: negative probability");
  if (p_coll >= 1.0)
    throw DivergenceError("extra_collision_delay: p_coll >= 1 diverges");
  return rri_ms * p_coll / (1.0 - p_coll);
}

// Derived two-state channel for a given vehicle speed.
inline MarkovChannel markov_channel(double speed_kmh, const ChannelConfig& ch) {
  if (!(speed_kmh > 0.0)) throw DomainError("markov_channel: speed must be positive");
  ch.validate();
  MarkovChannel mc;
  const double v_mps = speed_kmh / 3.6;
  mc.doppler_hz = ch.carrier_freq_hz * ch.doppler_multiplier * v_mps / kSpeedOfLightMps;
  const double inv_f = 1.0 / ch.fading_margin;
  mc.loss_in_adverse = 1.0 - std::exp(-inv_f);
  const double theta_hz = 1000.0 / ch.packet_duration_ms;
  mc.correlation = numerics::bessel_j0(2.0 * kPi * mc.doppler_hz / theta_hz);
  const double one_minus_rho2 = 1.0 - mc.correlation * mc.correlation;
  if (one_minus_rho2 < 1e-12)
    throw DegenerateChannelError("markov_channel: correlation too close to one");
  mc.eta = std::sqrt(2.0 / (ch.fading_margin * one_minus_rho2));
  // Q_1 depends on its first argument only through its square, so a negative
  // correlation enters as |rho| eta.
  const double a = std::fabs(mc.correlation) * mc.eta;
  const double pp = (numerics::marcum_q1(a, mc.eta) - numerics::marcum_q1(mc.eta, a)) /
                        (std::exp(inv_f) - 1.0) +
                    1.0;
  const double pi = (1.0 - mc.loss_in_adverse * (2.0 - pp)) / (1.0 - mc.loss_in_adverse);
  const auto snap_unit = [](double p, const char* name) {
    if (p < -1e-9 || p > 1.0 + 1e-9)
      throw InvalidChannelError(std::string("markov_channel: ") + name +
                                " outside [0, 1]");
    return std::clamp(p, 0.0, 1.0);
  };
  mc.stay_adverse = snap_unit(pp, "stay_adverse");
  mc.stay_ideal = snap_unit(pi, "stay_ideal");
  return mc;
}

// Failure recursion l_i = p_i l_{i-1} + (1 - p_i), l_0 = 0, then the
// stationary mixture p_d = pi_adverse + pi_ideal l_frames (v_L = 1).
inline double packet_loss_probability(const MarkovChannel& mc, int frames) {
  if (frames < 1) throw DomainError("packet_loss_probability: frames must be >= 1");
  const double pp = mc.stay_adverse;
  const double pi = mc.stay_ideal;
  if (pp < 0.0 || pp > 1.0 || pi < 0.0 || pi > 1.0)
    throw DomainError("packet_loss_probability: stay probabilities outside [0, 1]");
  if (pp >= 1.0 || pi >= 1.0)
    throw AbsorbingChainError("packet_loss_probability: chain has an absorbing state");
  double l = 0.0;
  for (int i = 0; i < frames; ++i) l = pi * l + (1.0 - pi);
  const double w_adverse = (1.0 - pi) / (2.0 - pp - pi);
  const double w_ideal = 1.0 / (1.0 + (1.0 - pi) / (1.0 - pp));
  return w_adverse + w_ideal * l;
}

// Feasible speed interval of the optimization problem: speed bounds
// intersected with the speeds whose implied density stays inside the density
// bounds.
inline Bounds feasible_speed_bounds(const ScenarioConfig& cfg) {
  const double lo = std::max(cfg.speed_kmh.lo, cfg.flow_veh_h / cfg.density_veh_km.hi);
  const double hi = std::min(cfg.speed_kmh.hi, cfg.flow_veh_h / cfg.density_veh_km.lo);
  if (lo > hi)
    throw InfeasibleSpaceError("feasible_speed_bounds: empty feasible interval");
  return {lo, hi};
}

inline void check_feasible(const Decision& d, const ScenarioConfig& cfg) {
  const auto fmt = [](const char* what, double v, const char* rel, double bound) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "infeasible decision: %s %.10g %s %.10g", what, v,
                  rel, bound);
    return std::string(buf);
  };
  if (d.rri_ms < cfg.rri_ms.lo)
    throw FeasibilityError(fmt("rri_ms", d.rri_ms, "below minimum", cfg.rri_ms.lo));
  if (d.rri_ms > cfg.rri_ms.hi)
    throw FeasibilityError(fmt("rri_ms", d.rri_ms, "above maximum", cfg.rri_ms.hi));
  if (d.speed_kmh < cfg.speed_kmh.lo)
    throw FeasibilityError(fmt("speed_kmh", d.speed_kmh, "below minimum", cfg.speed_kmh.lo));
  if (d.speed_kmh > cfg.speed_kmh.hi)
    throw FeasibilityError(fmt("speed_kmh", d.speed_kmh, "above maximum", cfg.speed_kmh.hi));
  const double density = density_from_speed(cfg.flow_veh_h, d.speed_kmh);
  if (density < cfg.density_veh_km.lo)
    throw FeasibilityError(
        fmt("implied density_veh_km", density, "below minimum", cfg.density_veh_km.lo));
  if (density > cfg.density_veh_km.hi)
    throw FeasibilityError(
        fmt("implied density_veh_km", density, "above maximum", cfg.density_veh_km.hi));
}

namespace detail {

struct QueueTerms {
  double t_q_ms = 0.0;
  double mean_collision = 0.0;
  int sensed = 0;
  int pool = 0;
};

inline QueueTerms queue_terms(const Decision& d, const ScenarioConfig& cfg, double p_d) {
  if (!(p_d >= 0.0)) throw DomainError("queuing_delay: negative packet loss");
  if (p_d >= 1.0) throw DivergenceError("queuing_delay: p_d >= 1 diverges");
  QueueTerms qt;
  const double density = density_from_speed(cfg.flow_veh_h, d.speed_kmh);
  qt.sensed = sensed_neighbors(density, cfg.sensing_range_m);
  qt.pool = pool_size(d.rri_ms, cfg);
  const double blind = std::max(cfg.gap_min_ms, d.rri_ms / 2.0) * p_d / (1.0 - p_d);
  const double inflate = 1.0 / (1.0 - p_d * p_d);
  double sum = 0.0;
  double coll_sum = 0.0;
  const int half = qt.sensed / 2;
  for (int m = 1; m <= half; ++m) {
    const double pc = collision_probability(m, qt.pool, qt.sensed);
    coll_sum += pc;
    sum += d.rri_ms + extra_collision_delay(d.rri_ms, pc) * inflate + blind;
  }
  qt.t_q_ms = 2.0 / qt.sensed * sum;
  qt.mean_collision = coll_sum / half;
  return qt;
}

}  // namespace detail

// T_q of the full model: per-neighbor collision delay inflated by blind
// retransmission failures, plus the retransmission wait itself, averaged over
// the sensed neighborhood. With p_d = 0 this reduces to the collisions-only
// queuing time.
inline double queuing_delay(const Decision& d, const ScenarioConfig& cfg, double p_d) {
  check_feasible(d, cfg);
  return detail::queue_terms(d, cfg, p_d).t_q_ms;
}

// T_t = omega / (B log2(1 + SNR)), in milliseconds.
inline double transmission_delay(const RadioConfig& r) {
  r.validate();
  const double snr = r.tx_power_w * r.channel_gain / (r.noise_psd_w_hz * r.bandwidth_hz);
  return r.payload_bits / (r.bandwidth_hz * std::log2(1.0 + snr)) * 1000.0;
}

// Full pipeline. force_packet_loss substitutes p_d (test hook for the
// collisions-only degeneracy); everything else is computed from the configs.
inline AoiBreakdown aoi(const Decision& d, const ScenarioConfig& cfg,
                        const ChannelConfig& ch, const RadioConfig& radio,
                        std::optional<double> force_packet_loss = std::nullopt) {
  cfg.validate();
  check_feasible(d, cfg);
  AoiBreakdown b;
  b.speed_kmh = d.speed_kmh;
  b.rri_ms = d.rri_ms;
  b.density_veh_km = density_from_speed(cfg.flow_veh_h, d.speed_kmh);
  double p_d;
  if (force_packet_loss.has_value()) {
    p_d = *force_packet_loss;
  } else {
    const MarkovChannel mc = markov_channel(d.speed_kmh, ch);
    p_d = packet_loss_probability(mc, ch.frames_per_packet);
  }
  const auto qt = detail::queue_terms(d, cfg, p_d);
  b.sensed_count = qt.sensed;
  b.pool_size = qt.pool;
  b.mean_collision = qt.mean_collision;
  b.packet_loss = p_d;
  b.queuing_delay_ms = qt.t_q_ms;
  b.tx_delay_ms = transmission_delay(radio);
  b.aoi_ms = b.queuing_delay_ms + b.tx_delay_ms;
  return b;
}

}  // namespace aoiopt::model
