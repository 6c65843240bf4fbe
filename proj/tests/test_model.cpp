#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "aoiopt/model.hpp"

using namespace aoiopt;
using namespace aoiopt::model;

namespace {

ScenarioConfig default_scenario() { return ScenarioConfig{}; }

// Term-by-term oracle for the queuing time, written directly from the
// formulas rather than through the library helpers.
double tq_oracle(double rri, double density_veh_km, double rs_m, int ns, double ts,
                 double tgap, double pd) {
  int sensed = static_cast<int>(std::floor(2.0 * density_veh_km / 1000.0 * rs_m));
  if (sensed % 2) --sensed;
  const int pool = static_cast<int>(std::floor(rri * ns / ts));
  double sum = 0.0;
  for (int m = 1; m <= sensed / 2; ++m) {
    const double pc = 1.0 - std::pow(1.0 - 1.0 / (pool - sensed / 2.0), m);
    sum += rri + (rri * pc / (1.0 - pc)) / (1.0 - pd * pd) +
           std::max(tgap, rri / 2.0) * pd / (1.0 - pd);
  }
  return 2.0 / sensed * sum;
}

// Collisions-only queuing time (the p_d = 0 degeneracy).
double tq_collisions_only_oracle(double rri, double density_veh_km, double rs_m,
                                 int ns, double ts) {
  int sensed = static_cast<int>(std::floor(2.0 * density_veh_km / 1000.0 * rs_m));
  if (sensed % 2) --sensed;
  const int pool = static_cast<int>(std::floor(rri * ns / ts));
  double sum = 0.0;
  for (int m = 1; m <= sensed / 2; ++m) {
    const double pc = 1.0 - std::pow(1.0 - 1.0 / (pool - sensed / 2.0), m);
    sum += rri + rri * pc / (1.0 - pc);
  }
  return 2.0 / sensed * sum;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LineFit f;
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean = sy / n;
  for (size_t i = 0; i < x.size(); ++i) {
    const double pred = f.slope * x[i] + f.intercept;
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  f.r2 = 1.0 - ss_res / ss_tot;
  return f;
}

}  // namespace

TEST_CASE("vehicle_count follows 2 rho L", "[model]") {
  ScenarioConfig cfg = default_scenario();
  REQUIRE(vehicle_count(cfg, 100.0) == 200);
  cfg.half_length_m = 500.0;
  REQUIRE(vehicle_count(cfg, 50.0) == 50);
  cfg.half_length_m = 1000.0;
  REQUIRE(vehicle_count(cfg, 50.0) == 100);  // doubling L doubles the count
  REQUIRE_THROWS_AS(vehicle_count(cfg, 10.0), DomainError);
}

TEST_CASE("density_from_speed is the flow coupling", "[model]") {
  REQUIRE(density_from_speed(6000.0, 120.0) == Catch::Approx(50.0).epsilon(1e-15));
  REQUIRE(density_from_speed(6000.0, 30.0) == Catch::Approx(200.0).epsilon(1e-15));
  REQUIRE_THROWS_AS(density_from_speed(6000.0, 0.0), DomainError);
  // Round-trip and exact-coupling property.
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> sp(30.0, 120.0);
  for (int i = 0; i < 100; ++i) {
    const double v = sp(gen);
    const double rho = density_from_speed(6000.0, v);
    REQUIRE(rho * v == Catch::Approx(6000.0).epsilon(1e-9));
    REQUIRE(density_from_speed(6000.0, 6000.0 / rho) == Catch::Approx(rho).epsilon(1e-12));
  }
}

TEST_CASE("sensed_neighbors floors to an even count", "[model]") {
  REQUIRE(sensed_neighbors(100.0, 500.0) == 100);
  REQUIRE(sensed_neighbors(50.0, 500.0) == 50);
  REQUIRE(sensed_neighbors(200.0, 500.0) == 200);  // doubling density doubles N_s
  REQUIRE(sensed_neighbors(51.0, 500.0) == 50);    // 51 floored to even
  REQUIRE_THROWS_AS(sensed_neighbors(1.0, 500.0), DegenerateScenarioError);
  REQUIRE_THROWS_AS(sensed_neighbors(-5.0, 500.0), DomainError);
}

TEST_CASE("pool_size counts RBGs in the selection window", "[model]") {
  ScenarioConfig cfg = default_scenario();
  REQUIRE(pool_size(100.0, cfg) == 500);
  REQUIRE(pool_size(10.0, cfg) == 50);
  cfg.rbgs_per_slot = 1;
  REQUIRE(pool_size(60.0, cfg) == 60);  // n_s = t_s per ms: N_r = rri
  REQUIRE_THROWS_AS(pool_size(5.0, cfg), DomainError);
}

TEST_CASE("collision_probability values and monotonicity", "[model]") {
  REQUIRE(collision_probability(1, 500, 100) == Catch::Approx(1.0 / 450.0).epsilon(1e-13));
  // Frozen from an independent script: 1 - (449/450)^50.
  REQUIRE(collision_probability(50, 500, 100) ==
          Catch::Approx(0.10527131427443759).epsilon(1e-13));
  // Large-pool limit.
  REQUIRE(collision_probability(10, 100000000, 100) < 1e-6);
  double prev = 0.0;
  for (int m = 1; m <= 50; ++m) {
    const double p = collision_probability(m, 500, 100);
    REQUIRE(p > prev);
    REQUIRE(p < 1.0);
    prev = p;
  }
  for (int pool : {160, 200, 300, 500, 1000}) {
    // strictly decreasing in pool at fixed m
    REQUIRE(collision_probability(20, pool, 100) >
            collision_probability(20, pool + 1, 100));
  }
  REQUIRE_THROWS_AS(collision_probability(0, 500, 100), DomainError);
  REQUIRE_THROWS_AS(collision_probability(51, 500, 100), DomainError);
  REQUIRE_THROWS_AS(collision_probability(10, 51, 100), ResourceExhaustionError);
}

TEST_CASE("extra_collision_delay geometric mean", "[model]") {
  REQUIRE(extra_collision_delay(37.0, 0.0) == 0.0);
  REQUIRE(extra_collision_delay(20.0, 0.5) == Catch::Approx(20.0).epsilon(1e-15));
  REQUIRE(extra_collision_delay(100.0, 0.1) == Catch::Approx(100.0 / 9.0).epsilon(1e-13));
  REQUIRE_THROWS_AS(extra_collision_delay(20.0, 1.0), DivergenceError);
  REQUIRE_THROWS_AS(extra_collision_delay(20.0, -0.1), DomainError);
}

TEST_CASE("markov_channel derived quantities", "[model]") {
  ChannelConfig ch;
  const MarkovChannel mc = markov_channel(100.0, ch);
  REQUIRE(mc.doppler_hz == Catch::Approx(546.660736787488).margin(1e-6));
  REQUIRE(mc.loss_in_adverse == Catch::Approx(0.09516258196404048).epsilon(1e-13));
  REQUIRE(std::fabs(mc.correlation) <= 1.0);
  REQUIRE(mc.eta > 0.0);
  REQUIRE(mc.stay_adverse >= 0.0);
  REQUIRE(mc.stay_adverse <= 1.0);
  REQUIRE(mc.stay_ideal >= 0.0);
  REQUIRE(mc.stay_ideal <= 1.0);
}

TEST_CASE("markov_channel degenerate correlation", "[model]") {
  ChannelConfig ch;
  // Nearly zero Doppler relative to the packet duration: rho -> 1.
  REQUIRE_THROWS_AS(markov_channel(3e-5, ch), DegenerateChannelError);
  REQUIRE_THROWS_AS(markov_channel(0.0, ch), DomainError);
}

TEST_CASE("stationary weights of the chain sum to one", "[model]") {
  for (double v : {30.0, 47.0, 61.5, 80.0, 99.0, 120.0}) {
    const MarkovChannel mc = markov_channel(v, ChannelConfig{});
    const double w_adv = (1.0 - mc.stay_ideal) / (2.0 - mc.stay_adverse - mc.stay_ideal);
    const double w_idl =
        1.0 / (1.0 + (1.0 - mc.stay_ideal) / (1.0 - mc.stay_adverse));
    REQUIRE(w_adv + w_idl == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("packet_loss_probability recursion and weights", "[model]") {
  MarkovChannel mc;
  mc.stay_adverse = 0.6;
  mc.stay_ideal = 0.9;
  // Frozen from a 12-line oracle script unrolling the recursion and weights.
  REQUIRE(packet_loss_probability(mc, 10) ==
          Catch::Approx(0.7210572479199999).epsilon(1e-13));
  // One unrolling: l_1 = 1 - p_i.
  const double w_adv = 0.2, w_idl = 0.8;
  REQUIRE(packet_loss_probability(mc, 1) ==
          Catch::Approx(w_adv + w_idl * (1.0 - 0.9)).epsilon(1e-13));
  // Near-perfect channel: p_i -> 1, p_p -> 0 gives p_d -> 0.
  MarkovChannel good;
  good.stay_adverse = 0.0;
  good.stay_ideal = 1.0 - 1e-9;
  REQUIRE(packet_loss_probability(good, 10) < 1e-7);
  MarkovChannel absorbing;
  absorbing.stay_adverse = 1.0;
  absorbing.stay_ideal = 0.5;
  REQUIRE_THROWS_AS(packet_loss_probability(absorbing, 10), AbsorbingChainError);
  absorbing.stay_adverse = 0.5;
  absorbing.stay_ideal = 1.0;
  REQUIRE_THROWS_AS(packet_loss_probability(absorbing, 10), AbsorbingChainError);
  REQUIRE_THROWS_AS(packet_loss_probability(mc, 0), DomainError);
}

TEST_CASE("failure recursion is monotone in frames and tends to one", "[model]") {
  MarkovChannel mc;
  mc.stay_adverse = 0.45;
  mc.stay_ideal = 0.88;
  double l = 0.0;
  double prev_pd = 0.0;
  for (int i = 1; i <= 400; ++i) {
    l = mc.stay_ideal * l + (1.0 - mc.stay_ideal);
    REQUIRE(l >= 0.0);
    REQUIRE(l <= 1.0);
    const double pd = packet_loss_probability(mc, i);
    const double w_adv = (1.0 - mc.stay_ideal) / (2.0 - mc.stay_adverse - mc.stay_ideal);
    const double w_idl = 1.0 - w_adv;
    REQUIRE(pd == Catch::Approx(w_adv + w_idl * l).margin(1e-12));
    REQUIRE(pd >= prev_pd - 1e-15);
    prev_pd = pd;
  }
  REQUIRE(l == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("queuing_delay matches the term-by-term oracle", "[model]") {
  // rri 50 ms, density 100 veh/km (speed 60 at flow 6000), R_s 500 m.
  ScenarioConfig cfg = default_scenario();
  cfg.sensing_range_m = 500.0;
  const Decision d{60.0, 50.0};
  const double expect = tq_oracle(50.0, 100.0, 500.0, 5, 1.0, 1.0, 0.2);
  REQUIRE(expect == Catch::Approx(63.50643129538985).epsilon(1e-13));
  REQUIRE(queuing_delay(d, cfg, 0.2) == Catch::Approx(expect).epsilon(1e-13));
  REQUIRE(queuing_delay(d, cfg, 0.0) >= d.rri_ms);
  REQUIRE_THROWS_AS(queuing_delay(d, cfg, 1.0), DivergenceError);
}

TEST_CASE("queuing_delay degenerates to the collisions-only form at p_d = 0",
          "[model]") {
  const ScenarioConfig cfg = default_scenario();
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> sp(30.0, 120.0);
  std::uniform_real_distribution<double> rr(10.0, 100.0);
  for (int i = 0; i < 100; ++i) {
    const Decision d{sp(gen), rr(gen)};
    const double got = queuing_delay(d, cfg, 0.0);
    const double expect = tq_collisions_only_oracle(
        d.rri_ms, 6000.0 / d.speed_kmh, cfg.sensing_range_m, cfg.rbgs_per_slot,
        cfg.slot_ms);
    REQUIRE(got == Catch::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("transmission_delay Shannon form", "[model]") {
  RadioConfig r;  // defaults give SNR = 15 exactly
  REQUIRE(transmission_delay(r) == Catch::Approx(0.06).epsilon(1e-13));
  r.payload_bits = 4800.0;
  REQUIRE(transmission_delay(r) == Catch::Approx(0.12).epsilon(1e-13));  // linear in omega
  // SNR = 1: T_t = omega / B seconds.
  RadioConfig unit;
  unit.tx_power_w = 1.0;
  unit.channel_gain = 4e-14;
  REQUIRE(unit.tx_power_w * unit.channel_gain /
              (unit.noise_psd_w_hz * unit.bandwidth_hz) ==
          Catch::Approx(1.0).epsilon(1e-13));
  REQUIRE(transmission_delay(unit) ==
          Catch::Approx(unit.payload_bits / unit.bandwidth_hz * 1000.0).epsilon(1e-13));
  RadioConfig bad;
  bad.bandwidth_hz = 0.0;
  REQUIRE_THROWS_AS(transmission_delay(bad), ConfigError);
}

TEST_CASE("aoi pipeline composes the delay terms", "[model]") {
  const ScenarioConfig cfg = default_scenario();
  const ChannelConfig ch;
  const RadioConfig radio;
  const AoiBreakdown b = aoi({90.0, 40.0}, cfg, ch, radio);
  REQUIRE(b.aoi_ms == b.queuing_delay_ms + b.tx_delay_ms);  // exact identity
  REQUIRE(b.packet_loss >= 0.0);
  REQUIRE(b.packet_loss <= 1.0);
  REQUIRE(b.mean_collision >= 0.0);
  REQUIRE(b.mean_collision <= 1.0);
  REQUIRE(b.density_veh_km == Catch::Approx(6000.0 / 90.0).epsilon(1e-14));
  // Deterministic: bitwise identical on repeated evaluation.
  const AoiBreakdown b2 = aoi({90.0, 40.0}, cfg, ch, radio);
  REQUIRE(b.aoi_ms == b2.aoi_ms);
  REQUIRE(b.packet_loss == b2.packet_loss);
}

TEST_CASE("aoi test hook reproduces the collisions-only model", "[model]") {
  const ScenarioConfig cfg = default_scenario();
  const AoiBreakdown b = aoi({75.0, 30.0}, cfg, ChannelConfig{}, RadioConfig{}, 0.0);
  const double expect =
      tq_collisions_only_oracle(30.0, 80.0, cfg.sensing_range_m, 5, 1.0);
  REQUIRE(b.queuing_delay_ms == Catch::Approx(expect).epsilon(1e-12));
  REQUIRE(b.packet_loss == 0.0);
}

TEST_CASE("low-speed high-density AoI exceeds high-speed AoI at small RRI",
          "[model]") {
  const ScenarioConfig cfg = default_scenario();
  const ChannelConfig ch;
  const RadioConfig radio;
  const double slow = aoi({30.0, 20.0}, cfg, ch, radio).aoi_ms;
  const double fast = aoi({120.0, 20.0}, cfg, ch, radio).aoi_ms;
  REQUIRE(slow > fast);
}

TEST_CASE("aoi rejects infeasible decisions naming the bound", "[model]") {
  const ScenarioConfig cfg = default_scenario();
  REQUIRE_THROWS_WITH(aoi({20.0, 50.0}, cfg, ChannelConfig{}, RadioConfig{}),
                      Catch::Matchers::ContainsSubstring("speed_kmh") &&
                          Catch::Matchers::ContainsSubstring("below minimum"));
  REQUIRE_THROWS_AS(aoi({130.0, 50.0}, cfg, ChannelConfig{}, RadioConfig{}),
                    FeasibilityError);
  REQUIRE_THROWS_AS(aoi({60.0, 5.0}, cfg, ChannelConfig{}, RadioConfig{}),
                    FeasibilityError);
  REQUIRE_THROWS_AS(aoi({60.0, 101.0}, cfg, ChannelConfig{}, RadioConfig{}),
                    FeasibilityError);
  // Density coupling violation with plain speed bounds satisfied.
  ScenarioConfig narrow = cfg;
  narrow.density_veh_km = {60.0, 150.0};
  REQUIRE_THROWS_WITH(aoi({110.0, 50.0}, narrow, ChannelConfig{}, RadioConfig{}),
                      Catch::Matchers::ContainsSubstring("density"));
}

TEST_CASE("AoI vs RRI is linear at large RRI with speed-ordered slopes", "[model]") {
  const ScenarioConfig cfg = default_scenario();
  const ChannelConfig ch;
  const RadioConfig radio;
  std::vector<double> rris;
  for (double r = 60.0; r <= 100.0; r += 5.0) rris.push_back(r);
  LineFit slow_fit, fast_fit;
  for (double v : {60.0, 120.0}) {
    std::vector<double> ys;
    for (double r : rris) ys.push_back(aoi({v, r}, cfg, ch, radio).aoi_ms);
    const LineFit f = fit_line(rris, ys);
    REQUIRE(f.r2 > 0.99);
    (v == 60.0 ? slow_fit : fast_fit) = f;
  }
  REQUIRE(fast_fit.slope > slow_fit.slope);
}

TEST_CASE("breakdown invariants over random feasible decisions", "[model]") {
  const ScenarioConfig cfg = default_scenario();
  const ChannelConfig ch;
  const RadioConfig radio;
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> sp(30.0, 120.0);
  std::uniform_real_distribution<double> rr(10.0, 100.0);
  for (int i = 0; i < 200; ++i) {
    const Decision d{sp(gen), rr(gen)};
    const AoiBreakdown b = aoi(d, cfg, ch, radio);
    REQUIRE(b.aoi_ms == b.queuing_delay_ms + b.tx_delay_ms);
    REQUIRE(b.queuing_delay_ms >= d.rri_ms);
    REQUIRE(b.packet_loss >= 0.0);
    REQUIRE(b.packet_loss <= 1.0);
    REQUIRE(b.mean_collision >= 0.0);
    REQUIRE(b.mean_collision <= 1.0);
    REQUIRE(b.sensed_count >= 2);
    REQUIRE(b.sensed_count % 2 == 0);
  }
}

TEST_CASE("scenario validation", "[model]") {
  ScenarioConfig cfg = default_scenario();
  REQUIRE_NOTHROW(cfg.validate());
  cfg.flow_veh_h = -1.0;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  cfg = default_scenario();
  cfg.density_veh_km = {300.0, 400.0};  // unreachable at any allowed speed
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  cfg = default_scenario();
  cfg.speed_kmh = {120.0, 30.0};
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("breakdown serialization", "[model]") {
  const AoiBreakdown b =
      aoi({60.0, 50.0}, default_scenario(), ChannelConfig{}, RadioConfig{});
  const auto j = b.to_json();
  REQUIRE(j["aoi_ms"].get<double>() == b.aoi_ms);
  REQUIRE(j["t_q_ms"].get<double>() == b.queuing_delay_ms);
  REQUIRE(j["n_s"].get<int>() == b.sensed_count);
  const std::string header = AoiBreakdown::csv_header();
  const std::string row = b.csv_row();
  REQUIRE(std::count(header.begin(), header.end(), ',') == 9);
  REQUIRE(std::count(row.begin(), row.end(), ',') == 9);
  REQUIRE(header.substr(0, 9) == "speed_kmh");
}
