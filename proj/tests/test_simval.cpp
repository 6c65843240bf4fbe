#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "aoiopt/simval.hpp"

using namespace aoiopt;
using namespace aoiopt::simval;

namespace {

model::MarkovChannel chain(double pp, double pi) {
  model::MarkovChannel mc;
  mc.stay_adverse = pp;
  mc.stay_ideal = pi;
  return mc;
}

double failure_recursion(double pi, int frames) {
  double l = 0.0;
  for (int i = 0; i < frames; ++i) l = pi * l + (1.0 - pi);
  return l;
}

}  // namespace

TEST_CASE("mc_extra_delay matches the geometric mean", "[simval]") {
  McConfig mc;
  mc.samples = 1000000;
  mc.seed = 42;
  REQUIRE(mc_extra_delay(20.0, 0.0, mc) == 0.0);
  const double est = mc_extra_delay(20.0, 0.5, mc);
  REQUIRE(est == Catch::Approx(20.0).epsilon(0.01));
  // Determinism: equal seeds give bit-identical output.
  REQUIRE(mc_extra_delay(20.0, 0.5, mc) == est);
  mc.seed = 43;
  REQUIRE(mc_extra_delay(20.0, 0.5, mc) != est);
  REQUIRE_THROWS_AS(mc_extra_delay(20.0, 1.0, mc), DivergenceError);
  REQUIRE_THROWS_AS(mc_extra_delay(20.0, -0.2, mc), DomainError);
}

TEST_CASE("mc_extra_delay small-sample determinism with p = 0", "[simval]") {
  McConfig mc;
  mc.samples = 10;
  for (std::uint64_t seed : {1ULL, 9ULL, 77ULL}) {
    mc.seed = seed;
    REQUIRE(mc_extra_delay(50.0, 0.0, mc) == 0.0);
  }
}

TEST_CASE("mc_gilbert estimates stationary split and first failure", "[simval]") {
  McConfig mc;
  mc.samples = 1000000;
  mc.seed = 7;
  const auto ch = chain(0.45, 0.8);
  const auto est = mc_gilbert(ch, 10, mc);
  const double expect_adv = (1.0 - 0.8) / (2.0 - 0.45 - 0.8);
  REQUIRE(est.stationary_adverse == Catch::Approx(expect_adv).epsilon(0.01));
  REQUIRE(est.first_failure ==
          Catch::Approx(failure_recursion(0.8, 10)).epsilon(0.01));
  // Determinism.
  const auto est2 = mc_gilbert(ch, 10, mc);
  REQUIRE(est2.stationary_adverse == est.stationary_adverse);
  REQUIRE(est2.first_failure == est.first_failure);
}

TEST_CASE("mc_gilbert never leaves ideal when p_i is one minus epsilon", "[simval]") {
  McConfig mc;
  mc.samples = 20000;
  mc.seed = 3;
  const auto est = mc_gilbert(chain(0.5, 1.0 - 1e-15), 5, mc);
  REQUIRE(est.first_failure == 0.0);
  REQUIRE_THROWS_AS(mc_gilbert(chain(0.5, 1.0), 5, mc), AbsorbingChainError);
  REQUIRE_THROWS_AS(mc_gilbert(chain(1.0, 0.5), 5, mc), AbsorbingChainError);
  REQUIRE_THROWS_AS(mc_gilbert(chain(0.5, 0.9), 0, mc), DomainError);
}

TEST_CASE("growing the sample count shrinks the average error", "[simval]") {
  // Expected gap scales as 1/sqrt(n): 16x the samples gives a 4x reduction,
  // asserted here with a factor-two margin over ten seeds.
  const double analytic = 20.0;  // rri 20, p 0.5
  double gap_small = 0.0, gap_big = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    McConfig a{40000, seed};
    McConfig b{640000, seed + 4000};
    gap_small += std::fabs(mc_extra_delay(20.0, 0.5, a) - analytic);
    gap_big += std::fabs(mc_extra_delay(20.0, 0.5, b) - analytic);
  }
  REQUIRE(gap_big <= 0.5 * gap_small);
}
