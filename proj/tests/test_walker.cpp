#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "striplab/presets.hpp"
#include "striplab/stats.hpp"
#include "striplab/walker.hpp"

using namespace striplab;

namespace {

EnvironmentSpec deterministic_right() {
  EnvironmentSpec spec;
  spec.name = "det-right";
  spec.m = 1;
  spec.support = {width1_atom(1.0, 0.0, 0.0, 1.0)};
  spec.ellipticity = {0.0, 0.0};  // validated loosely; Q is identically 0
  return spec;
}

}  // namespace

TEST_CASE("step_walk on deterministic rows") {
  // p = 1: only structural validation matters, so construct the env by hand
  EnvironmentSpec spec = deterministic_right();
  // eps 0 demands strictly positive (I-R)^{-1}Q; this triple is a unit-test
  // device, so bypass spec validation by building the environment around a
  // support triple that narrowly passes: q = 1e-6
  spec.support = {width1_atom(1.0 - 1e-6, 1e-6, 0.0, 1.0)};
  Environment env(spec, {-4, 8});
  Rng rng(1, stream::kWalk, 0);
  SiteState s{0, 1};
  s = step_walk(env, s, rng);
  CHECK(s.layer == 1);
  CHECK(s.rung == 1);
}

TEST_CASE("absorbing stay-row keeps the state in place") {
  // R with unit diagonal is invalid for C2* but exercises the kernel
  MatrixTriple t{Matrix(2, 2, 0.0), Matrix(2, 2, 0.0), Matrix(2, 2, 0.0), 2};
  t.R(0, 0) = 1.0;
  t.R(1, 1) = 1.0;
  const auto rows = Environment::build_step_rows(t);
  std::int64_t layer = 0;
  int rung = 2;
  const std::span<const double> row{rows.data() + (2 - 1) * 6, 6};
  step_state(row, 2, 0.73, layer, rung);
  CHECK(layer == 0);
  CHECK(rung == 2);
}

TEST_CASE("one-step frequencies match the kernel row") {
  EnvironmentSpec spec = preset_spec("two-point-s345", 31);
  Environment env = sample_environment(spec, {-4, 4});
  const MatrixTriple& t = env.at(0);
  const double probs[3] = {t.Q(0, 0), t.R(0, 0), t.P(0, 0)};
  std::int64_t counts[3] = {0, 0, 0};
  const std::int64_t draws = 100000;
  for (std::int64_t r = 0; r < draws; ++r) {
    Rng rng(11, stream::kWalk, static_cast<std::uint64_t>(r));
    const SiteState s = step_walk(env, SiteState{0, 1}, rng);
    counts[s.layer + 1 - 0]++;  // -1, 0, +1 -> 0, 1, 2
  }
  for (int c = 0; c < 3; ++c) {
    const double freq = static_cast<double>(counts[c]) / static_cast<double>(draws);
    const double se = std::sqrt(probs[c] * (1.0 - probs[c]) / static_cast<double>(draws));
    CHECK(std::fabs(freq - probs[c]) < 3.0 * se);
  }
}

TEST_CASE("run_to_layer on the ballistic constant chain") {
  EnvironmentSpec spec = deterministic_right();
  spec.support = {width1_atom(1.0 - 1e-9, 1e-9, 0.0, 1.0)};
  Environment env(spec, {-4, 64});
  Rng rng(5, stream::kWalk, 0);
  WalkOptions opts;
  opts.record_occupation = true;
  const WalkSummary s = run_to_layer(env, {0, 1}, 50, opts, rng);
  CHECK(s.steps == 50);
  CHECK(!s.capped);
  for (std::int64_t j = 1; j <= 50; ++j)
    CHECK(s.hitting_times[static_cast<std::size_t>(j - 1)] == j);
  SUBCASE("occupation counts sum to steps + 1") {
    std::int64_t total = 0;
    for (const auto& [site, c] : s.occupation) total += c;
    CHECK(total == s.steps + 1);
  }
  SUBCASE("cap produces a flag, not an exception") {
    Rng rng2(5, stream::kWalk, 1);
    WalkOptions tight;
    tight.cap = 10;
    const WalkSummary c = run_to_layer(env, {0, 1}, 50, tight, rng2);
    CHECK(c.capped);
    CHECK(c.steps == 10);
  }
}

TEST_CASE("mean hitting time matches the birth-death oracle") {
  Environment env = sample_environment(preset_spec("const-p075", 3), {-64, 128});
  const std::int64_t replicas = 10000;
  const auto ts = sample_hitting_times(env, {0, 1}, 100, 1 << 30, replicas, 17);
  std::vector<double> vals(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) vals[i] = static_cast<double>(ts[i]);
  const MeanVar mv = mean_var(vals);
  const double expected = 100.0 * oracle::bd_mean_crossing(0.75, 0.25);
  CHECK(expected == 200.0);
  CHECK(std::fabs(mv.mean - expected) < 3.0 * mv.se);
  SUBCASE("variance too") {
    const double var_oracle = 100.0 * oracle::bd_var_crossing(0.75, 0.25, 0.0);
    // se of a sample variance ~ var * sqrt(2/(n-1)) for near-normal data;
    // allow 5x slack for the skewness of crossing times
    CHECK(std::fabs(mv.var - var_oracle) <
          5.0 * var_oracle * std::sqrt(2.0 / static_cast<double>(replicas - 1)));
  }
}

TEST_CASE("hitting times are monotone within a trajectory") {
  Environment env = sample_environment(preset_spec("two-point-s345", 9), {-64, 80});
  Rng rng(23, stream::kWalk, 4);
  const WalkSummary s = run_to_layer(env, {0, 1}, 60, {}, rng);
  for (std::size_t j = 1; j < s.hitting_times.size(); ++j)
    CHECK(s.hitting_times[j] > s.hitting_times[j - 1]);
}

TEST_CASE("hitting-rung sequence follows the zeta transition law") {
  // m=2 constant spec: empirical first-hit rung transitions vs zeta rows
  MatrixTriple t{Matrix(2, 2), Matrix(2, 2), Matrix(2, 2), 2};
  t.P(0, 0) = 0.35; t.P(0, 1) = 0.20; t.Q(0, 0) = 0.05; t.Q(0, 1) = 0.05;
  t.R(0, 0) = 0.25; t.R(0, 1) = 0.10;
  t.P(1, 0) = 0.15; t.P(1, 1) = 0.40; t.Q(1, 0) = 0.05; t.Q(1, 1) = 0.05;
  t.R(1, 0) = 0.10; t.R(1, 1) = 0.25;
  EnvironmentSpec spec;
  spec.name = "m2-hit";
  spec.m = 2;
  spec.support = {{t, 1.0}};
  spec.ellipticity = {0.02, 0.1};
  spec.master_seed = 3;
  Environment env = sample_environment(spec, {-128, 64});
  const ZetaSequence z = compute_zeta(env, {0, 40}, 1e-12);

  // transitions observed at layer 20
  std::int64_t counts[2][2] = {{0, 0}, {0, 0}};
  const std::int64_t replicas = 40000;
  for (std::int64_t r = 0; r < replicas; ++r) {
    Rng rng(29, stream::kWalk, static_cast<std::uint64_t>(r));
    const WalkSummary s = run_to_layer(env, {0, 1}, 22, {}, rng);
    const int from = s.hitting_rungs[19];  // first-hit rung of layer 20
    const int to = s.hitting_rungs[20];    // of layer 21
    counts[from - 1][to - 1]++;
  }
  for (int i = 0; i < 2; ++i) {
    const std::int64_t row_total = counts[i][0] + counts[i][1];
    for (int j = 0; j < 2; ++j) {
      const double freq = static_cast<double>(counts[i][j]) / static_cast<double>(row_total);
      const double p = z.at(20)(i, j);
      const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(row_total));
      CHECK(std::fabs(freq - p) < 3.0 * se);
    }
  }
}

TEST_CASE("expected hitting vector") {
  SUBCASE("constant p=0.75: a_j = 2 and e_{0,n} = 2n") {
    Environment env = sample_environment(preset_spec("const-p075", 3), {-300, 220});
    const PropagatorSet props = compute_propagators(env, Window{-260, 210}, 1e-10);
    const HittingExpectation h = expected_hitting_vector(props, 0, 200);
    for (double a : h.a) CHECK(a == doctest::Approx(2.0).epsilon(1e-11));
    CHECK(std::fabs(h.e_to(200)[0] - 400.0) < 1e-9);
    CHECK(std::fabs(h.e_to(1)[0] - 2.0) < 1e-12);
  }

  SUBCASE("additivity at width 1") {
    Environment env = sample_environment(preset_spec("two-point-s345", 3), {-300, 220});
    const PropagatorSet props = compute_propagators(env, Window{-260, 210}, 1e-10);
    const HittingExpectation h = expected_hitting_vector(props, 0, 200);
    const HittingExpectation mid = expected_hitting_vector(props, 120, 200);
    const double direct = h.e_to(200)[0];
    const double composed = h.e_to(120)[0] + mid.e_to(200)[0];
    CHECK(std::fabs(direct - composed) < 1e-8);
  }

  SUBCASE("Monte Carlo cross-check on a random m=2 environment") {
    EnvironmentSpec spec = preset_spec("rand-m2", 1234);
    Environment env = sample_environment(spec, {-400, 240}, 0);
    const PropagatorSet props = compute_propagators(env, Window{-350, 230}, 1e-10);
    const HittingExpectation h = expected_hitting_vector(props, 0, 200);
    const auto ts = sample_hitting_times(env, {0, 1}, 200, 1 << 30, 4000, 7);
    std::vector<double> vals(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) vals[i] = static_cast<double>(ts[i]);
    const MeanVar mv = mean_var(vals);
    CHECK(std::fabs(mv.mean - h.e_to(200)[0]) < 3.0 * mv.se);
  }

  SUBCASE("window too small for the series depth throws") {
    Environment env = sample_environment(preset_spec("two-point-s124", 3), {-80, 70});
    const ZetaSequence z = compute_zeta(env, {-2, 66}, 1e-10);
    const PropagatorSet props = compute_propagators(env, z, 1e-10);
    // s124 trapping needs a deep series; the tiny left margin cannot hold it
    CHECK_THROWS_AS(expected_hitting_vector(props, 0, 64), std::out_of_range);
  }
}

TEST_CASE("expected occupation row") {
  SUBCASE("constant p=0.75 occupies 1/(p-q) = 2 per layer") {
    Environment env = sample_environment(preset_spec("const-p075", 3), {-200, 200});
    const PropagatorSet props = compute_propagators(env, Window{-160, 190}, 1e-10);
    const OccupationProfile occ = expected_occupation_row(props, 40);
    CHECK(occ.rho[0] == doctest::Approx(2.0).epsilon(1e-9));
  }

  SUBCASE("analytic vs Monte Carlo on a random m=2 environment") {
    EnvironmentSpec spec = preset_spec("rand-m2", 4321);
    Environment env = sample_environment(spec, {-300, 300}, 0);
    const PropagatorSet props = compute_propagators(env, Window{-260, 290}, 1e-10);
    const OccupationProfile an = expected_occupation_row(props, 30);
    const OccupationProfile mc = mc_occupation_row(env, {0, 1}, 30, 20000, 5);
    for (int i = 0; i < 2; ++i) {
      CHECK(std::fabs(an.rho[static_cast<std::size_t>(i)] - mc.rho[static_cast<std::size_t>(i)]) <
            3.0 * mc.se[static_cast<std::size_t>(i)]);
    }
    CHECK(mc.backtrack_bias_proxy < 0.01);
  }
}

TEST_CASE("drift index") {
  SUBCASE("cumulative 2k hits 10 at k=5") {
    DriftIndex drift(0, std::vector<double>(100, 2.0));
    CHECK(drift.b(10.0) == 5);
    CHECK(drift.b(1.0) == 1);
    CHECK(drift.b(11.0) == 6);
  }
  SUBCASE("monotone in n") {
    Environment env = sample_environment(preset_spec("two-point-s345", 3), {-300, 1100});
    const PropagatorSet props = compute_propagators(env, Window{-260, 1090}, 1e-10);
    const HittingExpectation h = expected_hitting_vector(props, 0, 1080);
    DriftIndex drift(0, h.a);
    std::int64_t prev = 0;
    for (std::int64_t n = 1; n <= 1000; ++n) {
      const std::int64_t b = drift.b(static_cast<double>(n));
      CHECK(b >= prev);
      prev = b;
    }
  }
  SUBCASE("horizon overrun throws") {
    DriftIndex drift(0, std::vector<double>(10, 2.0));
    CHECK_THROWS_AS(drift.b(100.0), std::out_of_range);
  }
}

TEST_CASE("backtrack tail against the gambler's ruin oracle") {
  Environment env = sample_environment(preset_spec("const-p075", 3), {-96, 128});
  const BacktrackTail tail =
      backtrack_tail(env, {0, 1}, {0, 1, 2, 3, 4, 5, 6}, 200000, 19);
  CHECK(tail.prob[0] == 1.0);
  for (std::size_t i = 1; i < tail.depths.size(); ++i) {
    const double p_oracle = oracle::gamblers_ruin_tail(0.75, 0.25, tail.depths[i]);
    CHECK(std::fabs(tail.prob[i] - p_oracle) < 3.0 * std::max(tail.se[i], 1e-9));
  }
  CHECK(tail.log_slope < 0.0);
  // slope of ln (q/p)^d is ln(1/3)
  CHECK(tail.log_slope == doctest::Approx(std::log(1.0 / 3.0)).epsilon(0.05));
}
