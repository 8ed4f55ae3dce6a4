#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "striplab/experiment.hpp"
#include "striplab/presets.hpp"
#include "striplab/stats.hpp"

using namespace striplab;

TEST_CASE("estimate_constants on the constant chain") {
  ConstantsOptions opts;
  opts.a_envs = 8;
  opts.dbar_envs = 5;
  opts.dbar_replicas = 2000;
  opts.dbar_n = 500;
  opts.dhat_envs = 16;
  opts.dhat_n = 2000;
  const LimitConstants con = estimate_constants(preset_spec("const-p075", 3), opts);

  CHECK(con.a == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(con.v == 1.0 / con.a);  // stored identity, bitwise
  CHECK(con.d == con.dbar * std::pow(con.v, 1.5));
  CHECK(con.dbold == std::sqrt(con.d * con.d + con.dhat * con.dhat));
  CHECK(con.dbold >= con.d);
  CHECK(con.dhat == 0.0);  // deterministic environment

  // quenched variance against the birth-death oracle: se of a sample
  // variance is roughly var * sqrt(2/(n-1))
  const double var_oracle = oracle::bd_var_crossing(0.75, 0.25, 0.0);
  const double se = var_oracle * std::sqrt(2.0 / 1999.0) / std::sqrt(5.0);
  CHECK(std::fabs(con.dbar * con.dbar - var_oracle) < 5.0 * se);
}

TEST_CASE("estimate_constants regime gating") {
  CHECK_THROWS_AS(estimate_constants(preset_spec("sinai", 3), {}), RegimeError);
  CHECK_THROWS_AS(estimate_constants(preset_spec("two-point-s124", 3), {}), RegimeError);
  CHECK_THROWS_AS(estimate_constants(preset_spec("two-point-s028", 3), {}), RegimeError);

  SUBCASE("speed-only path works in the subdiffusive ballistic regime") {
    ConstantsOptions opts;
    opts.require_diffusive = false;
    opts.a_envs = 64;
    opts.a_layers = 1024;
    const LimitConstants con = estimate_constants(preset_spec("two-point-s124", 3), opts);
    // closed form: a = E(1/p) / (1 - E(q/p)) = 55 exactly for this mixture
    CHECK(std::fabs(con.a - 55.0) < 4.0 * con.a_se);
    CHECK(!con.diffusive);
  }
}

TEST_CASE("quenched CLT check") {
  QuenchedCltOptions opts;
  opts.n = 500;
  opts.replicas = 4000;
  opts.threshold = 0.035;
  opts.seed = 5;
  const CheckReport rep = check_quenched_clt(preset_spec("const-p075", 3), opts);
  CHECK(rep.pass);
  CHECK(rep.statistic < 0.035);
  CHECK(!rep.degraded);

  SUBCASE("negative control on the subdiffusive spec fails as expected") {
    QuenchedCltOptions neg;
    neg.n = 500;
    neg.replicas = 2000;
    neg.threshold = 0.02;
    neg.negative_control = true;
    neg.seed = 5;
    const CheckReport bad = check_quenched_clt(preset_spec("two-point-s124", 3), neg);
    CHECK(!bad.pass);        // the CLT really fails here
    CHECK(bad.satisfied());  // which is what the control expects
  }

  SUBCASE("regime gate refuses the subdiffusive spec outside control mode") {
    QuenchedCltOptions gate;
    gate.seed = 5;
    CHECK_THROWS_AS(check_quenched_clt(preset_spec("two-point-s124", 3), gate), RegimeError);
  }
}

TEST_CASE("harness sanity: doubled-variance reference is rejected") {
  // analytic KS between N(0,1) and N(0,4) is ~0.1585, far over 0.05
  double ks_analytic = 0.0;
  for (double t = 0.0; t < 6.0; t += 1e-3)
    ks_analytic = std::max(ks_analytic, std::fabs(normal_cdf(t) - normal_cdf(t / 2.0)));
  CHECK(ks_analytic == doctest::Approx(0.1585).epsilon(1e-2));

  // empirical: normalized hitting times vs the doubled-variance CDF
  Environment env = sample_environment(preset_spec("const-p075", 3), {-96, 600});
  const auto ts = sample_hitting_times(env, {0, 1}, 500, 1 << 30, 4000, 7);
  std::vector<double> vals(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) vals[i] = static_cast<double>(ts[i]);
  const MeanVar mv = mean_var(vals);
  std::vector<double> xs(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) xs[i] = (vals[i] - mv.mean) / std::sqrt(mv.var);
  std::sort(xs.begin(), xs.end());
  const double ks = ks_statistic(xs, [](double t) { return normal_cdf(t / 2.0); });
  CHECK(ks > 0.05);
}

TEST_CASE("hitting LLT replica gate") {
  HittingLltOptions opts;
  opts.n = 400;
  opts.replicas = 100;  // far below 100 sqrt(n) / thr^2
  CHECK_THROWS_AS(check_hitting_llt(preset_spec("const-p075-lazy", 3), opts),
                  std::invalid_argument);
}

TEST_CASE("EVFP with the constant functional is exact") {
  EvfpOptions opts;
  opts.schedule = {50, 200};
  opts.replicas = 500;
  opts.env_count = 200;
  opts.seed = 11;
  const CheckReport rep = check_evfp(preset_spec("two-point-s345", 3), phi_one(), opts);
  CHECK(rep.pass);
  CHECK(rep.statistic == 0.0);

  SUBCASE("unbounded functional is rejected") {
    EvfpFunctional bad{"bad", 0, 0.5,
                       [](std::span<const MatrixTriple>, int) { return 1.0; }};
    CHECK_THROWS_AS(check_evfp(preset_spec("two-point-s345", 3), bad, opts),
                    std::invalid_argument);
  }
}

TEST_CASE("sinai check refuses transient specs") {
  SinaiOptions opts;
  opts.schedule = {100, 1000};
  opts.replicas = 50;
  CHECK_THROWS_AS(check_sinai_recurrent(preset_spec("const-p075", 3), opts), RegimeError);
}

TEST_CASE("fluctuation statistic vanishes on the constant chain") {
  FluctuationOptions opts;
  opts.grid = {200, 800};
  opts.seed = 3;
  const CheckReport rep = check_fluctuation_lemma(preset_spec("const-p075", 3), opts);
  CHECK(rep.pass);
  CHECK(rep.statistic < 1e-9);
}

TEST_CASE("annealed stable gate") {
  AnnealedStableOptions opts;
  opts.n = 200;
  opts.replicas = 100;
  opts.reference_samples = 10000;
  CHECK_THROWS_AS(check_annealed_stable(preset_spec("const-p075", 3), opts), RegimeError);
  CHECK_THROWS_AS(check_annealed_stable(preset_spec("sinai", 3), opts), RegimeError);
}

TEST_CASE("config parsing") {
  SUBCASE("unknown keys are rejected") {
    CHECK_THROWS_AS(parse_config_json(R"({"schema_version":1,"sped":{}})"), ConfigError);
    CHECK_THROWS_AS(
        parse_config_json(R"({"schema_version":1,"spec":{"preset":"const-p075"},"frobnicate":1})"),
        ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"schema_version":1,
      "spec":{"preset":"const-p075"},
      "checks":[{"check":"quenched_clt","replcas":10}]})"),
                    ConfigError);
  }
  SUBCASE("schema version is mandatory") {
    CHECK_THROWS_AS(parse_config_json(R"({"spec":{"preset":"const-p075"}})"), ConfigError);
  }
  SUBCASE("inline spec with row-major matrices") {
    const ExperimentConfig cfg = parse_config_json(R"({
      "schema_version": 1, "seed": 9,
      "spec": {"name": "inline-m2", "m": 2, "eps": 0.01, "kappa": 0.05,
        "support": [
          {"P": [0.30,0.15,0.20,0.25], "Q": [0.10,0.15,0.15,0.05],
           "R": [0.20,0.10,0.10,0.25], "prob": 1.0}
        ]}
    })");
    CHECK(cfg.spec.m == 2);
    CHECK(cfg.spec.support[0].triple.P(1, 0) == 0.20);
    CHECK(cfg.seed == 9);
  }
  SUBCASE("bad probability sums are config errors") {
    CHECK_THROWS_AS(parse_config_json(R"({
      "schema_version": 1,
      "spec": {"name":"x","m":1,
        "support":[{"P":[0.75],"Q":[0.25],"R":[0.0],"prob":0.9}]}
    })"),
                    ConfigError);
  }
}

TEST_CASE("ledger rows round-trip") {
  CheckReport rep;
  rep.check_id = "quenched_clt";
  rep.spec_id = "const-p075";
  rep.seed = 42;
  rep.n = 2000;
  rep.replicas = 10000;
  rep.statistic = 0.01234567891;
  rep.threshold = 0.02;
  rep.pass = true;
  rep.wall_time_s = 1.5;
  const std::string row = ledger_row(rep, true);
  // parse back
  std::vector<std::string> fields;
  std::string cur;
  for (char c : row) {
    if (c == ',' || c == '\n') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  REQUIRE(fields.size() == 9);
  CHECK(fields[0] == "quenched_clt");
  CHECK(fields[1] == "const-p075");
  CHECK(std::stoull(fields[2]) == 42);
  CHECK(std::stoll(fields[3]) == 2000);
  CHECK(std::stoll(fields[4]) == 10000);
  CHECK(std::stod(fields[5]) == doctest::Approx(rep.statistic).epsilon(1e-9));
  CHECK(std::stod(fields[6]) == rep.threshold);
  CHECK(fields[7] == "1");
}

TEST_CASE("experiment runs are reproducible and parallelism-independent") {
  const char* cfg_text = R"({
    "schema_version": 1, "seed": 77,
    "spec": {"preset": "const-p075"},
    "checks": [
      {"check": "validate"},
      {"check": "backtrack", "replicas": 5000},
      {"check": "quenched_clt", "n": 200, "replicas": 1000, "threshold": 0.06}
    ]
  })";
  ExperimentConfig cfg = parse_config_json(cfg_text);

  cfg.jobs = 1;
  const ExperimentResult a = run_experiment(cfg, ExecMode::Serial);
  cfg.jobs = 2;
  const ExperimentResult b = run_experiment(cfg, ExecMode::Parallel);
  cfg.jobs = 1;
  const ExperimentResult c = run_experiment(cfg, ExecMode::Parallel);

  CHECK(ledger_csv(a.reports, false) == ledger_csv(b.reports, false));
  CHECK(ledger_csv(b.reports, false) == ledger_csv(c.reports, false));
  CHECK(a.all_satisfied);
}
