#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "striplab/environment.hpp"
#include "striplab/limitlaws.hpp"
#include "striplab/spectral.hpp"
#include "striplab/walker.hpp"

namespace striplab {

struct RegimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Model constants of the diffusive theory. v = 1/a, D = Dbar v^{3/2} and
// Dbold^2 = D^2 + Dhat^2 hold exactly as stored.
struct LimitConstants {
  double a = 0.0;
  double a_se = 0.0;
  double v = 0.0;
  double dbar = 0.0;       // quenched hitting-time diffusion constant
  double dbar_se = 0.0;
  double dbar_spread = 0.0;  // max-min across probe environments
  double d = 0.0;          // position LLT constant
  double dhat = 0.0;       // stdev of b_n / sqrt(n) across environments
  double dhat_se = 0.0;
  double dbold = 0.0;      // annealed position constant
  bool diffusive = false;  // dbar family filled only when s > 2
};

struct ConstantsOptions {
  std::int64_t a_envs = 48;
  std::int64_t a_layers = 512;
  std::int64_t dbar_envs = 5;
  std::int64_t dbar_replicas = 2000;
  std::int64_t dbar_n = 2000;
  std::int64_t dhat_envs = 160;
  std::int64_t dhat_n = 10000;
  bool require_diffusive = true;
  std::uint64_t seed = 1;
  ExecMode mode = ExecMode::Parallel;
};

LimitConstants estimate_constants(const EnvironmentSpec& spec, const ConstantsOptions& opts = {});

struct CheckReport {
  std::string check_id;
  std::string spec_id;
  std::uint64_t seed = 0;
  std::int64_t n = 0;
  std::int64_t replicas = 0;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
  bool negative_control = false;  // the check is expected to fail
  bool degraded = false;
  double wall_time_s = 0.0;
  std::vector<std::pair<std::string, std::string>> details;

  // a negative control is satisfied by failing
  bool satisfied() const { return negative_control ? !pass : pass; }
  void detail(const std::string& k, const std::string& v) { details.emplace_back(k, v); }
  void detail(const std::string& k, double v);
};

struct QuenchedCltOptions {
  std::int64_t n = 2000;
  std::int64_t replicas = 10000;
  double threshold = 0.02;
  bool negative_control = false;
  std::uint64_t seed = 1;
  ExecMode mode = ExecMode::Parallel;
};
CheckReport check_quenched_clt(const EnvironmentSpec& spec, const QuenchedCltOptions& opts);

struct HittingLltOptions {
  std::int64_t n = 400;
  std::int64_t replicas = 1000000;
  double threshold = 0.1;
  std::uint64_t seed = 1;
  ExecMode mode = ExecMode::Parallel;
};
CheckReport check_hitting_llt(const EnvironmentSpec& spec, const HittingLltOptions& opts);

enum class PositionLltMode { Quenched, Annealed };

struct PositionLltOptions {
  PositionLltMode mode = PositionLltMode::Quenched;
  std::int64_t n = 400;
  std::int64_t replicas = 1000000;  // walkers (quenched) or walkers per environment (annealed)
  std::int64_t env_count = 1000;    // annealed only
  double window_radius = 2.0;       // R in |k - b_n| <= R sqrt(n)
  double threshold = 0.1;
  std::uint64_t seed = 1;
  ExecMode exec = ExecMode::Parallel;
};
CheckReport check_position_llt(const EnvironmentSpec& spec, const PositionLltOptions& opts);

struct AnnealedStableOptions {
  std::int64_t n = 10000;
  std::int64_t replicas = 10000;
  std::int64_t reference_samples = 100000;
  double threshold = 0.05;
  std::uint64_t seed = 1;
  ExecMode mode = ExecMode::Parallel;
};
CheckReport check_annealed_stable(const EnvironmentSpec& spec, const AnnealedStableOptions& opts);

// Bounded local functional of the environment seen from the particle:
// depends on the triples within `radius` layers of the walker and on the
// rung.
struct EvfpFunctional {
  std::string name;
  int radius = 0;
  double bound = 1.0;
  std::function<double(std::span<const MatrixTriple>, int rung)> eval;
};

EvfpFunctional phi_one();
EvfpFunctional phi_p_entry();                 // P(1,1) of the current layer
EvfpFunctional phi_rung_indicator(int rung);  // 1{Y = rung}

struct EvfpOptions {
  std::vector<std::int64_t> schedule = {100, 1000, 10000};
  std::int64_t replicas = 20000;
  std::int64_t env_count = 4000;  // environments for the occupation formula
  bool annealed = false;          // averaged over environments (needs s > 1 only)
  std::uint64_t seed = 1;
  ExecMode mode = ExecMode::Parallel;
};
CheckReport check_evfp(const EnvironmentSpec& spec, const EvfpFunctional& phi,
                       const EvfpOptions& opts);

struct SinaiOptions {
  std::vector<std::int64_t> schedule = {1000, 10000, 100000, 1000000};
  std::int64_t replicas = 1000;
  std::int64_t clt_replicas = 4000;  // (BP) branch
  double slope_lo = 1.7, slope_hi = 2.3;
  double shape_threshold = 0.3;  // loose: the scale is fitted
  double clt_threshold = 0.05;
  std::uint64_t seed = 1;
  ExecMode mode = ExecMode::Parallel;
};
CheckReport check_sinai_recurrent(const EnvironmentSpec& spec, const SinaiOptions& opts);

struct FluctuationOptions {
  std::vector<std::int64_t> grid = {1000, 10000, 100000};
  std::uint64_t seed = 1;
  ExecMode mode = ExecMode::Parallel;
};
CheckReport check_fluctuation_lemma(const EnvironmentSpec& spec, const FluctuationOptions& opts);

struct BacktrackOptions {
  std::vector<int> depths = {0, 1, 2, 3, 4, 5, 6};
  std::int64_t replicas = 200000;
  std::uint64_t seed = 1;
  ExecMode mode = ExecMode::Parallel;
};
CheckReport check_backtrack(const EnvironmentSpec& spec, const BacktrackOptions& opts);

struct ValidateOptions {
  std::int64_t sample_layers = 256;
  std::uint64_t seed = 1;
};
CheckReport check_validate(const EnvironmentSpec& spec, const ValidateOptions& opts);

}  // namespace striplab
