#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "striplab/matrix.hpp"
#include "striplab/rng.hpp"

namespace striplab {

struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One layer of the strip: right / stay / left transition blocks. Rows of
// P+Q+R are probability vectors over the 3m reachable sites.
struct MatrixTriple {
  Matrix P, Q, R;
  int m = 0;
};

struct EllipticityParams {
  double eps = 0.02;   // ||R|| < 1-eps and (I-R)^{-1}P, (I-R)^{-1}Q > eps entrywise
  double kappa = 0.0;  // diag(R) >= kappa
};

struct ValidationReport {
  bool dims_ok = false;
  bool row_stochastic = false;
  bool r_norm_ok = false;
  bool p_ellipticity = false;
  bool q_ellipticity = false;
  bool r_diag_ok = false;
  double worst_row_sum_err = 0.0;
  double r_norm = 0.0;
  double min_p_entry = 0.0;  // of (I-R)^{-1}P
  double min_q_entry = 0.0;  // of (I-R)^{-1}Q
  double min_r_diag = 0.0;
  std::string message;

  bool pass() const {
    return dims_ok && row_stochastic && r_norm_ok && p_ellipticity && q_ellipticity && r_diag_ok;
  }
};

inline constexpr double kRowSumTol = 1e-12;

// Checks stochasticity and the ellipticity conditions. A numerically
// singular (I-R) is reported as an ellipticity failure, not thrown.
ValidationReport validate_triple(const MatrixTriple& t, const EllipticityParams& e);

struct SupportAtom {
  MatrixTriple triple;
  double prob = 0.0;
};

// Parametric layer generator: rows acquire fixed entry floors on P and Q
// plus a diagonal floor on R, and the leftover mass is split by weighted
// exponential spacings. The floors make condition C2* hold by
// construction for any eps below the floor.
struct DirichletGenerator {
  int m = 1;
  double floor_p = 0.03;
  double floor_q = 0.03;
  double kappa = 0.05;
  double weight_p = 1.0;
  double weight_q = 1.0;
  double weight_r = 0.6;
};

struct EnvironmentSpec {
  std::string name = "unnamed";
  int m = 1;
  std::vector<SupportAtom> support;            // finite-support mode when nonempty
  std::optional<DirichletGenerator> generator; // otherwise parametric
  EllipticityParams ellipticity;
  std::uint64_t master_seed = 0;

  bool finite_support() const { return !support.empty(); }
};

// Throws SpecError for structural problems (no mode set, probabilities
// not summing to 1, support triples failing validate_triple, ...).
void validate_spec(const EnvironmentSpec& spec);

struct Window {
  std::int64_t lo = 0;
  std::int64_t hi = -1;
  std::int64_t size() const { return hi - lo + 1; }
  bool contains(std::int64_t n) const { return n >= lo && n <= hi; }
  bool covers(const Window& o) const { return lo <= o.lo && hi >= o.hi; }
};

// An i.i.d. environment materialized on a window. Layer n is a pure
// function of (spec, master seed, n), so windows can be extended at any
// time without changing already generated layers, and out-of-window
// layers can be regenerated on the fly. Immutable after construction;
// safe to share across threads.
class Environment {
 public:
  Environment(EnvironmentSpec spec, Window w);

  const EnvironmentSpec& spec() const { return spec_; }
  Window window() const { return win_; }
  int width() const { return spec_.m; }

  bool contains(std::int64_t n) const { return win_.contains(n); }
  const MatrixTriple& at(std::int64_t n) const { return layers_[static_cast<std::size_t>(n - win_.lo)]; }

  // pure generation for any layer index, in or out of window
  MatrixTriple make_layer(std::int64_t n) const;

  Environment extended(std::int64_t lo, std::int64_t hi) const;

  // Cumulative transition row for the walker: 3m entries ordered as the
  // Q block (layer-1), R block (same layer), P block (layer+1).
  std::span<const double> step_row(std::int64_t layer, int rung) const {
    const std::size_t base =
        (static_cast<std::size_t>(layer - win_.lo) * spec_.m + (rung - 1)) * (3 * spec_.m);
    return {step_rows_.data() + base, static_cast<std::size_t>(3 * spec_.m)};
  }

  static std::vector<double> build_step_rows(const MatrixTriple& t);

  // FNV-1a over the raw layer bytes; used by determinism tests.
  std::uint64_t digest() const;

 private:
  EnvironmentSpec spec_;
  Window win_;
  std::vector<MatrixTriple> layers_;
  std::vector<double> step_rows_;
};

Environment sample_environment(const EnvironmentSpec& spec, Window w);
// Annealed replica: an independent environment keyed by (seed, replica).
Environment sample_environment(const EnvironmentSpec& spec, Window w, std::uint64_t replica);

// Bounded-jump walk on Z, i.i.d. per site: pmf over offsets
// [-bound, ..., +bound] drawn from a finite set of site laws.
struct JumpLaw {
  int bound = 1;
  std::vector<std::pair<std::vector<double>, double>> site_laws;  // (pmf, probability)
};

// Blocks Z into layers of m consecutive sites, site x -> (floor(x/m),
// (x mod m)+1). Requires law.bound <= m so every jump lands in an
// adjacent layer. The returned spec enumerates the m-fold product of
// site-law choices, which encodes the original law exactly.
EnvironmentSpec reduce_bounded_jump(const JumpLaw& law, int m);

// One layer triple for explicit per-rung site pmfs (used by round-trip
// tests against direct Z-walk enumeration).
MatrixTriple strip_triple_from_site_pmfs(const std::vector<std::vector<double>>& pmf_per_rung,
                                         int m, int bound);

}  // namespace striplab
