#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "striplab/environment.hpp"
#include "striplab/parallel.hpp"

namespace striplab {

struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The hitting-rung transition matrices zeta_n, certified on `window` and
// stored from `kept_lo` so downstream consumers can reach left of the
// window (A_n and the y burn-in both need the prefix).
struct ZetaSequence {
  Window window;
  std::int64_t kept_lo = 0;
  std::vector<Matrix> zeta;
  std::int64_t burn_in = 0;
  double tol = 0.0;
  double seed_discrepancy = 0.0;  // max gap between the two extreme-seed runs
  double min_entry = 0.0;
  double max_residual = 0.0;      // defining-equation residual on the window

  const Matrix& at(std::int64_t n) const { return zeta[static_cast<std::size_t>(n - kept_lo)]; }
};

// Iterates the psi recursion from two extreme seed matrices (uniform rows
// and mollified identity), doubling the burn-in until they agree within
// tol on the window. Width 1 is exact: the only 1x1 stochastic matrix is
// [1].
ZetaSequence compute_zeta(const Environment& env, Window w, double tol);

struct PropagatorSet {
  Window window;
  std::int64_t kept_lo = 0;
  std::vector<Matrix> A;   // (I - Q_n zeta_{n-1} - R_n)^{-1} Q_n
  std::vector<Matrix> U;   // (I - Q_n zeta_{n-1} - R_n)^{-1}
  std::vector<Vec> y;      // probability rows, y_n = y_{n-1} zeta_n
  ZetaSequence zeta;
  double y_discrepancy = 0.0;

  const Matrix& a_at(std::int64_t n) const { return A[static_cast<std::size_t>(n - kept_lo)]; }
  const Matrix& u_at(std::int64_t n) const { return U[static_cast<std::size_t>(n - kept_lo)]; }
  std::span<const double> y_at(std::int64_t n) const {
    return {y[static_cast<std::size_t>(n - kept_lo)].data(),
            y[static_cast<std::size_t>(n - kept_lo)].size()};
  }
  // H_j^i = A_j ... A_{j-i+1}; H_j^0 = I
  Matrix h_product(std::int64_t j, std::int64_t i) const;
};

PropagatorSet compute_propagators(const Environment& env, const ZetaSequence& zeta, double tol);
PropagatorSet compute_propagators(const Environment& env, Window w, double tol);

struct LyapunovEstimate {
  double value = 0.0;
  double se = 0.0;
  std::int64_t steps = 0;
};

// (1/N) ln ||A_{N-1} ... A_0|| with per-step renormalization; the standard
// error comes from sqrt(N) batch means. Streams layers, so N up to 1e7 is
// fine.
LyapunovEstimate top_lyapunov(const Environment& env, std::int64_t n);

struct MomentEstimate {
  double value = 1.0;
  double lo = 1.0, hi = 1.0;  // bootstrap CI
  bool exact = false;
  std::int64_t n = 0;
  std::int64_t replicas = 0;
};

// Annealed moment growth rate (E||A_n ... A_1||^alpha)^{1/n}, estimated
// over independent environment replicas with a log-mean-exp reduction.
// Finite-support width-1 specs evaluate the closed form E[(q/p)^alpha]
// exactly. alpha = 0 returns 1 without simulation.
MomentEstimate moment_lyapunov(const EnvironmentSpec& spec, double alpha, std::int64_t n,
                               std::int64_t replicas, std::uint64_t seed,
                               ExecMode mode = ExecMode::Parallel);

enum class Regime { Recurrent, TransientRight, TransientLeft };

std::string regime_name(Regime r);

// Statistical classification from a Lyapunov estimate.
Regime classify_regime(double lambda_hat, double se);
// Exact classification for finite-support m=1; falls back to a Monte
// Carlo top_lyapunov run otherwise.
Regime classify_regime(const EnvironmentSpec& spec, std::uint64_t seed, std::int64_t n = 200000);

struct CriticalExponent {
  double s = 0.0;
  bool infinite = false;
  bool exact = false;
  double bracket_lo = 0.0, bracket_hi = 0.0;
};

struct CriticalSolveOptions {
  std::int64_t n = 96;           // product length per replica (MC path)
  std::int64_t replicas = 4096;  // environment replicas per r evaluation
  double tol_log_r = 1e-3;
  double tol_s = 1e-3;
  std::uint64_t seed = 1;
};

// Positive root of r(s) = 1, or the +infinity flag when r stays below 1
// on the probe grid {1, 2, 4, 8}. Requires a transient-right spec.
CriticalExponent solve_critical_exponent(const EnvironmentSpec& spec,
                                         const CriticalSolveOptions& opts = {});

struct BoundedProductsReport {
  bool flag = false;
  double k_observed = 1.0;    // exp(max |ln ||A_n...A_0||||) over n <= N
  double k_half = 1.0;        // same at N/2
  std::int64_t n = 0;
  double threshold = 10.0;
};

// Heuristic for condition (BP): the product-norm range must stay inside
// the configured K and stop growing between N/2 and N.
BoundedProductsReport check_bounded_products(const Environment& env, std::int64_t n,
                                             double k_threshold = 10.0);

// Leading eigenvalue of (I - R - Q zeta)^{-1} Q for a constant-triple
// environment (fixed point in zeta, then power iteration).
double leading_eigenvalue_map(const MatrixTriple& t);

struct RPoint {
  double alpha = 0.0;
  double r = 1.0;
  double lo = 1.0, hi = 1.0;
};

struct SpectralSummary {
  double lambda_hat = 0.0;
  double lambda_se = 0.0;
  std::vector<RPoint> r_curve;
  double s_hat = 0.0;
  bool s_infinite = false;
  Regime regime = Regime::Recurrent;
  bool bp_flag = false;
  double k_observed = 1.0;
  // distinct ln lambda(P,Q,R) values over the finite support, for manual
  // inspection of arithmetic degeneracy (no algorithmic test is run)
  std::vector<double> log_lambda_support;
};

struct DescribeOptions {
  std::int64_t lyapunov_n = 200000;
  std::int64_t moment_n = 96;
  std::int64_t moment_replicas = 4096;
  std::int64_t bp_n = 20000;
  double bp_threshold = 10.0;
  std::vector<double> alpha_grid = {0.0, 0.5, 1.0, 2.0, 4.0, 8.0};
  std::uint64_t seed = 1;
  ExecMode mode = ExecMode::Parallel;
};

SpectralSummary describe_spec(const EnvironmentSpec& spec, const DescribeOptions& opts = {});

}  // namespace striplab
