#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "striplab/environment.hpp"
#include "striplab/parallel.hpp"
#include "striplab/spectral.hpp"

namespace striplab {

struct SiteState {
  std::int64_t layer = 0;
  int rung = 1;  // in [1, m]
};

// Per-trajectory view of the environment: reads the materialized window
// and generates out-of-window layers on the fly (pure, so identical for
// every replica that wanders to the same layer).
class LayerRows {
 public:
  explicit LayerRows(const Environment& env) : env_(env), m_(env.width()) {}

  std::span<const double> row(std::int64_t layer, int rung) {
    if (env_.contains(layer)) return env_.step_row(layer, rung);
    auto it = overflow_.find(layer);
    if (it == overflow_.end())
      it = overflow_.emplace(layer, Environment::build_step_rows(env_.make_layer(layer))).first;
    return {it->second.data() + static_cast<std::size_t>(rung - 1) * 3 * m_,
            static_cast<std::size_t>(3 * m_)};
  }

  int width() const { return m_; }

 private:
  const Environment& env_;
  int m_;
  std::map<std::int64_t, std::vector<double>> overflow_;
};

// one categorical draw from the (Q | R | P) row of the current rung
inline void step_state(std::span<const double> row, int m, double u, std::int64_t& layer,
                       int& rung) {
  int idx = 0;
  const int last = 3 * m - 1;
  while (idx < last && u >= row[idx]) ++idx;
  layer += idx / m - 1;
  rung = idx % m + 1;
}

SiteState step_walk(const Environment& env, SiteState state, Rng& rng);

struct WalkOptions {
  std::int64_t cap = 1'000'000'000;
  bool record_occupation = false;
};

struct WalkSummary {
  std::int64_t start_layer = 0;
  std::int64_t target_layer = 0;
  std::vector<std::int64_t> hitting_times;  // T_j for j = start+1 .. target (-1 if unreached)
  std::vector<int> hitting_rungs;           // rung at the first visit of each layer
  std::map<std::pair<std::int64_t, int>, std::int64_t> occupation;
  std::int64_t max_backtrack = 0;  // deepest revisit below the running max layer
  std::int64_t steps = 0;
  bool capped = false;
};

// Simulates until the target layer is first reached or the step budget
// runs out (summary precise flagged capped, never thrown).
WalkSummary run_to_layer(const Environment& env, SiteState start, std::int64_t target,
                         const WalkOptions& opts, Rng& rng);

// minimal fast paths for the Monte Carlo kernels
std::int64_t hitting_time(LayerRows& rows, SiteState start, std::int64_t target, std::int64_t cap,
                          Rng& rng);
SiteState position_after(LayerRows& rows, SiteState start, std::int64_t steps, Rng& rng);

// replica-parallel batches (deterministic per (seed, replica index))
std::vector<std::int64_t> sample_hitting_times(const Environment& env, SiteState start,
                                               std::int64_t target, std::int64_t cap,
                                               std::int64_t replicas, std::uint64_t seed,
                                               ExecMode mode = ExecMode::Parallel);
std::vector<SiteState> sample_positions(const Environment& env, SiteState start,
                                        std::int64_t steps, std::int64_t replicas,
                                        std::uint64_t seed, ExecMode mode = ExecMode::Parallel);

struct HittingExpectation {
  std::int64_t from = 0;       // k
  std::int64_t to = 0;         // n
  std::vector<Vec> e;          // e[r - from - 1] = e_{from, r} for r in (from, to]
  std::vector<double> a;       // a_j = y_j . series_j for j in [from, to)
  int max_depth = 0;           // deepest series truncation used
  double max_tail_norm = 0.0;  // largest ||H|| at truncation

  const Vec& e_to(std::int64_t r) const { return e[static_cast<std::size_t>(r - from - 1)]; }
};

// Expected hitting times of layers (from, to] from every rung of layer
// `from`, by the zeta-prefix expansion with the inner propagator series
// truncated at tail_tol (hard cap ~ 40 ln n).
HittingExpectation expected_hitting_vector(const PropagatorSet& props, std::int64_t from,
                                           std::int64_t to, double tail_tol = 1e-12);

enum class OccupationMethod { AnalyticSeries, MonteCarlo };

struct OccupationProfile {
  std::int64_t layer = 0;
  Vec rho;                    // expected visits per rung
  Vec se;                     // Monte Carlo standard errors (MC mode)
  OccupationMethod method = OccupationMethod::AnalyticSeries;
  int depth = 0;              // series depth (analytic) or cutoff margin (MC)
  double tail_norm = 0.0;
  std::int64_t replicas = 0;
  double backtrack_bias_proxy = 0.0;  // fraction of replicas revisiting the layer after cutoff
};

OccupationProfile expected_occupation_row(const PropagatorSet& props, std::int64_t layer,
                                          double tail_tol = 1e-12);
OccupationProfile mc_occupation_row(const Environment& env, SiteState start, std::int64_t layer,
                                    std::int64_t replicas, std::uint64_t seed,
                                    ExecMode mode = ExecMode::Parallel);

// Partial sums of a_j; b(n) is the drift index min{k : E_w T_k >= n}.
class DriftIndex {
 public:
  DriftIndex(std::int64_t from, std::vector<double> a);
  std::int64_t b(double n) const;  // throws std::out_of_range beyond the horizon
  double expected_hit(std::int64_t k) const { return cum_[static_cast<std::size_t>(k - from_)]; }
  std::int64_t horizon() const { return from_ + static_cast<std::int64_t>(cum_.size()) - 1; }

 private:
  std::int64_t from_;
  std::vector<double> cum_;  // cum_[t] = E T_{from+t}
};

struct BacktrackTail {
  std::vector<int> depths;
  Vec prob;       // P(visit start layer again after first reaching start+depth)
  Vec se;
  double log_slope = 0.0;      // fitted ln(theta)
  double log_intercept = 0.0;  // fitted ln(C)
  std::int64_t replicas = 0;
};

BacktrackTail backtrack_tail(const Environment& env, SiteState start,
                             const std::vector<int>& depths, std::int64_t replicas,
                             std::uint64_t seed, ExecMode mode = ExecMode::Parallel);

}  // namespace striplab
