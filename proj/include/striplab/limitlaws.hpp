#pragma once

#include <cstdint>
#include <vector>

#include "striplab/parallel.hpp"
#include "striplab/rng.hpp"

namespace striplab {

// Stable law of index s via the Poisson series sum Theta_n (Gamma_n -
// eps_s), with the Levy points Theta above theta_min generated from unit
// Poisson arrivals. The small-jump remainder is dropped for s < 1 (bias
// bound reported) and replaced by a centered Gaussian of matching
// variance for s > 1.
struct StableSpec {
  double s = 0.5;
  double theta_min = 1e-2;

  double eps_s() const { return s < 1.0 ? 0.0 : 1.0; }
  double expected_points() const { return std::pow(theta_min, -s); }
  double small_jump_bias() const {
    return s < 1.0 ? s * std::pow(theta_min, 1.0 - s) / (1.0 - s) : 0.0;
  }
  double small_jump_variance() const {
    return s > 1.0 ? s * std::pow(theta_min, 2.0 - s) / (2.0 - s) : 0.0;
  }

  // default theta_min targets ~1e4 points per sample
  static StableSpec make(double s);
  static StableSpec make(double s, double theta_min);
};

double sample_stable_t(const StableSpec& spec, Rng& rng);

class EmpiricalCdf {
 public:
  EmpiricalCdf() = default;
  explicit EmpiricalCdf(std::vector<double> samples);

  double operator()(double t) const;
  double quantile(double q) const;
  std::size_t size() const { return sorted_.size(); }
  const std::vector<double>& sorted() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

EmpiricalCdf empirical_Ls(const StableSpec& spec, std::size_t m, std::uint64_t seed,
                          ExecMode mode = ExecMode::Parallel);

// standard normal CDF to better than 1e-10 absolute
double normal_cdf(double t);

// Density of the Kesten-Sinai law: (2/pi) sum (-1)^k/(2k+1)
// exp(-(2k+1)^2 pi^2 |t| / 8), truncated after `terms` terms.
double kesten_sinai_density(double t, int terms);
// magnitude of the first omitted term (alternating-series error bound)
double kesten_sinai_tail_bound(double t, int terms);

// CDF by composite-Simpson quadrature of the density, symmetric around 0.
class KestenSinaiCdf {
 public:
  explicit KestenSinaiCdf(int terms = 64, double t_max = 12.0, int nodes = 20000);
  double operator()(double t) const;
  double quantile(double q) const;

 private:
  double t_max_;
  double dt_;
  std::vector<double> cdf_;  // on [0, t_max]
};

// Conditional law F_Theta: the point set is frozen, only the exponential
// marks resample. An empty point list is the unit mass at 0.
EmpiricalCdf conditional_ftheta(const std::vector<double>& theta_points, double s, std::size_t m,
                                std::uint64_t seed, ExecMode mode = ExecMode::Parallel);

}  // namespace striplab
