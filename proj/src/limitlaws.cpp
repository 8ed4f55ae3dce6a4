#include "striplab/limitlaws.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace striplab {

namespace {

void check_index(double s) {
  if (!(s > 0.0) || !(s < 2.0) || std::fabs(s - 1.0) < 1e-12)
    throw std::invalid_argument("stable index must lie in (0,2) \\ {1}");
}

}  // namespace

StableSpec StableSpec::make(double s) {
  check_index(s);
  StableSpec spec;
  spec.s = s;
  spec.theta_min = std::pow(1e-4, 1.0 / s);
  return spec;
}

StableSpec StableSpec::make(double s, double theta_min) {
  check_index(s);
  if (!(theta_min > 0.0)) throw std::invalid_argument("theta_min must be positive");
  StableSpec spec;
  spec.s = s;
  spec.theta_min = theta_min;
  return spec;
}

double sample_stable_t(const StableSpec& spec, Rng& rng) {
  check_index(spec.s);
  const double rate = spec.expected_points();
  const double eps = spec.eps_s();
  const double inv_s = 1.0 / spec.s;
  double arrivals = rng.exponential();
  double sum = 0.0;
  while (arrivals < rate) {
    const double theta = std::pow(arrivals, -inv_s);
    sum += theta * (rng.exponential() - eps);
    arrivals += rng.exponential();
  }
  if (spec.s > 1.0) sum += rng.normal() * std::sqrt(spec.small_jump_variance());
  return sum;
}

EmpiricalCdf::EmpiricalCdf(std::vector<double> samples) : sorted_(std::move(samples)) {
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double t) const {
  if (sorted_.empty()) throw std::logic_error("EmpiricalCdf: empty");
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), t);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double EmpiricalCdf::quantile(double q) const {
  if (sorted_.empty()) throw std::logic_error("EmpiricalCdf: empty");
  const double pos = q * static_cast<double>(sorted_.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= sorted_.size()) return sorted_.back();
  const double frac = pos - static_cast<double>(i);
  return sorted_[i] * (1.0 - frac) + sorted_[i + 1] * frac;
}

EmpiricalCdf empirical_Ls(const StableSpec& spec, std::size_t m, std::uint64_t seed,
                          ExecMode mode) {
  if (m < 10000) throw std::invalid_argument("empirical_Ls: need at least 1e4 samples");
  std::vector<double> samples(m);
  for_each_index(static_cast<std::int64_t>(m), mode, [&](std::int64_t i) {
    Rng rng(seed, stream::kStable, static_cast<std::uint64_t>(i));
    samples[static_cast<std::size_t>(i)] = sample_stable_t(spec, rng);
  });
  return EmpiricalCdf(std::move(samples));
}

double normal_cdf(double t) { return 0.5 * std::erfc(-t * 0.7071067811865475244); }

double kesten_sinai_density(double t, int terms) {
  if (terms < 1) throw std::invalid_argument("kesten_sinai_density: terms must be >= 1");
  const double at = std::fabs(t);
  double sum = 0.0;
  for (int k = 0; k < terms; ++k) {
    const double odd = 2.0 * k + 1.0;
    const double term = std::exp(-odd * odd * M_PI * M_PI * at / 8.0) / odd;
    sum += (k % 2 == 0) ? term : -term;
  }
  return 2.0 / M_PI * sum;
}

double kesten_sinai_tail_bound(double t, int terms) {
  const double odd = 2.0 * terms + 1.0;
  return 2.0 / M_PI * std::exp(-odd * odd * M_PI * M_PI * std::fabs(t) / 8.0) / odd;
}

KestenSinaiCdf::KestenSinaiCdf(int terms, double t_max, int nodes) : t_max_(t_max) {
  if (nodes % 2 == 1) ++nodes;  // Simpson needs an even panel count
  dt_ = t_max / static_cast<double>(nodes);
  cdf_.resize(static_cast<std::size_t>(nodes) + 1);
  cdf_[0] = 0.5;  // the density is symmetric
  // cumulative Simpson over pairs of panels
  for (int i = 2; i <= nodes; i += 2) {
    const double a = dt_ * (i - 2), b = dt_ * (i - 1), c = dt_ * i;
    const double add = dt_ / 3.0 *
                       (kesten_sinai_density(a, terms) + 4.0 * kesten_sinai_density(b, terms) +
                        kesten_sinai_density(c, terms));
    cdf_[static_cast<std::size_t>(i)] = cdf_[static_cast<std::size_t>(i - 2)] + add;
    // odd node by half-panel Simpson
    const double mid = 0.5 * (a + b);
    cdf_[static_cast<std::size_t>(i - 1)] =
        cdf_[static_cast<std::size_t>(i - 2)] +
        dt_ / 6.0 *
            (kesten_sinai_density(a, terms) + 4.0 * kesten_sinai_density(mid, terms) +
             kesten_sinai_density(b, terms));
  }
}

double KestenSinaiCdf::operator()(double t) const {
  const double at = std::fabs(t);
  double v;
  if (at >= t_max_) {
    v = 1.0;
  } else {
    const double pos = at / dt_;
    const std::size_t i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    v = 0.5 + (cdf_[i] * (1.0 - frac) + cdf_[i + 1] * frac - 0.5);
  }
  return t >= 0.0 ? v : 1.0 - v;
}

double KestenSinaiCdf::quantile(double q) const {
  double lo = -t_max_, hi = t_max_;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((*this)(mid) < q)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

EmpiricalCdf conditional_ftheta(const std::vector<double>& theta_points, double s, std::size_t m,
                                std::uint64_t seed, ExecMode mode) {
  check_index(s);
  const double eps = s < 1.0 ? 0.0 : 1.0;
  std::vector<double> samples(m);
  for_each_index(static_cast<std::int64_t>(m), mode, [&](std::int64_t i) {
    Rng rng(seed, stream::kStable, static_cast<std::uint64_t>(i));
    double sum = 0.0;
    for (double theta : theta_points) sum += theta * (rng.exponential() - eps);
    samples[static_cast<std::size_t>(i)] = sum;
  });
  return EmpiricalCdf(std::move(samples));
}

}  // namespace striplab
