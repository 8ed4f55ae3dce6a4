#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace striplab {

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;  // unbiased
  double se = 0.0;
  std::int64_t n = 0;
};

inline MeanVar mean_var(std::span<const double> xs) {
  MeanVar out;
  out.n = static_cast<std::int64_t>(xs.size());
  if (out.n == 0) return out;
  double s = 0.0;
  for (double x : xs) s += x;
  out.mean = s / static_cast<double>(out.n);
  if (out.n < 2) return out;
  double q = 0.0;
  for (double x : xs) q += (x - out.mean) * (x - out.mean);
  out.var = q / static_cast<double>(out.n - 1);
  out.se = std::sqrt(out.var / static_cast<double>(out.n));
  return out;
}

// sup_t |F_n(t) - F(t)| for a sorted sample against a reference CDF
inline double ks_statistic(const std::vector<double>& sorted,
                           const std::function<double(double)>& cdf) {
  const double n = static_cast<double>(sorted.size());
  double best = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    best = std::max(best, std::max(f - static_cast<double>(i) / n,
                                   static_cast<double>(i + 1) / n - f));
  }
  return best;
}

inline double ks_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    best = std::max(best, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

// Dvoretzky-Kiefer-Wolfowitz half-width at the given confidence level
inline double dkw_epsilon(std::size_t n, double confidence) {
  return std::sqrt(std::log(2.0 / (1.0 - confidence)) / (2.0 * static_cast<double>(n)));
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear_fit: bad input");
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LinearFit f;
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile_sorted: empty");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(i);
  return sorted[i] * (1.0 - frac) + sorted[i + 1] * frac;
}

inline double median_sorted(const std::vector<double>& sorted) {
  return quantile_sorted(sorted, 0.5);
}

inline double iqr_sorted(const std::vector<double>& sorted) {
  return quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
}

}  // namespace striplab
