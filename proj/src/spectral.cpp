#include "striplab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace striplab {

namespace {

constexpr std::int64_t kMaxBurnIn = 1 << 16;

Matrix uniform_seed(int m) { return Matrix(m, m, 1.0 / m); }

Matrix mollified_identity_seed(int m) {
  Matrix s(m, m, 0.01 / m);
  for (int i = 0; i < m; ++i) s(i, i) += 0.99;
  return s;
}

// one psi step: (I - R_n - Q_n psi_prev)^{-1} P_n
Matrix psi_step(const MatrixTriple& t, const Matrix& prev, std::int64_t layer_for_error) {
  Matrix coeff = Matrix::identity(t.m) - t.R - t.Q * prev;
  try {
    return solve(std::move(coeff), t.P);
  } catch (const SingularMatrixError&) {
    std::ostringstream os;
    os << "zeta recursion singular at layer " << layer_for_error << " (C2* violation)";
    throw ConvergenceError(os.str());
  }
}

bool finite_width1(const EnvironmentSpec& spec) {
  return spec.m == 1 && spec.finite_support();
}

// m=1 closed forms: A_n = q_n/p_n regardless of the lazy part.
double width1_ratio(const MatrixTriple& t) { return t.Q(0, 0) / t.P(0, 0); }

double width1_lambda_exact(const EnvironmentSpec& spec) {
  double s = 0.0;
  for (const auto& atom : spec.support) s += atom.prob * std::log(width1_ratio(atom.triple));
  return s;
}

double width1_r_exact(const EnvironmentSpec& spec, double alpha) {
  double s = 0.0;
  for (const auto& atom : spec.support) s += atom.prob * std::pow(width1_ratio(atom.triple), alpha);
  return s;
}

}  // namespace

ZetaSequence compute_zeta(const Environment& env, Window w, double tol) {
  const int m = env.width();
  ZetaSequence out;
  out.window = w;
  out.tol = tol;

  if (m == 1) {
    // the unique 1x1 stochastic matrix
    out.kept_lo = w.lo - 64;
    out.zeta.assign(static_cast<std::size_t>(w.hi - out.kept_lo + 1), Matrix(1, 1, 1.0));
    out.burn_in = 0;
    out.seed_discrepancy = 0.0;
    out.min_entry = 1.0;
    double resid = 0.0;
    for (std::int64_t n = w.lo; n <= w.hi; ++n) {
      const MatrixTriple t = env.contains(n) ? env.at(n) : env.make_layer(n);
      resid = std::max(resid, std::fabs(1.0 - t.P(0, 0) / (1.0 - t.R(0, 0) - t.Q(0, 0))));
    }
    out.max_residual = resid;
    return out;
  }

  std::int64_t worst_layer = w.lo;
  for (std::int64_t burn = 64; burn <= kMaxBurnIn; burn *= 2) {
    const std::int64_t a = w.lo - burn;
    Environment local = env.contains(a) && env.contains(w.hi) ? env : env.extended(a, w.hi);
    const Environment& e = (env.contains(a) && env.contains(w.hi)) ? env : local;

    Matrix pa = uniform_seed(m);
    Matrix pb = mollified_identity_seed(m);
    std::vector<Matrix> kept;
    kept.reserve(static_cast<std::size_t>(w.hi - a + 1));
    double disc = 0.0;
    worst_layer = w.lo;
    for (std::int64_t n = a; n <= w.hi; ++n) {
      const MatrixTriple& t = e.at(n);
      pa = psi_step(t, pa, n);
      pb = psi_step(t, pb, n);
      kept.push_back(pa);
      if (n >= w.lo) {
        const double d = pa.max_abs_diff(pb);
        if (d > disc) {
          disc = d;
          worst_layer = n;
        }
      }
    }
    if (disc < tol) {
      out.kept_lo = a;
      out.zeta = std::move(kept);
      out.burn_in = burn;
      out.seed_discrepancy = disc;
      double min_entry = 1.0;
      double resid = 0.0;
      for (std::int64_t n = w.lo; n <= w.hi; ++n) {
        const Matrix& z = out.at(n);
        min_entry = std::min(min_entry, z.min_entry());
        Matrix check = psi_step(e.at(n), out.at(n - 1), n);
        resid = std::max(resid, z.max_abs_diff(check));
      }
      out.min_entry = min_entry;
      out.max_residual = resid;
      return out;
    }
  }
  std::ostringstream os;
  os << "zeta burn-in did not converge below tol=" << tol << "; worst layer " << worst_layer
     << " (C2* violation?)";
  throw ConvergenceError(os.str());
}

Matrix PropagatorSet::h_product(std::int64_t j, std::int64_t i) const {
  const int m = A.empty() ? 1 : A.front().rows();
  Matrix h = Matrix::identity(m);
  for (std::int64_t k = 0; k < i; ++k) h = h * a_at(j - k);
  return h;
}

PropagatorSet compute_propagators(const Environment& env, const ZetaSequence& zeta, double tol) {
  const int m = env.width();
  const Window w = zeta.window;
  if (zeta.kept_lo > w.lo - 1) throw ConvergenceError("zeta prefix too short for propagators");

  PropagatorSet out;
  out.window = w;
  out.kept_lo = zeta.kept_lo + 1;  // A_n consumes zeta_{n-1}
  out.zeta = zeta;

  const std::size_t count = static_cast<std::size_t>(w.hi - out.kept_lo + 1);
  out.A.reserve(count);
  out.U.reserve(count);
  for (std::int64_t n = out.kept_lo; n <= w.hi; ++n) {
    const MatrixTriple t = env.contains(n) ? env.at(n) : env.make_layer(n);
    Matrix coeff = Matrix::identity(m) - t.Q * zeta.at(n - 1) - t.R;
    Matrix u;
    try {
      u = solve(std::move(coeff), Matrix::identity(m));
    } catch (const SingularMatrixError&) {
      std::ostringstream os;
      os << "(I - Q zeta - R) singular at layer " << n << " (C2* violation)";
      throw ConvergenceError(os.str());
    }
    out.A.push_back(u * t.Q);
    out.U.push_back(std::move(u));
  }

  // y by burn-in from the kept prefix; reproducibility checked against a
  // half-prefix start
  out.y.assign(count, Vec(m, 1.0 / m));
  if (m == 1) {
    out.y_discrepancy = 0.0;
  } else {
    // y_n is the first-hit rung distribution of layer n, i.e. the row
    // propagated by the zeta of the layer below: y_n = y_{n-1} zeta_{n-1}
    auto iterate_from = [&](std::int64_t start) {
      Vec v(m, 1.0 / m);
      for (std::int64_t n = start + 1; n <= w.hi; ++n) {
        v = vec_mat(v, zeta.at(n - 1));
        if (n >= out.kept_lo) out.y[static_cast<std::size_t>(n - out.kept_lo)] = v;
      }
      return v;
    };
    iterate_from(zeta.kept_lo);
    // compare against a start halfway through the prefix
    const std::int64_t half = zeta.kept_lo + (w.lo - zeta.kept_lo) / 2;
    Vec probe(m, 1.0 / m);
    double disc = 0.0;
    for (std::int64_t n = half + 1; n <= w.hi; ++n) {
      probe = vec_mat(probe, zeta.at(n - 1));
      if (n >= w.lo)
        disc = std::max(disc, vec_max_abs_diff(probe, out.y_at(n)));
    }
    out.y_discrepancy = disc;
    if (disc > tol) throw ConvergenceError("y burn-in did not stabilize within tol");
  }
  return out;
}

PropagatorSet compute_propagators(const Environment& env, Window w, double tol) {
  return compute_propagators(env, compute_zeta(env, w, tol), tol);
}

namespace {

// Streaming A_n generator with a fixed-length psi warmup; used by the
// long-product estimators so nothing is materialized.
class PropagatorStream {
 public:
  PropagatorStream(const Environment& env, std::int64_t first, std::int64_t warmup = 1024)
      : env_(env), m_(env.width()) {
    psi_ = uniform_seed(m_);
    for (std::int64_t n = first - warmup; n < first; ++n) step_to(n);
    next_ = first;
  }

  // A at next_ and advance
  Matrix next_a() {
    const MatrixTriple t = layer(next_);
    Matrix coeff = Matrix::identity(m_) - t.Q * psi_ - t.R;
    Matrix u;
    try {
      u = solve(std::move(coeff), Matrix::identity(m_));
    } catch (const SingularMatrixError&) {
      std::ostringstream os;
      os << "(I - Q zeta - R) singular at layer " << next_;
      throw ConvergenceError(os.str());
    }
    Matrix a = u * t.Q;
    psi_ = u * t.P;  // zeta at next_, becomes the prev for the following layer
    ++next_;
    return a;
  }

 private:
  MatrixTriple layer(std::int64_t n) const { return env_.contains(n) ? env_.at(n) : env_.make_layer(n); }
  void step_to(std::int64_t n) { psi_ = psi_step(layer(n), psi_, n); }

  const Environment& env_;
  int m_;
  Matrix psi_;
  std::int64_t next_ = 0;
};

}  // namespace

LyapunovEstimate top_lyapunov(const Environment& env, std::int64_t n) {
  if (n < 1) throw std::invalid_argument("top_lyapunov: n must be >= 1");
  const int m = env.width();
  PropagatorStream stream(env, 0);

  Matrix prod = Matrix::identity(m);
  std::vector<double> increments;
  increments.reserve(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) {
    prod = stream.next_a() * prod;
    const double norm = prod.inf_norm();
    if (norm <= 0.0) throw ConvergenceError("top_lyapunov: zero matrix product");
    increments.push_back(std::log(norm));
    prod *= 1.0 / norm;
  }

  double total = 0.0;
  for (double x : increments) total += x;

  LyapunovEstimate out;
  out.steps = n;
  out.value = total / static_cast<double>(n);

  const std::int64_t nb = std::max<std::int64_t>(2, static_cast<std::int64_t>(std::sqrt(static_cast<double>(n))));
  const std::int64_t bs = n / nb;
  if (bs >= 2) {
    std::vector<double> block_means;
    block_means.reserve(static_cast<std::size_t>(nb));
    for (std::int64_t b = 0; b < nb; ++b) {
      double s = 0.0;
      for (std::int64_t k = b * bs; k < (b + 1) * bs; ++k) s += increments[static_cast<std::size_t>(k)];
      block_means.push_back(s / static_cast<double>(bs));
    }
    double mu = 0.0;
    for (double v : block_means) mu += v;
    mu /= static_cast<double>(nb);
    double var = 0.0;
    for (double v : block_means) var += (v - mu) * (v - mu);
    var /= static_cast<double>(nb - 1);
    out.se = std::sqrt(var / static_cast<double>(nb));
  }
  return out;
}

namespace {

double log_mean_exp(const std::vector<double>& xs) {
  double mx = xs.front();
  for (double x : xs) mx = std::max(mx, x);
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s / static_cast<double>(xs.size()));
}

}  // namespace

MomentEstimate moment_lyapunov(const EnvironmentSpec& spec, double alpha, std::int64_t n,
                               std::int64_t replicas, std::uint64_t seed, ExecMode mode) {
  constexpr double kMaxAlpha = 64.0;
  if (std::fabs(alpha) > kMaxAlpha) throw std::invalid_argument("moment_lyapunov: alpha out of range");
  MomentEstimate out;
  out.n = n;
  out.replicas = replicas;
  if (alpha == 0.0) {
    out.exact = true;
    return out;  // r(0) = 1 exactly
  }
  if (finite_width1(spec)) {
    const double r = width1_r_exact(spec, alpha);
    out.value = out.lo = out.hi = r;
    out.exact = true;
    return out;
  }
  if (n < 1 || replicas < 1) throw std::invalid_argument("moment_lyapunov: n, replicas must be >= 1");

  std::vector<double> log_norms(static_cast<std::size_t>(replicas));
  for_each_index(replicas, mode, [&](std::int64_t r) {
    EnvironmentSpec derived = spec;
    derived.master_seed = derive_seed(seed, stream::kEnvReplica, static_cast<std::uint64_t>(r));
    Environment env(derived, Window{0, 0});
    PropagatorStream stream(env, 1, 512);
    Matrix prod = Matrix::identity(spec.m);
    double logsum = 0.0;
    for (std::int64_t k = 1; k <= n; ++k) {
      prod = stream.next_a() * prod;
      const double norm = prod.inf_norm();
      logsum += std::log(norm);
      prod *= 1.0 / norm;
    }
    log_norms[static_cast<std::size_t>(r)] = logsum;
  });

  std::vector<double> scaled(log_norms.size());
  for (std::size_t i = 0; i < log_norms.size(); ++i) scaled[i] = alpha * log_norms[i];
  out.value = std::exp(log_mean_exp(scaled) / static_cast<double>(n));

  // replica bootstrap for the CI
  constexpr int kBoot = 200;
  std::vector<double> boot(kBoot);
  Rng brng(seed, stream::kBootstrap, 0);
  std::vector<double> resample(scaled.size());
  for (int b = 0; b < kBoot; ++b) {
    for (std::size_t i = 0; i < scaled.size(); ++i)
      resample[i] = scaled[brng.below(scaled.size())];
    boot[static_cast<std::size_t>(b)] = std::exp(log_mean_exp(resample) / static_cast<double>(n));
  }
  std::sort(boot.begin(), boot.end());
  out.lo = boot[static_cast<std::size_t>(kBoot * 0.025)];
  out.hi = boot[static_cast<std::size_t>(kBoot * 0.975) - 1];
  return out;
}

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::Recurrent: return "Recurrent";
    case Regime::TransientRight: return "TransientRight";
    case Regime::TransientLeft: return "TransientLeft";
  }
  return "?";
}

Regime classify_regime(double lambda_hat, double se) {
  if (lambda_hat < -3.0 * se) return Regime::TransientRight;
  if (lambda_hat > 3.0 * se) return Regime::TransientLeft;
  return Regime::Recurrent;
}

Regime classify_regime(const EnvironmentSpec& spec, std::uint64_t seed, std::int64_t n) {
  if (finite_width1(spec)) {
    const double lambda = width1_lambda_exact(spec);
    if (std::fabs(lambda) < 1e-12) return Regime::Recurrent;
    return lambda < 0 ? Regime::TransientRight : Regime::TransientLeft;
  }
  EnvironmentSpec derived = spec;
  derived.master_seed = derive_seed(seed, stream::kGeneric, 0);
  Environment env(derived, Window{0, 0});
  const LyapunovEstimate lam = top_lyapunov(env, n);
  return classify_regime(lam.value, lam.se);
}

CriticalExponent solve_critical_exponent(const EnvironmentSpec& spec,
                                         const CriticalSolveOptions& opts) {
  if (classify_regime(spec, opts.seed) != Regime::TransientRight)
    throw std::invalid_argument("solve_critical_exponent: walk not transient right");

  const bool exact = finite_width1(spec);
  auto r_of = [&](double alpha) -> MomentEstimate {
    return moment_lyapunov(spec, alpha, opts.n, opts.replicas, opts.seed);
  };

  CriticalExponent out;
  out.exact = exact;

  // +infinity detection on the probe grid
  const double probes[4] = {1.0, 2.0, 4.0, 8.0};
  MomentEstimate vals[4];
  bool decreasing_below_one = true;
  double prev = 1.0;
  for (int i = 0; i < 4; ++i) {
    vals[i] = r_of(probes[i]);
    if (!(vals[i].hi < 1.0) || !(vals[i].value < prev)) decreasing_below_one = false;
    prev = vals[i].value;
  }
  if (decreasing_below_one) {
    out.infinite = true;
    return out;
  }

  // bracket [lo, hi] with r(lo) < 1 < r(hi)
  double lo = 0.0, hi = 0.0;
  double last_below = -1.0;
  for (int i = 0; i < 4; ++i) {
    if (vals[i].value < 1.0) last_below = probes[i];
    if (vals[i].value > 1.0) {
      hi = probes[i];
      lo = (last_below > 0.0) ? last_below : 1e-6;
      break;
    }
  }
  if (hi == 0.0) {
    // keep expanding; r is convex and eventually exceeds 1 unless s = inf
    double alpha = 16.0;
    lo = 8.0;
    while (alpha <= 64.0) {
      MomentEstimate v = r_of(alpha);
      if (v.value > 1.0) {
        hi = alpha;
        break;
      }
      lo = alpha;
      alpha *= 2.0;
    }
    if (hi == 0.0) {
      out.infinite = true;
      return out;
    }
  }

  while (hi - lo > opts.tol_s) {
    const double mid = 0.5 * (lo + hi);
    const MomentEstimate v = r_of(mid);
    if (std::fabs(std::log(v.value)) < opts.tol_log_r && (hi - lo) < 0.25) {
      // ties toward the smaller endpoint
      out.s = mid;
      out.bracket_lo = lo;
      out.bracket_hi = hi;
      return out;
    }
    if (v.value < 1.0)
      lo = mid;
    else
      hi = mid;
  }
  out.s = lo;  // smaller bracket endpoint
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  return out;
}

BoundedProductsReport check_bounded_products(const Environment& env, std::int64_t n,
                                             double k_threshold) {
  BoundedProductsReport out;
  out.n = n;
  out.threshold = k_threshold;
  PropagatorStream stream(env, 0);
  Matrix prod = Matrix::identity(env.width());
  double cum = 0.0, lo = 0.0, hi = 0.0;
  double range_half = 0.0;
  for (std::int64_t k = 0; k <= n; ++k) {
    prod = stream.next_a() * prod;
    const double norm = prod.inf_norm();
    cum += std::log(norm);
    prod *= 1.0 / norm;
    lo = std::min(lo, cum);
    hi = std::max(hi, cum);
    if (k == n / 2) range_half = std::max(hi, -lo);
  }
  const double range = std::max(hi, -lo);
  out.k_observed = std::exp(range);
  out.k_half = std::exp(range_half);
  out.flag = out.k_observed <= k_threshold && (range - range_half) < std::log(1.1);
  return out;
}

double leading_eigenvalue_map(const MatrixTriple& t) {
  const int m = t.m;
  Matrix zeta = uniform_seed(m);
  for (int it = 0; it < 400; ++it) zeta = psi_step(t, zeta, 0);
  Matrix coeff = Matrix::identity(m) - t.R - t.Q * zeta;
  Matrix a = solve(std::move(coeff), t.Q);
  // power iteration; A is entrywise nonnegative, Perron root is the norm limit
  Vec v(m, 1.0 / m);
  double lambda = 0.0;
  for (int it = 0; it < 1000; ++it) {
    Vec w = mat_vec(a, v);
    double s = 0.0;
    for (double x : w) s += std::fabs(x);
    if (s == 0.0) return 0.0;
    lambda = s;
    for (double& x : w) x /= s;
    v = std::move(w);
  }
  return lambda;
}

SpectralSummary describe_spec(const EnvironmentSpec& spec, const DescribeOptions& opts) {
  SpectralSummary out;

  if (finite_width1(spec)) {
    out.lambda_hat = width1_lambda_exact(spec);
    out.lambda_se = 0.0;
  } else {
    EnvironmentSpec derived = spec;
    derived.master_seed = derive_seed(opts.seed, stream::kGeneric, 1);
    Environment env(derived, Window{0, 0});
    const LyapunovEstimate lam = top_lyapunov(env, opts.lyapunov_n);
    out.lambda_hat = lam.value;
    out.lambda_se = lam.se;
  }
  out.regime = classify_regime(spec, opts.seed, opts.lyapunov_n);

  for (double alpha : opts.alpha_grid) {
    const MomentEstimate r = moment_lyapunov(spec, alpha, opts.moment_n, opts.moment_replicas,
                                             opts.seed, opts.mode);
    out.r_curve.push_back({alpha, r.value, r.lo, r.hi});
  }

  if (out.regime == Regime::TransientRight) {
    CriticalSolveOptions copts;
    copts.n = opts.moment_n;
    copts.replicas = opts.moment_replicas;
    copts.seed = opts.seed;
    const CriticalExponent ce = solve_critical_exponent(spec, copts);
    out.s_hat = ce.s;
    out.s_infinite = ce.infinite;
  } else {
    out.s_infinite = false;
    out.s_hat = 0.0;
  }

  {
    Environment env = sample_environment(spec, Window{0, 0}, 7);
    const BoundedProductsReport bp = check_bounded_products(env, opts.bp_n, opts.bp_threshold);
    out.bp_flag = bp.flag;
    out.k_observed = bp.k_observed;
  }

  if (spec.finite_support()) {
    for (const auto& atom : spec.support)
      out.log_lambda_support.push_back(std::log(leading_eigenvalue_map(atom.triple)));
    std::sort(out.log_lambda_support.begin(), out.log_lambda_support.end());
    out.log_lambda_support.erase(
        std::unique(out.log_lambda_support.begin(), out.log_lambda_support.end(),
                    [](double a, double b) { return std::fabs(a - b) < 1e-12; }),
        out.log_lambda_support.end());
  }
  return out;
}

}  // namespace striplab
