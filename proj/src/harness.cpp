#include "striplab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "striplab/stats.hpp"

namespace striplab {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

int series_cap_margin(std::int64_t n) {
  const double ln = std::log(static_cast<double>(std::max<std::int64_t>(n, 3)));
  return std::max(64, static_cast<int>(std::ceil(40.0 * ln))) + 16;
}

// salts for deriving independent stream families inside a check
namespace salt {
constexpr std::uint64_t kEnv = 11;
constexpr std::uint64_t kWalk = 12;
constexpr std::uint64_t kRef = 13;
constexpr std::uint64_t kConstants = 14;
constexpr std::uint64_t kAux = 15;
}  // namespace salt

EnvironmentSpec reseeded(const EnvironmentSpec& spec, std::uint64_t seed, std::uint64_t which) {
  EnvironmentSpec out = spec;
  out.master_seed = derive_seed(seed, stream::kGeneric, which);
  return out;
}

struct RegimeInfo {
  Regime regime = Regime::Recurrent;
  double s = 0.0;
  bool s_infinite = false;
};

RegimeInfo regime_info(const EnvironmentSpec& spec, std::uint64_t seed) {
  RegimeInfo info;
  info.regime = classify_regime(spec, seed);
  if (info.regime == Regime::TransientRight) {
    CriticalSolveOptions opts;
    opts.seed = seed;
    const CriticalExponent ce = solve_critical_exponent(spec, opts);
    info.s = ce.s;
    info.s_infinite = ce.infinite;
  }
  return info;
}

bool has_positive_speed(const RegimeInfo& info) {
  return info.regime == Regime::TransientRight && (info.s_infinite || info.s > 1.0);
}

bool is_diffusive(const RegimeInfo& info) {
  return info.regime == Regime::TransientRight && (info.s_infinite || info.s > 2.0);
}

void require_regime(bool ok, const std::string& check, const std::string& needed) {
  if (!ok) throw RegimeError(check + ": requires " + needed);
}

// fixed quenched environment + propagators with enough margin for the
// inner series at every requested layer
struct QuenchedContext {
  Environment env;
  PropagatorSet props;
};

QuenchedContext quenched_context(const EnvironmentSpec& spec, std::uint64_t seed,
                                 std::int64_t lo, std::int64_t hi, std::int64_t extra_right = 0) {
  const int margin = series_cap_margin(hi + extra_right);
  const Window zw{lo - margin, hi + extra_right};
  Environment env = sample_environment(reseeded(spec, seed, salt::kEnv), Window{zw.lo - 96, zw.hi + 1});
  PropagatorSet props = compute_propagators(env, zw, 1e-10);
  return {std::move(env), std::move(props)};
}

double gaussian_exp(double x, double scale_sq_n) { return std::exp(-x * x / (2.0 * scale_sq_n)); }

}  // namespace

void CheckReport::detail(const std::string& k, double v) { details.emplace_back(k, fmt(v)); }

LimitConstants estimate_constants(const EnvironmentSpec& spec, const ConstantsOptions& opts) {
  const RegimeInfo info = regime_info(spec, derive_seed(opts.seed, stream::kGeneric, salt::kConstants));
  require_regime(has_positive_speed(info), "estimate_constants",
                 "a transient-right regime with s > 1 (positive speed)");
  if (opts.require_diffusive)
    require_regime(is_diffusive(info), "estimate_constants", "a diffusive regime with s > 2");

  LimitConstants out;

  // a: analytic crossing times averaged over layers and environments
  {
    std::vector<double> env_means(static_cast<std::size_t>(opts.a_envs));
    const EnvironmentSpec base = reseeded(spec, opts.seed, salt::kConstants);
    for_each_index(opts.a_envs, opts.mode, [&](std::int64_t e) {
      const int margin = series_cap_margin(opts.a_layers);
      const Window zw{-margin, opts.a_layers + 1};
      Environment env = sample_environment(base, Window{zw.lo - 96, zw.hi + 1},
                                           static_cast<std::uint64_t>(e));
      PropagatorSet props = compute_propagators(env, zw, 1e-10);
      const HittingExpectation h = expected_hitting_vector(props, 0, opts.a_layers);
      double s = 0.0;
      for (double v : h.a) s += v;
      env_means[static_cast<std::size_t>(e)] = s / static_cast<double>(h.a.size());
    });
    const MeanVar mv = mean_var(env_means);
    out.a = mv.mean;
    out.a_se = mv.se;
  }
  out.v = 1.0 / out.a;

  if (is_diffusive(info)) {
    out.diffusive = true;

    // Dbar^2: quenched Var(T_n)/n averaged over a few environments
    std::vector<double> dbar_sq(static_cast<std::size_t>(opts.dbar_envs));
    for (std::int64_t e = 0; e < opts.dbar_envs; ++e) {
      Environment env = sample_environment(reseeded(spec, opts.seed, salt::kConstants + 100),
                                           Window{-96, opts.dbar_n + 1}, static_cast<std::uint64_t>(e));
      const auto ts = sample_hitting_times(env, SiteState{0, 1}, opts.dbar_n, 1'000'000'000,
                                           opts.dbar_replicas,
                                           derive_seed(opts.seed, stream::kGeneric, 1000 + static_cast<std::uint64_t>(e)),
                                           opts.mode);
      std::vector<double> vals(ts.size());
      for (std::size_t i = 0; i < ts.size(); ++i) vals[i] = static_cast<double>(ts[i]);
      const MeanVar mv = mean_var(vals);
      dbar_sq[static_cast<std::size_t>(e)] = mv.var / static_cast<double>(opts.dbar_n);
    }
    const MeanVar mv = mean_var(dbar_sq);
    out.dbar = std::sqrt(mv.mean);
    out.dbar_se = mv.n > 1 ? mv.se / (2.0 * out.dbar) : 0.0;
    double lo = dbar_sq[0], hi = dbar_sq[0];
    for (double v : dbar_sq) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out.dbar_spread = std::sqrt(hi) - std::sqrt(lo);
    out.d = out.dbar * std::pow(out.v, 1.5);

    // Dhat: spread of the drift index b_n across environments
    {
      std::vector<double> bvals(static_cast<std::size_t>(opts.dhat_envs));
      const std::int64_t horizon =
          static_cast<std::int64_t>(std::ceil(static_cast<double>(opts.dhat_n) * out.v * 1.6)) +
          static_cast<std::int64_t>(4.0 * std::sqrt(static_cast<double>(opts.dhat_n))) + 64;
      const EnvironmentSpec base = reseeded(spec, opts.seed, salt::kConstants + 200);
      for_each_index(opts.dhat_envs, opts.mode, [&](std::int64_t e) {
        const int margin = series_cap_margin(horizon);
        const Window zw{-margin, horizon + 1};
        Environment env = sample_environment(base, Window{zw.lo - 96, zw.hi + 1},
                                             static_cast<std::uint64_t>(e));
        PropagatorSet props = compute_propagators(env, zw, 1e-10);
        const HittingExpectation h = expected_hitting_vector(props, 0, horizon);
        DriftIndex drift(0, h.a);
        bvals[static_cast<std::size_t>(e)] =
            static_cast<double>(drift.b(static_cast<double>(opts.dhat_n)));
      });
      const MeanVar mv2 = mean_var(bvals);
      out.dhat = std::sqrt(mv2.var) / std::sqrt(static_cast<double>(opts.dhat_n));
      out.dhat_se = mv2.n > 1 ? out.dhat / std::sqrt(2.0 * static_cast<double>(mv2.n - 1)) : 0.0;
    }
    out.dbold = std::sqrt(out.d * out.d + out.dhat * out.dhat);
  }
  return out;
}

CheckReport check_quenched_clt(const EnvironmentSpec& spec, const QuenchedCltOptions& opts) {
  const auto t0 = Clock::now();
  CheckReport rep;
  rep.check_id = "quenched_clt";
  rep.spec_id = spec.name;
  rep.seed = opts.seed;
  rep.n = opts.n;
  rep.replicas = opts.replicas;
  rep.threshold = opts.threshold;
  rep.negative_control = opts.negative_control;

  if (!opts.negative_control) {
    const RegimeInfo info = regime_info(spec, derive_seed(opts.seed, stream::kGeneric, salt::kAux));
    require_regime(is_diffusive(info), "check_quenched_clt", "s > 2");
  }

  QuenchedContext ctx = quenched_context(spec, opts.seed, 0, opts.n);
  const HittingExpectation h = expected_hitting_vector(ctx.props, 0, opts.n);
  const double e0n = h.e_to(opts.n)[0];  // start rung 1

  const auto ts = sample_hitting_times(ctx.env, SiteState{0, 1}, opts.n, 1'000'000'000,
                                       opts.replicas, derive_seed(opts.seed, stream::kGeneric, salt::kWalk),
                                       opts.mode);
  std::int64_t capped = 0;
  std::vector<double> vals;
  vals.reserve(ts.size());
  for (auto t : ts) {
    if (t < 0) {
      ++capped;
      continue;
    }
    vals.push_back(static_cast<double>(t));
  }
  if (capped > opts.replicas / 1000) rep.degraded = true;

  const MeanVar mv = mean_var(vals);
  const double dbar_hat = std::sqrt(mv.var / static_cast<double>(opts.n));
  std::vector<double> xs(vals.size());
  const double scale = std::sqrt(static_cast<double>(opts.n)) * dbar_hat;
  for (std::size_t i = 0; i < vals.size(); ++i) xs[i] = (vals[i] - e0n) / scale;
  std::sort(xs.begin(), xs.end());
  rep.statistic = ks_statistic(xs, [](double t) { return normal_cdf(t); });
  rep.pass = rep.statistic < rep.threshold;

  rep.detail("e0n_analytic", e0n);
  rep.detail("mean_Tn", mv.mean);
  rep.detail("dbar_hat", dbar_hat);
  rep.detail("capped", static_cast<double>(capped));
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

CheckReport check_hitting_llt(const EnvironmentSpec& spec, const HittingLltOptions& opts) {
  const auto t0 = Clock::now();
  CheckReport rep;
  rep.check_id = "hitting_llt";
  rep.spec_id = spec.name;
  rep.seed = opts.seed;
  rep.n = opts.n;
  rep.replicas = opts.replicas;
  rep.threshold = opts.threshold;

  {
    const RegimeInfo info = regime_info(spec, derive_seed(opts.seed, stream::kGeneric, salt::kAux));
    require_regime(is_diffusive(info), "check_hitting_llt", "s > 2");
  }
  const double needed = 100.0 * std::sqrt(static_cast<double>(opts.n)) /
                        (opts.threshold * opts.threshold);
  if (static_cast<double>(opts.replicas) < needed) {
    std::ostringstream os;
    os << "check_hitting_llt: too few replicas for per-integer bins; need >= " << needed;
    throw std::invalid_argument(os.str());
  }

  QuenchedContext ctx = quenched_context(spec, opts.seed, 0, opts.n);
  const HittingExpectation h = expected_hitting_vector(ctx.props, 0, opts.n);
  const double e0n = h.e_to(opts.n)[0];

  const auto ts = sample_hitting_times(ctx.env, SiteState{0, 1}, opts.n, 1'000'000'000,
                                       opts.replicas, derive_seed(opts.seed, stream::kGeneric, salt::kWalk),
                                       opts.mode);
  std::vector<double> vals;
  vals.reserve(ts.size());
  for (auto t : ts)
    if (t >= 0) vals.push_back(static_cast<double>(t));
  const MeanVar mv = mean_var(vals);
  const double dbar_hat = std::sqrt(mv.var / static_cast<double>(opts.n));
  const double sigma = dbar_hat * std::sqrt(static_cast<double>(opts.n));

  const std::int64_t k_lo = static_cast<std::int64_t>(std::floor(e0n - 4.0 * sigma));
  const std::int64_t k_hi = static_cast<std::int64_t>(std::ceil(e0n + 4.0 * sigma));
  std::vector<std::int64_t> hist(static_cast<std::size_t>(k_hi - k_lo + 1), 0);
  std::int64_t even = 0, odd = 0;
  for (auto t : ts) {
    if (t < 0) continue;
    (t % 2 == 0 ? even : odd)++;
    if (t >= k_lo && t <= k_hi) hist[static_cast<std::size_t>(t - k_lo)]++;
  }

  const double front = dbar_hat * std::sqrt(2.0 * M_PI * static_cast<double>(opts.n));
  double sup = 0.0;
  double gauss_mass = 0.0;
  const double inv_r = 1.0 / static_cast<double>(vals.size());
  for (std::int64_t k = k_lo; k <= k_hi; ++k) {
    const double p_hat = static_cast<double>(hist[static_cast<std::size_t>(k - k_lo)]) * inv_r;
    const double g = gaussian_exp(static_cast<double>(k) - e0n, dbar_hat * dbar_hat * opts.n);
    sup = std::max(sup, std::fabs(front * p_hat - g));
    gauss_mass += g / front;
  }
  rep.statistic = sup;
  rep.pass = sup < rep.threshold;
  rep.detail("e0n_analytic", e0n);
  rep.detail("dbar_hat", dbar_hat);
  rep.detail("gauss_mass", gauss_mass);
  rep.detail("parity_even_frac", static_cast<double>(even) / static_cast<double>(even + odd));
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

CheckReport check_position_llt(const EnvironmentSpec& spec, const PositionLltOptions& opts) {
  const auto t0 = Clock::now();
  CheckReport rep;
  rep.check_id = opts.mode == PositionLltMode::Quenched ? "position_llt_quenched"
                                                        : "position_llt_annealed";
  rep.spec_id = spec.name;
  rep.seed = opts.seed;
  rep.n = opts.n;
  rep.replicas = opts.replicas;
  rep.threshold = opts.threshold;

  {
    const RegimeInfo info = regime_info(spec, derive_seed(opts.seed, stream::kGeneric, salt::kAux));
    require_regime(is_diffusive(info), "check_position_llt", "r(2) < 1 (s > 2)");
    if (spec.ellipticity.kappa <= 0.0)
      throw RegimeError("check_position_llt: condition C3 (kappa > 0) is required for the LLT");
  }

  ConstantsOptions copts;
  copts.seed = derive_seed(opts.seed, stream::kGeneric, salt::kConstants);
  const LimitConstants con = estimate_constants(spec, copts);

  const double sqn = std::sqrt(static_cast<double>(opts.n));

  if (opts.mode == PositionLltMode::Quenched) {
    const std::int64_t k_guess = static_cast<std::int64_t>(std::ceil(opts.n * con.v)) +
                                 static_cast<std::int64_t>(4.0 * sqn) + 8;
    QuenchedContext ctx = quenched_context(spec, opts.seed, 0, k_guess,
                                           /*extra_right=*/series_cap_margin(k_guess));
    const HittingExpectation h = expected_hitting_vector(ctx.props, 0, k_guess);
    DriftIndex drift(0, h.a);
    const std::int64_t bn = drift.b(static_cast<double>(opts.n));
    const std::int64_t k_lo = std::max<std::int64_t>(
        1, bn - static_cast<std::int64_t>(std::floor(opts.window_radius * sqn)));
    const std::int64_t k_hi = bn + static_cast<std::int64_t>(std::floor(opts.window_radius * sqn));

    const auto pos = sample_positions(ctx.env, SiteState{0, 1}, opts.n, opts.replicas,
                                      derive_seed(opts.seed, stream::kGeneric, salt::kWalk), opts.exec);
    const int m = spec.m;
    std::vector<std::int64_t> hist(static_cast<std::size_t>((k_hi - k_lo + 1) * m), 0);
    for (const auto& st : pos)
      if (st.layer >= k_lo && st.layer <= k_hi)
        hist[static_cast<std::size_t>((st.layer - k_lo) * m + st.rung - 1)]++;

    double sup = 0.0;
    std::int64_t argk = k_lo;
    const double inv_r = 1.0 / static_cast<double>(opts.replicas);
    for (std::int64_t k = k_lo; k <= k_hi; ++k) {
      const OccupationProfile occ = expected_occupation_row(ctx.props, k);
      const double gexp = 1.0 / gaussian_exp(static_cast<double>(k - bn), con.d * con.d * opts.n);
      for (int i = 1; i <= m; ++i) {
        const double rho = occ.rho[static_cast<std::size_t>(i - 1)];
        const double p_hat =
            static_cast<double>(hist[static_cast<std::size_t>((k - k_lo) * m + i - 1)]) * inv_r;
        const double stat = std::sqrt(2.0 * M_PI * opts.n) * con.d * con.a / rho * gexp * p_hat;
        if (std::fabs(stat - 1.0) > sup) {
          sup = std::fabs(stat - 1.0);
          argk = k;
        }
      }
    }
    rep.statistic = sup;
    rep.pass = sup < rep.threshold;
    rep.detail("b_n", static_cast<double>(bn));
    rep.detail("window_lo", static_cast<double>(k_lo));
    rep.detail("window_hi", static_cast<double>(k_hi));
    rep.detail("worst_k", static_cast<double>(argk));
    rep.detail("D", con.d);
    rep.detail("a", con.a);
  } else {
    const std::int64_t k0 = static_cast<std::int64_t>(std::floor(opts.n * con.v));
    const int m = spec.m;
    const std::int64_t span = static_cast<std::int64_t>(std::ceil(opts.window_radius * sqn)) + 2;
    const std::int64_t k_lo = k0 - span, k_hi = k0 + span;
    const EnvironmentSpec base = reseeded(spec, opts.seed, salt::kEnv);
    const std::uint64_t walk_seed = derive_seed(opts.seed, stream::kGeneric, salt::kWalk);

    std::vector<std::vector<std::int64_t>> hists(static_cast<std::size_t>(opts.env_count));
    for_each_index(opts.env_count, opts.exec, [&](std::int64_t e) {
      Environment env = sample_environment(base, Window{-96, opts.n + 2},
                                           static_cast<std::uint64_t>(e));
      std::vector<std::int64_t> hist(static_cast<std::size_t>((k_hi - k_lo + 1) * m), 0);
      for (std::int64_t w = 0; w < opts.replicas; ++w) {
        Rng rng(walk_seed, stream::kWalk,
                static_cast<std::uint64_t>(e) * static_cast<std::uint64_t>(opts.replicas) +
                    static_cast<std::uint64_t>(w));
        LayerRows rows(env);
        const SiteState st = position_after(rows, SiteState{0, 1}, opts.n, rng);
        if (st.layer >= k_lo && st.layer <= k_hi)
          hist[static_cast<std::size_t>((st.layer - k_lo) * m + st.rung - 1)]++;
      }
      hists[static_cast<std::size_t>(e)] = std::move(hist);
    });
    std::vector<double> p_hat(static_cast<std::size_t>((k_hi - k_lo + 1) * m), 0.0);
    const double inv = 1.0 / (static_cast<double>(opts.env_count) * static_cast<double>(opts.replicas));
    for (const auto& hv : hists)
      for (std::size_t i = 0; i < hv.size(); ++i) p_hat[i] += static_cast<double>(hv[i]) * inv;

    // layer mass at the window center (summed over rungs; the displayed
    // per-rung form only holds as stated at m = 1)
    auto layer_stat = [&](std::int64_t k) {
      double mass = 0.0;
      for (int i = 0; i < m; ++i) mass += p_hat[static_cast<std::size_t>((k - k_lo) * m + i)];
      const double gexp = 1.0 / gaussian_exp(static_cast<double>(k) - opts.n * con.v,
                                             con.dbold * con.dbold * opts.n);
      return std::sqrt(2.0 * M_PI * opts.n) * con.dbold * gexp * mass;
    };
    rep.statistic = std::fabs(layer_stat(k0) - 1.0);
    rep.pass = rep.statistic < rep.threshold;
    rep.detail("k_center", static_cast<double>(k0));
    rep.detail("nv", opts.n * con.v);
    rep.detail("Dbold", con.dbold);
    rep.detail("Dhat", con.dhat);
    rep.detail("stat_center_minus1", layer_stat(k0) - 1.0);
    if (k0 - 5 >= k_lo && k0 + 5 <= k_hi) {
      rep.detail("stat_left5", layer_stat(k0 - 5) - 1.0);
      rep.detail("stat_right5", layer_stat(k0 + 5) - 1.0);
    }
  }
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

CheckReport check_annealed_stable(const EnvironmentSpec& spec, const AnnealedStableOptions& opts) {
  const auto t0 = Clock::now();
  CheckReport rep;
  rep.check_id = "annealed_stable";
  rep.spec_id = spec.name;
  rep.seed = opts.seed;
  rep.n = opts.n;
  rep.replicas = opts.replicas;
  rep.threshold = opts.threshold;

  const RegimeInfo info = regime_info(spec, derive_seed(opts.seed, stream::kGeneric, salt::kAux));
  require_regime(info.regime == Regime::TransientRight, "check_annealed_stable", "transience to the right");
  if (info.s_infinite || info.s >= 2.0)
    throw RegimeError("check_annealed_stable: needs s in (0,2); spec has s >= 2");
  const double s = info.s;

  double v = 0.0;
  if (s > 1.0) {
    ConstantsOptions copts;
    copts.require_diffusive = false;
    copts.seed = derive_seed(opts.seed, stream::kGeneric, salt::kConstants);
    v = estimate_constants(spec, copts).v;
  }

  const EnvironmentSpec base = reseeded(spec, opts.seed, salt::kEnv);
  const std::uint64_t walk_seed = derive_seed(opts.seed, stream::kGeneric, salt::kWalk);
  std::vector<double> norm(static_cast<std::size_t>(opts.replicas));
  std::vector<unsigned char> capped(static_cast<std::size_t>(opts.replicas), 0);
  const double n_pow = std::pow(static_cast<double>(opts.n), 1.0 / s);
  for_each_index(opts.replicas, opts.mode, [&](std::int64_t r) {
    Environment env = sample_environment(base, Window{-96, opts.n + 2}, static_cast<std::uint64_t>(r));
    Rng rng(walk_seed, stream::kWalk, static_cast<std::uint64_t>(r));
    LayerRows rows(env);
    const std::int64_t t = hitting_time(rows, SiteState{0, 1}, opts.n, 1'000'000'000, rng);
    if (t < 0) {
      capped[static_cast<std::size_t>(r)] = 1;
      norm[static_cast<std::size_t>(r)] = 0.0;
      return;
    }
    const double centered =
        s < 1.0 ? static_cast<double>(t) : static_cast<double>(t) - static_cast<double>(opts.n) / v;
    norm[static_cast<std::size_t>(r)] = centered / n_pow;
  });
  std::int64_t capped_count = 0;
  for (auto c : capped) capped_count += c;
  if (capped_count > opts.replicas / 1000) rep.degraded = true;

  const EmpiricalCdf ref = empirical_Ls(StableSpec::make(s), static_cast<std::size_t>(opts.reference_samples),
                                        derive_seed(opts.seed, stream::kGeneric, salt::kRef), opts.mode);

  std::vector<double> sorted(norm);
  std::sort(sorted.begin(), sorted.end());
  const double med_sample = median_sorted(sorted);
  const double med_ref = median_sorted(ref.sorted());
  double b_hat;
  if (std::fabs(med_ref) > 1e-9 && med_sample / med_ref > 0.0) {
    b_hat = med_sample / med_ref;
  } else {
    b_hat = iqr_sorted(sorted) / iqr_sorted(ref.sorted());  // fallback scale match
  }
  for (double& x : sorted) x /= b_hat;

  rep.statistic = ks_two_sample(sorted, ref.sorted());
  rep.pass = rep.statistic < rep.threshold;
  rep.detail("s", s);
  rep.detail("B_hat", b_hat);
  if (s > 1.0) rep.detail("v", v);
  rep.detail("median_sample", med_sample);
  rep.detail("median_ref", med_ref);
  rep.detail("capped", static_cast<double>(capped_count));
  {
    const SpectralSummary sum = [&] {
      SpectralSummary q;
      if (spec.finite_support()) {
        for (const auto& atom : spec.support)
          q.log_lambda_support.push_back(std::log(leading_eigenvalue_map(atom.triple)));
      }
      return q;
    }();
    std::ostringstream os;
    for (double lv : sum.log_lambda_support) os << fmt(lv) << " ";
    rep.detail("non_arithmeticity_log_lambdas", os.str());
  }
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

EvfpFunctional phi_one() {
  return {"one", 0, 1.0, [](std::span<const MatrixTriple>, int) { return 1.0; }};
}

EvfpFunctional phi_p_entry() {
  return {"p_entry", 0, 1.0,
          [](std::span<const MatrixTriple> w, int) { return w[w.size() / 2].P(0, 0); }};
}

EvfpFunctional phi_rung_indicator(int rung) {
  return {"rung_indicator", 0, 1.0,
          [rung](std::span<const MatrixTriple>, int y) { return y == rung ? 1.0 : 0.0; }};
}

CheckReport check_evfp(const EnvironmentSpec& spec, const EvfpFunctional& phi,
                       const EvfpOptions& opts) {
  const auto t0 = Clock::now();
  CheckReport rep;
  rep.check_id = opts.annealed ? "evfp_annealed" : "evfp_quenched";
  rep.spec_id = spec.name + "/phi=" + phi.name;
  rep.seed = opts.seed;
  rep.n = opts.schedule.empty() ? 0 : opts.schedule.back();
  rep.replicas = opts.replicas;

  {
    const RegimeInfo info = regime_info(spec, derive_seed(opts.seed, stream::kGeneric, salt::kAux));
    if (opts.annealed)
      require_regime(has_positive_speed(info), "check_evfp(annealed)", "s > 1");
    else
      require_regime(is_diffusive(info), "check_evfp(quenched)", "s > 2");
  }

  const int m = spec.m;
  const int radius = phi.radius;
  auto eval_phi = [&](const Environment& env, std::int64_t layer, int rung) {
    std::vector<MatrixTriple> window;
    window.reserve(2 * radius + 1);
    for (std::int64_t l = layer - radius; l <= layer + radius; ++l)
      window.push_back(env.contains(l) ? env.at(l) : env.make_layer(l));
    const double val = phi.eval(window, rung);
    if (std::fabs(val) > phi.bound)
      throw std::invalid_argument("check_evfp: functional exceeded its declared bound");
    return val;
  };

  // Q(phi) by the occupation formula over fresh environments, as a ratio
  // estimator so phi = 1 gives exactly 1
  double q_hat, q_se;
  {
    const EnvironmentSpec base = reseeded(spec, opts.seed, salt::kRef);
    std::vector<double> nums(static_cast<std::size_t>(opts.env_count));
    std::vector<double> dens(static_cast<std::size_t>(opts.env_count));
    for_each_index(opts.env_count, opts.mode, [&](std::int64_t e) {
      const int margin = series_cap_margin(64);
      const Window zw{-margin, margin};
      Environment env = sample_environment(base, Window{zw.lo - 96, zw.hi + 1},
                                           static_cast<std::uint64_t>(e));
      PropagatorSet props = compute_propagators(env, zw, 1e-10);
      const OccupationProfile occ = expected_occupation_row(props, 0);
      double num = 0.0, den = 0.0;
      for (int y = 1; y <= m; ++y) {
        num += eval_phi(env, 0, y) * occ.rho[static_cast<std::size_t>(y - 1)];
        den += occ.rho[static_cast<std::size_t>(y - 1)];
      }
      nums[static_cast<std::size_t>(e)] = num;
      dens[static_cast<std::size_t>(e)] = den;
    });
    const MeanVar mn = mean_var(nums);
    const MeanVar md = mean_var(dens);
    q_hat = mn.mean / md.mean;
    // jackknife over environments
    double jsum = 0.0, jsq = 0.0;
    const double tot_n = mn.mean * static_cast<double>(opts.env_count);
    const double tot_d = md.mean * static_cast<double>(opts.env_count);
    for (std::int64_t e = 0; e < opts.env_count; ++e) {
      const double r = (tot_n - nums[static_cast<std::size_t>(e)]) /
                       (tot_d - dens[static_cast<std::size_t>(e)]);
      jsum += r;
      jsq += r * r;
    }
    const double nE = static_cast<double>(opts.env_count);
    const double jmean = jsum / nE;
    q_se = std::sqrt(std::max(0.0, (nE - 1.0) / nE * (jsq - nE * jmean * jmean)));
  }

  // direct EVFP expectation at each N of the schedule
  std::vector<double> gaps;
  double e_hat = 0.0, e_se = 0.0;
  const std::uint64_t walk_seed = derive_seed(opts.seed, stream::kGeneric, salt::kWalk);
  const EnvironmentSpec base = reseeded(spec, opts.seed, salt::kEnv);
  for (std::size_t si = 0; si < opts.schedule.size(); ++si) {
    const std::int64_t N = opts.schedule[si];
    std::vector<double> vals(static_cast<std::size_t>(opts.replicas));
    if (opts.annealed) {
      for_each_index(opts.replicas, opts.mode, [&](std::int64_t r) {
        Environment env = sample_environment(base, Window{-96, N + 2},
                                             static_cast<std::uint64_t>(si) * 1000003ULL +
                                                 static_cast<std::uint64_t>(r));
        Rng rng(walk_seed, stream::kWalk,
                static_cast<std::uint64_t>(si) * 1000003ULL + static_cast<std::uint64_t>(r));
        LayerRows rows(env);
        const SiteState st = position_after(rows, SiteState{0, 1}, N, rng);
        vals[static_cast<std::size_t>(r)] = eval_phi(env, st.layer, st.rung);
      });
    } else {
      Environment env = sample_environment(base, Window{-96, N + 2}, 0);
      for_each_index(opts.replicas, opts.mode, [&](std::int64_t r) {
        Rng rng(walk_seed, stream::kWalk,
                static_cast<std::uint64_t>(si) * 1000003ULL + static_cast<std::uint64_t>(r));
        LayerRows rows(env);
        const SiteState st = position_after(rows, SiteState{0, 1}, N, rng);
        vals[static_cast<std::size_t>(r)] = eval_phi(env, st.layer, st.rung);
      });
    }
    const MeanVar mv = mean_var(vals);
    gaps.push_back(std::fabs(mv.mean - q_hat));
    if (si + 1 == opts.schedule.size()) {
      e_hat = mv.mean;
      e_se = mv.se;
    }
  }

  const double combined_se = std::sqrt(e_se * e_se + q_se * q_se);
  rep.statistic = std::fabs(e_hat - q_hat);
  rep.threshold = 3.0 * combined_se;
  const bool within = rep.statistic < rep.threshold || rep.statistic == 0.0;
  const bool trend = gaps.size() < 2 || gaps.back() <= gaps.front() + 1e-12 ||
                     gaps.back() < 2.0 * combined_se;
  rep.pass = within && trend;
  rep.detail("E_hat", e_hat);
  rep.detail("Q_hat", q_hat);
  rep.detail("E_se", e_se);
  rep.detail("Q_se", q_se);
  for (std::size_t i = 0; i < gaps.size(); ++i)
    rep.detail("gap_N" + std::to_string(opts.schedule[i]), gaps[i]);
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

CheckReport check_sinai_recurrent(const EnvironmentSpec& spec, const SinaiOptions& opts) {
  const auto t0 = Clock::now();
  CheckReport rep;
  rep.check_id = "sinai_recurrent";
  rep.spec_id = spec.name;
  rep.seed = opts.seed;
  rep.n = opts.schedule.empty() ? 0 : opts.schedule.back();
  rep.replicas = opts.replicas;

  {
    const Regime regime = classify_regime(spec, derive_seed(opts.seed, stream::kGeneric, salt::kAux));
    if (regime != Regime::Recurrent)
      throw RegimeError("check_sinai_recurrent: transient spec (recurrent required)");
  }

  // (BP) routing decides between Sinai scaling and the CLT branch
  BoundedProductsReport bp;
  {
    Environment env = sample_environment(reseeded(spec, opts.seed, salt::kAux), Window{-4, 4}, 3);
    bp = check_bounded_products(env, 20000);
  }
  rep.detail("bp_flag", bp.flag ? 1.0 : 0.0);
  rep.detail("bp_K", bp.k_observed);

  const EnvironmentSpec base = reseeded(spec, opts.seed, salt::kEnv);
  const std::uint64_t walk_seed = derive_seed(opts.seed, stream::kGeneric, salt::kWalk);

  auto sample_xn = [&](std::int64_t N, std::int64_t replicas, std::uint64_t tag) {
    std::vector<double> xs(static_cast<std::size_t>(replicas));
    const std::int64_t w = std::min<std::int64_t>(N, 4096);
    for_each_index(replicas, opts.mode, [&](std::int64_t r) {
      Environment env = sample_environment(base, Window{-w, w},
                                           tag * 1000003ULL + static_cast<std::uint64_t>(r));
      Rng rng(walk_seed, stream::kWalk, tag * 1000003ULL + static_cast<std::uint64_t>(r));
      LayerRows rows(env);
      const SiteState st = position_after(rows, SiteState{0, 1}, N, rng);
      xs[static_cast<std::size_t>(r)] = static_cast<double>(st.layer);
    });
    return xs;
  };

  if (bp.flag) {
    // CLT branch: X_N / sqrt(N) against a scale-fitted Gaussian
    const std::int64_t N = opts.schedule.back();
    std::vector<double> xs = sample_xn(N, opts.clt_replicas, 900);
    const double sq = std::sqrt(static_cast<double>(N));
    for (double& x : xs) x /= sq;
    const MeanVar mv = mean_var(xs);
    const double sigma = std::sqrt(mv.var);
    std::sort(xs.begin(), xs.end());
    rep.statistic = ks_statistic(xs, [&](double t) { return normal_cdf(t / sigma); });
    rep.threshold = opts.clt_threshold;
    rep.pass = rep.statistic < rep.threshold;
    rep.detail("branch", "clt");
    rep.detail("sigma_hat", sigma);
    rep.replicas = opts.clt_replicas;
  } else {
    // Sinai branch: log E|X_N| should grow like 2 log ln N
    std::vector<double> lx, lln;
    std::vector<double> largest;
    for (std::size_t i = 0; i < opts.schedule.size(); ++i) {
      const std::int64_t N = opts.schedule[i];
      std::vector<double> xs = sample_xn(N, opts.replicas, static_cast<std::uint64_t>(i));
      double mean_abs = 0.0;
      for (double x : xs) mean_abs += std::fabs(x);
      mean_abs /= static_cast<double>(xs.size());
      lx.push_back(std::log(mean_abs));
      lln.push_back(std::log(std::log(static_cast<double>(N))));
      rep.detail("mean_abs_N" + std::to_string(N), mean_abs);
      if (i + 1 == opts.schedule.size()) largest = std::move(xs);
    }
    const LinearFit fit = linear_fit(lln, lx);
    rep.statistic = fit.slope;
    rep.threshold = opts.slope_hi;
    const bool slope_ok = fit.slope >= opts.slope_lo && fit.slope <= opts.slope_hi;

    // shape against the Kesten-Sinai law, scale fitted by IQR
    const std::int64_t N = opts.schedule.back();
    const double ln2 = std::log(static_cast<double>(N)) * std::log(static_cast<double>(N));
    for (double& x : largest) x /= ln2;
    std::sort(largest.begin(), largest.end());
    const KestenSinaiCdf ks_cdf;
    const double ref_iqr = ks_cdf.quantile(0.75) - ks_cdf.quantile(0.25);
    const double scale = iqr_sorted(largest) / ref_iqr;
    for (double& x : largest) x /= scale;
    const double shape_ks = ks_statistic(largest, [&](double t) { return ks_cdf(t); });
    const bool shape_ok = shape_ks < opts.shape_threshold;

    rep.pass = slope_ok && shape_ok;
    rep.detail("branch", "sinai");
    rep.detail("slope", fit.slope);
    rep.detail("slope_lo", opts.slope_lo);
    rep.detail("slope_hi", opts.slope_hi);
    rep.detail("shape_ks", shape_ks);
    rep.detail("shape_threshold", opts.shape_threshold);
    rep.detail("shape_scale", scale);
  }
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

CheckReport check_fluctuation_lemma(const EnvironmentSpec& spec, const FluctuationOptions& opts) {
  const auto t0 = Clock::now();
  CheckReport rep;
  rep.check_id = "fluctuation_lemma";
  rep.spec_id = spec.name;
  rep.seed = opts.seed;
  rep.n = opts.grid.empty() ? 0 : opts.grid.back();

  {
    const RegimeInfo info = regime_info(spec, derive_seed(opts.seed, stream::kGeneric, salt::kAux));
    require_regime(is_diffusive(info), "check_fluctuation_lemma", "s > 2");
  }

  // a estimated on independent environments
  double a_hat;
  {
    ConstantsOptions copts;
    copts.require_diffusive = false;
    copts.seed = derive_seed(opts.seed, stream::kGeneric, salt::kConstants);
    a_hat = estimate_constants(spec, copts).a;
  }

  const std::int64_t n_max = opts.grid.back();
  const std::int64_t l_max = static_cast<std::int64_t>(std::sqrt(static_cast<double>(n_max)));
  QuenchedContext ctx = quenched_context(spec, opts.seed, 0, n_max + l_max + 1);
  const HittingExpectation h = expected_hitting_vector(ctx.props, 0, n_max + l_max + 1);
  DriftIndex drift(0, h.a);

  std::vector<double> stats;
  for (std::int64_t n : opts.grid) {
    const std::int64_t l_n = static_cast<std::int64_t>(std::sqrt(static_cast<double>(n)));
    double worst = 0.0;
    const double base = drift.expected_hit(n);
    for (std::int64_t l = -l_n; l <= l_n; ++l) {
      const double diff = drift.expected_hit(n + l) - base - static_cast<double>(l) * a_hat;
      worst = std::max(worst, std::fabs(diff));
    }
    stats.push_back(worst / std::sqrt(static_cast<double>(n)));
    rep.detail("stat_n" + std::to_string(n), stats.back());
  }
  rep.statistic = stats.back();
  rep.threshold = stats.front();
  rep.pass = stats.size() < 2 || stats.back() < stats.front() || stats.back() < 1e-9;
  rep.detail("a_hat", a_hat);
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

CheckReport check_backtrack(const EnvironmentSpec& spec, const BacktrackOptions& opts) {
  const auto t0 = Clock::now();
  CheckReport rep;
  rep.check_id = "backtrack";
  rep.spec_id = spec.name;
  rep.seed = opts.seed;
  rep.replicas = opts.replicas;

  {
    const Regime regime = classify_regime(spec, derive_seed(opts.seed, stream::kGeneric, salt::kAux));
    if (regime != Regime::TransientRight)
      throw RegimeError("check_backtrack: requires transience to the right");
  }

  Environment env = sample_environment(reseeded(spec, opts.seed, salt::kEnv), Window{-96, 256}, 0);
  const BacktrackTail tail = backtrack_tail(env, SiteState{0, 1}, opts.depths, opts.replicas,
                                            derive_seed(opts.seed, stream::kGeneric, salt::kWalk),
                                            opts.mode);
  rep.statistic = tail.log_slope;
  rep.threshold = 0.0;
  rep.pass = tail.log_slope < 0.0;
  for (std::size_t i = 0; i < tail.depths.size(); ++i) {
    rep.detail("p_depth" + std::to_string(tail.depths[i]), tail.prob[i]);
    rep.detail("se_depth" + std::to_string(tail.depths[i]), tail.se[i]);
  }
  rep.detail("theta_hat", std::exp(tail.log_slope));
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

CheckReport check_validate(const EnvironmentSpec& spec, const ValidateOptions& opts) {
  const auto t0 = Clock::now();
  CheckReport rep;
  rep.check_id = "validate";
  rep.spec_id = spec.name;
  rep.seed = opts.seed;
  rep.n = opts.sample_layers;

  try {
    validate_spec(spec);
  } catch (const SpecError& err) {
    rep.pass = false;
    rep.detail("error", err.what());
    rep.wall_time_s = seconds_since(t0);
    return rep;
  }

  Environment env = sample_environment(reseeded(spec, opts.seed, salt::kEnv),
                                       Window{0, opts.sample_layers - 1});
  double worst = 0.0;
  bool all_pass = true;
  for (std::int64_t n = 0; n < opts.sample_layers; ++n) {
    const ValidationReport vr = validate_triple(env.at(n), spec.ellipticity);
    worst = std::max(worst, vr.worst_row_sum_err);
    all_pass = all_pass && vr.pass();
  }
  rep.statistic = worst;
  rep.threshold = kRowSumTol;
  rep.pass = all_pass;
  rep.detail("layers_checked", static_cast<double>(opts.sample_layers));
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

}  // namespace striplab
