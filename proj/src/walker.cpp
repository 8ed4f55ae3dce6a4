#include "striplab/walker.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "striplab/stats.hpp"

namespace striplab {

SiteState step_walk(const Environment& env, SiteState state, Rng& rng) {
  const int m = env.width();
  std::span<const double> row;
  std::vector<double> tmp;
  if (env.contains(state.layer)) {
    row = env.step_row(state.layer, state.rung);
  } else {
    tmp = Environment::build_step_rows(env.make_layer(state.layer));
    row = {tmp.data() + static_cast<std::size_t>(state.rung - 1) * 3 * m,
           static_cast<std::size_t>(3 * m)};
  }
  step_state(row, m, rng.uniform(), state.layer, state.rung);
  return state;
}

WalkSummary run_to_layer(const Environment& env, SiteState start, std::int64_t target,
                         const WalkOptions& opts, Rng& rng) {
  if (target <= start.layer) throw std::invalid_argument("run_to_layer: target must be > start");
  WalkSummary out;
  out.start_layer = start.layer;
  out.target_layer = target;
  out.hitting_times.assign(static_cast<std::size_t>(target - start.layer), -1);
  out.hitting_rungs.assign(static_cast<std::size_t>(target - start.layer), 0);

  LayerRows rows(env);
  const int m = env.width();
  std::int64_t layer = start.layer;
  int rung = start.rung;
  std::int64_t peak = layer;
  if (opts.record_occupation) out.occupation[{layer, rung}]++;

  std::int64_t t = 0;
  while (layer < target) {
    if (t >= opts.cap) {
      out.capped = true;
      break;
    }
    step_state(rows.row(layer, rung), m, rng.uniform(), layer, rung);
    ++t;
    if (opts.record_occupation) out.occupation[{layer, rung}]++;
    if (layer > peak) {
      peak = layer;
      if (layer > start.layer && out.hitting_times[static_cast<std::size_t>(layer - start.layer - 1)] < 0) {
        out.hitting_times[static_cast<std::size_t>(layer - start.layer - 1)] = t;
        out.hitting_rungs[static_cast<std::size_t>(layer - start.layer - 1)] = rung;
      }
    } else {
      out.max_backtrack = std::max(out.max_backtrack, peak - layer);
    }
  }
  out.steps = t;
  return out;
}

std::int64_t hitting_time(LayerRows& rows, SiteState start, std::int64_t target, std::int64_t cap,
                          Rng& rng) {
  const int m = rows.width();
  std::int64_t layer = start.layer;
  int rung = start.rung;
  std::int64_t t = 0;
  while (layer < target) {
    if (t >= cap) return -1;
    step_state(rows.row(layer, rung), m, rng.uniform(), layer, rung);
    ++t;
  }
  return t;
}

SiteState position_after(LayerRows& rows, SiteState start, std::int64_t steps, Rng& rng) {
  const int m = rows.width();
  std::int64_t layer = start.layer;
  int rung = start.rung;
  for (std::int64_t t = 0; t < steps; ++t)
    step_state(rows.row(layer, rung), m, rng.uniform(), layer, rung);
  return {layer, rung};
}

std::vector<std::int64_t> sample_hitting_times(const Environment& env, SiteState start,
                                               std::int64_t target, std::int64_t cap,
                                               std::int64_t replicas, std::uint64_t seed,
                                               ExecMode mode) {
  std::vector<std::int64_t> out(static_cast<std::size_t>(replicas));
  for_each_index(replicas, mode, [&](std::int64_t r) {
    Rng rng(seed, stream::kWalk, static_cast<std::uint64_t>(r));
    LayerRows rows(env);
    out[static_cast<std::size_t>(r)] = hitting_time(rows, start, target, cap, rng);
  });
  return out;
}

std::vector<SiteState> sample_positions(const Environment& env, SiteState start,
                                        std::int64_t steps, std::int64_t replicas,
                                        std::uint64_t seed, ExecMode mode) {
  std::vector<SiteState> out(static_cast<std::size_t>(replicas));
  for_each_index(replicas, mode, [&](std::int64_t r) {
    Rng rng(seed, stream::kWalk, static_cast<std::uint64_t>(r));
    LayerRows rows(env);
    out[static_cast<std::size_t>(r)] = position_after(rows, start, steps, rng);
  });
  return out;
}

namespace {

int series_cap(std::int64_t n) {
  const double ln = std::log(static_cast<double>(std::max<std::int64_t>(n, 3)));
  return std::max(64, static_cast<int>(std::ceil(40.0 * ln)));
}

// Sum_{i>=0} H_j^i U_{j-i} 1, truncated when ||H|| < tail_tol.
Vec propagator_series(const PropagatorSet& props, std::int64_t j, double tail_tol, int cap,
                      int& depth_out, double& tail_out) {
  const int m = props.A.empty() ? 1 : props.A.front().rows();
  const Vec ones(m, 1.0);
  Matrix h = Matrix::identity(m);
  Vec acc(m, 0.0);
  int i = 0;
  for (;;) {
    const std::int64_t left = j - i;
    if (left < props.kept_lo) {
      std::ostringstream os;
      os << "propagator series at layer " << j << " needs depth beyond the computed window ("
         << props.kept_lo << ")";
      throw std::out_of_range(os.str());
    }
    const Vec u1 = mat_vec(props.u_at(left), ones);
    const Vec term = mat_vec(h, u1);
    for (int c = 0; c < m; ++c) acc[c] += term[c];
    ++i;
    h = h * props.a_at(j - i + 1);
    const double hn = h.inf_norm();
    if (hn < tail_tol || i >= cap) {
      depth_out = std::max(depth_out, i);
      tail_out = std::max(tail_out, hn);
      break;
    }
  }
  return acc;
}

}  // namespace

HittingExpectation expected_hitting_vector(const PropagatorSet& props, std::int64_t from,
                                           std::int64_t to, double tail_tol) {
  if (to <= from) throw std::invalid_argument("expected_hitting_vector: to must be > from");
  if (from < props.window.lo || to > props.window.hi + 1)
    throw std::out_of_range("expected_hitting_vector: outside propagator window");
  const int m = props.A.front().rows();
  const int cap = series_cap(to);

  HittingExpectation out;
  out.from = from;
  out.to = to;
  out.e.reserve(static_cast<std::size_t>(to - from));
  out.a.reserve(static_cast<std::size_t>(to - from));

  Matrix prefix = Matrix::identity(m);  // zeta_from ... zeta_{j-1}
  Vec acc(m, 0.0);
  for (std::int64_t j = from; j < to; ++j) {
    const Vec s = propagator_series(props, j, tail_tol, cap, out.max_depth, out.max_tail_norm);
    const Vec term = mat_vec(prefix, s);
    for (int c = 0; c < m; ++c) acc[c] += term[c];
    out.e.push_back(acc);
    out.a.push_back(dot(props.y_at(j), s));
    prefix = prefix * props.zeta.at(j);
  }
  return out;
}

OccupationProfile expected_occupation_row(const PropagatorSet& props, std::int64_t layer,
                                          double tail_tol) {
  if (layer < props.window.lo || layer > props.window.hi)
    throw std::out_of_range("expected_occupation_row: layer outside propagator window");
  const int m = props.A.front().rows();
  const int cap = series_cap(props.window.hi - layer + 2);

  OccupationProfile out;
  out.layer = layer;
  out.method = OccupationMethod::AnalyticSeries;

  // visits to `layer` during the crossing of layer+i enter at the first-hit
  // distribution y_{layer+i}, so the i-th term is y_{layer+i} H_{layer+i}^i
  Matrix h = Matrix::identity(m);  // H_{layer+i}^i
  Vec acc(props.y_at(layer).begin(), props.y_at(layer).end());
  int i = 0;
  for (;;) {
    ++i;
    if (layer + i > props.window.hi) {
      std::ostringstream os;
      os << "occupation series at layer " << layer << " needs layers beyond the window ("
         << props.window.hi << ")";
      throw std::out_of_range(os.str());
    }
    h = props.a_at(layer + i) * h;
    const double hn = h.inf_norm();
    if (hn < tail_tol || i >= cap) {
      out.depth = i;
      out.tail_norm = hn;
      break;
    }
    const Vec term = vec_mat(props.y_at(layer + i), h);
    for (int c = 0; c < m; ++c) acc[static_cast<std::size_t>(c)] += term[static_cast<std::size_t>(c)];
  }
  out.rho = vec_mat(acc, props.u_at(layer));
  out.se.assign(static_cast<std::size_t>(m), 0.0);
  return out;
}

OccupationProfile mc_occupation_row(const Environment& env, SiteState start, std::int64_t layer,
                                    std::int64_t replicas, std::uint64_t seed, ExecMode mode) {
  const int m = env.width();
  const double ln = std::log(static_cast<double>(std::max<std::int64_t>(layer, 3)));
  const std::int64_t cutoff_margin = std::max<std::int64_t>(16, static_cast<std::int64_t>(std::ceil(ln * ln)));
  const std::int64_t stop_layer = layer + cutoff_margin;
  const std::int64_t guard_layer = stop_layer + 32;
  const std::int64_t cap = 100'000'000;

  std::vector<std::vector<std::int64_t>> counts(static_cast<std::size_t>(replicas));
  std::vector<unsigned char> revisit(static_cast<std::size_t>(replicas), 0);
  for_each_index(replicas, mode, [&](std::int64_t r) {
    Rng rng(seed, stream::kWalk, static_cast<std::uint64_t>(r));
    LayerRows rows(env);
    std::vector<std::int64_t> c(static_cast<std::size_t>(m), 0);
    std::int64_t cur = start.layer;
    int rung = start.rung;
    if (cur == layer) c[static_cast<std::size_t>(rung - 1)]++;
    std::int64_t t = 0;
    bool past_cutoff = false;
    while (cur < guard_layer && t < cap) {
      step_state(rows.row(cur, rung), m, rng.uniform(), cur, rung);
      ++t;
      if (!past_cutoff) {
        if (cur == layer) c[static_cast<std::size_t>(rung - 1)]++;
        if (cur >= stop_layer) past_cutoff = true;
      } else if (cur <= layer) {
        revisit[static_cast<std::size_t>(r)] = 1;
      }
    }
    counts[static_cast<std::size_t>(r)] = std::move(c);
  });

  OccupationProfile out;
  out.layer = layer;
  out.method = OccupationMethod::MonteCarlo;
  out.depth = static_cast<int>(cutoff_margin);
  out.replicas = replicas;
  out.rho.assign(static_cast<std::size_t>(m), 0.0);
  out.se.assign(static_cast<std::size_t>(m), 0.0);
  for (int c = 0; c < m; ++c) {
    std::vector<double> vals(static_cast<std::size_t>(replicas));
    for (std::int64_t r = 0; r < replicas; ++r)
      vals[static_cast<std::size_t>(r)] =
          static_cast<double>(counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
    const MeanVar mv = mean_var(vals);
    out.rho[static_cast<std::size_t>(c)] = mv.mean;
    out.se[static_cast<std::size_t>(c)] = mv.se;
  }
  double rv = 0.0;
  for (auto b : revisit) rv += b;
  out.backtrack_bias_proxy = rv / static_cast<double>(replicas);
  return out;
}

DriftIndex::DriftIndex(std::int64_t from, std::vector<double> a) : from_(from) {
  cum_.reserve(a.size() + 1);
  cum_.push_back(0.0);
  double acc = 0.0;
  for (double v : a) {
    acc += v;
    cum_.push_back(acc);
  }
}

std::int64_t DriftIndex::b(double n) const {
  auto it = std::lower_bound(cum_.begin(), cum_.end(), n);
  if (it == cum_.end()) throw std::out_of_range("DriftIndex: n beyond computed horizon");
  return from_ + static_cast<std::int64_t>(it - cum_.begin());
}

BacktrackTail backtrack_tail(const Environment& env, SiteState start,
                             const std::vector<int>& depths, std::int64_t replicas,
                             std::uint64_t seed, ExecMode mode) {
  const int m = env.width();
  int dmax = 0;
  for (int d : depths) dmax = std::max(dmax, d);
  const std::int64_t goal = start.layer + dmax + 48;
  const std::int64_t cap = 100'000'000;

  // deepest excursion already made at the moment of the last return to
  // the start layer
  std::vector<std::int64_t> best_return(static_cast<std::size_t>(replicas), -1);
  for_each_index(replicas, mode, [&](std::int64_t r) {
    Rng rng(seed, stream::kWalk, static_cast<std::uint64_t>(r));
    LayerRows rows(env);
    std::int64_t layer = start.layer;
    int rung = start.rung;
    std::int64_t peak = 0, back = -1;
    std::int64_t t = 0;
    while (layer < goal && t < cap) {
      step_state(rows.row(layer, rung), m, rng.uniform(), layer, rung);
      ++t;
      peak = std::max(peak, layer - start.layer);
      if (layer <= start.layer) back = std::max(back, peak);
    }
    best_return[static_cast<std::size_t>(r)] = back;
  });

  BacktrackTail out;
  out.depths = depths;
  out.replicas = replicas;
  std::vector<double> xs, ys;
  for (int d : depths) {
    if (d == 0) {
      out.prob.push_back(1.0);  // by convention
      out.se.push_back(0.0);
      continue;
    }
    std::int64_t hits = 0;
    for (std::int64_t r = 0; r < replicas; ++r)
      if (best_return[static_cast<std::size_t>(r)] >= d) ++hits;
    const double p = static_cast<double>(hits) / static_cast<double>(replicas);
    out.prob.push_back(p);
    out.se.push_back(std::sqrt(std::max(p * (1.0 - p), 1e-300) / static_cast<double>(replicas)));
    if (p > 0.0) {
      xs.push_back(static_cast<double>(d));
      ys.push_back(std::log(p));
    }
  }
  if (xs.size() >= 2) {
    const LinearFit fit = linear_fit(xs, ys);
    out.log_slope = fit.slope;
    out.log_intercept = fit.intercept;
  }
  return out;
}

}  // namespace striplab
