#include "striplab/environment.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace striplab {

ValidationReport validate_triple(const MatrixTriple& t, const EllipticityParams& e) {
  ValidationReport rep;
  const int m = t.m;
  if (m < 1 || t.P.rows() != m || t.P.cols() != m || t.Q.rows() != m || t.Q.cols() != m ||
      t.R.rows() != m || t.R.cols() != m) {
    throw SpecError("validate_triple: inconsistent dimensions");
  }
  rep.dims_ok = true;

  double worst = 0.0;
  bool nonneg = true;
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) {
      if (t.P(i, j) < 0.0 || t.Q(i, j) < 0.0 || t.R(i, j) < 0.0) nonneg = false;
      s += t.P(i, j) + t.Q(i, j) + t.R(i, j);
    }
    worst = std::max(worst, std::fabs(s - 1.0));
  }
  rep.worst_row_sum_err = worst;
  rep.row_stochastic = nonneg && worst <= kRowSumTol;

  rep.r_norm = t.R.inf_norm();
  rep.r_norm_ok = rep.r_norm < 1.0 - e.eps;

  rep.min_r_diag = t.R(0, 0);
  for (int i = 1; i < m; ++i) rep.min_r_diag = std::min(rep.min_r_diag, t.R(i, i));
  rep.r_diag_ok = rep.min_r_diag >= e.kappa;

  try {
    Matrix i_minus_r = Matrix::identity(m) - t.R;
    Matrix ip = solve(i_minus_r, t.P);
    i_minus_r = Matrix::identity(m) - t.R;
    Matrix iq = solve(i_minus_r, t.Q);
    rep.min_p_entry = ip.min_entry();
    rep.min_q_entry = iq.min_entry();
    rep.p_ellipticity = rep.min_p_entry > e.eps;
    rep.q_ellipticity = rep.min_q_entry > e.eps;
  } catch (const SingularMatrixError&) {
    rep.p_ellipticity = false;
    rep.q_ellipticity = false;
    rep.message = "(I-R) numerically singular";
  }
  return rep;
}

void validate_spec(const EnvironmentSpec& spec) {
  if (spec.m < 1) throw SpecError("spec '" + spec.name + "': width m must be >= 1");
  if (spec.finite_support() && spec.generator)
    throw SpecError("spec '" + spec.name + "': both support list and generator given");
  if (!spec.finite_support() && !spec.generator)
    throw SpecError("spec '" + spec.name + "': neither support list nor generator given");

  if (spec.finite_support()) {
    double total = 0.0;
    for (std::size_t k = 0; k < spec.support.size(); ++k) {
      const auto& atom = spec.support[k];
      if (atom.prob < 0.0) throw SpecError("spec '" + spec.name + "': negative probability");
      total += atom.prob;
      if (atom.triple.m != spec.m)
        throw SpecError("spec '" + spec.name + "': support triple width mismatch");
      ValidationReport rep = validate_triple(atom.triple, spec.ellipticity);
      if (!rep.pass()) {
        std::ostringstream os;
        os << "spec '" << spec.name << "': support triple " << k << " fails validation:"
           << (rep.row_stochastic ? "" : " row-stochasticity")
           << (rep.r_norm_ok ? "" : " ||R||<1-eps")
           << (rep.p_ellipticity ? "" : " (I-R)^-1P>eps")
           << (rep.q_ellipticity ? "" : " (I-R)^-1Q>eps")
           << (rep.r_diag_ok ? "" : " diag(R)>=kappa");
        throw SpecError(os.str());
      }
    }
    if (std::fabs(total - 1.0) > kRowSumTol)
      throw SpecError("spec '" + spec.name + "': support probabilities do not sum to 1");
  } else {
    const DirichletGenerator& g = *spec.generator;
    if (g.m != spec.m) throw SpecError("spec '" + spec.name + "': generator width mismatch");
    if (g.floor_p <= 0.0 || g.floor_q <= 0.0 || g.kappa < 0.0)
      throw SpecError("spec '" + spec.name + "': generator floors must be positive");
    if (g.m * (g.floor_p + g.floor_q) + g.kappa >= 1.0)
      throw SpecError("spec '" + spec.name + "': generator floors exceed total mass");
    if (g.weight_p <= 0.0 || g.weight_q <= 0.0 || g.weight_r < 0.0)
      throw SpecError("spec '" + spec.name + "': generator weights must be positive");
    if (spec.ellipticity.eps >= std::min(g.floor_p, g.floor_q))
      throw SpecError("spec '" + spec.name + "': eps must sit below the generator entry floors");
    if (spec.ellipticity.kappa > g.kappa)
      throw SpecError("spec '" + spec.name + "': kappa above the generator diagonal floor");
  }
}

namespace {

MatrixTriple generate_dirichlet_layer(const DirichletGenerator& g, Rng& rng) {
  const int m = g.m;
  MatrixTriple t{Matrix(m, m), Matrix(m, m), Matrix(m, m), m};
  const double floor_total = m * (g.floor_p + g.floor_q) + g.kappa;
  const double free_mass = 1.0 - floor_total;
  std::vector<double> gp(m), gq(m), gr(m);
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) {
      gp[j] = g.weight_p * rng.exponential();
      gq[j] = g.weight_q * rng.exponential();
      gr[j] = g.weight_r * rng.exponential();
      s += gp[j] + gq[j] + gr[j];
    }
    const double scale = free_mass / s;
    for (int j = 0; j < m; ++j) {
      t.P(i, j) = g.floor_p + gp[j] * scale;
      t.Q(i, j) = g.floor_q + gq[j] * scale;
      t.R(i, j) = (i == j ? g.kappa : 0.0) + gr[j] * scale;
    }
  }
  return t;
}

}  // namespace

MatrixTriple Environment::make_layer(std::int64_t n) const {
  Rng rng(spec_.master_seed, stream::kEnvLayer, static_cast<std::uint64_t>(n));
  if (spec_.finite_support()) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (const auto& atom : spec_.support) {
      acc += atom.prob;
      if (u < acc) return atom.triple;
    }
    return spec_.support.back().triple;
  }
  return generate_dirichlet_layer(*spec_.generator, rng);
}

std::vector<double> Environment::build_step_rows(const MatrixTriple& t) {
  const int m = t.m;
  std::vector<double> rows(static_cast<std::size_t>(m) * 3 * m);
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    double* row = rows.data() + static_cast<std::size_t>(i) * 3 * m;
    for (int j = 0; j < m; ++j) row[j] = (acc += t.Q(i, j));
    for (int j = 0; j < m; ++j) row[m + j] = (acc += t.R(i, j));
    for (int j = 0; j < m; ++j) row[2 * m + j] = (acc += t.P(i, j));
    row[3 * m - 1] = 1.0;  // close the row against rounding
  }
  return rows;
}

Environment::Environment(EnvironmentSpec spec, Window w) : spec_(std::move(spec)), win_(w) {
  validate_spec(spec_);
  if (w.size() <= 0) throw SpecError("environment window is empty");
  layers_.reserve(static_cast<std::size_t>(w.size()));
  step_rows_.reserve(static_cast<std::size_t>(w.size()) * spec_.m * 3 * spec_.m);
  for (std::int64_t n = w.lo; n <= w.hi; ++n) {
    layers_.push_back(make_layer(n));
    const auto rows = build_step_rows(layers_.back());
    step_rows_.insert(step_rows_.end(), rows.begin(), rows.end());
  }
}

Environment Environment::extended(std::int64_t lo, std::int64_t hi) const {
  Window w{std::min(lo, win_.lo), std::max(hi, win_.hi)};
  return Environment(spec_, w);
}

std::uint64_t Environment::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto eat = [&h](const Matrix& m) {
    const auto* p = reinterpret_cast<const unsigned char*>(m.data());
    const std::size_t bytes = sizeof(double) * static_cast<std::size_t>(m.rows()) * m.cols();
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& t : layers_) {
    eat(t.P);
    eat(t.Q);
    eat(t.R);
  }
  return h;
}

Environment sample_environment(const EnvironmentSpec& spec, Window w) {
  return Environment(spec, w);
}

Environment sample_environment(const EnvironmentSpec& spec, Window w, std::uint64_t replica) {
  EnvironmentSpec derived = spec;
  derived.master_seed = derive_seed(spec.master_seed, stream::kEnvReplica, replica);
  return Environment(derived, w);
}

MatrixTriple strip_triple_from_site_pmfs(const std::vector<std::vector<double>>& pmf_per_rung,
                                         int m, int bound) {
  if (static_cast<int>(pmf_per_rung.size()) != m)
    throw SpecError("strip_triple_from_site_pmfs: need one pmf per rung");
  MatrixTriple t{Matrix(m, m), Matrix(m, m), Matrix(m, m), m};
  for (int i = 1; i <= m; ++i) {
    const auto& pmf = pmf_per_rung[i - 1];
    if (static_cast<int>(pmf.size()) != 2 * bound + 1)
      throw SpecError("strip_triple_from_site_pmfs: pmf size mismatch");
    for (int j = -bound; j <= bound; ++j) {
      const double p = pmf[j + bound];
      if (p == 0.0) continue;
      const std::int64_t target = (i - 1) + j;  // offset within blocked coordinates
      std::int64_t shift = target >= 0 ? target / m : -(((-target) + m - 1) / m);
      const int rung = static_cast<int>(target - shift * m) + 1;
      if (shift < -1 || shift > 1) throw SpecError("strip_triple_from_site_pmfs: jump too wide");
      if (shift == 1)
        t.P(i - 1, rung - 1) += p;
      else if (shift == -1)
        t.Q(i - 1, rung - 1) += p;
      else
        t.R(i - 1, rung - 1) += p;
    }
  }
  return t;
}

EnvironmentSpec reduce_bounded_jump(const JumpLaw& law, int m) {
  if (law.bound > m) {
    std::ostringstream os;
    os << "reduce_bounded_jump: jump bound " << law.bound << " exceeds strip width " << m;
    throw SpecError(os.str());
  }
  if (law.site_laws.empty()) throw SpecError("reduce_bounded_jump: no site laws");
  double total = 0.0;
  for (const auto& [pmf, prob] : law.site_laws) {
    if (static_cast<int>(pmf.size()) != 2 * law.bound + 1)
      throw SpecError("reduce_bounded_jump: pmf must cover [-bound, bound]");
    double s = 0.0;
    for (double v : pmf) {
      if (v < 0.0) throw SpecError("reduce_bounded_jump: negative pmf entry");
      s += v;
    }
    if (std::fabs(s - 1.0) > kRowSumTol) throw SpecError("reduce_bounded_jump: pmf does not sum to 1");
    total += prob;
  }
  if (std::fabs(total - 1.0) > kRowSumTol)
    throw SpecError("reduce_bounded_jump: site-law probabilities do not sum to 1");

  const std::size_t k = law.site_laws.size();
  std::size_t combos = 1;
  for (int i = 0; i < m; ++i) {
    combos *= k;
    if (combos > 65536) throw SpecError("reduce_bounded_jump: support product too large");
  }

  // pad pmfs out to [-m, m] so the blocking arithmetic is uniform
  auto padded = [&](const std::vector<double>& pmf) {
    std::vector<double> out(2 * m + 1, 0.0);
    for (int j = -law.bound; j <= law.bound; ++j) out[j + m] = pmf[j + law.bound];
    return out;
  };

  EnvironmentSpec spec;
  spec.name = "bounded-jump-reduction";
  spec.m = m;
  spec.support.reserve(combos);
  std::vector<std::size_t> choice(m, 0);
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t rem = c;
    double prob = 1.0;
    std::vector<std::vector<double>> pmfs(m);
    for (int i = 0; i < m; ++i) {
      choice[i] = rem % k;
      rem /= k;
      pmfs[i] = padded(law.site_laws[choice[i]].first);
      prob *= law.site_laws[choice[i]].second;
    }
    spec.support.push_back({strip_triple_from_site_pmfs(pmfs, m, m), prob});
  }
  // ellipticity for the reduced spec is inherited from the site laws;
  // callers validate with the parameters they intend to enforce
  spec.ellipticity.eps = 0.0;
  spec.ellipticity.kappa = 0.0;
  return spec;
}

}  // namespace striplab
