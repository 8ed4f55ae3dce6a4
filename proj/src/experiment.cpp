#include "striplab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "striplab/presets.hpp"

namespace striplab {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

Matrix parse_matrix(const json& arr, int m, const std::string& where) {
  if (!arr.is_array() || static_cast<int>(arr.size()) != m * m)
    throw ConfigError(where + ": expected a row-major array of " + std::to_string(m * m) +
                      " numbers");
  Matrix out(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) out(i, j) = arr[static_cast<std::size_t>(i * m + j)].get<double>();
  return out;
}

EnvironmentSpec parse_spec(const json& j, std::uint64_t seed) {
  if (j.contains("preset")) {
    reject_unknown_keys(j, {"preset"}, "spec");
    return preset_spec(j.at("preset").get<std::string>(), seed);
  }
  reject_unknown_keys(j, {"name", "m", "eps", "kappa", "support", "generator"}, "spec");
  EnvironmentSpec spec;
  spec.master_seed = seed;
  spec.name = j.value("name", "inline");
  spec.m = j.value("m", 1);
  spec.ellipticity.eps = j.value("eps", 0.02);
  spec.ellipticity.kappa = j.value("kappa", 0.0);
  if (j.contains("support")) {
    for (const auto& atom : j.at("support")) {
      reject_unknown_keys(atom, {"P", "Q", "R", "prob"}, "spec.support");
      MatrixTriple t;
      t.m = spec.m;
      t.P = parse_matrix(atom.at("P"), spec.m, "spec.support.P");
      t.Q = parse_matrix(atom.at("Q"), spec.m, "spec.support.Q");
      t.R = parse_matrix(atom.at("R"), spec.m, "spec.support.R");
      spec.support.push_back({t, atom.at("prob").get<double>()});
    }
  }
  if (j.contains("generator")) {
    const json& g = j.at("generator");
    reject_unknown_keys(g, {"kind", "m", "floor_p", "floor_q", "kappa", "weight_p", "weight_q",
                            "weight_r"},
                        "spec.generator");
    if (g.value("kind", "dirichlet") != "dirichlet")
      throw ConfigError("spec.generator: unknown kind");
    DirichletGenerator gen;
    gen.m = g.value("m", spec.m);
    gen.floor_p = g.value("floor_p", 0.03);
    gen.floor_q = g.value("floor_q", 0.03);
    gen.kappa = g.value("kappa", 0.05);
    gen.weight_p = g.value("weight_p", 1.0);
    gen.weight_q = g.value("weight_q", 1.0);
    gen.weight_r = g.value("weight_r", 0.6);
    spec.m = gen.m;
    spec.generator = gen;
  }
  try {
    validate_spec(spec);
  } catch (const SpecError& err) {
    throw ConfigError(std::string("invalid spec: ") + err.what());
  }
  return spec;
}

const std::map<std::string, std::set<std::string>> kCheckKeys = {
    {"validate", {"sample_layers"}},
    {"quenched_clt", {"n", "replicas", "threshold"}},
    {"hitting_llt", {"n", "replicas", "threshold"}},
    {"position_llt", {"mode", "n", "replicas", "env_count", "window_radius", "threshold"}},
    {"annealed_stable", {"n", "replicas", "reference_samples", "threshold"}},
    {"evfp", {"schedule", "replicas", "env_count", "mode", "phi"}},
    {"sinai", {"schedule", "replicas", "clt_replicas", "slope_lo", "slope_hi", "shape_threshold",
               "clt_threshold"}},
    {"fluctuation", {"grid"}},
    {"backtrack", {"depths", "replicas"}},
    {"describe", {}},
};

CheckRequest parse_check(const json& j) {
  CheckRequest req;
  if (!j.contains("check")) throw ConfigError("check entry missing 'check' key");
  req.name = j.at("check").get<std::string>();
  const auto known = kCheckKeys.find(req.name);
  if (known == kCheckKeys.end()) throw ConfigError("unknown check '" + req.name + "'");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "check") continue;
    if (it.key() != "negative_control" && !known->second.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' for check '" + req.name + "'");
    if (it.key() == "negative_control") {
      req.negative_control = it.value().get<bool>();
    } else if (it.value().is_number()) {
      req.params.emplace_back(it.key(), it.value().get<double>());
    } else if (it.value().is_string()) {
      req.string_params.emplace_back(it.key(), it.value().get<std::string>());
    } else if (it.value().is_array()) {
      // schedules: encoded as name#i entries
      int idx = 0;
      for (const auto& v : it.value())
        req.params.emplace_back(it.key() + "#" + std::to_string(idx++), v.get<double>());
    } else {
      throw ConfigError("check '" + req.name + "': unsupported value for key '" + it.key() + "'");
    }
  }
  return req;
}

}  // namespace

double CheckRequest::get(const std::string& key, double fallback) const {
  for (const auto& [k, v] : params)
    if (k == key) return v;
  return fallback;
}

std::string CheckRequest::get_string(const std::string& key, const std::string& fallback) const {
  for (const auto& [k, v] : string_params)
    if (k == key) return v;
  return fallback;
}

std::vector<std::int64_t> CheckRequest::get_schedule(const std::string& key,
                                                     std::vector<std::int64_t> fallback) const {
  std::vector<std::int64_t> out;
  for (int i = 0;; ++i) {
    const std::string k = key + "#" + std::to_string(i);
    bool found = false;
    for (const auto& [pk, pv] : params)
      if (pk == k) {
        out.push_back(static_cast<std::int64_t>(pv));
        found = true;
        break;
      }
    if (!found) break;
  }
  return out.empty() ? fallback : out;
}

ExperimentConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& err) {
    throw ConfigError(std::string("config parse error: ") + err.what());
  }
  reject_unknown_keys(j, {"schema_version", "seed", "jobs", "out", "spec", "checks"}, "config");
  ExperimentConfig cfg;
  cfg.schema_version = j.value("schema_version", 0);
  if (cfg.schema_version != 1) throw ConfigError("config: schema_version must be 1");
  cfg.seed = j.value("seed", 1ULL);
  cfg.jobs = j.value("jobs", 0);
  cfg.out_dir = j.value("out", "");
  if (!j.contains("spec")) throw ConfigError("config: missing 'spec'");
  cfg.spec = parse_spec(j.at("spec"), cfg.seed);
  if (j.contains("checks"))
    for (const auto& c : j.at("checks")) cfg.checks.push_back(parse_check(c));
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_json(ss.str());
}

namespace {

CheckReport dispatch_check(const EnvironmentSpec& spec, const CheckRequest& req,
                           std::uint64_t seed, ExecMode mode) {
  if (req.name == "validate") {
    ValidateOptions o;
    o.sample_layers = static_cast<std::int64_t>(req.get("sample_layers", 256));
    o.seed = seed;
    return check_validate(spec, o);
  }
  if (req.name == "quenched_clt") {
    QuenchedCltOptions o;
    o.n = static_cast<std::int64_t>(req.get("n", 2000));
    o.replicas = static_cast<std::int64_t>(req.get("replicas", 10000));
    o.threshold = req.get("threshold", 0.02);
    o.negative_control = req.negative_control;
    o.seed = seed;
    o.mode = mode;
    return check_quenched_clt(spec, o);
  }
  if (req.name == "hitting_llt") {
    HittingLltOptions o;
    o.n = static_cast<std::int64_t>(req.get("n", 400));
    o.replicas = static_cast<std::int64_t>(req.get("replicas", 1000000));
    o.threshold = req.get("threshold", 0.1);
    o.seed = seed;
    o.mode = mode;
    return check_hitting_llt(spec, o);
  }
  if (req.name == "position_llt") {
    PositionLltOptions o;
    o.mode = req.get_string("mode", "quenched") == "annealed" ? PositionLltMode::Annealed
                                                              : PositionLltMode::Quenched;
    o.n = static_cast<std::int64_t>(req.get("n", 400));
    o.replicas = static_cast<std::int64_t>(req.get("replicas", o.mode == PositionLltMode::Quenched ? 1000000 : 1000));
    o.env_count = static_cast<std::int64_t>(req.get("env_count", 1000));
    o.window_radius = req.get("window_radius", 2.0);
    o.threshold = req.get("threshold", o.mode == PositionLltMode::Quenched ? 0.1 : 0.15);
    o.seed = seed;
    o.exec = mode;
    return check_position_llt(spec, o);
  }
  if (req.name == "annealed_stable") {
    AnnealedStableOptions o;
    o.n = static_cast<std::int64_t>(req.get("n", 10000));
    o.replicas = static_cast<std::int64_t>(req.get("replicas", 10000));
    o.reference_samples = static_cast<std::int64_t>(req.get("reference_samples", 100000));
    o.threshold = req.get("threshold", 0.05);
    o.seed = seed;
    o.mode = mode;
    return check_annealed_stable(spec, o);
  }
  if (req.name == "evfp") {
    EvfpOptions o;
    o.schedule = req.get_schedule("schedule", {100, 1000, 10000});
    o.replicas = static_cast<std::int64_t>(req.get("replicas", 20000));
    o.env_count = static_cast<std::int64_t>(req.get("env_count", 4000));
    o.annealed = req.get_string("mode", "quenched") == "annealed";
    o.seed = seed;
    o.mode = mode;
    const std::string phi_name = req.get_string("phi", "p_entry");
    EvfpFunctional phi;
    if (phi_name == "one")
      phi = phi_one();
    else if (phi_name == "p_entry")
      phi = phi_p_entry();
    else if (phi_name == "rung1")
      phi = phi_rung_indicator(1);
    else
      throw ConfigError("evfp: unknown phi '" + phi_name + "'");
    return check_evfp(spec, phi, o);
  }
  if (req.name == "sinai") {
    SinaiOptions o;
    o.schedule = req.get_schedule("schedule", {1000, 10000, 100000, 1000000});
    o.replicas = static_cast<std::int64_t>(req.get("replicas", 1000));
    o.clt_replicas = static_cast<std::int64_t>(req.get("clt_replicas", 4000));
    o.slope_lo = req.get("slope_lo", 1.7);
    o.slope_hi = req.get("slope_hi", 2.3);
    o.shape_threshold = req.get("shape_threshold", 0.3);
    o.clt_threshold = req.get("clt_threshold", 0.05);
    o.seed = seed;
    o.mode = mode;
    return check_sinai_recurrent(spec, o);
  }
  if (req.name == "fluctuation") {
    FluctuationOptions o;
    o.grid = req.get_schedule("grid", {1000, 10000, 100000});
    o.seed = seed;
    o.mode = mode;
    return check_fluctuation_lemma(spec, o);
  }
  if (req.name == "backtrack") {
    BacktrackOptions o;
    const auto depths = req.get_schedule("depths", {0, 1, 2, 3, 4, 5, 6});
    o.depths.assign(depths.begin(), depths.end());
    o.replicas = static_cast<std::int64_t>(req.get("replicas", 200000));
    o.seed = seed;
    o.mode = mode;
    return check_backtrack(spec, o);
  }
  if (req.name == "describe") {
    DescribeOptions o;
    o.seed = seed;
    o.mode = mode;
    const SpectralSummary s = describe_spec(spec, o);
    CheckReport rep;
    rep.check_id = "describe";
    rep.spec_id = spec.name;
    rep.seed = seed;
    rep.statistic = s.lambda_hat;
    rep.pass = true;
    rep.detail("summary", spectral_summary_csv(s));
    return rep;
  }
  throw ConfigError("unknown check '" + req.name + "'");
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, ExecMode mode,
                                std::ostream* progress, std::ostream* ledger_stream) {
  if (cfg.jobs > 0) set_workers(cfg.jobs);
  ExperimentResult result;
  if (ledger_stream) (*ledger_stream) << ledger_header() << std::flush;
  for (const auto& req : cfg.checks) {
    CheckReport rep;
    try {
      rep = dispatch_check(cfg.spec, req, cfg.seed, mode);
      rep.negative_control = rep.negative_control || req.negative_control;
    } catch (const std::exception& err) {
      rep.check_id = req.name;
      rep.spec_id = cfg.spec.name;
      rep.seed = cfg.seed;
      rep.pass = false;
      rep.detail("error", err.what());
    }
    result.all_satisfied = result.all_satisfied && rep.satisfied();
    if (ledger_stream) (*ledger_stream) << ledger_row(rep, true) << std::flush;
    if (progress) {
      (*progress) << (rep.satisfied() ? "[ok]  " : "[FAIL] ") << rep.check_id << " on "
                  << rep.spec_id << "  statistic=" << fmt(rep.statistic)
                  << " threshold=" << fmt(rep.threshold)
                  << (rep.negative_control ? " (negative control)" : "") << "\n";
    }
    result.reports.push_back(std::move(rep));
  }
  return result;
}

std::string ledger_header() {
  return "check_id,spec_id,seed,n,replicas,statistic,threshold,pass,wall_time_s\n";
}

std::string ledger_row(const CheckReport& rep, bool include_time) {
  std::ostringstream os;
  os << rep.check_id << ',' << rep.spec_id << ',' << rep.seed << ',' << rep.n << ','
     << rep.replicas << ',' << fmt(rep.statistic) << ',' << fmt(rep.threshold) << ','
     << (rep.pass ? 1 : 0) << ',';
  if (include_time) os << fmt(rep.wall_time_s);
  os << '\n';
  return os.str();
}

std::string ledger_csv(const std::vector<CheckReport>& reports, bool include_time) {
  std::string out = ledger_header();
  for (const auto& rep : reports) out += ledger_row(rep, include_time);
  return out;
}

std::string report_detail_text(const CheckReport& rep) {
  std::ostringstream os;
  os << "check: " << rep.check_id << "\nspec: " << rep.spec_id << "\nseed: " << rep.seed
     << "\nn: " << rep.n << "\nreplicas: " << rep.replicas << "\nstatistic: " << fmt(rep.statistic)
     << "\nthreshold: " << fmt(rep.threshold) << "\npass: " << (rep.pass ? "yes" : "no")
     << "\nnegative_control: " << (rep.negative_control ? "yes" : "no")
     << "\ndegraded: " << (rep.degraded ? "yes" : "no") << "\nwall_time_s: " << fmt(rep.wall_time_s)
     << "\n";
  for (const auto& [k, v] : rep.details) os << k << ": " << v << "\n";
  return os.str();
}

std::string spectral_summary_csv(const SpectralSummary& s) {
  std::ostringstream os;
  os << "lambda,stderr,s,regime,bp,K\n"
     << fmt(s.lambda_hat) << ',' << fmt(s.lambda_se) << ','
     << (s.s_infinite ? "inf" : (s.regime == Regime::TransientRight ? fmt(s.s_hat) : "n/a")) << ','
     << regime_name(s.regime) << ',' << (s.bp_flag ? 1 : 0) << ',' << fmt(s.k_observed) << '\n';
  return os.str();
}

std::string spectral_summary_text(const SpectralSummary& s) {
  std::ostringstream os;
  os << "lambda_hat: " << fmt(s.lambda_hat) << " (se " << fmt(s.lambda_se) << ")\n";
  os << "regime: " << regime_name(s.regime) << "\n";
  if (s.regime == Regime::TransientRight)
    os << "s: " << (s.s_infinite ? std::string("inf") : fmt(s.s_hat)) << "\n";
  os << "bp_flag: " << (s.bp_flag ? "true" : "false") << " (K_observed " << fmt(s.k_observed)
     << ")\n";
  os << "r_curve:\n";
  for (const auto& p : s.r_curve)
    os << "  alpha=" << fmt(p.alpha) << "  r=" << fmt(p.r) << "  ci=[" << fmt(p.lo) << ", "
       << fmt(p.hi) << "]\n";
  if (!s.log_lambda_support.empty()) {
    os << "ln lambda(P,Q,R) over support (non-arithmeticity diagnostic):";
    for (double v : s.log_lambda_support) os << ' ' << fmt(v);
    os << "\n";
  }
  return os.str();
}

void write_outputs(const ExperimentResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream ledger(fs::path(out_dir) / "ledger.csv");
    ledger << ledger_csv(result.reports, true);
  }
  fs::create_directories(fs::path(out_dir) / "details");
  for (const auto& rep : result.reports) {
    std::string name = rep.check_id + "__" + rep.spec_id + ".txt";
    std::replace(name.begin(), name.end(), '/', '_');
    std::ofstream detail(fs::path(out_dir) / "details" / name);
    detail << report_detail_text(rep);
  }
  std::ofstream summary(fs::path(out_dir) / "summary.txt");
  std::size_t ok = 0;
  for (const auto& rep : result.reports) ok += rep.satisfied() ? 1 : 0;
  summary << ok << "/" << result.reports.size() << " checks satisfied\n";
  for (const auto& rep : result.reports)
    summary << (rep.satisfied() ? "ok   " : "FAIL ") << rep.check_id << " " << rep.spec_id << "\n";
}

}  // namespace striplab
