#include "striplab/presets.hpp"

#include <stdexcept>

namespace striplab {

SupportAtom width1_atom(double p, double q, double r, double prob) {
  MatrixTriple t{Matrix(1, 1, p), Matrix(1, 1, q), Matrix(1, 1, r), 1};
  return {t, prob};
}

std::vector<std::string> preset_names() {
  return {"const-p075", "const-p075-lazy", "const-p05",     "two-point-s124", "two-point-s345",
          "two-point-s028", "two-point-sinf", "sinai",      "rand-m2",        "rand-m3"};
}

EnvironmentSpec preset_spec(const std::string& name, std::uint64_t seed) {
  EnvironmentSpec spec;
  spec.name = name;
  spec.master_seed = seed;
  spec.m = 1;

  if (name == "const-p075") {
    spec.support = {width1_atom(0.75, 0.25, 0.0, 1.0)};
    spec.ellipticity = {0.1, 0.0};
  } else if (name == "const-p075-lazy") {
    spec.support = {width1_atom(0.6, 0.1, 0.3, 1.0)};
    spec.ellipticity = {0.05, 0.25};
  } else if (name == "const-p05") {
    spec.support = {width1_atom(0.5, 0.5, 0.0, 1.0)};
    spec.ellipticity = {0.1, 0.0};
  } else if (name == "two-point-s124") {
    spec.support = {width1_atom(0.7, 0.3, 0.0, 0.5), width1_atom(0.4, 0.6, 0.0, 0.5)};
    spec.ellipticity = {0.1, 0.0};
  } else if (name == "two-point-s345") {
    spec.support = {width1_atom(0.64, 0.16, 0.2, 0.5), width1_atom(0.36, 0.44, 0.2, 0.5)};
    spec.ellipticity = {0.05, 0.15};
  } else if (name == "two-point-s028") {
    spec.support = {width1_atom(0.75, 0.25, 0.0, 0.5), width1_atom(0.3, 0.7, 0.0, 0.5)};
    spec.ellipticity = {0.1, 0.0};
  } else if (name == "two-point-sinf") {
    spec.support = {width1_atom(0.85, 0.15, 0.0, 0.5), width1_atom(0.6, 0.4, 0.0, 0.5)};
    spec.ellipticity = {0.05, 0.0};
  } else if (name == "sinai") {
    spec.support = {width1_atom(0.7, 0.3, 0.0, 0.5), width1_atom(0.3, 0.7, 0.0, 0.5)};
    spec.ellipticity = {0.1, 0.0};
  } else if (name == "rand-m2" || name == "rand-m3") {
    DirichletGenerator g;
    g.m = (name == "rand-m2") ? 2 : 3;
    g.floor_p = 0.03;
    g.floor_q = 0.03;
    g.kappa = 0.05;
    g.weight_p = 2.2;
    g.weight_q = 0.7;
    g.weight_r = 0.6;
    spec.m = g.m;
    spec.generator = g;
    spec.ellipticity = {0.02, 0.02};
  } else {
    throw SpecError("unknown preset '" + name + "'");
  }
  validate_spec(spec);
  return spec;
}

}  // namespace striplab
