#pragma once

#include <string>
#include <vector>

#include "striplab/environment.hpp"

namespace striplab {

// Named model instances used across the experiment configs and tests.
//
//   const-p075       m=1, P=.75 Q=.25 R=0; ballistic, a=2, closed forms
//   const-p075-lazy  m=1, P=.6 Q=.1 R=.3; same drift (a=2) with a lazy
//                    component so condition C3 holds (needed by the LLTs)
//   const-p05        m=1, symmetric; recurrent with (BP), K=1
//   two-point-s124   {p=.7, p=.4} equal weights; transient, s ~ 1.237
//   two-point-s345   lazy two-point {(.64,.16,.2), (.36,.44,.2)}; the q/p
//                    ratios match {p=.8, p=.45}, so s ~ 3.44, and C3 holds
//   two-point-s028   {p=.75, p=.3}; heavy trapping, s < 1
//   two-point-sinf   {p=.85, p=.6}; both ratios < 1, s = +infinity
//   sinai            {p=.7, p=.3} equal weights; recurrent without (BP)
//   rand-m2 / rand-m3  drift-right parametric generators
EnvironmentSpec preset_spec(const std::string& name, std::uint64_t seed);

std::vector<std::string> preset_names();

// helper for building width-1 support atoms
SupportAtom width1_atom(double p, double q, double r, double prob);

}  // namespace striplab
