#pragma once

#include <array>

#include "avfuse/errors.hpp"

namespace avfuse {

// Upper quantiles of the chi-square distribution, dof 1..9.
inline constexpr std::array<double, 9> kChiSquare95 = {
    3.841458820694124, 5.991464547107979, 7.814727903251178, 9.487729036781154, 11.070497693516351,
    12.591587243743977, 14.067140449340169, 15.507313055865453, 16.918977604620448};
inline constexpr std::array<double, 9> kChiSquare99 = {
    6.6348966010212145, 9.21034037197618, 11.344866730144373, 13.276704135987622, 15.08627246938899,
    16.811893829770927, 18.475306906582357, 20.090235029663233, 21.665994333461924};

/// Table lookup for probability 0.95 or 0.99.
inline double chi_square_quantile(double prob, int dof) {
  if (dof < 1 || dof > 9)
    throw Error(ErrorCode::kValidation, "chi-square table covers dof 1..9");
  if (prob == 0.95) return kChiSquare95[dof - 1];
  if (prob == 0.99) return kChiSquare99[dof - 1];
  throw Error(ErrorCode::kValidation, "chi-square table covers probabilities 0.95 and 0.99");
}

}  // namespace avfuse
