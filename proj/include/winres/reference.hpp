#pragma once

#include "winres/estimate.hpp"

namespace winres {
namespace reference {

// Straight serial transcription of the pairwise estimators: a plain double
// loop over all treated x control pairs evaluating every nuisance directly,
// with no caching and no parallelism. Kept as the comparison oracle for the
// OpenMP engine and as the benchmark baseline.
WinComponents estimate(const std::vector<RestrictedRecord>& records, double tau,
                       Method method, const NuisanceBundle& bundle);

}  // namespace reference
}  // namespace winres
