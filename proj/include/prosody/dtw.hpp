#pragma once

#include <limits>
#include <span>

namespace prosody::pairing {

// Dynamic time warping with local cost |a_i - b_j|, steps (1,0), (0,1),
// (1,1), both endpoints anchored. The accumulated cost is divided by
// a.size() + b.size(), which makes the distance symmetric and comparable
// across lengths. Throws on an empty input.
double dtw_distance(std::span<const double> a, std::span<const double> b);

// Same value as dtw_distance, but gives up and returns +infinity as soon as
// the result is certain to exceed `abandon_above`.
double dtw_distance_bounded(std::span<const double> a, std::span<const double> b,
                            double abandon_above = std::numeric_limits<double>::infinity());

} // namespace prosody::pairing
