#include "prosody/dtw.hpp"

#include "prosody/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace prosody::pairing {

double dtw_distance(std::span<const double> a, std::span<const double> b)
{
    return dtw_distance_bounded(a, b);
}

double dtw_distance_bounded(std::span<const double> a, std::span<const double> b, double abandon_above)
{
    if (a.empty() || b.empty())
        throw Error("empty_sequence", "dtw_distance needs two non-empty sequences");

    constexpr double inf = std::numeric_limits<double>::infinity();
    const double norm = static_cast<double>(a.size() + b.size());
    // Accumulated costs only grow along a path, so once a whole row is above
    // the raw bound no path through it can come back under.
    const double raw_bound = std::isinf(abandon_above) ? inf : abandon_above * norm * (1.0 + 1e-12);

    std::vector<double> prev(b.size()), cur(b.size());
    prev[0] = std::abs(a[0] - b[0]);
    for (std::size_t j = 1; j < b.size(); ++j)
        prev[j] = prev[j - 1] + std::abs(a[0] - b[j]);
    if (*std::min_element(prev.begin(), prev.end()) > raw_bound)
        return inf;

    for (std::size_t i = 1; i < a.size(); ++i) {
        cur[0] = prev[0] + std::abs(a[i] - b[0]);
        double row_min = cur[0];
        for (std::size_t j = 1; j < b.size(); ++j) {
            cur[j] = std::abs(a[i] - b[j]) + std::min({prev[j], cur[j - 1], prev[j - 1]});
            row_min = std::min(row_min, cur[j]);
        }
        if (row_min > raw_bound)
            return inf;
        std::swap(prev, cur);
    }
    return prev.back() / norm;
}

} // namespace prosody::pairing
