#pragma once

// Test-only reference computations. Nothing here shares code with the
// library paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

// Minimum accumulated |a_i - b_j| over every monotone warping path from
// (0,0) to (n-1,m-1) with steps (1,0), (0,1), (1,1), found by exhaustive
// enumeration, divided by n + m.
inline double brute_force_dtw(const std::vector<double>& a, const std::vector<double>& b)
{
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
        acc += std::abs(a[i] - b[j]);
        if (i + 1 == a.size() && j + 1 == b.size()) {
            best = std::min(best, acc);
            return;
        }
        if (i + 1 < a.size())
            walk(i + 1, j, acc);
        if (j + 1 < b.size())
            walk(i, j + 1, acc);
        if (i + 1 < a.size() && j + 1 < b.size())
            walk(i + 1, j + 1, acc);
    };
    walk(0, 0, 0.0);
    return best / static_cast<double>(a.size() + b.size());
}

inline std::vector<float> sine(double hz, double seconds, double sample_rate, double amplitude = 0.5)
{
    const auto n = static_cast<std::size_t>(seconds * sample_rate);
    std::vector<float> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = static_cast<float>(amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / sample_rate));
    return x;
}

inline std::vector<double> sine_d(double hz, std::size_t n, double sample_rate, double amplitude = 1.0)
{
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / sample_rate);
    return x;
}

// Amplitude of the `hz` component in the last `tail` samples, by projection
// onto sine and cosine (steady-state measurement of a filter output).
inline double tone_amplitude(const std::vector<double>& y, double hz, double sample_rate, std::size_t tail)
{
    double s = 0.0, c = 0.0;
    const std::size_t start = y.size() - tail;
    for (std::size_t i = start; i < y.size(); ++i) {
        const double ph = 2.0 * std::numbers::pi * hz * static_cast<double>(i) / sample_rate;
        s += y[i] * std::sin(ph);
        c += y[i] * std::cos(ph);
    }
    return 2.0 * std::hypot(s, c) / static_cast<double>(tail);
}

inline double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double population_std(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v)
        m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v)
        ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

} // namespace oracle
