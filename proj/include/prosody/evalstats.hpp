#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace prosody::evalstats {

struct StatsSummary
{
    std::size_t n = 0;
    double mean = 0.0;
    double ci95_halfwidth = 0.0;
};

struct TTestResult
{
    double t = 0.0;
    double p = 1.0; // two-tailed
    bool significant = false;
    std::size_t df = 0;
};

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_tailed_p(double t, double df);

// Value q with P(T <= q) = prob, for prob in (0, 1).
double student_t_quantile(double prob, double df);

// Mean and t-based 95% half-width with the sample (n-1) standard deviation.
StatsSummary mean_ci95(std::span<const double> values);

// Paired two-tailed t-test on a - b.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

enum class AxyChoice { X, Y };

// Fraction of responses choosing X, the target speaker.
double axy_accuracy(std::span<const AxyChoice> responses);

std::vector<double> preference_proportions(std::span<const int> responses, int k);

} // namespace prosody::evalstats
