#include "prosody/evalstats.hpp"

#include "prosody/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace prosody::evalstats {

namespace {

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x)
{
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny)
        d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny)
            d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny)
            c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny)
            d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny)
            c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps)
            break;
    }
    return h;
}

double mean_of(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v, double mean)
{
    double ss = 0.0;
    for (double x : v)
        ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

} // namespace

double incomplete_beta(double a, double b, double x)
{
    if (!(a > 0.0) || !(b > 0.0))
        throw Error("invalid_argument", "incomplete_beta needs a, b > 0");
    if (x <= 0.0)
        return 0.0;
    if (x >= 1.0)
        return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_tailed_p(double t, double df)
{
    if (!(df > 0.0))
        throw Error("invalid_argument", "degrees of freedom must be > 0");
    if (std::isnan(t))
        return std::numeric_limits<double>::quiet_NaN();
    if (std::isinf(t))
        return 0.0;
    return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

double student_t_quantile(double prob, double df)
{
    if (!(prob > 0.0 && prob < 1.0))
        throw Error("invalid_argument", "probability must be in (0, 1)");
    if (prob == 0.5)
        return 0.0;
    // Solve for |t| with two-tailed tail mass 2 * min(prob, 1 - prob).
    const double tail = 2.0 * std::min(prob, 1.0 - prob);
    double lo = 0.0, hi = 1.0;
    while (student_t_two_tailed_p(hi, df) > tail)
        hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (student_t_two_tailed_p(mid, df) > tail)
            lo = mid;
        else
            hi = mid;
    }
    const double t = 0.5 * (lo + hi);
    return prob > 0.5 ? t : -t;
}

StatsSummary mean_ci95(std::span<const double> values)
{
    if (values.empty())
        throw Error("empty_input", "mean_ci95 needs at least one value");
    StatsSummary s;
    s.n = values.size();
    s.mean = mean_of(values);
    if (s.n == 1)
        return s;
    const double sd = sample_sd(values, s.mean);
    if (sd == 0.0)
        return s;
    const double df = static_cast<double>(s.n - 1);
    s.ci95_halfwidth = student_t_quantile(0.975, df) * sd / std::sqrt(static_cast<double>(s.n));
    return s;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b, double alpha)
{
    if (a.size() != b.size())
        throw Error("length_mismatch", "paired_t_test needs equal-length samples");
    if (a.size() < 2)
        throw Error("insufficient_data", "paired_t_test needs n >= 2");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        d[i] = a[i] - b[i];

    TTestResult r;
    r.df = d.size() - 1;
    const double mean = mean_of(d);
    const double sd = sample_sd(d, mean);
    if (sd == 0.0) {
        // identical differences: exactly zero, or a certain shift
        r.t = mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
        r.p = mean == 0.0 ? 1.0 : 0.0;
    } else {
        r.t = mean / (sd / std::sqrt(static_cast<double>(d.size())));
        r.p = student_t_two_tailed_p(r.t, static_cast<double>(r.df));
    }
    r.significant = r.p < alpha;
    return r;
}

double axy_accuracy(std::span<const AxyChoice> responses)
{
    if (responses.empty())
        throw Error("empty_input", "axy_accuracy needs at least one response");
    const auto hits = std::count(responses.begin(), responses.end(), AxyChoice::X);
    return static_cast<double>(hits) / static_cast<double>(responses.size());
}

std::vector<double> preference_proportions(std::span<const int> responses, int k)
{
    if (k < 1)
        throw Error("invalid_argument", "option count must be >= 1");
    if (responses.empty())
        throw Error("empty_input", "preference_proportions needs at least one response");
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (int r : responses) {
        if (r < 0 || r >= k)
            throw Error("out_of_range", "option index " + std::to_string(r) + " outside [0, " + std::to_string(k) + ")");
        ++counts[static_cast<std::size_t>(r)];
    }
    std::vector<double> out(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        out[i] = static_cast<double>(counts[i]) / static_cast<double>(responses.size());
    return out;
}

} // namespace prosody::evalstats
