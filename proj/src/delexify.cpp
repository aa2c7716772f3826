#include "prosody/delexify.hpp"

#include "prosody/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <thread>

namespace prosody::delexify {

int FilterSpec::order() const
{
    const double ord = rolloff_db_per_octave / 6.0;
    if (!(ord >= 1.0) || std::abs(ord - std::round(ord)) > 1e-9)
        throw Error("invalid_argument", "roll-off must be a positive multiple of 6 dB per octave");
    return static_cast<int>(std::lround(ord));
}

Cascade design_lowpass(const FilterSpec& spec, double sample_rate)
{
    if (!(sample_rate > 0.0))
        throw Error("invalid_argument", "sample rate must be > 0");
    if (!(spec.cutoff_hz > 0.0) || !(spec.cutoff_hz < sample_rate / 2.0))
        throw Error("invalid_argument", "cutoff must lie in (0, Nyquist)");
    const int order = spec.order();
    if (order % 2 != 0)
        throw Error("invalid_argument", "only even filter orders are supported");

    using std::numbers::pi;
    const double k = std::tan(pi * spec.cutoff_hz / sample_rate);
    const double k2 = k * k;
    Cascade sections;
    for (int i = 0; i < order / 2; ++i) {
        // pole pair angle of the analog prototype
        const double theta = pi * (2.0 * i + 1.0) / (2.0 * order);
        const double damping = 2.0 * std::cos(theta); // 1/Q of this section
        const double norm = 1.0 / (1.0 + damping * k + k2);
        Biquad s;
        s.b0 = k2 * norm;
        s.b1 = 2.0 * s.b0;
        s.b2 = s.b0;
        s.a1 = 2.0 * (k2 - 1.0) * norm;
        s.a2 = (1.0 - damping * k + k2) * norm;
        sections.push_back(s);
    }
    return sections;
}

double magnitude_db(const Cascade& filter, double freq_hz, double sample_rate)
{
    const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate;
    const std::complex<double> z1 = std::polar(1.0, -w);
    const std::complex<double> z2 = z1 * z1;
    std::complex<double> h = 1.0;
    for (const auto& s : filter)
        h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    return 20.0 * std::log10(std::abs(h));
}

std::vector<double> filter_signal(const Cascade& filter, std::span<const double> x)
{
    std::vector<double> y(x.begin(), x.end());
    for (const auto& s : filter) {
        double z1 = 0.0, z2 = 0.0;
        for (double& v : y) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
    return y;
}

DelexifyResult delexify(const wav::Audio& in, const FilterSpec& spec)
{
    const auto filter = design_lowpass(spec, in.sample_rate);
    std::vector<double> x(in.samples.begin(), in.samples.end());
    const auto y = filter_signal(filter, x);

    DelexifyResult result;
    result.audio.sample_rate = in.sample_rate;
    result.audio.samples.assign(y.size(), 0.0f);
    double peak = 0.0;
    for (double v : y)
        peak = std::max(peak, std::abs(v));
    if (peak == 0.0) {
        result.silent = true;
        return result;
    }
    const double gain = std::pow(10.0, spec.output_peak_dbfs / 20.0) / peak;
    for (std::size_t i = 0; i < y.size(); ++i)
        result.audio.samples[i] = static_cast<float>(y[i] * gain);
    return result;
}

bool delexify_wav(const std::filesystem::path& in_path, const std::filesystem::path& out_path, const FilterSpec& spec)
{
    const auto in = wav::read(in_path);
    auto result = delexify(in, spec);
    if (result.silent)
        spdlog::warn("{}: input is silent; writing silence", in_path.string());
    wav::write(out_path, result.audio);
    return !result.silent;
}

std::vector<std::filesystem::path> delexify_directory(const std::filesystem::path& in_dir,
                                                      const std::filesystem::path& out_dir, const FilterSpec& spec,
                                                      unsigned threads)
{
    namespace fs = std::filesystem;
    if (!fs::is_directory(in_dir))
        throw Error("missing_input", "not a directory: " + in_dir.string());
    std::vector<fs::path> inputs;
    for (const auto& entry : fs::directory_iterator(in_dir)) {
        const auto& p = entry.path();
        if (entry.is_regular_file() && p.extension() == ".wav" && !p.stem().string().ends_with(".delex"))
            inputs.push_back(p);
    }
    std::sort(inputs.begin(), inputs.end());
    fs::create_directories(out_dir);

    std::vector<fs::path> outputs(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i)
        outputs[i] = out_dir / (inputs[i].stem().string() + ".delex.wav");

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < inputs.size(); i = next++) {
            try {
                delexify_wav(inputs[i], outputs[i], spec);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(threads ? threads : std::thread::hardware_concurrency(),
                                                        static_cast<unsigned>(std::max<std::size_t>(1, inputs.size()))));
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 1; w < n; ++w)
            pool.emplace_back(work);
        work();
    }
    if (failure)
        std::rethrow_exception(failure);
    return outputs;
}

} // namespace prosody::delexify
