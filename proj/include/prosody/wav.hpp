#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace prosody::wav {

// Mono audio as floats in [-1, 1).
struct Audio
{
    std::uint32_t sample_rate = 16000;
    std::vector<float> samples;

    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Only RIFF/WAVE, PCM 16-bit, one channel. Stereo and other encodings throw.
Audio decode(std::string_view bytes);
Audio read(const std::filesystem::path& path);

std::vector<char> encode(const Audio& audio);
void write(const std::filesystem::path& path, const Audio& audio);

} // namespace prosody::wav
