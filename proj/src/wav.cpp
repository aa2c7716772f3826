#include "prosody/wav.hpp"

#include "prosody/error.hpp"
#include "prosody/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace prosody::wav {

namespace {

std::uint32_t le32(const char* p)
{
    const auto* u = reinterpret_cast<const unsigned char*>(p);
    return std::uint32_t(u[0]) | std::uint32_t(u[1]) << 8 | std::uint32_t(u[2]) << 16 | std::uint32_t(u[3]) << 24;
}

std::uint16_t le16(const char* p)
{
    const auto* u = reinterpret_cast<const unsigned char*>(p);
    return static_cast<std::uint16_t>(u[0] | u[1] << 8);
}

void put32(std::vector<char>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put16(std::vector<char>& out, std::uint16_t v)
{
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

} // namespace

Audio decode(std::string_view bytes)
{
    if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE")
        throw Error("invalid_wav", "not a RIFF/WAVE file");

    bool have_fmt = false;
    std::uint16_t channels = 0;
    std::uint16_t bits = 0;
    Audio audio;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const auto id = bytes.substr(pos, 4);
        const std::size_t size = le32(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        const std::size_t avail = std::min(size, bytes.size() - body);
        if (id == "fmt ") {
            if (avail < 16)
                throw Error("invalid_wav", "truncated fmt chunk");
            auto format = le16(bytes.data() + body);
            channels = le16(bytes.data() + body + 2);
            audio.sample_rate = le32(bytes.data() + body + 4);
            bits = le16(bytes.data() + body + 14);
            if (format == kFormatExtensible && avail >= 26)
                format = le16(bytes.data() + body + 24);
            if (format != kFormatPcm)
                throw Error("unsupported_wav", "only PCM WAV is supported");
            if (channels != 1)
                throw Error("unsupported_wav", "expected mono audio, got " + std::to_string(channels) + " channels");
            if (bits != 16)
                throw Error("unsupported_wav", "expected 16-bit samples, got " + std::to_string(bits));
            if (audio.sample_rate == 0)
                throw Error("invalid_wav", "sample rate is zero");
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt)
                throw Error("invalid_wav", "data chunk before fmt chunk");
            const std::size_t n = avail / 2;
            audio.samples.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                audio.samples[i] = static_cast<std::int16_t>(le16(bytes.data() + body + 2 * i)) / 32768.0f;
            return audio;
        }
        pos = body + size + (size & 1);
    }
    throw Error("invalid_wav", have_fmt ? "missing data chunk" : "missing fmt chunk");
}

Audio read(const std::filesystem::path& path)
{
    try {
        return decode(io::read_file(path));
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::vector<char> encode(const Audio& audio)
{
    const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
    std::vector<char> out;
    out.reserve(44 + data_bytes);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put32(out, 36 + data_bytes);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    put32(out, 16);
    put16(out, kFormatPcm);
    put16(out, 1);
    put32(out, audio.sample_rate);
    put32(out, audio.sample_rate * 2);
    put16(out, 2);
    put16(out, 16);
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put32(out, data_bytes);
    for (float s : audio.samples) {
        const long v = std::lround(static_cast<double>(s) * 32768.0);
        put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(v, -32768L, 32767L))));
    }
    return out;
}

void write(const std::filesystem::path& path, const Audio& audio)
{
    const auto bytes = encode(audio);
    io::write_file_atomic(path, std::string_view(bytes.data(), bytes.size()));
}

} // namespace prosody::wav
