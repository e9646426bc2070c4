#include "pcgl/corpus/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "pcgl/common.h"

namespace pcgl::corpus {

namespace {

template <typename T>
T read_le(std::ifstream& in, const std::string& path) {
    char buf[sizeof(T)];
    in.read(buf, sizeof(T));
    PCGL_CHECK(in.gcount() == sizeof(T), path << ": truncated WAV");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

template <typename T>
void write_le(std::ofstream& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.write(buf, sizeof(T));
}

void write_header(std::ofstream& out, int sample_rate, std::uint16_t format,
                  std::uint16_t bits, std::uint32_t data_bytes) {
    out.write("RIFF", 4);
    write_le<std::uint32_t>(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_le<std::uint32_t>(out, 16);
    write_le<std::uint16_t>(out, format);
    write_le<std::uint16_t>(out, 1);  // mono
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(sample_rate));
    const std::uint32_t byte_rate = static_cast<std::uint32_t>(sample_rate) * bits / 8;
    write_le<std::uint32_t>(out, byte_rate);
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(bits / 8));
    write_le<std::uint16_t>(out, bits);
    out.write("data", 4);
    write_le<std::uint32_t>(out, data_bytes);
}

}  // namespace

WavData read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    PCGL_CHECK(in.good(), "cannot open " << path);

    char tag[4];
    in.read(tag, 4);
    PCGL_CHECK(in.gcount() == 4 && std::memcmp(tag, "RIFF", 4) == 0, path << ": not a RIFF file");
    (void)read_le<std::uint32_t>(in, path);
    in.read(tag, 4);
    PCGL_CHECK(in.gcount() == 4 && std::memcmp(tag, "WAVE", 4) == 0, path << ": not a WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    bool have_fmt = false;
    WavData out;

    while (in.read(tag, 4) && in.gcount() == 4) {
        const std::uint32_t size = read_le<std::uint32_t>(in, path);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            PCGL_CHECK(size >= 16, path << ": malformed fmt chunk");
            format = read_le<std::uint16_t>(in, path);
            channels = read_le<std::uint16_t>(in, path);
            sample_rate = read_le<std::uint32_t>(in, path);
            (void)read_le<std::uint32_t>(in, path);
            (void)read_le<std::uint16_t>(in, path);
            bits = read_le<std::uint16_t>(in, path);
            in.seekg(size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            PCGL_CHECK(have_fmt, path << ": data chunk before fmt");
            PCGL_CHECK(channels == 1, path << ": " << channels << " channels, need mono");
            if (format == 1) {
                PCGL_CHECK(bits == 16, path << ": PCM with " << bits << " bits unsupported");
                const std::size_t n = size / 2;
                out.samples.resize(n);
                for (std::size_t i = 0; i < n; ++i)
                    out.samples[i] =
                        static_cast<float>(read_le<std::int16_t>(in, path)) / 32768.0f;
            } else if (format == 3) {
                PCGL_CHECK(bits == 32, path << ": float WAV with " << bits
                                            << " bits unsupported");
                const std::size_t n = size / 4;
                out.samples.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    const std::uint32_t raw = read_le<std::uint32_t>(in, path);
                    float f;
                    std::memcpy(&f, &raw, 4);
                    out.samples[i] = f;
                }
            } else {
                PCGL_CHECK(false, path << ": WAV format tag " << format
                                       << " unsupported (need PCM16 or float32)");
            }
            out.sample_rate = static_cast<int>(sample_rate);
            PCGL_CHECK(!out.samples.empty(), path << ": zero-length audio");
            return out;
        } else {
            in.seekg(size + (size & 1u), std::ios::cur);
        }
    }
    PCGL_CHECK(false, path << ": no data chunk found");
    return out;
}

void write_wav_pcm16(const std::string& path, const std::vector<float>& samples,
                     int sample_rate) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    PCGL_CHECK(out.good(), "cannot open " << path << " for writing");
    write_header(out, sample_rate, 1, 16,
                 static_cast<std::uint32_t>(samples.size() * 2));
    for (float s : samples) {
        const float clamped = std::clamp(s, -1.0f, 1.0f);
        const auto q = static_cast<std::int16_t>(std::lrintf(clamped * 32767.0f));
        write_le<std::int16_t>(out, q);
    }
    out.flush();
    PCGL_CHECK(out.good(), "write failed for " << path);
}

void write_wav_float32(const std::string& path, const std::vector<float>& samples,
                       int sample_rate) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    PCGL_CHECK(out.good(), "cannot open " << path << " for writing");
    write_header(out, sample_rate, 3, 32,
                 static_cast<std::uint32_t>(samples.size() * 4));
    for (float s : samples) {
        std::uint32_t raw;
        std::memcpy(&raw, &s, 4);
        write_le<std::uint32_t>(out, raw);
    }
    out.flush();
    PCGL_CHECK(out.good(), "write failed for " << path);
}

}  // namespace pcgl::corpus
