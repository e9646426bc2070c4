// wav.h
// Mono WAV reading (PCM16 and IEEE float32) and writing.
#pragma once

#include <string>
#include <vector>

namespace pcgl::corpus {

struct WavData {
    std::vector<float> samples;
    int sample_rate = 0;
};

// Rejects multichannel, zero-length and non-PCM16/float32 files.
// PCM16 is scaled by 1/32768 so output lies in [-1, 1].
WavData read_wav(const std::string& path);

void write_wav_pcm16(const std::string& path, const std::vector<float>& samples,
                     int sample_rate);
void write_wav_float32(const std::string& path, const std::vector<float>& samples,
                       int sample_rate);

}  // namespace pcgl::corpus
