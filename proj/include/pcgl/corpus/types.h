// types.h
// Recording metadata and the canonical in-memory recording form.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pcgl/common.h"

namespace pcgl::corpus {

inline constexpr int kSampleRate = 4000;

enum class Site { AV, MV, PV, TV, OTHER };

std::string site_name(Site s);
Site site_from_name(const std::string& name);

struct RecordingMeta {
    std::string recording_id;
    std::string patient_id;
    std::string path;
    int label = 0;  // 0 = murmur absent, 1 = present
    Site site = Site::OTHER;
    int sample_rate_hz = kSampleRate;
    std::vector<std::pair<double, double>> murmur_intervals;  // (start_s, end_s)
};

struct Manifest {
    int schema_version = 1;
    std::vector<RecordingMeta> entries;
};

// Samples are canonicalized to 4000 Hz before anything downstream sees them.
struct Recording {
    RecordingMeta meta;
    std::vector<float> samples;
};

}  // namespace pcgl::corpus
