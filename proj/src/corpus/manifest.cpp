#include "pcgl/corpus/manifest.h"

#include <fstream>
#include <set>

#include <json.hpp>

#include "pcgl/corpus/resample.h"
#include "pcgl/corpus/wav.h"

namespace pcgl::corpus {

std::string site_name(Site s) {
    switch (s) {
        case Site::AV: return "AV";
        case Site::MV: return "MV";
        case Site::PV: return "PV";
        case Site::TV: return "TV";
        case Site::OTHER: return "OTHER";
    }
    return "OTHER";
}

Site site_from_name(const std::string& name) {
    if (name == "AV") return Site::AV;
    if (name == "MV") return Site::MV;
    if (name == "PV") return Site::PV;
    if (name == "TV") return Site::TV;
    if (name == "OTHER") return Site::OTHER;
    PCGL_CHECK(false, "unknown auscultation site \"" << name << "\"");
    return Site::OTHER;
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    PCGL_CHECK(in.good(), "cannot open manifest " << path);
    Manifest m;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            PCGL_CHECK(false, path << " line " << lineno << ": " << e.what());
        }
        RecordingMeta e;
        try {
            e.recording_id = j.at("recording_id").get<std::string>();
            e.patient_id = j.at("patient_id").get<std::string>();
            e.path = j.at("path").get<std::string>();
            e.label = j.at("label").get<int>();
            e.site = site_from_name(j.value("site", "OTHER"));
            e.sample_rate_hz = j.value("sample_rate_hz", kSampleRate);
            for (const auto& iv : j.value("murmur_intervals", nlohmann::json::array()))
                e.murmur_intervals.emplace_back(iv.at(0).get<double>(),
                                                iv.at(1).get<double>());
        } catch (const nlohmann::json::exception& ex) {
            PCGL_CHECK(false, path << " line " << lineno << ": " << ex.what());
        }
        PCGL_CHECK(e.label == 0 || e.label == 1,
                   path << " line " << lineno << ": label " << e.label
                        << " not in {0,1}");
        PCGL_CHECK(!e.patient_id.empty(),
                   path << " line " << lineno << ": missing patient_id");
        PCGL_CHECK(e.sample_rate_hz > 0,
                   path << " line " << lineno << ": sample_rate_hz " << e.sample_rate_hz);
        for (const auto& [s, t] : e.murmur_intervals)
            PCGL_CHECK(s >= 0.0 && s < t, path << " line " << lineno
                                               << ": murmur interval [" << s << "," << t
                                               << "] out of order");
        PCGL_CHECK(seen.insert(e.recording_id).second,
                   path << " line " << lineno << ": duplicate recording_id \""
                        << e.recording_id << "\"");
        m.entries.push_back(std::move(e));
    }
    return m;
}

void save_manifest(const std::string& path, const Manifest& m) {
    std::ofstream out(path, std::ios::trunc);
    PCGL_CHECK(out.good(), "cannot open " << path << " for writing");
    for (const auto& e : m.entries) {
        nlohmann::json intervals = nlohmann::json::array();
        for (const auto& [s, t] : e.murmur_intervals) intervals.push_back({s, t});
        nlohmann::json j = {{"recording_id", e.recording_id},
                            {"patient_id", e.patient_id},
                            {"path", e.path},
                            {"label", e.label},
                            {"site", site_name(e.site)},
                            {"sample_rate_hz", e.sample_rate_hz},
                            {"murmur_intervals", intervals}};
        out << j.dump() << "\n";
    }
    out.flush();
    PCGL_CHECK(out.good(), "write failed for " << path);
}

Recording read_recording(const RecordingMeta& meta) {
    WavData wav = read_wav(meta.path);
    Recording rec;
    rec.meta = meta;
    rec.meta.sample_rate_hz = kSampleRate;
    rec.samples = wav.sample_rate == kSampleRate
                      ? std::move(wav.samples)
                      : resample_sinc(wav.samples, wav.sample_rate, kSampleRate);
    PCGL_CHECK(!rec.samples.empty(), meta.recording_id << ": empty after resampling");
    for (float v : rec.samples)
        PCGL_CHECK(std::isfinite(v), meta.recording_id << ": non-finite sample");
    return rec;
}

}  // namespace pcgl::corpus
