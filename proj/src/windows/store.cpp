#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "pcgl/windows/windows.h"

namespace pcgl::windows {

void save_windows(const std::string& dir, const std::vector<Window>& windows) {
    std::filesystem::create_directories(dir);
    std::ofstream blob(dir + "/windows.f32", std::ios::binary | std::ios::trunc);
    std::ofstream index(dir + "/index.jsonl", std::ios::trunc);
    PCGL_CHECK(blob.good() && index.good(), "cannot open window store in " << dir);

    std::uint64_t offset = 0;
    for (const auto& w : windows) {
        PCGL_CHECK(w.samples.size() == kWindowSamples,
                   w.window_id << ": " << w.samples.size() << " samples");
        blob.write(reinterpret_cast<const char*>(w.samples.data()),
                   static_cast<std::streamsize>(w.samples.size() * sizeof(float)));
        nlohmann::json srcs = nlohmann::json::array();
        for (const auto& s : w.source_segments) srcs.push_back({s.segment_index, s.gap_ms});
        nlohmann::json j = {{"window_id", w.window_id},
                            {"patient_id", w.patient_id},
                            {"recording_id", w.recording_id},
                            {"label", w.label},
                            {"offset", offset},
                            {"length", w.samples.size()},
                            {"source_segments", srcs},
                            {"quality",
                             {{"temporal_continuity", w.quality.temporal_continuity},
                              {"amplitude_consistency", w.quality.amplitude_consistency},
                              {"frequency_consistency", w.quality.frequency_consistency},
                              {"rhythm_preserved", w.quality.rhythm_preserved},
                              {"label_pure", w.quality.label_pure},
                              {"source_unified", w.quality.source_unified}}}};
        index << j.dump() << "\n";
        offset += w.samples.size();
    }
    blob.flush();
    index.flush();
    PCGL_CHECK(blob.good() && index.good(), "write failed in " << dir);
}

std::vector<Window> load_windows(const std::string& dir) {
    std::ifstream blob(dir + "/windows.f32", std::ios::binary);
    std::ifstream index(dir + "/index.jsonl");
    PCGL_CHECK(blob.good(), "cannot open " << dir << "/windows.f32");
    PCGL_CHECK(index.good(), "cannot open " << dir << "/index.jsonl");

    std::vector<Window> out;
    std::string line;
    int lineno = 0;
    while (std::getline(index, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            PCGL_CHECK(false, dir << "/index.jsonl line " << lineno << ": " << e.what());
        }
        Window w;
        w.window_id = j.at("window_id").get<std::string>();
        w.patient_id = j.at("patient_id").get<std::string>();
        w.recording_id = j.at("recording_id").get<std::string>();
        w.label = j.at("label").get<int>();
        const auto offset = j.at("offset").get<std::uint64_t>();
        const auto length = j.at("length").get<std::uint64_t>();
        PCGL_CHECK(length == kWindowSamples,
                   w.window_id << ": stored length " << length);
        for (const auto& s : j.value("source_segments", nlohmann::json::array()))
            w.source_segments.push_back({s.at(0).get<int>(), s.at(1).get<double>()});
        if (j.contains("quality")) {
            const auto& q = j["quality"];
            w.quality.temporal_continuity = q.value("temporal_continuity", true);
            w.quality.amplitude_consistency = q.value("amplitude_consistency", true);
            w.quality.frequency_consistency = q.value("frequency_consistency", true);
            w.quality.rhythm_preserved = q.value("rhythm_preserved", true);
            w.quality.label_pure = q.value("label_pure", true);
            w.quality.source_unified = q.value("source_unified", true);
        }
        w.samples.resize(length);
        blob.seekg(static_cast<std::streamoff>(offset * sizeof(float)));
        blob.read(reinterpret_cast<char*>(w.samples.data()),
                  static_cast<std::streamsize>(length * sizeof(float)));
        PCGL_CHECK(blob.gcount() == static_cast<std::streamsize>(length * sizeof(float)),
                   w.window_id << ": truncated sample block");
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace pcgl::windows
