#include "pcgl/substrate/checkpoint.h"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace pcgl::substrate {

namespace {

constexpr char kMagic[8] = {'P', 'C', 'G', 'L', 'C', 'K', 'P', 'T'};

struct DirEntry {
    std::string name;
    std::string dtype;
    Shape shape;
    std::uint64_t offset;
    std::uint64_t nbytes;
};

template <typename T>
void append_entries(const std::map<std::string, Tensor<T>>& tensors, const char* dtype,
                    std::uint64_t& cursor, nlohmann::json& dir) {
    for (const auto& [name, t] : tensors) {
        const std::uint64_t nbytes = t.numel() * sizeof(T);
        dir.push_back({{"name", name},
                       {"dtype", dtype},
                       {"shape", t.shape},
                       {"offset", cursor},
                       {"nbytes", nbytes}});
        cursor += nbytes;
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    nlohmann::json dir = nlohmann::json::array();
    std::uint64_t cursor = 0;
    append_entries(ckpt.f32, "f32", cursor, dir);
    append_entries(ckpt.f64, "f64", cursor, dir);

    nlohmann::json header = {{"schema_version", kCheckpointSchemaVersion},
                             {"meta", ckpt.meta},
                             {"tensors", dir}};
    const std::string hs = header.dump();
    PCGL_CHECK(hs.size() < (1u << 30), "checkpoint header too large");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    PCGL_CHECK(out.good(), "cannot open " << path << " for writing");
    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
    char lenbuf[4];
    std::memcpy(lenbuf, &hlen, 4);
    out.write(lenbuf, 4);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : ckpt.f32)
        out.write(reinterpret_cast<const char*>(t.ptr()),
                  static_cast<std::streamsize>(t.numel() * sizeof(float)));
    for (const auto& [name, t] : ckpt.f64)
        out.write(reinterpret_cast<const char*>(t.ptr()),
                  static_cast<std::streamsize>(t.numel() * sizeof(double)));
    out.flush();
    PCGL_CHECK(out.good(), "write failed for " << path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    PCGL_CHECK(in.good(), "cannot open checkpoint " << path);
    char magic[8];
    in.read(magic, 8);
    PCGL_CHECK(in.gcount() == 8 && std::memcmp(magic, kMagic, 8) == 0,
               path << ": not a checkpoint file");
    char lenbuf[4];
    in.read(lenbuf, 4);
    PCGL_CHECK(in.gcount() == 4, path << ": truncated header length");
    std::uint32_t hlen;
    std::memcpy(&hlen, lenbuf, 4);
    std::string hs(hlen, '\0');
    in.read(hs.data(), hlen);
    PCGL_CHECK(in.gcount() == static_cast<std::streamsize>(hlen),
               path << ": truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::parse_error& e) {
        PCGL_CHECK(false, path << ": corrupt header: " << e.what());
    }
    const int version = header.at("schema_version").get<int>();
    PCGL_CHECK(version == kCheckpointSchemaVersion,
               path << ": schema version " << version << ", this build reads "
                    << kCheckpointSchemaVersion);

    Checkpoint ckpt;
    ckpt.meta = header.value("meta", nlohmann::json::object());
    const std::uint64_t payload_base = 8u + 4u + hlen;
    for (const auto& e : header.at("tensors")) {
        const std::string name = e.at("name").get<std::string>();
        const std::string dtype = e.at("dtype").get<std::string>();
        const Shape shape = e.at("shape").get<Shape>();
        const std::uint64_t offset = e.at("offset").get<std::uint64_t>();
        const std::uint64_t nbytes = e.at("nbytes").get<std::uint64_t>();
        in.seekg(static_cast<std::streamoff>(payload_base + offset));
        if (dtype == "f32") {
            Tensor<float> t(shape);
            PCGL_CHECK(nbytes == t.numel() * sizeof(float),
                       path << ": " << name << " payload size mismatch");
            in.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(nbytes));
            PCGL_CHECK(in.gcount() == static_cast<std::streamsize>(nbytes),
                       path << ": truncated tensor " << name);
            ckpt.f32.emplace(name, std::move(t));
        } else if (dtype == "f64") {
            Tensor<double> t(shape);
            PCGL_CHECK(nbytes == t.numel() * sizeof(double),
                       path << ": " << name << " payload size mismatch");
            in.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(nbytes));
            PCGL_CHECK(in.gcount() == static_cast<std::streamsize>(nbytes),
                       path << ": truncated tensor " << name);
            ckpt.f64.emplace(name, std::move(t));
        } else {
            PCGL_CHECK(false, path << ": unknown dtype " << dtype << " for " << name);
        }
    }
    return ckpt;
}

}  // namespace pcgl::substrate
