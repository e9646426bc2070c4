// checkpoint.h
// Single-file snapshot: 8-byte magic, little-endian u32 JSON header length,
// JSON header (schema version, metadata, tensor directory), raw payload.
// Round-trips bitwise; loaders reject unknown versions and shape mismatches.
#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcgl/substrate/layers.h"
#include "pcgl/substrate/tensor.h"

namespace pcgl::substrate {

inline constexpr int kCheckpointSchemaVersion = 1;

struct Checkpoint {
    nlohmann::json meta = nlohmann::json::object();
    std::map<std::string, Tensor<float>> f32;
    std::map<std::string, Tensor<double>> f64;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

template <typename T>
void pack_params(Checkpoint& ckpt, const std::vector<Parameter<T>*>& params) {
    for (const auto* p : params) {
        if constexpr (std::is_same_v<T, float>)
            ckpt.f32[p->name] = p->value;
        else
            ckpt.f64[p->name] = p->value;
    }
}

// Strict: every parameter must be present with a matching shape.
template <typename T>
void unpack_params(const Checkpoint& ckpt, std::vector<Parameter<T>*>& params) {
    for (auto* p : params) {
        if constexpr (std::is_same_v<T, float>) {
            auto it = ckpt.f32.find(p->name);
            PCGL_CHECK(it != ckpt.f32.end(), "checkpoint missing tensor " << p->name);
            PCGL_CHECK(it->second.shape == p->value.shape,
                       "checkpoint tensor " << p->name << ": shape "
                                            << shape_str(it->second.shape) << ", want "
                                            << shape_str(p->value.shape));
            p->value = it->second;
        } else {
            auto it = ckpt.f64.find(p->name);
            PCGL_CHECK(it != ckpt.f64.end(), "checkpoint missing tensor " << p->name);
            PCGL_CHECK(it->second.shape == p->value.shape,
                       "checkpoint tensor " << p->name << ": shape "
                                            << shape_str(it->second.shape) << ", want "
                                            << shape_str(p->value.shape));
            p->value = it->second;
        }
    }
}

}  // namespace pcgl::substrate
