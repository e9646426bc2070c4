// manifest.h
// JSONL manifest parsing and writing, one recording entry per line.
#pragma once

#include <string>

#include "pcgl/corpus/types.h"

namespace pcgl::corpus {

// Errors carry the offending line number; duplicate recording_id and
// reversed murmur intervals are rejected at load time.
Manifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const Manifest& m);

// Reads the WAV behind an entry, converts to 4000 Hz.
Recording read_recording(const RecordingMeta& meta);

}  // namespace pcgl::corpus
