#pragma once

#include <map>
#include <string>

#include "lddm/backbone.hpp"

namespace lddm {

using TensorMapF32 = std::map<std::string, ad::Mat<float>>;

// Checkpoint archive: a text manifest (name, shape, element type, byte
// offset into the payload) terminated by "end", followed by raw
// little-endian float32 payloads. EMA tensors live in the same archive
// under the "ema." name prefix.
void save_tensors(const std::string& path, const TensorMapF32& tensors);
TensorMapF32 load_tensors(const std::string& path);

// Prefix helpers for packing several parameter stores into one archive.
template <class S>
void pack_store(TensorMapF32& out, const std::string& prefix, const ParameterStore<S>& ps);
template <class S>
ParameterStore<S> unpack_store(const TensorMapF32& archive, const std::string& prefix);

// FNV-1a content hash of a file (manifest provenance).
std::uint64_t file_content_hash(const std::string& path);

}  // namespace lddm
