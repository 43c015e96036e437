#pragma once

// Binary checkpoint container:
//   bytes 0-3   magic "GVTC"
//   bytes 4-7   format version, unsigned 32-bit little-endian (currently 1)
//   bytes 8-15  metadata length M, unsigned 64-bit little-endian
//   M bytes     UTF-8 JSON metadata: model kind, full config, and a tensor
//               manifest of {name, dtype, shape, offset, bytes}
//   rest        payload: raw little-endian IEEE-754 float32 blobs, offsets
//               relative to the payload start, in manifest order
// Loading validates magic, version, manifest bounds and overlap; a saved
// model reloads bit-exactly.

#include "gvt/armodel.hpp"
#include "gvt/tensor.hpp"
#include "gvt/vqvae.hpp"

#include <string>
#include <vector>

namespace gvt {

struct TensorBlob {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

struct Checkpoint {
    std::string kind; // "vqvae" or "ar"
    std::string config_json;
    std::vector<TensorBlob> tensors;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck); // atomic (tmp + rename)
Checkpoint load_checkpoint(const std::string& path);

// model <-> checkpoint bridges (persistence is float32)
Checkpoint to_checkpoint(const VqVaeParams<float>& p);
Checkpoint to_checkpoint(const ArParams<float>& p);
VqVaeParams<float> vqvae_from_checkpoint(const Checkpoint& ck);
ArParams<float> ar_from_checkpoint(const Checkpoint& ck);

// config (de)serialization shared with the checkpoint bridges
std::string vqvae_config_to_json(const VqVaeConfig& cfg);
VqVaeConfig vqvae_config_from_json(const std::string& json_text);
std::string ar_config_to_json(const ArConfig& cfg);
ArConfig ar_config_from_json(const std::string& json_text);

} // namespace gvt
