#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "latvsr/tensor.hpp"

namespace latvsr::io {

using json = nlohmann::json;

// Raw little-endian tensor container (.ten). All video/latent payloads use
// this; no codec dependencies anywhere.
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

// Self-describing checkpoint: JSON header (kind, metadata, tensor table)
// followed by the raw tensor payload. Tensors are stored in name order so
// save -> load -> save is byte-identical.
struct Checkpoint {
    std::string kind;          // "denoiser", "vae", "train_state"
    json meta = json::object();
    std::map<std::string, Tensor> tensors;
};

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Atomic write: temp file in the same directory, then rename.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

std::string read_file(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

// FNV-1a 64-bit; used for config/content hashes in manifests and
// reproducibility checks.
uint64_t fnv1a64(const void* data, size_t len);
uint64_t hash_string(const std::string& s);
uint64_t hash_file(const std::filesystem::path& path);
std::string hash_hex(uint64_t h);

// Lossless 8-bit image dumps for visual inspection.
void save_pgm(const std::filesystem::path& path, const Tensor& img);        // (H,W) in [0,1]
void save_ppm_frame(const std::filesystem::path& path, const Tensor& clip, int64_t frame);

}  // namespace latvsr::io
