#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ecanet/attention.hpp"
#include "ecanet/fusion.hpp"
#include "ecanet/label_map.hpp"
#include "ecanet/tensor.hpp"

namespace ecanet::io {

// Tensor file layout, all integers and floats little-endian:
//
//   char[4]  magic "ECAT"
//   u32      version (1)
//   u32      tensor count
//   per tensor: u32 rank, then rank x u64 extents
//   per tensor, in header order: row-major f64 payload
//
// Used for attention weights, logit volumes and float rasters.
inline constexpr char kTensorMagic[4] = {'E', 'C', 'A', 'T'};
inline constexpr std::uint32_t kTensorVersion = 1;

std::vector<std::uint8_t> encode_tensors(std::span<const Tensor> tensors);
std::vector<Tensor> decode_tensors(std::span<const std::uint8_t> bytes);

void write_tensors(const std::filesystem::path& path, std::span<const Tensor> tensors);
std::vector<Tensor> read_tensors(const std::filesystem::path& path);

/// Flattened order: hsa.wq, hsa.wk, hsa.wv, then wq, wk, wv per PSA scale.
void write_weights(const std::filesystem::path& path, const EcaWeights& w);
EcaWeights read_weights(const std::filesystem::path& path);

/// Sidecar path for a raster or volume: "<path>.json".
std::filesystem::path sidecar_path(const std::filesystem::path& path);

/// 8-bit indexed raster as binary PGM (P5, maxval 255) plus a JSON sidecar
/// holding the palette of canonical class names.
void write_label_raster(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_label_raster(const std::filesystem::path& path);

/// Binary PGM of 0/1 values with no sidecar.
void write_mask_raster(const std::filesystem::path& path, std::size_t height, std::size_t width,
                       std::span<const std::uint8_t> mask);

struct LogitInput {
  LogitVolume volume;
  SemanticSpace space;
};

/// Tensor file with one (Cj,H,W) tensor plus sidecar {"space_id", "classes"}.
void write_logit_volume(const std::filesystem::path& path, const LogitVolume& volume, const SemanticSpace& space);
LogitInput read_logit_volume(const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ecanet::io
