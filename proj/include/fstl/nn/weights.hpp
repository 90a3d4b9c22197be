#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fstl/nn/network.hpp"

namespace fstl {

// Weight file layout, all integers little-endian uint32, floats little-endian
// IEEE-754 binary32:
//
//   "FSTLW1"
//   layer_count
//   per layer: kind, input rank, input dims..., output rank, output dims...,
//              parameter tensor count, per tensor: rank, dims...
//   parameter data: every parameter tensor in layer order, weight before bias

inline constexpr char kWeightsMagic[] = "FSTLW1";

std::vector<std::uint8_t> save_weights(const Network& net);

/// Rebuilds a network for `spec` and fills it from `bytes`. Throws
/// FormatError on a bad magic, unsupported version, truncation or trailing
/// bytes, and ShapeError naming the layer index when the file was written for
/// a different architecture.
Network load_weights(std::span<const std::uint8_t> bytes, const NetworkSpec& spec,
                     Backend backend = Backend::parallel);

void write_weights_file(const std::filesystem::path& path, const Network& net);
Network read_weights_file(const std::filesystem::path& path, const NetworkSpec& spec,
                          Backend backend = Backend::parallel);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace fstl
