#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stv/image.hpp"
#include "stv/spectral.hpp"

namespace stv {

/// Raised for unreadable, truncated or corrupt files.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Kind byte of the STV1 raster container.
enum class ContainerKind : std::uint8_t { raster = 0, stack = 1, signature = 2 };

// STV1 container layout, all integers and floats little-endian:
//   "STV1" | kind u8 | width u32 | height u32 | [n u32 for kinds 1, 2]
//   payload f64[] | crc32(payload bytes) u32
// Payload: raster w*h values; stack n component planes, the residual plane,
// then dt and source_mean; signature n component planes, then p_enh and the
// enhanced flag (0 or 1). Planes are row-major.
std::vector<std::uint8_t> encode(const GrayImage& img);
std::vector<std::uint8_t> encode(const SpectralStack& stack);
std::vector<std::uint8_t> encode(const SignatureField& field);

ContainerKind peek_kind(const std::vector<std::uint8_t>& bytes);
GrayImage decode_raster(const std::vector<std::uint8_t>& bytes);
SpectralStack decode_stack(const std::vector<std::uint8_t>& bytes);
SignatureField decode_signature(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames, so readers never see a partial file.
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

GrayImage read_raster(const std::filesystem::path& path);
void write_raster(const std::filesystem::path& path, const GrayImage& img);

}  // namespace stv
