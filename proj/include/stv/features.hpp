#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "stv/dataset.hpp"
#include "stv/image.hpp"
#include "stv/tvflow.hpp"

namespace stv {

/// What the classifier and the spectrum harness need from one patch.
struct PatchFeatures {
    std::vector<double> signatures;  // raw signatures of the 13 mask pixels, back to back
    std::vector<double> spectrum;    // sum over the mask of f * phi_k, one value per k
    std::uint32_t source_crc = 0;    // CRC32 of the patch raster, for cache checks
    std::size_t unconverged_steps = 0;

    std::span<const double> pixel(std::size_t i, std::size_t n) const { return {signatures.data() + i * n, n}; }
    friend bool operator==(const PatchFeatures&, const PatchFeatures&) = default;
};

/// Features of every manifest record, in record order.
struct FeatureSet {
    FlowConfig flow;
    std::vector<PatchFeatures> patches;

    std::size_t n_components() const noexcept { return flow.n_components; }
    std::size_t unconverged_steps() const;
};

/// Decomposes one patch and samples it on the default mask at the patch center.
PatchFeatures patch_features(const GrayImage& patch, const FlowConfig& flow);

using PatchLoader = std::function<GrayImage(std::size_t record)>;

/// Loader reading each record's raster from disk.
PatchLoader file_loader(const Manifest& manifest);

/// Computes features for all records on up to `threads` workers. With a cache
/// file, entries whose flow settings and raster CRC match are reused and the
/// cache is rewritten afterwards.
FeatureSet compute_features(const Manifest& manifest, const PatchLoader& load, const FlowConfig& flow,
                            std::size_t threads = 1, const std::filesystem::path& cache = {});

std::vector<std::uint8_t> encode(const FeatureSet& features);
FeatureSet decode_features(const std::vector<std::uint8_t>& bytes);

}  // namespace stv
