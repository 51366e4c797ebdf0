#include "stv/features.hpp"

#include <algorithm>

#include "binary.hpp"
#include "stv/io.hpp"
#include "stv/parallel.hpp"
#include "stv/phantom.hpp"
#include "stv/spectral.hpp"

namespace stv {

std::size_t FeatureSet::unconverged_steps() const {
    std::size_t total = 0;
    for (const auto& p : patches) total += p.unconverged_steps;
    return total;
}

namespace {

std::uint32_t raster_crc(const GrayImage& img) {
    const auto bytes = encode(img);
    return detail::crc32(bytes.data(), bytes.size());
}

}  // namespace

PatchFeatures patch_features(const GrayImage& patch, const FlowConfig& flow) {
    const ScaleSpace space = tv_flow(patch, flow);
    const SpectralStack stack = stv_transform(space);
    const auto pixels =
        masked_pixels({patch.width() / 2, patch.height() / 2}, MaskOffsets::default_mask(), patch.width(), patch.height());
    const std::size_t n = stack.size();

    PatchFeatures out;
    out.signatures.reserve(pixels.size() * n);
    for (const Pixel& p : pixels)
        for (std::size_t k = 0; k < n; ++k) out.signatures.push_back(stack.components[k].at(p.x, p.y));
    out.spectrum.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k)
        for (const Pixel& p : pixels) out.spectrum[k] += patch.at(p.x, p.y) * stack.components[k].at(p.x, p.y);
    out.source_crc = raster_crc(patch);
    out.unconverged_steps = space.unconverged_steps;
    return out;
}

PatchLoader file_loader(const Manifest& manifest) {
    return [&manifest](std::size_t i) { return read_raster(manifest.records.at(i).image_path); };
}

namespace {

constexpr char kFeatureMagic[4] = {'S', 'T', 'V', 'F'};
constexpr std::uint32_t kFeatureVersion = 1;

bool same_flow(const FlowConfig& a, const FlowConfig& b) {
    return a.dt == b.dt && a.n_components == b.n_components && a.inner_tol == b.inner_tol &&
           a.inner_max_iter == b.inner_max_iter && a.boundary == b.boundary;
}

}  // namespace

FeatureSet compute_features(const Manifest& manifest, const PatchLoader& load, const FlowConfig& flow,
                            std::size_t threads, const std::filesystem::path& cache) {
    flow.validate();
    FeatureSet cached;
    if (!cache.empty() && std::filesystem::exists(cache)) {
        try {
            cached = decode_features(read_file(cache));
        } catch (const FormatError&) {
            cached = {};  // unreadable cache: recompute everything
        }
        if (!same_flow(cached.flow, flow)) cached.patches.clear();
    }

    FeatureSet out;
    out.flow = flow;
    out.patches.resize(manifest.records.size());
    parallel_for(manifest.records.size(), threads, [&](std::size_t i) {
        const GrayImage img = load(i);
        if (img.width() != kPatchSize || img.height() != kPatchSize)
            throw ContractError("patch " + std::to_string(i + 1) + " is not 50x50");
        if (i < cached.patches.size() && cached.patches[i].source_crc == raster_crc(img)) {
            out.patches[i] = cached.patches[i];
            return;
        }
        out.patches[i] = patch_features(img, flow);
    });
    if (!cache.empty()) write_file(cache, encode(out));
    return out;
}

std::vector<std::uint8_t> encode(const FeatureSet& features) {
    detail::Writer wr;
    wr.bytes(kFeatureMagic, 4);
    wr.u32(kFeatureVersion);
    wr.f64(features.flow.dt);
    wr.u32(static_cast<std::uint32_t>(features.flow.n_components));
    wr.f64(features.flow.inner_tol);
    wr.u32(static_cast<std::uint32_t>(features.flow.inner_max_iter));
    wr.u8(features.flow.boundary == Boundary::periodic ? 1 : 0);
    wr.u32(static_cast<std::uint32_t>(features.patches.size()));
    for (const auto& p : features.patches) {
        wr.u32(p.source_crc);
        wr.u32(static_cast<std::uint32_t>(p.unconverged_steps));
        wr.u32(static_cast<std::uint32_t>(p.signatures.size()));
        for (double v : p.signatures) wr.f64(v);
        wr.u32(static_cast<std::uint32_t>(p.spectrum.size()));
        for (double v : p.spectrum) wr.f64(v);
    }
    auto& bytes = wr.data();
    wr.u32(detail::crc32(bytes.data(), bytes.size()));
    return std::move(bytes);
}

FeatureSet decode_features(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 12 || !std::equal(kFeatureMagic, kFeatureMagic + 4, bytes.begin()))
        throw FormatError("not a feature cache (bad magic)");
    const std::size_t body = bytes.size() - 4;
    if (detail::crc32(bytes.data(), body) != detail::load_u32(bytes.data() + body))
        throw FormatError("feature cache CRC mismatch");
    detail::Reader rd(bytes, body);
    for (int i = 0; i < 4; ++i) rd.u8();
    if (rd.u32() != kFeatureVersion) throw FormatError("unsupported feature cache version");
    FeatureSet fs;
    fs.flow.dt = rd.f64();
    fs.flow.n_components = rd.u32();
    fs.flow.inner_tol = rd.f64();
    fs.flow.inner_max_iter = rd.u32();
    fs.flow.boundary = rd.u8() ? Boundary::periodic : Boundary::neumann;
    const std::uint32_t count = rd.u32();
    auto read_vec = [&rd](std::vector<double>& v) {
        const std::uint32_t n = rd.u32();
        if (n > rd.remaining() / 8) throw FormatError("feature cache truncated");
        v.resize(n);
        for (double& x : v) x = rd.f64();
    };
    for (std::uint32_t i = 0; i < count; ++i) {
        PatchFeatures p;
        p.source_crc = rd.u32();
        p.unconverged_steps = rd.u32();
        read_vec(p.signatures);
        read_vec(p.spectrum);
        fs.patches.push_back(std::move(p));
    }
    if (rd.remaining() != 0) throw FormatError("feature cache: trailing bytes");
    return fs;
}

}  // namespace stv
