#include "stv/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stv/rng.hpp"

namespace stv {

namespace {

bool inside(const Disk& d, std::size_t x, std::size_t y) {
    const double dx = static_cast<double>(x) - d.cx;
    const double dy = static_cast<double>(y) - d.cy;
    return dx * dx + dy * dy <= d.radius * d.radius;
}

// Class parameters of the speckle layer.
struct SpeckleModel {
    AmplitudeRange amplitude;
    double focus_probability;  // chance of one extra spot near the patch center
};

SpeckleModel speckle_model(Label3 label) {
    switch (label) {
        case Label3::normal: return {{2.0, 4.0}, 0.0};
        case Label3::path_lu: return {{4.5, 7.0}, 0.35};
        case Label3::path_hu: return {{7.5, 11.0}, 0.5};
    }
    return {{0.0, 0.0}, 0.0};
}

constexpr int kSpotsLo = 8, kSpotsHi = 14;
constexpr double kFocusSd = 1.5;

constexpr double kNoiseSd = 4.0;

void add_spot(GrayImage& img, double cx, double cy, int radius, double amplitude) {
    const auto w = static_cast<int>(img.width()), h = static_cast<int>(img.height());
    const int x0 = static_cast<int>(std::lround(cx)), y0 = static_cast<int>(std::lround(cy));
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy > radius * radius) continue;
            const int x = x0 + dx, y = y0 + dy;
            if (x < 0 || y < 0 || x >= w || y >= h) continue;
            img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) += amplitude;
        }
}

void add_gaussian(GrayImage& img, double cx, double cy, double sigma, double amplitude) {
    for (std::size_t y = 0; y < img.height(); ++y)
        for (std::size_t x = 0; x < img.width(); ++x) {
            const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
            img.at(x, y) += amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
}

}  // namespace

void PhantomSpec::validate() const {
    if (width < 1 || height < 1) throw ContractError("phantom: empty grid");
    if (seed.has_value() != (kind == PhantomKind::noise_texture))
        throw ContractError("phantom: a seed is required for, and only for, noise textures");
    if (kind == PhantomKind::disk || kind == PhantomKind::two_disks) {
        const std::size_t expected = kind == PhantomKind::disk ? 1 : 2;
        if (disks.size() != expected)
            throw ContractError("phantom: expected " + std::to_string(expected) + " disk(s)");
        for (const Disk& d : disks) {
            if (!(d.radius >= 2.0)) throw ContractError("phantom: radius must be >= 2 px");
            if (!std::isfinite(d.contrast)) throw ContractError("phantom: contrast must be finite");
            const double margin = 4.0;
            if (d.cx - d.radius < margin || d.cy - d.radius < margin ||
                d.cx + d.radius > static_cast<double>(width) - 1.0 - margin ||
                d.cy + d.radius > static_cast<double>(height) - 1.0 - margin)
                throw ContractError("phantom: disk must stay 4 px away from the border");
        }
    }
    if (kind == PhantomKind::noise_texture && (width != kPatchSize || height != kPatchSize))
        throw ContractError("phantom: noise textures are 50x50 patches");
}

GrayImage disk_image(const PhantomSpec& spec) {
    if (spec.kind != PhantomKind::disk && spec.kind != PhantomKind::two_disks)
        throw ContractError("disk_image: spec is not a disk phantom");
    spec.validate();
    GrayImage img(spec.width, spec.height);
    for (std::size_t y = 0; y < spec.height; ++y)
        for (std::size_t x = 0; x < spec.width; ++x) {
            int hits = 0;
            for (const Disk& d : spec.disks)
                if (inside(d, x, y)) {
                    img.at(x, y) += d.contrast;
                    ++hits;
                }
            if (hits > 1) throw ContractError("disk_image: disks overlap");
        }
    return img;
}

GrayImage step_signal_1d(const std::vector<std::size_t>& breakpoints, const std::vector<double>& levels,
                         std::size_t length) {
    if (length < 1) throw ContractError("step_signal_1d: length must be >= 1");
    if (levels.size() != breakpoints.size() + 1)
        throw ContractError("step_signal_1d: need one more level than breakpoints");
    for (std::size_t j = 0; j < breakpoints.size(); ++j) {
        if (breakpoints[j] >= length) throw ContractError("step_signal_1d: breakpoint outside [0, length)");
        if (j > 0 && breakpoints[j] <= breakpoints[j - 1])
            throw ContractError("step_signal_1d: breakpoints must be strictly increasing");
    }
    for (double v : levels)
        if (!std::isfinite(v)) throw ContractError("step_signal_1d: levels must be finite");
    GrayImage row(length, 1);
    std::size_t segment = 0;
    for (std::size_t i = 0; i < length; ++i) {
        while (segment < breakpoints.size() && i >= breakpoints[segment]) ++segment;
        row[i] = levels[segment];
    }
    return row;
}

AmplitudeRange speckle_amplitude(Label3 label) { return speckle_model(label).amplitude; }

GrayImage texture_patch(Label3 label, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = kPatchSize;
    const double mid = static_cast<double>(n) / 2.0;
    GrayImage img(n, n);

    // Trabecular background with a gentle ramp.
    const double base = rng.uniform(180.0, 260.0);
    const double gx = rng.uniform(-0.4, 0.4), gy = rng.uniform(-0.4, 0.4);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x)
            img.at(x, y) = base + gx * (static_cast<double>(x) - mid) + gy * (static_cast<double>(y) - mid);

    // Broad blobs of either sign, shared by all classes.
    const auto blobs = rng.integer(2, 4);
    for (std::int64_t b = 0; b < blobs; ++b) {
        const double cx = rng.uniform(0.0, static_cast<double>(n)), cy = rng.uniform(0.0, static_cast<double>(n));
        const double sigma = rng.uniform(5.0, 10.0);
        const double amp = rng.uniform(4.0, 12.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        add_gaussian(img, cx, cy, sigma, amp);
    }

    // Class-dependent speckle.
    const SpeckleModel model = speckle_model(label);
    const auto scattered = rng.integer(kSpotsLo, kSpotsHi);
    for (std::int64_t s = 0; s < scattered; ++s) {
        const double cx = rng.uniform(2.0, static_cast<double>(n) - 3.0);
        const double cy = rng.uniform(2.0, static_cast<double>(n) - 3.0);
        const auto r = static_cast<int>(rng.integer(1, 2));
        add_spot(img, cx, cy, r, rng.uniform(model.amplitude.lo, model.amplitude.hi));
    }
    if (rng.uniform() < model.focus_probability) {
        const double cx = rng.normal(mid, kFocusSd), cy = rng.normal(mid, kFocusSd);
        const auto r = static_cast<int>(rng.integer(1, 2));
        add_spot(img, cx, cy, r, rng.uniform(model.amplitude.lo, model.amplitude.hi));
    }

    // Faint sclerotic halo around high-uptake centers.
    if (label == Label3::path_hu) add_gaussian(img, mid, mid, rng.uniform(10.0, 14.0), rng.uniform(2.0, 4.0));

    for (auto& v : img.values()) v += kNoiseSd * rng.normal();
    return img;
}

GrayImage render(const PhantomSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case PhantomKind::disk:
        case PhantomKind::two_disks: return disk_image(spec);
        case PhantomKind::step_1d: return step_signal_1d(spec.breakpoints, spec.levels, spec.width);
        case PhantomKind::noise_texture: return texture_patch(spec.label, *spec.seed);
    }
    throw ContractError("render: unknown phantom kind");
}

namespace {

std::string numbered(char prefix, std::size_t i, int width) {
    std::string digits = std::to_string(i);
    if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
    return std::string(1, prefix) + digits;
}

constexpr std::uint64_t kLabelStream = 0x4C4142454CULL;  // "LABEL"

}  // namespace

SyntheticCohort synth_cohort(std::size_t n_normal, std::size_t n_pathological, std::uint64_t seed) {
    if (n_normal < 1 || n_pathological < 1) throw ContractError("synth_cohort: counts must be >= 1");
    SyntheticCohort cohort;
    cohort.seed = seed;
    const std::size_t total = n_normal + n_pathological;
    for (std::size_t p = 0; p < total; ++p) {
        const bool sick = p >= n_normal;
        const std::size_t ordinal = sick ? p - n_normal + 1 : p + 1;
        CohortPatient patient{numbered(sick ? 'P' : 'N', ordinal, 3), sick};

        // Layout and labels come from a per-patient stream; pixels from per-patch seeds.
        Rng layout(mix_seed({seed, p, kLabelStream}));
        const auto vertebrae = layout.integer(2, 3);
        std::vector<CohortPatch> patches;
        for (std::int64_t v = 0; v < vertebrae; ++v) {
            const auto count = layout.integer(2, 3);
            for (std::int64_t j = 0; j < count; ++j) {
                CohortPatch patch;
                patch.patient_id = patient.id;
                patch.vertebra_id = numbered('V', static_cast<std::size_t>(v + 1), 1);
                patch.patch_id = numbered('p', static_cast<std::size_t>(j + 1), 1);
                patch.seed = mix_seed({seed, p, static_cast<std::uint64_t>(v), static_cast<std::uint64_t>(j)});
                patch.label = !sick ? Label3::normal : layout.uniform() < 2.0 / 3.0 ? Label3::path_hu : Label3::path_lu;
                patches.push_back(std::move(patch));
            }
        }
        if (sick && std::none_of(patches.begin(), patches.end(),
                                 [](const CohortPatch& c) { return c.label == Label3::path_hu; }))
            patches.front().label = Label3::path_hu;
        for (CohortPatch& patch : patches) {
            patch.image = texture_patch(patch.label, patch.seed);
            cohort.patches.push_back(std::move(patch));
        }
        cohort.patients.push_back(std::move(patient));
    }
    return cohort;
}

}  // namespace stv
