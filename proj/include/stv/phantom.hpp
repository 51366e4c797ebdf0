#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stv/image.hpp"
#include "stv/label.hpp"

namespace stv {

enum class PhantomKind { disk, two_disks, step_1d, noise_texture };

struct Disk {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;
    double contrast = 1.0;
};

struct PhantomSpec {
    PhantomKind kind = PhantomKind::disk;
    std::size_t width = 64;
    std::size_t height = 64;
    std::vector<Disk> disks;             // disk: 1, two_disks: 2
    std::vector<std::size_t> breakpoints;  // step_1d
    std::vector<double> levels;          // step_1d
    std::optional<std::uint64_t> seed;   // noise_texture only
    Label3 label = Label3::normal;       // noise_texture only

    /// Throws ContractError on invalid geometry.
    void validate() const;
};

/// Sum of disk indicators: contrast where (x - cx)^2 + (y - cy)^2 <= r^2.
GrayImage disk_image(const PhantomSpec& spec);

/// Piecewise-constant row: levels[j] on [breakpoints[j-1], breakpoints[j]).
GrayImage step_signal_1d(const std::vector<std::size_t>& breakpoints, const std::vector<double>& levels,
                         std::size_t length);

inline constexpr std::size_t kPatchSize = 50;

/// Amplitude range of the class-dependent speckle spots.
struct AmplitudeRange {
    double lo, hi;
};
AmplitudeRange speckle_amplitude(Label3 label);

/// 50x50 CT-like patch in HU-like units: trabecular background with a gentle
/// ramp and broad blobs, white noise, and bright spots of radius 1-3 px whose
/// amplitude and density grow from NORMAL to PATH_LU to PATH_HU.
GrayImage texture_patch(Label3 label, std::uint64_t seed);

/// Dispatch on spec.kind.
GrayImage render(const PhantomSpec& spec);

struct CohortPatch {
    std::string patient_id;
    std::string vertebra_id;
    std::string patch_id;
    Label3 label = Label3::normal;
    std::uint64_t seed = 0;
    GrayImage image;
};

struct CohortPatient {
    std::string id;
    bool pathological = false;
};

struct SyntheticCohort {
    std::uint64_t seed = 0;
    std::vector<CohortPatient> patients;
    std::vector<CohortPatch> patches;  // grouped by patient, then vertebra
};

/// n_normal healthy and n_pathological pathological patients with 2-3
/// vertebrae of 2-3 patches each. Pathological patches are HU or LU at about
/// 2:1, with at least one HU per patient. Patch seeds are
/// mix_seed({seed, patient, vertebra, patch}).
SyntheticCohort synth_cohort(std::size_t n_normal, std::size_t n_pathological, std::uint64_t seed);

}  // namespace stv
