#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "stv/label.hpp"
#include "stv/phantom.hpp"

namespace stv {

/// Raised for manifest problems; the message names the file and row.
class ManifestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Offset {
    int dx = 0;
    int dy = 0;
    friend bool operator==(const Offset&, const Offset&) = default;
};

struct Pixel {
    std::size_t x = 0;
    std::size_t y = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
};

struct MaskOffsets {
    std::vector<Offset> offsets;  // row-major by (dy, dx)

    /// Discrete disk of radius 2: the 13 offsets with dx^2 + dy^2 <= 4.
    static MaskOffsets default_mask();
    std::size_t size() const noexcept { return offsets.size(); }
};

inline constexpr Pixel kPatchCenter{25, 25};

/// Absolute coordinates of the mask placed at `center`, in mask order.
/// Throws ContractError when the mask leaves the width x height grid.
std::vector<Pixel> masked_pixels(Pixel center, const MaskOffsets& mask, std::size_t width = 50,
                                 std::size_t height = 50);

struct PatchRecord {
    std::string patient_id;
    std::string vertebra_id;
    std::string patch_id;
    Label3 label = Label3::normal;
    std::filesystem::path image_path;  // absolute once loaded

    friend bool operator==(const PatchRecord&, const PatchRecord&) = default;
};

inline constexpr std::size_t kMaxPatchesPerVertebra = 6;

struct Manifest {
    std::vector<PatchRecord> records;

    /// Patient ids in order of first appearance.
    std::vector<std::string> patients() const;
    /// Pathological iff the patient has a PATH_HU patch.
    std::map<std::string, bool> patient_status() const;

    /// Checks key uniqueness, vertebra sizes and patient consistency.
    /// Does not touch the files.
    void validate() const;

    friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// Parses and validates a manifest CSV. Relative image paths resolve against
/// the manifest's directory. Every referenced raster is opened and must be 50x50.
Manifest load_manifest(const std::filesystem::path& path);

/// Parses manifest text without touching files; `base` resolves relative paths.
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base,
                        const std::string& source = "manifest");

/// Writes the CSV; image paths are written relative to `dir` when inside it.
std::string format_manifest(const Manifest& manifest, const std::filesystem::path& dir);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Manifest of a synthetic cohort whose rasters live under dir/patches.
Manifest cohort_manifest(const SyntheticCohort& cohort, const std::filesystem::path& dir);
/// Writes dir/manifest.csv and one raster per patch; returns the manifest.
Manifest write_cohort(const SyntheticCohort& cohort, const std::filesystem::path& dir);

struct TrainingRow {
    std::size_t record = 0;  // index into Manifest::records
    Label3 label = Label3::normal;
};

struct TrainingRows {
    std::vector<TrainingRow> rows;
    std::size_t unique = 0;
    std::size_t duplicated = 0;  // number of extra LU copies
};

/// Rows for training, optionally restricted to a subset of records. With
/// duplicate_lu every PATH_LU patch appears twice, directly after itself.
TrainingRows training_rows(const Manifest& manifest, bool duplicate_lu);
TrainingRows training_rows(const Manifest& manifest, bool duplicate_lu,
                           const std::function<bool(const PatchRecord&)>& include);

}  // namespace stv
