#include "stv/dataset.hpp"

#include <set>
#include <sstream>
#include <tuple>

#include "stv/image.hpp"
#include "stv/io.hpp"
#include "stv/phantom.hpp"

namespace stv {

MaskOffsets MaskOffsets::default_mask() {
    MaskOffsets mask;
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx)
            if (dx * dx + dy * dy <= 4) mask.offsets.push_back({dx, dy});
    return mask;
}

std::vector<Pixel> masked_pixels(Pixel center, const MaskOffsets& mask, std::size_t width, std::size_t height) {
    std::vector<Pixel> out;
    out.reserve(mask.size());
    for (const Offset& o : mask.offsets) {
        const auto x = static_cast<long long>(center.x) + o.dx;
        const auto y = static_cast<long long>(center.y) + o.dy;
        if (x < 0 || y < 0 || x >= static_cast<long long>(width) || y >= static_cast<long long>(height))
            throw ContractError("masked_pixels: mask at (" + std::to_string(center.x) + "," +
                                std::to_string(center.y) + ") leaves the " + std::to_string(width) + "x" +
                                std::to_string(height) + " grid");
        out.push_back({static_cast<std::size_t>(x), static_cast<std::size_t>(y)});
    }
    return out;
}

std::vector<std::string> Manifest::patients() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& r : records)
        if (seen.insert(r.patient_id).second) out.push_back(r.patient_id);
    return out;
}

std::map<std::string, bool> Manifest::patient_status() const {
    std::map<std::string, bool> status;
    for (const auto& r : records) status[r.patient_id] |= r.label == Label3::path_hu;
    return status;
}

void Manifest::validate() const {
    std::set<std::tuple<std::string, std::string, std::string>> keys;
    std::map<std::pair<std::string, std::string>, std::size_t> per_vertebra;
    std::map<std::string, std::set<Label3>> labels;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!keys.emplace(r.patient_id, r.vertebra_id, r.patch_id).second)
            throw ManifestError("duplicate key (" + r.patient_id + ", " + r.vertebra_id + ", " + r.patch_id +
                                ") at record " + std::to_string(i + 1));
        if (++per_vertebra[{r.patient_id, r.vertebra_id}] > kMaxPatchesPerVertebra)
            throw ManifestError("vertebra " + r.patient_id + "/" + r.vertebra_id + " has more than " +
                                std::to_string(kMaxPatchesPerVertebra) + " patches");
        labels[r.patient_id].insert(r.label);
    }
    // Every patch of a normal study is NORMAL; a pathological study carries at
    // least one high-uptake patch and no NORMAL patches.
    for (const auto& [patient, set] : labels) {
        const bool has_normal = set.contains(Label3::normal);
        const bool has_hu = set.contains(Label3::path_hu);
        if (has_normal && set.size() > 1)
            throw ManifestError("patient " + patient + " mixes NORMAL and pathological patches");
        if (!has_normal && !has_hu)
            throw ManifestError("patient " + patient + " has PATH_LU patches but no PATH_HU patch");
    }
}

namespace {

constexpr const char* kHeader = "patient_id,vertebra_id,patch_id,label,path";

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ManifestError(source + ": missing header");
    // UTF-8 byte order mark
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line) != kHeader)
        throw ManifestError(source + ": row 1: expected header '" + std::string(kHeader) + "'");
    std::size_t row = 1;
    Manifest m;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto fields = split_csv(trim(line));
        const std::string where = source + ": row " + std::to_string(row) + ": ";
        if (fields.size() != 5)
            throw ManifestError(where + "expected 5 fields, found " + std::to_string(fields.size()));
        PatchRecord r;
        r.patient_id = trim(fields[0]);
        r.vertebra_id = trim(fields[1]);
        r.patch_id = trim(fields[2]);
        if (r.patient_id.empty() || r.vertebra_id.empty() || r.patch_id.empty())
            throw ManifestError(where + "empty identifier");
        const auto label = parse_label(trim(fields[3]));
        if (!label) throw ManifestError(where + "unknown label '" + trim(fields[3]) + "'");
        r.label = *label;
        const std::filesystem::path p = trim(fields[4]);
        if (p.empty()) throw ManifestError(where + "empty path");
        r.image_path = p.is_absolute() ? p : (base / p).lexically_normal();
        m.records.push_back(std::move(r));
    }
    m.validate();
    return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ManifestError("manifest not found: " + path.string());
    const auto bytes = read_file(path);
    Manifest m = parse_manifest(std::string(bytes.begin(), bytes.end()), path.parent_path(), path.string());
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        const auto& r = m.records[i];
        const std::string where = path.string() + ": row " + std::to_string(i + 2) + ": ";
        if (!std::filesystem::exists(r.image_path))
            throw ManifestError(where + "missing file " + r.image_path.string());
        GrayImage img;
        try {
            img = read_raster(r.image_path);
        } catch (const FormatError& e) {
            throw ManifestError(where + e.what());
        }
        if (img.width() != kPatchSize || img.height() != kPatchSize)
            throw ManifestError(where + "patch is " + std::to_string(img.width()) + "x" +
                                std::to_string(img.height()) + ", expected 50x50");
    }
    return m;
}

std::string format_manifest(const Manifest& manifest, const std::filesystem::path& dir) {
    std::string out = std::string(kHeader) + "\n";
    for (const auto& r : manifest.records) {
        std::filesystem::path p = r.image_path;
        if (!dir.empty()) {
            const auto rel = p.lexically_relative(dir);
            if (!rel.empty() && *rel.begin() != "..") p = rel;
        }
        out += r.patient_id + "," + r.vertebra_id + "," + r.patch_id + "," + std::string(to_string(r.label)) + "," +
               p.generic_string() + "\n";
    }
    return out;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    write_text(path, format_manifest(manifest, path.parent_path()));
}

Manifest cohort_manifest(const SyntheticCohort& cohort, const std::filesystem::path& dir) {
    Manifest m;
    for (const auto& p : cohort.patches)
        m.records.push_back({p.patient_id, p.vertebra_id, p.patch_id, p.label,
                             dir / "patches" / (p.patient_id + "_" + p.vertebra_id + "_" + p.patch_id + ".stv")});
    return m;
}

Manifest write_cohort(const SyntheticCohort& cohort, const std::filesystem::path& dir) {
    const Manifest m = cohort_manifest(cohort, dir);
    m.validate();
    std::filesystem::create_directories(dir / "patches");
    for (std::size_t i = 0; i < m.records.size(); ++i) write_raster(m.records[i].image_path, cohort.patches[i].image);
    save_manifest(m, dir / "manifest.csv");
    return m;
}

TrainingRows training_rows(const Manifest& manifest, bool duplicate_lu) {
    return training_rows(manifest, duplicate_lu, [](const PatchRecord&) { return true; });
}

TrainingRows training_rows(const Manifest& manifest, bool duplicate_lu,
                           const std::function<bool(const PatchRecord&)>& include) {
    TrainingRows out;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        if (!include(r)) continue;
        out.rows.push_back({i, r.label});
        ++out.unique;
        if (duplicate_lu && r.label == Label3::path_lu) {
            out.rows.push_back({i, r.label});
            ++out.duplicated;
        }
    }
    return out;
}

}  // namespace stv
