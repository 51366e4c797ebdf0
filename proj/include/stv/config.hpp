#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "stv/ensemble.hpp"
#include "stv/eval.hpp"
#include "stv/tvflow.hpp"

namespace stv {

/// Raised for unknown keys and malformed values; the message names the line.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything that determines a run's outputs. The worker count is not part
/// of it, since outputs never depend on it.
struct RunConfig {
    FlowConfig flow;
    BandConfig bands;
    LearnerMode mode = LearnerMode::tree;
    double cutoff = kDefaultCutoff;
    std::uint64_t seed = 0;
    double p_enh = 1.0;
    std::size_t folds = 10;
    bool duplicate_lu = true;
    std::size_t min_split = 10;
    std::size_t forest_trees = 50;
    std::size_t forest_max_features = 0;  // 0 = ceil(sqrt(s))
    std::filesystem::path manifest;
    std::filesystem::path output;
    std::filesystem::path model;
    std::filesystem::path cache;

    /// Applies one key=value setting. Throws ConfigError for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    /// Checks cross-field invariants (flow settings, band divisibility, cutoff range).
    void validate() const;

    CvConfig cv(std::size_t threads) const;
};

/// Parses key=value lines; '#' starts a comment, blank lines are ignored.
RunConfig parse_config(const std::string& text, const std::string& source = "config");
RunConfig load_config(const std::filesystem::path& path);

/// Flat key=value text, keys in a fixed order; parse_config reads it back.
std::string format_config(const RunConfig& config);

}  // namespace stv
