#include "stv/config.hpp"

#include <charconv>
#include <sstream>

#include "stv/io.hpp"

namespace stv {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError(key + ": '" + v + "' is not a number");
    return out;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError(key + ": '" + v + "' is not a non-negative integer");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ConfigError(key + ": '" + v + "' is not a boolean");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (key == "dt") flow.dt = to_double(key, v);
    else if (key == "n_components") {
        flow.n_components = to_unsigned(key, v);
        bands.n_components = flow.n_components;
    } else if (key == "inner_tol") flow.inner_tol = to_double(key, v);
    else if (key == "inner_max_iter") flow.inner_max_iter = to_unsigned(key, v);
    else if (key == "boundary") {
        if (v == "neumann") flow.boundary = Boundary::neumann;
        else if (v == "periodic") flow.boundary = Boundary::periodic;
        else throw ConfigError(key + ": expected neumann or periodic, got '" + v + "'");
    } else if (key == "scales_per_band") bands.scales_per_band = to_unsigned(key, v);
    else if (key == "overlapping") bands.overlapping = to_bool(key, v);
    else if (key == "mode") {
        if (v == "tree") mode = LearnerMode::tree;
        else if (v == "forest") mode = LearnerMode::forest;
        else throw ConfigError(key + ": expected tree or forest, got '" + v + "'");
    } else if (key == "cutoff") cutoff = to_double(key, v);
    else if (key == "seed") seed = to_unsigned(key, v);
    else if (key == "p_enh") p_enh = to_double(key, v);
    else if (key == "folds") folds = to_unsigned(key, v);
    else if (key == "duplicate_lu") duplicate_lu = to_bool(key, v);
    else if (key == "min_split") min_split = to_unsigned(key, v);
    else if (key == "forest_trees") forest_trees = to_unsigned(key, v);
    else if (key == "forest_max_features") forest_max_features = to_unsigned(key, v);
    else if (key == "manifest") manifest = v;
    else if (key == "output") output = v;
    else if (key == "model") model = v;
    else if (key == "cache") cache = v;
    else throw ConfigError("unknown key '" + key + "'");
}

void RunConfig::validate() const {
    try {
        flow.validate();
        if (bands.n_components != flow.n_components)
            throw ContractError("band n_components differs from the flow's component count");
        bands.validate();
    } catch (const ContractError& e) {
        throw ConfigError(e.what());
    }
    if (!(cutoff >= 0.0 && cutoff <= 1.0)) throw ConfigError("cutoff must lie in [0, 1]");
    if (!(p_enh >= 0.0)) throw ConfigError("p_enh must be >= 0");
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (forest_trees < 1) throw ConfigError("forest_trees must be >= 1");
    if (forest_max_features > bands.scales_per_band)
        throw ConfigError("forest_max_features exceeds scales_per_band");
}

CvConfig RunConfig::cv(std::size_t threads) const {
    CvConfig c;
    c.ensemble.bands = bands;
    c.ensemble.mode = mode;
    c.ensemble.tree.min_split = min_split;
    c.ensemble.forest.trees = forest_trees;
    c.ensemble.forest.max_features = forest_max_features;
    c.ensemble.cutoff = cutoff;
    c.p_enh = p_enh;
    c.folds = folds;
    c.duplicate_lu = duplicate_lu;
    c.threads = threads;
    return c;
}

RunConfig parse_config(const std::string& text, const std::string& source) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    for (std::size_t row = 1; std::getline(in, line); ++row) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(source + ": line " + std::to_string(row) + ": expected key=value");
        try {
            cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(source + ": line " + std::to_string(row) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    try {
        const auto bytes = read_file(path);
        return parse_config(std::string(bytes.begin(), bytes.end()), path.string());
    } catch (const FormatError& e) {
        throw ConfigError(e.what());
    }
}

std::string format_config(const RunConfig& c) {
    std::ostringstream out;
    out << "dt=" << format_number(c.flow.dt) << "\n"
        << "n_components=" << c.flow.n_components << "\n"
        << "inner_tol=" << format_number(c.flow.inner_tol) << "\n"
        << "inner_max_iter=" << c.flow.inner_max_iter << "\n"
        << "boundary=" << (c.flow.boundary == Boundary::neumann ? "neumann" : "periodic") << "\n"
        << "scales_per_band=" << c.bands.scales_per_band << "\n"
        << "overlapping=" << (c.bands.overlapping ? "true" : "false") << "\n"
        << "mode=" << (c.mode == LearnerMode::tree ? "tree" : "forest") << "\n"
        << "cutoff=" << format_number(c.cutoff) << "\n"
        << "seed=" << c.seed << "\n"
        << "p_enh=" << format_number(c.p_enh) << "\n"
        << "folds=" << c.folds << "\n"
        << "duplicate_lu=" << (c.duplicate_lu ? "true" : "false") << "\n"
        << "min_split=" << c.min_split << "\n"
        << "forest_trees=" << c.forest_trees << "\n"
        << "forest_max_features=" << c.forest_max_features << "\n"
        << "manifest=" << c.manifest.generic_string() << "\n"
        << "output=" << c.output.generic_string() << "\n"
        << "model=" << c.model.generic_string() << "\n"
        << "cache=" << c.cache.generic_string() << "\n";
    return out.str();
}

}  // namespace stv
