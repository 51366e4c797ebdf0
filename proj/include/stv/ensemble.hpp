#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stv/label.hpp"

namespace stv {

struct BandConfig {
    std::size_t n_components = 120;
    std::size_t scales_per_band = 5;
    bool overlapping = false;  // sliding windows of stride 1

    /// Throws ContractError unless s >= 1, s <= n and, without overlap, s | n.
    void validate() const;
    std::size_t band_count() const;
    /// First component (0-based) of band j.
    std::size_t band_begin(std::size_t j) const { return overlapping ? j : j * scales_per_band; }

    friend bool operator==(const BandConfig&, const BandConfig&) = default;
};

/// Band feature vectors in ascending scale order.
std::vector<std::vector<double>> band_split(std::span<const double> signature, const BandConfig& config);

/// Preorder node list. The left child of an internal node i is i + 1.
struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // x[feature] <= threshold goes left
    std::uint32_t right = 0;
    std::array<std::uint32_t, kLabelCount> counts{};  // training class counts

    bool leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
    std::size_t n_features = 0;
    std::vector<TreeNode> nodes;

    Label3 predict(std::span<const double> x) const;
    std::size_t depth() const;
    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

/// Row-major feature matrix with one label per row.
struct Dataset {
    std::size_t n_features = 0;
    std::vector<double> values;
    std::vector<Label3> labels;

    std::size_t rows() const noexcept { return labels.size(); }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * n_features, n_features}; }
    void push(std::span<const double> x, Label3 y);
};

struct TreeParams {
    std::size_t min_split = 10;     // nodes smaller than this become leaves
    std::size_t max_features = 0;   // features drawn per split; 0 = all
};

inline double gini(const std::array<std::uint32_t, kLabelCount>& counts) {
    double n = 0.0, sq = 0.0;
    for (auto c : counts) n += c;
    if (n == 0.0) return 0.0;
    for (auto c : counts) sq += (c / n) * (c / n);
    return 1.0 - sq;
}

/// Majority class of a count vector; ties go to the lowest label.
Label3 majority(const std::array<std::uint32_t, kLabelCount>& counts);

/// CART with Gini impurity on thresholds midway between sorted distinct
/// values. Ties between equally good splits take the lowest feature index,
/// then the lowest threshold. Throws ContractError on empty input.
DecisionTree fit_tree(const Dataset& data, const TreeParams& params = {});

/// Same, on a multiset of row indices (bootstrap). With max_features set,
/// `seed` drives the per-split feature draws.
DecisionTree fit_tree(const Dataset& data, std::span<const std::size_t> rows, const TreeParams& params,
                      std::uint64_t seed = 0);

enum class LearnerMode : std::uint8_t { tree = 0, forest = 1 };

struct ForestParams {
    std::size_t trees = 50;
    std::size_t max_features = 0;  // 0 = ceil(sqrt(s))
    Label3 tie_label = Label3::normal;
    friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

struct Learner {
    std::vector<DecisionTree> trees;   // one in tree mode
    std::vector<std::uint64_t> seeds;  // per-tree seeds in forest mode
    friend bool operator==(const Learner&, const Learner&) = default;
};

inline constexpr double kDefaultCutoff = 0.45;
inline constexpr std::size_t kMaskPixels = 13;

struct EnsembleConfig {
    BandConfig bands;
    LearnerMode mode = LearnerMode::tree;
    TreeParams tree;
    ForestParams forest;
    double cutoff = kDefaultCutoff;
};

struct EnsembleModel {
    BandConfig bands;
    LearnerMode mode = LearnerMode::tree;
    double cutoff = kDefaultCutoff;
    std::size_t min_split = 10;
    ForestParams forest;
    std::vector<Learner> learners;  // one per band

    /// Label emitted by learner j for a full signature.
    Label3 predict_band(std::size_t j, std::span<const double> signature) const;
    /// Binary tag (after remap_lu) of every learner, in band order.
    std::vector<int> band_tags(std::span<const double> signature) const;

    friend bool operator==(const EnsembleModel&, const EnsembleModel&) = default;
};

/// Signatures (length n_components each) with their labels.
using SignatureRows = Dataset;

/// Learner j sees only the features of band j. Bands train concurrently on
/// up to `threads` workers; the model does not depend on the thread count.
EnsembleModel fit_band_ensemble(const SignatureRows& rows, const EnsembleConfig& config, std::uint64_t seed,
                                std::size_t threads = 1);

/// Mean of the learners' binary tags.
double predict_pixel(const EnsembleModel& model, std::span<const double> signature);

/// Mean of the mask pixel scores; `pixel_signatures` holds the 13 signatures back to back.
double score_patch(const EnsembleModel& model, std::span<const double> pixel_signatures);
/// Mean of 13 pixel scores.
double patch_score_from_pixels(std::span<const double> pixel_scores);

/// Mean of 1-6 patch scores.
double score_vertebra(std::span<const double> patch_scores);

struct PatientDecision {
    bool pathological = false;
    double score = 0.0;  // max vertebra score
};

/// Pathological iff the largest vertebra score exceeds the cutoff.
PatientDecision classify_patient(std::span<const double> vertebra_scores, double cutoff = kDefaultCutoff);

/// STVM model container: "STVM", version, configuration, preorder trees, CRC32.
std::vector<std::uint8_t> encode(const EnsembleModel& model);
EnsembleModel decode_model(const std::vector<std::uint8_t>& bytes);

}  // namespace stv
