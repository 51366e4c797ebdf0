#include "stv/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "binary.hpp"
#include "stv/image.hpp"
#include "stv/parallel.hpp"
#include "stv/rng.hpp"

namespace stv {

void BandConfig::validate() const {
    if (n_components == 0) throw ContractError("BandConfig: n_components must be positive");
    if (scales_per_band == 0 || scales_per_band > n_components)
        throw ContractError("BandConfig: scales_per_band must lie in [1, " + std::to_string(n_components) + "]");
    if (!overlapping && n_components % scales_per_band != 0)
        throw ContractError("BandConfig: scales_per_band " + std::to_string(scales_per_band) + " does not divide " +
                            std::to_string(n_components) + " components");
}

std::size_t BandConfig::band_count() const {
    validate();
    return overlapping ? n_components - scales_per_band + 1 : n_components / scales_per_band;
}

std::vector<std::vector<double>> band_split(std::span<const double> signature, const BandConfig& config) {
    const std::size_t bands = config.band_count();
    if (signature.size() != config.n_components)
        throw ContractError("band_split: signature length " + std::to_string(signature.size()) + " != " +
                            std::to_string(config.n_components));
    std::vector<std::vector<double>> out;
    out.reserve(bands);
    for (std::size_t j = 0; j < bands; ++j) {
        const auto part = signature.subspan(config.band_begin(j), config.scales_per_band);
        out.emplace_back(part.begin(), part.end());
    }
    return out;
}

Label3 majority(const std::array<std::uint32_t, kLabelCount>& counts) {
    int best = 0;
    for (int c = 1; c < kLabelCount; ++c)
        if (counts[c] > counts[best]) best = c;
    return static_cast<Label3>(best);
}

Label3 DecisionTree::predict(std::span<const double> x) const {
    if (x.size() != n_features)
        throw ContractError("DecisionTree::predict: expected " + std::to_string(n_features) + " features, got " +
                            std::to_string(x.size()));
    if (nodes.empty()) throw ContractError("DecisionTree::predict: empty tree");
    std::size_t i = 0;
    while (!nodes[i].leaf()) i = x[nodes[i].feature] <= nodes[i].threshold ? i + 1 : nodes[i].right;
    return majority(nodes[i].counts);
}

std::size_t DecisionTree::depth() const {
    // Preorder walk with an explicit stack of (node, depth).
    std::size_t deepest = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack;
    if (!nodes.empty()) stack.emplace_back(0, 0);
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (!nodes[i].leaf()) {
            stack.emplace_back(i + 1, d + 1);
            stack.emplace_back(nodes[i].right, d + 1);
        }
    }
    return deepest;
}

void Dataset::push(std::span<const double> x, Label3 y) {
    if (labels.empty() && values.empty() && n_features == 0) n_features = x.size();
    if (x.size() != n_features)
        throw ContractError("Dataset::push: row has " + std::to_string(x.size()) + " features, expected " +
                            std::to_string(n_features));
    values.insert(values.end(), x.begin(), x.end());
    labels.push_back(y);
}

namespace {

using Counts = std::array<std::uint32_t, kLabelCount>;

// n * gini(counts), the quantity minimized by a split.
double impurity_mass(const Counts& c) {
    const double n = double(c[0]) + c[1] + c[2];
    if (n == 0.0) return 0.0;
    return n - (double(c[0]) * c[0] + double(c[1]) * c[1] + double(c[2]) * c[2]) / n;
}

class TreeBuilder {
public:
    TreeBuilder(const Dataset& data, const TreeParams& params, std::uint64_t seed)
        : data_(data), params_(params), rng_(seed) {
        all_features_.resize(data.n_features);
        std::iota(all_features_.begin(), all_features_.end(), 0);
    }

    void build(std::vector<std::size_t>& idx, std::vector<TreeNode>& nodes) {
        Counts counts{};
        for (std::size_t r : idx) ++counts[static_cast<int>(data_.labels[r])];
        const std::size_t self = nodes.size();
        nodes.push_back(TreeNode{-1, 0.0, 0, counts});

        const int present = (counts[0] > 0) + (counts[1] > 0) + (counts[2] > 0);
        if (present <= 1 || idx.size() < params_.min_split) return;

        const double parent = impurity_mass(counts);
        // Gains below eps count as ties, so rounding never overrides the tie-break order.
        const double eps = 1e-12 * std::max(parent, 1.0);
        double best = parent;
        int best_feature = -1;
        double best_threshold = 0.0;
        for (std::size_t f : candidates()) {
            column_.clear();
            for (std::size_t r : idx) column_.emplace_back(data_.row(r)[f], static_cast<int>(data_.labels[r]));
            std::sort(column_.begin(), column_.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            Counts left{};
            for (std::size_t i = 0; i + 1 < column_.size(); ++i) {
                ++left[column_[i].second];
                const double a = column_[i].first, b = column_[i + 1].first;
                if (!(a < b)) continue;
                const Counts right{counts[0] - left[0], counts[1] - left[1], counts[2] - left[2]};
                const double child = impurity_mass(left) + impurity_mass(right);
                if (child < best - eps) {
                    best = child;
                    best_feature = static_cast<int>(f);
                    double thr = a + (b - a) / 2.0;
                    if (!(thr < b)) thr = a;
                    best_threshold = thr;
                }
            }
        }
        if (best_feature < 0) return;

        std::vector<std::size_t> left_idx, right_idx;
        for (std::size_t r : idx)
            (data_.row(r)[best_feature] <= best_threshold ? left_idx : right_idx).push_back(r);
        idx.clear();
        idx.shrink_to_fit();
        nodes[self].feature = best_feature;
        nodes[self].threshold = best_threshold;
        build(left_idx, nodes);
        nodes[self].right = static_cast<std::uint32_t>(nodes.size());
        build(right_idx, nodes);
    }

private:
    // Features examined at one split, in ascending order.
    const std::vector<std::size_t>& candidates() {
        const std::size_t d = data_.n_features;
        if (params_.max_features == 0 || params_.max_features >= d) return all_features_;
        drawn_ = all_features_;
        for (std::size_t i = 0; i < params_.max_features; ++i) {
            const auto j = static_cast<std::size_t>(rng_.integer(static_cast<std::int64_t>(i),
                                                                 static_cast<std::int64_t>(d - 1)));
            std::swap(drawn_[i], drawn_[j]);
        }
        drawn_.resize(params_.max_features);
        std::sort(drawn_.begin(), drawn_.end());
        return drawn_;
    }

    const Dataset& data_;
    TreeParams params_;
    Rng rng_;
    std::vector<std::size_t> all_features_, drawn_;
    std::vector<std::pair<double, int>> column_;
};

}  // namespace

DecisionTree fit_tree(const Dataset& data, std::span<const std::size_t> rows, const TreeParams& params,
                      std::uint64_t seed) {
    if (rows.empty() || data.rows() == 0) throw ContractError("fit_tree: no training rows");
    if (data.n_features == 0) throw ContractError("fit_tree: rows have no features");
    if (data.values.size() != data.rows() * data.n_features)
        throw ContractError("fit_tree: inconsistent feature matrix");
    for (std::size_t r : rows)
        if (r >= data.rows()) throw ContractError("fit_tree: row index out of range");
    DecisionTree tree;
    tree.n_features = data.n_features;
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    TreeBuilder(data, params, seed).build(idx, tree.nodes);
    return tree;
}

DecisionTree fit_tree(const Dataset& data, const TreeParams& params) {
    std::vector<std::size_t> rows(data.rows());
    std::iota(rows.begin(), rows.end(), 0);
    return fit_tree(data, rows, params);
}

Label3 EnsembleModel::predict_band(std::size_t j, std::span<const double> signature) const {
    const Learner& learner = learners.at(j);
    const auto x = signature.subspan(bands.band_begin(j), bands.scales_per_band);
    if (mode == LearnerMode::tree) return learner.trees.front().predict(x);
    Counts votes{};
    for (const auto& tree : learner.trees) ++votes[static_cast<int>(tree.predict(x))];
    const Label3 top = majority(votes);
    for (int c = 0; c < kLabelCount; ++c)
        if (c != static_cast<int>(top) && votes[c] == votes[static_cast<int>(top)]) return forest.tie_label;
    return top;
}

std::vector<int> EnsembleModel::band_tags(std::span<const double> signature) const {
    if (signature.size() != bands.n_components)
        throw ContractError("signature length " + std::to_string(signature.size()) + " does not match the model's " +
                            std::to_string(bands.n_components) + " components");
    std::vector<int> tags(learners.size());
    for (std::size_t j = 0; j < learners.size(); ++j) tags[j] = remap_lu(predict_band(j, signature));
    return tags;
}

EnsembleModel fit_band_ensemble(const SignatureRows& rows, const EnsembleConfig& config, std::uint64_t seed,
                                std::size_t threads) {
    const std::size_t n_bands = config.bands.band_count();
    if (rows.rows() == 0) throw ContractError("fit_band_ensemble: no training rows");
    if (rows.n_features != config.bands.n_components)
        throw ContractError("fit_band_ensemble: signatures have " + std::to_string(rows.n_features) +
                            " components, config expects " + std::to_string(config.bands.n_components));
    if (!(config.cutoff >= 0.0 && config.cutoff <= 1.0)) throw ContractError("fit_band_ensemble: cutoff outside [0, 1]");
    const std::size_t s = config.bands.scales_per_band;

    EnsembleModel model;
    model.bands = config.bands;
    model.mode = config.mode;
    model.cutoff = config.cutoff;
    model.min_split = config.tree.min_split;
    model.forest = config.forest;
    if (model.forest.max_features == 0)
        model.forest.max_features = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(s))));
    if (config.mode == LearnerMode::forest && model.forest.trees == 0)
        throw ContractError("fit_band_ensemble: forest needs at least one tree");
    model.learners.resize(n_bands);

    parallel_for(n_bands, threads, [&](std::size_t j) {
        Dataset band;
        band.n_features = s;
        band.values.reserve(rows.rows() * s);
        for (std::size_t r = 0; r < rows.rows(); ++r) {
            const auto x = rows.row(r).subspan(config.bands.band_begin(j), s);
            band.values.insert(band.values.end(), x.begin(), x.end());
        }
        band.labels = rows.labels;

        Learner& learner = model.learners[j];
        if (config.mode == LearnerMode::tree) {
            learner.trees.push_back(fit_tree(band, TreeParams{config.tree.min_split, 0}));
            return;
        }
        const TreeParams params{config.tree.min_split, model.forest.max_features};
        std::vector<std::size_t> sample(band.rows());
        for (std::size_t t = 0; t < model.forest.trees; ++t) {
            const std::uint64_t tree_seed = mix_seed({seed, j, t});
            Rng rng(tree_seed);
            for (auto& r : sample) r = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(band.rows()) - 1));
            learner.seeds.push_back(tree_seed);
            learner.trees.push_back(fit_tree(band, sample, params, mix_seed({tree_seed, 1})));
        }
    });
    return model;
}

double predict_pixel(const EnsembleModel& model, std::span<const double> signature) {
    const auto tags = model.band_tags(signature);
    double sum = 0.0;
    for (int t : tags) sum += t;
    return sum / static_cast<double>(tags.size());
}

double patch_score_from_pixels(std::span<const double> pixel_scores) {
    if (pixel_scores.size() != kMaskPixels)
        throw ContractError("score_patch: expected " + std::to_string(kMaskPixels) + " pixel scores, got " +
                            std::to_string(pixel_scores.size()));
    double sum = 0.0;
    for (double v : pixel_scores) sum += v;
    return sum / static_cast<double>(kMaskPixels);
}

double score_patch(const EnsembleModel& model, std::span<const double> pixel_signatures) {
    const std::size_t n = model.bands.n_components;
    if (pixel_signatures.size() != kMaskPixels * n)
        throw ContractError("score_patch: expected " + std::to_string(kMaskPixels) + " signatures of length " +
                            std::to_string(n));
    std::array<double, kMaskPixels> scores{};
    for (std::size_t i = 0; i < kMaskPixels; ++i) scores[i] = predict_pixel(model, pixel_signatures.subspan(i * n, n));
    return patch_score_from_pixels(scores);
}

double score_vertebra(std::span<const double> patch_scores) {
    if (patch_scores.empty() || patch_scores.size() > 6)
        throw ContractError("score_vertebra: expected 1-6 patch scores, got " + std::to_string(patch_scores.size()));
    double sum = 0.0;
    for (double v : patch_scores) sum += v;
    return sum / static_cast<double>(patch_scores.size());
}

PatientDecision classify_patient(std::span<const double> vertebra_scores, double cutoff) {
    if (vertebra_scores.empty()) throw ContractError("classify_patient: no vertebra scores");
    const double score = *std::max_element(vertebra_scores.begin(), vertebra_scores.end());
    return {score > cutoff, score};
}

namespace {

constexpr char kModelMagic[4] = {'S', 'T', 'V', 'M'};
constexpr std::uint32_t kModelVersion = 1;

void write_tree(detail::Writer& wr, const DecisionTree& tree) {
    wr.u32(static_cast<std::uint32_t>(tree.n_features));
    wr.u32(static_cast<std::uint32_t>(tree.nodes.size()));
    for (const TreeNode& node : tree.nodes) {
        wr.u8(node.leaf() ? 0 : 1);
        if (!node.leaf()) {
            wr.u32(static_cast<std::uint32_t>(node.feature));
            wr.f64(node.threshold);
        }
        for (auto c : node.counts) wr.u32(c);
    }
}

// Reads one subtree in preorder and fills in the right-child links.
void read_subtree(detail::Reader& rd, DecisionTree& tree, std::size_t limit) {
    if (tree.nodes.size() >= limit) throw FormatError("model: tree has more nodes than declared");
    TreeNode node;
    const std::uint8_t kind = rd.u8();
    if (kind > 1) throw FormatError("model: bad node kind");
    if (kind == 1) {
        const std::uint32_t f = rd.u32();
        if (f >= tree.n_features) throw FormatError("model: feature index out of range");
        node.feature = static_cast<int>(f);
        node.threshold = rd.f64();
    }
    for (auto& c : node.counts) c = rd.u32();
    const std::size_t self = tree.nodes.size();
    tree.nodes.push_back(node);
    if (kind == 1) {
        read_subtree(rd, tree, limit);
        tree.nodes[self].right = static_cast<std::uint32_t>(tree.nodes.size());
        read_subtree(rd, tree, limit);
    }
}

}  // namespace

std::vector<std::uint8_t> encode(const EnsembleModel& model) {
    detail::Writer wr;
    wr.bytes(kModelMagic, 4);
    wr.u32(kModelVersion);
    wr.u32(static_cast<std::uint32_t>(model.bands.n_components));
    wr.u32(static_cast<std::uint32_t>(model.bands.scales_per_band));
    wr.u8(model.bands.overlapping ? 1 : 0);
    wr.u8(static_cast<std::uint8_t>(model.mode));
    wr.f64(model.cutoff);
    wr.u32(static_cast<std::uint32_t>(model.min_split));
    wr.u32(static_cast<std::uint32_t>(model.forest.trees));
    wr.u32(static_cast<std::uint32_t>(model.forest.max_features));
    wr.u8(static_cast<std::uint8_t>(model.forest.tie_label));
    wr.u32(static_cast<std::uint32_t>(model.learners.size()));
    for (const Learner& learner : model.learners) {
        wr.u32(static_cast<std::uint32_t>(learner.trees.size()));
        wr.u32(static_cast<std::uint32_t>(learner.seeds.size()));
        for (auto s : learner.seeds) wr.u64(s);
        for (const auto& tree : learner.trees) write_tree(wr, tree);
    }
    auto& bytes = wr.data();
    wr.u32(detail::crc32(bytes.data(), bytes.size()));
    return std::move(bytes);
}

EnsembleModel decode_model(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 12 || !std::equal(kModelMagic, kModelMagic + 4, bytes.begin()))
        throw FormatError("not an STVM model (bad magic)");
    const std::size_t body = bytes.size() - 4;
    if (detail::crc32(bytes.data(), body) != detail::load_u32(bytes.data() + body))
        throw FormatError("model CRC mismatch");
    detail::Reader rd(bytes, body);
    for (int i = 0; i < 4; ++i) rd.u8();
    const std::uint32_t version = rd.u32();
    if (version != kModelVersion) throw FormatError("unsupported model version " + std::to_string(version));

    EnsembleModel model;
    model.bands.n_components = rd.u32();
    model.bands.scales_per_band = rd.u32();
    model.bands.overlapping = rd.u8() != 0;
    const std::uint8_t mode = rd.u8();
    if (mode > 1) throw FormatError("model: bad learner mode");
    model.mode = static_cast<LearnerMode>(mode);
    model.cutoff = rd.f64();
    model.min_split = rd.u32();
    model.forest.trees = rd.u32();
    model.forest.max_features = rd.u32();
    const std::uint8_t tie = rd.u8();
    if (tie >= kLabelCount) throw FormatError("model: bad tie label");
    model.forest.tie_label = static_cast<Label3>(tie);
    std::size_t n_bands = 0;
    try {
        n_bands = model.bands.band_count();
    } catch (const ContractError& e) {
        throw FormatError(std::string("model: ") + e.what());
    }
    if (rd.u32() != n_bands) throw FormatError("model: learner count does not match band count");
    model.learners.resize(n_bands);
    for (Learner& learner : model.learners) {
        const std::uint32_t n_trees = rd.u32();
        const std::uint32_t n_seeds = rd.u32();
        if (n_trees == 0 || (model.mode == LearnerMode::tree && n_trees != 1))
            throw FormatError("model: bad tree count");
        if (n_seeds > rd.remaining() / 8) throw FormatError("container truncated");
        for (std::uint32_t i = 0; i < n_seeds; ++i) learner.seeds.push_back(rd.u64());
        for (std::uint32_t t = 0; t < n_trees; ++t) {
            DecisionTree tree;
            tree.n_features = rd.u32();
            if (tree.n_features != model.bands.scales_per_band) throw FormatError("model: tree width mismatch");
            const std::uint32_t n_nodes = rd.u32();
            if (n_nodes == 0 || n_nodes > rd.remaining()) throw FormatError("model: bad node count");
            tree.nodes.reserve(n_nodes);
            read_subtree(rd, tree, n_nodes);
            if (tree.nodes.size() != n_nodes) throw FormatError("model: node count mismatch");
            learner.trees.push_back(std::move(tree));
        }
    }
    if (rd.remaining() != 0) throw FormatError("model: trailing bytes");
    return model;
}

}  // namespace stv
