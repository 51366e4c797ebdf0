#include "doctest.h"

#include <algorithm>
#include <random>

#include "stv/ensemble.hpp"
#include "stv/image.hpp"
#include "stv/io.hpp"
#include "support/oracles.hpp"

using namespace stv;

namespace {

DecisionTree leaf(Label3 label, std::size_t n_features) {
    DecisionTree t;
    t.n_features = n_features;
    TreeNode node;
    node.counts[static_cast<int>(label)] = 1;
    t.nodes.push_back(node);
    return t;
}

// Tree-mode model whose learner j always emits labels[j].
EnsembleModel constant_model(const std::vector<Label3>& labels, std::size_t s = 5) {
    EnsembleModel m;
    m.bands = {labels.size() * s, s, false};
    for (Label3 l : labels) m.learners.push_back({{leaf(l, s)}, {}});
    return m;
}

// Random three-class data with a weak dependence on the first features.
SignatureRows random_rows(std::size_t rows, std::size_t n, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_int_distribution<int> cls(0, 2);
    SignatureRows out;
    out.n_features = n;
    std::vector<double> x(n);
    for (std::size_t r = 0; r < rows; ++r) {
        const int c = cls(gen);
        for (std::size_t k = 0; k < n; ++k) x[k] = noise(gen) + (k % 7 == 0 ? 0.8 * c : 0.0);
        out.push(x, static_cast<Label3>(c));
    }
    return out;
}

}  // namespace

TEST_CASE("band_split partitions into adjacent bands") {
    std::vector<double> sig(120);
    for (std::size_t i = 0; i < sig.size(); ++i) sig[i] = double(i + 1);
    const auto bands = band_split(sig, {120, 5, false});
    REQUIRE(bands.size() == 24);
    CHECK(bands[0] == std::vector<double>{1, 2, 3, 4, 5});
    CHECK(bands[23] == std::vector<double>{116, 117, 118, 119, 120});
    CHECK(band_split(sig, {120, 8, false}).size() == 15);
    CHECK_THROWS_AS(band_split(sig, {120, 7, false}), ContractError);
    const auto sliding = band_split(sig, {120, 7, true});
    REQUIRE(sliding.size() == 114);
    CHECK(sliding[1] == std::vector<double>{2, 3, 4, 5, 6, 7, 8});
    CHECK(band_split(sig, {120, 120, false}).size() == 1);
    CHECK_THROWS_AS(band_split(std::vector<double>(100), {120, 5, false}), ContractError);
}

TEST_CASE("gini arithmetic") {
    CHECK(gini({2, 2, 0}) == doctest::Approx(0.5));
    CHECK(gini({4, 0, 0}) == 0.0);
    CHECK(gini({1, 1, 1}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("fit_tree on a single class is one leaf") {
    Dataset d;
    for (int i = 0; i < 30; ++i) d.push(std::vector<double>{double(i), double(-i)}, Label3::path_lu);
    const DecisionTree t = fit_tree(d);
    CHECK(t.nodes.size() == 1);
    CHECK(t.predict(std::vector<double>{100.0, 0.0}) == Label3::path_lu);
}

TEST_CASE("fit_tree splits separated values at the midpoint") {
    Dataset d;
    for (int i = 0; i < 6; ++i) d.push(std::vector<double>{3.0}, Label3::normal);
    for (int i = 0; i < 6; ++i) d.push(std::vector<double>{5.0}, Label3::path_hu);
    const DecisionTree t = fit_tree(d);
    REQUIRE(t.nodes.size() == 3);
    CHECK(t.nodes[0].feature == 0);
    CHECK(t.nodes[0].threshold == 4.0);
    for (std::size_t r = 0; r < d.rows(); ++r) CHECK(t.predict(d.row(r)) == d.labels[r]);
}

TEST_CASE("fit_tree root split matches the exhaustive oracle") {
    for (unsigned seed = 0; seed < 20; ++seed) {
        std::mt19937 gen(seed);
        std::uniform_int_distribution<int> value(0, 6), cls(0, 2);
        std::vector<std::vector<double>> X;
        std::vector<int> y;
        Dataset d;
        for (int r = 0; r < 40; ++r) {
            std::vector<double> x{double(value(gen)), double(value(gen)), double(value(gen))};
            const int c = cls(gen);
            X.push_back(x);
            y.push_back(c);
            d.push(x, static_cast<Label3>(c));
        }
        const oracle::Split best = oracle::best_split(X, y);
        const DecisionTree t = fit_tree(d);
        CAPTURE(seed);
        CHECK(t.nodes[0].feature == best.feature);
        if (best.feature >= 0) CHECK(t.nodes[0].threshold == best.threshold);
    }
}

TEST_CASE("fit_tree breaks ties by lowest feature then lowest threshold") {
    Dataset d;
    // Features 0 and 1 are identical; both thresholds 1.5 and 2.5 isolate one class.
    for (int i = 0; i < 5; ++i) d.push(std::vector<double>{1, 1}, Label3::normal);
    for (int i = 0; i < 5; ++i) d.push(std::vector<double>{2, 2}, Label3::path_hu);
    for (int i = 0; i < 5; ++i) d.push(std::vector<double>{3, 3}, Label3::path_lu);
    const DecisionTree t = fit_tree(d);
    CHECK(t.nodes[0].feature == 0);
    CHECK(t.nodes[0].threshold == 1.5);
}

TEST_CASE("fit_tree stops below ten samples") {
    Dataset d;
    for (int i = 0; i < 9; ++i) d.push(std::vector<double>{double(i)}, i < 5 ? Label3::normal : Label3::path_hu);
    CHECK(fit_tree(d).nodes.size() == 1);
    d.push(std::vector<double>{9.0}, Label3::path_hu);
    CHECK(fit_tree(d).nodes.size() > 1);
}

TEST_CASE("fit_tree makes a leaf when no split reduces impurity") {
    Dataset d;
    for (int i = 0; i < 12; ++i) d.push(std::vector<double>{1.0}, i % 2 ? Label3::normal : Label3::path_hu);
    const DecisionTree t = fit_tree(d);
    CHECK(t.nodes.size() == 1);
    CHECK(t.predict(std::vector<double>{1.0}) == Label3::normal);  // 6:6 tie goes to the lower label
}

TEST_CASE("fit_tree leaves carry their sample counts") {
    const SignatureRows rows = random_rows(300, 4, 3);
    const DecisionTree t = fit_tree(rows);
    std::uint32_t leaf_total = 0;
    for (const TreeNode& n : t.nodes) {
        if (n.leaf()) leaf_total += n.counts[0] + n.counts[1] + n.counts[2];
        else CHECK(n.feature < 4);
    }
    CHECK(leaf_total == 300);
    CHECK_THROWS_AS(fit_tree(Dataset{}), ContractError);
}

TEST_CASE("tree mode trains one five-feature learner per band") {
    const SignatureRows rows = random_rows(400, 120, 1);
    const EnsembleModel m = fit_band_ensemble(rows, {}, 42);
    REQUIRE(m.learners.size() == 24);
    for (const Learner& l : m.learners) {
        REQUIRE(l.trees.size() == 1);
        CHECK(l.trees[0].n_features == 5);
    }
    CHECK(encode(m) == encode(fit_band_ensemble(rows, {}, 42)));
}

TEST_CASE("forest mode trains 24 forests of 50 trees, independent of threads") {
    const SignatureRows rows = random_rows(150, 120, 2);
    EnsembleConfig cfg;
    cfg.mode = LearnerMode::forest;
    const EnsembleModel a = fit_band_ensemble(rows, cfg, 7, 1);
    REQUIRE(a.learners.size() == 24);
    for (const Learner& l : a.learners) {
        CHECK(l.trees.size() == 50);
        CHECK(l.seeds.size() == 50);
    }
    CHECK(a.forest.max_features == 3);
    const EnsembleModel b = fit_band_ensemble(rows, cfg, 7, 3);
    CHECK(encode(a) == encode(b));
    CHECK_FALSE(encode(a) == encode(fit_band_ensemble(rows, cfg, 8, 1)));
}

TEST_CASE("forest vote ties resolve to NORMAL") {
    EnsembleModel m;
    m.bands = {5, 5, false};
    m.mode = LearnerMode::forest;
    m.learners.push_back({{leaf(Label3::path_hu, 5), leaf(Label3::path_lu, 5)}, {1, 2}});
    const std::vector<double> sig(5, 0.0);
    CHECK(m.predict_band(0, sig) == Label3::normal);
    m.forest.tie_label = Label3::path_hu;
    CHECK(m.predict_band(0, sig) == Label3::path_hu);
    m.learners[0].trees.push_back(leaf(Label3::path_lu, 5));
    m.learners[0].seeds.push_back(3);
    CHECK(m.predict_band(0, sig) == Label3::path_lu);
}

TEST_CASE("predict_pixel averages the remapped tags") {
    const std::vector<double> sig(120, 0.0);
    CHECK(predict_pixel(constant_model(std::vector<Label3>(24, Label3::path_hu)), sig) == 1.0);
    std::vector<Label3> mixed(24, Label3::normal);
    std::fill(mixed.begin(), mixed.begin() + 12, Label3::path_lu);
    CHECK(predict_pixel(constant_model(mixed), sig) == 0.0);

    std::vector<Label3> labels;
    labels.insert(labels.end(), 6, Label3::path_hu);
    labels.insert(labels.end(), 10, Label3::path_lu);
    labels.insert(labels.end(), 8, Label3::normal);
    CHECK(predict_pixel(constant_model(labels), sig) == 0.25);
    CHECK_THROWS_AS(predict_pixel(constant_model(labels), std::vector<double>(119)), ContractError);
}

TEST_CASE("score_patch is the mean of 13 pixel scores") {
    std::vector<double> ones(13, 1.0);
    CHECK(patch_score_from_pixels(ones) == 1.0);
    std::vector<double> one_half(13, 0.0);
    one_half[4] = 0.5;
    CHECK(patch_score_from_pixels(one_half) == doctest::Approx(0.5 / 13.0).epsilon(1e-15));
    CHECK(patch_score_from_pixels(one_half) == doctest::Approx(0.03846).epsilon(1e-4));
    CHECK_THROWS_AS(patch_score_from_pixels(std::vector<double>(12, 0.0)), ContractError);

    std::mt19937 gen(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> pixels(13);
    for (double& v : pixels) v = u(gen);
    const double before = patch_score_from_pixels(pixels);
    std::shuffle(pixels.begin(), pixels.end(), gen);
    CHECK(patch_score_from_pixels(pixels) == doctest::Approx(before).epsilon(1e-15));

    const EnsembleModel m = constant_model(std::vector<Label3>(24, Label3::path_hu));
    CHECK(score_patch(m, std::vector<double>(13 * 120, 0.0)) == 1.0);
    CHECK_THROWS_AS(score_patch(m, std::vector<double>(12 * 120, 0.0)), ContractError);
}

TEST_CASE("score_vertebra and classify_patient") {
    CHECK(score_vertebra(std::vector<double>{0.2, 0.4}) == doctest::Approx(0.3));
    CHECK(score_vertebra(std::vector<double>{0.7}) == 0.7);
    CHECK(score_vertebra(std::vector<double>(6, 0.35)) == doctest::Approx(0.35).epsilon(1e-15));
    CHECK_THROWS_AS(score_vertebra(std::vector<double>{}), ContractError);
    CHECK_THROWS_AS(score_vertebra(std::vector<double>(7, 0.1)), ContractError);

    const PatientDecision d = classify_patient(std::vector<double>{0.2, 0.5}, 0.45);
    CHECK(d.pathological);
    CHECK(d.score == 0.5);
    CHECK_FALSE(classify_patient(std::vector<double>{0.2, 0.45}).pathological);
    CHECK(classify_patient(std::vector<double>{0.46}).pathological);  // default cutoff 0.45
    CHECK(kDefaultCutoff == 0.45);
    CHECK_THROWS_AS(classify_patient(std::vector<double>{}), ContractError);
}

TEST_CASE("aggregation is bounded, monotone and threshold-consistent") {
    std::mt19937 gen(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<double>> pixels(3, std::vector<double>(13));
        for (auto& p : pixels)
            for (double& v : p) v = u(gen);
        auto patient = [&] {
            std::vector<double> patches;
            for (const auto& p : pixels) patches.push_back(patch_score_from_pixels(p));
            const double v1 = score_vertebra(std::span(patches).first(2));
            const double v2 = score_vertebra(std::span(patches).last(1));
            return std::array<double, 4>{patches[0], v1, v2, classify_patient(std::vector<double>{v1, v2}).score};
        };
        const auto before = patient();
        for (double s : before) {
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
        }
        auto& raised = pixels[0][static_cast<std::size_t>(trial % 13)];
        raised = std::min(1.0, raised + u(gen));
        const auto after = patient();
        for (std::size_t i = 0; i < 4; ++i) CHECK(after[i] >= before[i]);

        const double c = u(gen), lower = c * u(gen);
        const std::vector<double> vs{before[1], before[2]};
        if (classify_patient(vs, c).pathological) CHECK(classify_patient(vs, lower).pathological);
    }
}

TEST_CASE("learners see only their own band") {
    const SignatureRows rows = random_rows(300, 30, 4);
    const EnsembleModel m = fit_band_ensemble(rows, {{30, 5, false}, LearnerMode::tree, {}, {}, 0.45}, 1);
    for (std::size_t r = 0; r < 50; ++r) {
        const auto x = rows.row(r);
        for (std::size_t j = 0; j < 6; ++j) {
            std::vector<double> masked(30, 0.0);
            std::copy_n(x.begin() + j * 5, 5, masked.begin() + j * 5);
            CHECK(m.predict_band(j, masked) == m.predict_band(j, x));
        }
    }
}

TEST_CASE("STVM round trip is bit-exact and corruption is detected") {
    const SignatureRows rows = random_rows(200, 40, 9);
    EnsembleConfig cfg;
    cfg.bands = {40, 8, true};
    cfg.mode = LearnerMode::forest;
    cfg.forest.trees = 5;
    cfg.cutoff = 0.3;
    const EnsembleModel m = fit_band_ensemble(rows, cfg, 3);
    const auto bytes = encode(m);
    const EnsembleModel back = decode_model(bytes);
    CHECK(back == m);
    CHECK(encode(back) == bytes);

    auto flipped = bytes;
    flipped[flipped.size() / 2] ^= 0x10;
    CHECK_THROWS_AS(decode_model(flipped), FormatError);
    auto cut = bytes;
    cut.resize(cut.size() - 9);
    CHECK_THROWS_AS(decode_model(cut), FormatError);
    CHECK_THROWS_AS(decode_model(std::vector<std::uint8_t>{'S', 'T', 'V', '1'}), FormatError);

    const EnsembleModel tree = fit_band_ensemble(rows, {{40, 5, false}, LearnerMode::tree, {}, {}, 0.45}, 3);
    CHECK(decode_model(encode(tree)) == tree);
}
