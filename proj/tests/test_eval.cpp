#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "stv/eval.hpp"
#include "support/oracles.hpp"

using namespace stv;

namespace {

struct Fake {
    Manifest manifest;
    FeatureSet features;
};

// Patients with two vertebrae of two patches. Pathological patients get
// HU, HU, LU, HU patches; HU signatures are shifted by `signal` on the
// first `signal_components` components.
Fake fake_cohort(std::size_t n_normal, std::size_t n_path, std::size_t n, unsigned seed, double signal,
                 std::size_t signal_components = 10) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    Fake f;
    f.features.flow.n_components = n;
    for (std::size_t p = 0; p < n_normal + n_path; ++p) {
        const bool sick = p >= n_normal;
        const std::string id = (sick ? "P" : "N") + std::to_string(p);
        for (int v = 0; v < 2; ++v)
            for (int j = 0; j < 2; ++j) {
                const Label3 label = !sick ? Label3::normal : (v == 1 && j == 0) ? Label3::path_lu : Label3::path_hu;
                f.manifest.records.push_back(
                    {id, "V" + std::to_string(v), "p" + std::to_string(j), label, "unused.stv"});
                PatchFeatures pf;
                for (std::size_t px = 0; px < kMaskPixels; ++px)
                    for (std::size_t k = 0; k < n; ++k)
                        pf.signatures.push_back(noise(gen) +
                                                (label == Label3::path_hu && k < signal_components ? signal : 0.0));
                for (std::size_t k = 0; k < n; ++k) pf.spectrum.push_back(double(static_cast<int>(label)) + 1.0);
                f.features.patches.push_back(std::move(pf));
            }
    }
    f.manifest.validate();
    return f;
}

CvConfig small_config(std::size_t n, std::size_t s) {
    CvConfig cfg;
    cfg.ensemble.bands = {n, s, false};
    cfg.folds = 5;
    return cfg;
}

}  // namespace

TEST_CASE("kfold_by_patient stratifies 10/10 into ten balanced folds") {
    const Fake f = fake_cohort(10, 10, 5, 1, 0.0);
    const FoldPlan plan = kfold_by_patient(f.manifest, 10, 3);
    const auto status = f.manifest.patient_status();
    for (std::size_t k = 0; k < 10; ++k) {
        const auto ids = plan.patients(k, f.manifest);
        REQUIRE(ids.size() == 2);
        CHECK(status.at(ids[0]) != status.at(ids[1]));
    }
    CHECK(plan.assignment == kfold_by_patient(f.manifest, 10, 3).assignment);
    CHECK_THROWS_AS(kfold_by_patient(f.manifest, 21, 3), ContractError);
}

TEST_CASE("kfold_by_patient is a stratified partition") {
    for (unsigned trial = 0; trial < 20; ++trial) {
        const std::size_t normal = 3 + trial % 7, path = 4 + trial % 5, k = 2 + trial % 5;
        const Fake f = fake_cohort(normal, path, 5, trial, 0.0);
        const FoldPlan plan = kfold_by_patient(f.manifest, k, trial);
        const auto status = f.manifest.patient_status();
        std::set<std::string> seen;
        const double global = double(path) / double(normal + path);
        for (std::size_t fold = 0; fold < k; ++fold) {
            const auto ids = plan.patients(fold, f.manifest);
            std::size_t sick = 0;
            for (const auto& id : ids) {
                CHECK(seen.insert(id).second);
                sick += status.at(id);
            }
            CHECK(std::abs(double(sick) - global * double(ids.size())) <= 1.0 + 1e-12);
        }
        CHECK(seen.size() == normal + path);
    }
}

TEST_CASE("roc_auc worked examples") {
    CHECK(roc_auc(std::vector<double>{0.9, 0.8, 0.1, 0.2}, {true, true, false, false}).auc == 1.0);
    CHECK(roc_auc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, {true, false, true, false}).auc == 0.5);
    CHECK(roc_auc(std::vector<double>{0.8, 0.4, 0.6, 0.2}, {true, true, false, false}).auc == 0.75);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1, 0.2}, {true, true}), ContractError);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1}, {true, false}), ContractError);
}

TEST_CASE("roc_auc equals brute-force concordance") {
    std::mt19937 gen(17);
    for (int trial = 0; trial < 100; ++trial) {
        std::uniform_int_distribution<int> size(2, 200), level(0, 1 + trial % 20);
        const int n = size(gen);
        std::vector<double> scores(n);
        std::vector<bool> truths(n);
        for (int i = 0; i < n; ++i) {
            scores[i] = level(gen) / 7.0;
            truths[i] = gen() % 2;
        }
        truths[0] = true;
        truths[1] = false;
        const RocCurve roc = roc_auc(scores, truths);
        CHECK(std::abs(roc.auc - oracle::concordance(scores, truths)) <= 1e-12);

        CHECK(roc.points.front().fpr == 0.0);
        CHECK(roc.points.front().tpr == 0.0);
        CHECK(roc.points.back().fpr == 1.0);
        CHECK(roc.points.back().tpr == 1.0);
        for (std::size_t i = 1; i < roc.points.size(); ++i) {
            CHECK(roc.points[i].fpr >= roc.points[i - 1].fpr);
            CHECK(roc.points[i].tpr >= roc.points[i - 1].tpr);
        }

        // Strictly increasing transforms leave the AUC unchanged.
        std::vector<double> warped;
        for (double s : scores) warped.push_back(std::exp(3.0 * s) - 10.0);
        CHECK(roc_auc(warped, truths).auc == roc.auc);
    }
}

TEST_CASE("metrics_at_cutoff worked examples") {
    const ThresholdMetrics perfect = metrics_at_cutoff(std::vector<double>{0.9, 0.7, 0.1, 0.3}, {true, true, false, false}, 0.5);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.specificity == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.precision == 1.0);

    const ThresholdMetrics none = metrics_at_cutoff(std::vector<double>{0.1, 0.2, 0.3}, {true, false, false}, 0.5);
    CHECK(none.recall == 0.0);
    CHECK(none.specificity == 1.0);
    CHECK_FALSE(none.precision.has_value());

    // TP 3, FP 1, TN 5, FN 1.
    const std::vector<double> s{0.9, 0.9, 0.9, 0.9, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
    const std::vector<bool> t{true, true, true, false, true, false, false, false, false, false};
    const ThresholdMetrics m = metrics_at_cutoff(s, t, 0.45);
    CHECK(m.tp == 3);
    CHECK(m.fp == 1);
    CHECK(m.tn == 5);
    CHECK(m.fn == 1);
    CHECK(m.accuracy == doctest::Approx(0.8));
    CHECK(m.specificity == doctest::Approx(5.0 / 6.0));
    CHECK(m.recall == doctest::Approx(0.75));
    CHECK(*m.precision == doctest::Approx(0.75));

    // A score equal to the cutoff is not positive.
    CHECK(metrics_at_cutoff(std::vector<double>{0.45, 0.1}, {true, false}, 0.45).tp == 0);
}

TEST_CASE("summarize reports the sample standard deviation") {
    const Summary s = summarize(std::vector<double>{1.0, 2.0, 3.0, 4.0});
    CHECK(s.mean == 2.5);
    CHECK(s.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(summarize(std::vector<double>{0.7}).sd == 0.0);
    CHECK(summarize(std::vector<double>{}).n == 0);
}

TEST_CASE("run_cv separates a separable cohort and is deterministic") {
    const Fake f = fake_cohort(10, 10, 20, 5, 3.0);
    const CvConfig cfg = small_config(20, 5);
    const CvResult a = run_cv(f.manifest, f.features, cfg, 9);
    CHECK(a.folds.size() == 5);
    CHECK(a.report.auc.mean >= 0.9);
    for (const auto& fold : a.folds) {
        CHECK(fold.patients.size() == 4);
        // 16 training patients; 8 pathological with one LU patch each.
        CHECK(fold.training_rows == 16 * 4 + 8);
        CHECK(fold.duplicated_rows == 8);
        for (const auto& p : fold.patients) {
            CHECK(p.score >= 0.0);
            CHECK(p.score <= 1.0);
        }
    }
    CvConfig threaded = cfg;
    threaded.threads = 3;
    const CvResult b = run_cv(f.manifest, f.features, threaded, 9);
    CHECK(cv_folds_csv(a) == cv_folds_csv(b));
    CHECK(cv_patients_csv(a) == cv_patients_csv(b));
    CHECK(roc_csv(a) == roc_csv(b));
}

TEST_CASE("run_cv never trains on held-out patients") {
    const Fake f = fake_cohort(6, 6, 10, 2, 1.0);
    const CvResult cv = run_cv(f.manifest, f.features, small_config(10, 5), 4);
    const FoldPlan plan = kfold_by_patient(f.manifest, 5, 4);
    std::size_t total_rows = 0;
    for (const auto& fold : cv.folds) {
        std::size_t held_out_rows = 0;
        for (const auto& p : fold.patches) {
            CHECK(plan.assignment.at(f.manifest.records[p.record].patient_id) == fold.fold);
            held_out_rows += f.manifest.records[p.record].label == Label3::path_lu ? 2 : 1;
        }
        total_rows += held_out_rows;
        // Training rows are exactly the rows of the other folds.
        CHECK(fold.training_rows + held_out_rows == training_rows(f.manifest, true).rows.size());
    }
    CHECK(total_rows == training_rows(f.manifest, true).rows.size());
}

TEST_CASE("run_cv rejects single-class cohorts per fold") {
    Fake f = fake_cohort(6, 0, 10, 2, 0.0);
    CHECK_THROWS_AS(run_cv(f.manifest, f.features, small_config(10, 5), 1), ContractError);
}

TEST_CASE("band_importance is zero when all learners agree") {
    Fake f = fake_cohort(8, 8, 20, 3, 2.0, 20);
    // Identical components make every band learner the same tree.
    for (auto& p : f.features.patches)
        for (std::size_t px = 0; px < kMaskPixels; ++px)
            for (std::size_t k = 1; k < 20; ++k) p.signatures[px * 20 + k] = p.signatures[px * 20];
    const BandImportance bi = band_importance(f.manifest, f.features, small_config(20, 5), 1);
    REQUIRE(bi.drop.size() == 4);
    for (double d : bi.drop) CHECK(d == 0.0);
}

TEST_CASE("band_importance drops are bounded and favour informative bands") {
    const Fake f = fake_cohort(10, 10, 20, 8, 1.5, 5);
    const BandImportance bi = band_importance(f.manifest, f.features, small_config(20, 5), 2);
    for (double d : bi.drop) {
        CHECK(d >= -1.0);
        CHECK(d <= 1.0);
    }
    CHECK(bi.drop[0] >= *std::max_element(bi.drop.begin() + 1, bi.drop.end()));
    CHECK_THROWS_AS(band_importance(f.manifest, f.features, small_config(20, 20), 2), ContractError);
}

TEST_CASE("ablation_scales emits one row per setting and rejects bad scales") {
    const Fake f = fake_cohort(5, 5, 120, 4, 1.0);
    CvConfig cfg = small_config(120, 5);
    cfg.folds = 2;
    const std::vector<std::size_t> scales{3, 4, 5, 6, 8, 10, 12, 15};
    const auto rows = ablation_scales(f.manifest, f.features, scales, {false}, {LearnerMode::tree}, cfg, 1);
    REQUIRE(rows.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) CHECK(rows[i].scales_per_band == scales[i]);
    CHECK(rows[2].report.auc.mean == run_cv(f.manifest, f.features, cfg, 1).report.auc.mean);
    CHECK_THROWS_AS(ablation_scales(f.manifest, f.features, {5, 7}, {false}, {LearnerMode::tree}, cfg, 1),
                    ContractError);
    CHECK(ablation_scales(f.manifest, f.features, {120}, {false}, {LearnerMode::tree}, cfg, 1).size() == 1);
}

TEST_CASE("component_sweep covers 20..120 and 120 matches the baseline") {
    const auto counts = default_sweep_counts();
    REQUIRE(counts.size() == 11);
    CHECK(counts.front() == 20);
    CHECK(counts.back() == 120);

    const Fake f = fake_cohort(5, 5, 120, 6, 1.0);
    CvConfig cfg = small_config(120, 5);
    cfg.folds = 2;
    const auto sweep = component_sweep(f.manifest, f.features, {60, 120}, cfg, 3);
    REQUIRE(sweep.size() == 2);
    const CvResult base = run_cv(f.manifest, f.features, cfg, 3);
    CHECK(sweep[1].report.auc.mean == base.report.auc.mean);
    CHECK(sweep[1].report.accuracy.mean == base.report.accuracy.mean);
    CHECK_THROWS_AS(component_sweep(f.manifest, f.features, {22}, cfg, 3), ContractError);
    CHECK_THROWS_AS(component_sweep(f.manifest, f.features, {130}, cfg, 3), ContractError);
}

TEST_CASE("mean_spectrum_by_class averages per class") {
    Fake f = fake_cohort(2, 2, 8, 1, 0.0);
    const ClassSpectra s = mean_spectrum_by_class(f.manifest, f.features);
    for (int c = 0; c < kLabelCount; ++c)
        for (double v : s.mean[c]) CHECK(v == double(c) + 1.0);
    CHECK(s.patches[static_cast<int>(Label3::path_lu)] == 2);

    for (auto& p : f.features.patches) std::fill(p.spectrum.begin(), p.spectrum.end(), 0.0);
    for (const auto& m : mean_spectrum_by_class(f.manifest, f.features).mean)
        for (double v : m) CHECK(v == 0.0);

    // A class with a single patch reports that patch's spectrum.
    Fake one = fake_cohort(1, 1, 4, 2, 0.0);
    one.manifest.records.erase(one.manifest.records.begin() + 7);
    one.features.patches.erase(one.features.patches.begin() + 7);
    one.features.patches[6].spectrum = {1.0, 2.0, 3.0, 4.0};
    CHECK(mean_spectrum_by_class(one.manifest, one.features).mean[1] == std::vector<double>{1.0, 2.0, 3.0, 4.0});

    Fake healthy = fake_cohort(2, 0, 4, 1, 0.0);
    CHECK_THROWS_AS(mean_spectrum_by_class(healthy.manifest, healthy.features), ContractError);
}

TEST_CASE("format_number round-trips") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5, 0.0}) CHECK(std::stod(format_number(v)) == v);
}
