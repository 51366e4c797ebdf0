#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stv/dataset.hpp"
#include "stv/ensemble.hpp"
#include "stv/features.hpp"

namespace stv {

struct FoldPlan {
    std::size_t k = 10;
    std::uint64_t seed = 0;
    std::map<std::string, std::size_t> assignment;  // patient -> fold

    /// Patients of one fold, in manifest order.
    std::vector<std::string> patients(std::size_t fold, const Manifest& manifest) const;
};

/// Stratified patient-level folds: each status group is shuffled with the seed
/// and dealt round-robin, the normal group continuing where the pathological
/// group stopped.
FoldPlan kfold_by_patient(const Manifest& manifest, std::size_t k = 10, std::uint64_t seed = 0);

struct RocPoint {
    double threshold;  // predicted positive iff score >= threshold
    double fpr;
    double tpr;
};

struct RocCurve {
    std::vector<RocPoint> points;  // from (0,0) to (1,1)
    double auc = 0.0;
};

/// Empirical ROC and its trapezoidal area, which equals the pairwise
/// concordance with ties counted one half. Throws ContractError unless both
/// classes are present.
RocCurve roc_auc(std::span<const double> scores, const std::vector<bool>& truths);

struct ThresholdMetrics {
    double accuracy = 0.0;
    double specificity = 0.0;
    double recall = 0.0;
    std::optional<double> precision;  // absent without positive predictions
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Confusion-matrix metrics with "pathological" positive and decision score > cutoff.
ThresholdMetrics metrics_at_cutoff(std::span<const double> scores, const std::vector<bool>& truths, double cutoff);

/// Mean and sample standard deviation over the folds where the value exists.
struct Summary {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
};
Summary summarize(std::span<const double> values);

struct MetricsReport {
    double cutoff = kDefaultCutoff;
    Summary auc, accuracy, specificity, recall, precision;
};

struct CvConfig {
    EnsembleConfig ensemble;
    double p_enh = 1.0;
    std::size_t folds = 10;
    bool duplicate_lu = true;
    std::size_t threads = 1;
};

struct PatientResult {
    std::string id;
    bool truth = false;
    double score = 0.0;
    bool predicted = false;
};

/// Learner tags of one held-out patch: 13 pixels x band count, pixel-major.
struct PatchTags {
    std::size_t record = 0;
    std::vector<std::uint8_t> tags;
};

struct FoldResult {
    std::size_t fold = 0;
    std::size_t training_rows = 0;
    std::size_t duplicated_rows = 0;
    std::vector<PatientResult> patients;  // held-out patients
    RocCurve roc;
    ThresholdMetrics metrics;
    std::vector<PatchTags> patches;
};

struct CvResult {
    MetricsReport report;
    std::vector<FoldResult> folds;
    std::size_t band_count = 0;
};

/// Enhanced signature rows of the given records, truncated to n components.
SignatureRows signature_rows(const Manifest& manifest, const FeatureSet& features,
                             std::span<const TrainingRow> rows, std::size_t n_components, double p_enh);

/// Patient scores from per-record patch scores: vertebra means, then the maximum.
std::vector<PatientResult> patient_results(const Manifest& manifest, const std::vector<std::string>& patients,
                                           const std::map<std::size_t, double>& patch_scores, double cutoff);

/// Scores every patient of the manifest with a trained model.
std::vector<PatientResult> score_patients(const EnsembleModel& model, const Manifest& manifest,
                                          const FeatureSet& features, double p_enh);

/// Patient-level k-fold cross-validation. Signatures are truncated to
/// config.ensemble.bands.n_components and then enhanced. Folds run on up to
/// config.threads workers and are combined in fold order.
CvResult run_cv(const Manifest& manifest, const FeatureSet& features, const CvConfig& config, std::uint64_t seed);

struct BandImportance {
    double auc_all = 0.0;
    std::vector<double> auc_without;  // per band
    std::vector<double> drop;         // auc_all - auc_without
};

/// AUC drop per excluded band, from the stored learner tags of a CV run.
/// Per-fold AUCs are averaged as in the metrics report.
BandImportance band_importance(const Manifest& manifest, const CvResult& cv);
BandImportance band_importance(const Manifest& manifest, const FeatureSet& features, const CvConfig& config,
                               std::uint64_t seed);

struct AblationRow {
    std::size_t scales_per_band = 5;
    bool overlapping = false;
    LearnerMode mode = LearnerMode::tree;
    MetricsReport report;
};

/// One run_cv per (s, overlapping, mode) combination, s outermost.
std::vector<AblationRow> ablation_scales(const Manifest& manifest, const FeatureSet& features,
                                         const std::vector<std::size_t>& scales, const std::vector<bool>& overlapping,
                                         const std::vector<LearnerMode>& modes, const CvConfig& base,
                                         std::uint64_t seed);

/// 20, 30, ..., 120.
std::vector<std::size_t> default_sweep_counts();

struct SweepPoint {
    std::size_t components = 0;
    MetricsReport report;
};

std::vector<SweepPoint> component_sweep(const Manifest& manifest, const FeatureSet& features,
                                        const std::vector<std::size_t>& counts, const CvConfig& base,
                                        std::uint64_t seed);

struct ClassSpectra {
    std::array<std::vector<double>, kLabelCount> mean;  // indexed by Label3
    std::array<std::size_t, kLabelCount> patches{};
};

/// Mean masked spectrum per class. Throws ContractError if a class has no patch.
ClassSpectra mean_spectrum_by_class(const Manifest& manifest, const FeatureSet& features);

// CSV reports. Numbers use the shortest round-trip representation.
std::string format_number(double v);
std::string cv_folds_csv(const CvResult& cv);
std::string cv_patients_csv(const CvResult& cv);
std::string patients_csv(const std::vector<PatientResult>& patients);
/// One-row AUC and threshold metrics of a scored patient set.
std::string metrics_csv(const std::vector<PatientResult>& patients, double cutoff);
std::string roc_csv(const CvResult& cv);
std::string band_importance_csv(const BandImportance& bi);
std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string sweep_csv(const std::vector<SweepPoint>& points);
std::string spectra_csv(const ClassSpectra& spectra);

}  // namespace stv
