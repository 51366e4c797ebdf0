#include "stv/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "stv/image.hpp"
#include "stv/parallel.hpp"
#include "stv/rng.hpp"
#include "stv/spectral.hpp"

namespace stv {

std::vector<std::string> FoldPlan::patients(std::size_t fold, const Manifest& manifest) const {
    std::vector<std::string> out;
    for (const auto& id : manifest.patients())
        if (assignment.at(id) == fold) out.push_back(id);
    return out;
}

FoldPlan kfold_by_patient(const Manifest& manifest, std::size_t k, std::uint64_t seed) {
    const auto ids = manifest.patients();
    if (k < 2) throw ContractError("kfold_by_patient: need at least 2 folds");
    if (k > ids.size())
        throw ContractError("kfold_by_patient: " + std::to_string(k) + " folds for " + std::to_string(ids.size()) +
                            " patients");
    const auto status = manifest.patient_status();
    std::array<std::vector<std::string>, 2> groups;  // pathological, normal
    for (const auto& id : ids) groups[status.at(id) ? 0 : 1].push_back(id);

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    std::size_t dealt = 0;
    for (std::size_t g = 0; g < 2; ++g) {
        auto& group = groups[g];
        Rng rng(mix_seed({seed, g}));
        for (std::size_t i = group.size(); i > 1; --i)
            std::swap(group[i - 1], group[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i) - 1))]);
        for (const auto& id : group) plan.assignment[id] = dealt++ % k;
    }
    return plan;
}

namespace {

void require_binary(std::span<const double> scores, const std::vector<bool>& truths, const char* what) {
    if (scores.size() != truths.size())
        throw ContractError(std::string(what) + ": " + std::to_string(scores.size()) + " scores for " +
                            std::to_string(truths.size()) + " truths");
    const auto pos = static_cast<std::size_t>(std::count(truths.begin(), truths.end(), true));
    if (pos == 0 || pos == truths.size())
        throw ContractError(std::string(what) + ": degenerate truth vector (single class)");
    for (double s : scores)
        if (std::isnan(s)) throw ContractError(std::string(what) + ": NaN score");
}

}  // namespace

RocCurve roc_auc(std::span<const double> scores, const std::vector<bool>& truths) {
    require_binary(scores, truths, "roc_auc");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const double pos = static_cast<double>(std::count(truths.begin(), truths.end(), true));
    const double neg = static_cast<double>(truths.size()) - pos;

    RocCurve roc;
    roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    // Tied scores form one step, which contributes the one-half tie credit.
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == s; ++i) (truths[order[i]] ? tp : fp)++;
        const RocPoint p{s, fp / neg, tp / pos};
        const RocPoint& q = roc.points.back();
        roc.auc += (p.fpr - q.fpr) * (p.tpr + q.tpr) / 2.0;
        roc.points.push_back(p);
    }
    return roc;
}

ThresholdMetrics metrics_at_cutoff(std::span<const double> scores, const std::vector<bool>& truths, double cutoff) {
    require_binary(scores, truths, "metrics_at_cutoff");
    ThresholdMetrics m;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] > cutoff;
        if (truths[i]) (predicted ? m.tp : m.fn)++;
        else (predicted ? m.fp : m.tn)++;
    }
    m.accuracy = double(m.tp + m.tn) / double(scores.size());
    m.specificity = double(m.tn) / double(m.tn + m.fp);
    m.recall = double(m.tp) / double(m.tp + m.fn);
    if (m.tp + m.fp > 0) m.precision = double(m.tp) / double(m.tp + m.fp);
    return m;
}

Summary summarize(std::span<const double> values) {
    Summary s;
    s.n = values.size();
    if (s.n == 0) return s;
    for (double v : values) s.mean += v;
    s.mean /= double(s.n);
    if (s.n < 2) return s;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / double(s.n - 1));
    return s;
}

SignatureRows signature_rows(const Manifest& manifest, const FeatureSet& features, std::span<const TrainingRow> rows,
                             std::size_t n_components, double p_enh) {
    const std::size_t n = features.n_components();
    if (n_components == 0 || n_components > n)
        throw ContractError("signature_rows: cannot take " + std::to_string(n_components) + " of " +
                            std::to_string(n) + " components");
    if (features.patches.size() != manifest.records.size())
        throw ContractError("signature_rows: feature set does not match the manifest");
    SignatureRows out;
    out.n_features = n_components;
    out.values.reserve(rows.size() * kMaskPixels * n_components);
    std::vector<double> sig(n_components);
    for (const TrainingRow& row : rows) {
        const PatchFeatures& pf = features.patches.at(row.record);
        for (std::size_t i = 0; i < kMaskPixels; ++i) {
            const auto full = pf.pixel(i, n);
            std::copy_n(full.begin(), n_components, sig.begin());
            enhance_in_place(sig, p_enh);
            out.push(sig, row.label);
        }
    }
    return out;
}

std::vector<PatientResult> patient_results(const Manifest& manifest, const std::vector<std::string>& patients,
                                           const std::map<std::size_t, double>& patch_scores, double cutoff) {
    std::vector<PatientResult> out;
    const auto status = manifest.patient_status();
    for (const auto& id : patients) {
        std::vector<std::string> order;
        std::map<std::string, std::vector<double>> by_vertebra;
        for (std::size_t i = 0; i < manifest.records.size(); ++i) {
            const auto& r = manifest.records[i];
            if (r.patient_id != id) continue;
            if (!by_vertebra.contains(r.vertebra_id)) order.push_back(r.vertebra_id);
            by_vertebra[r.vertebra_id].push_back(patch_scores.at(i));
        }
        std::vector<double> vertebra_scores;
        for (const auto& v : order) vertebra_scores.push_back(score_vertebra(by_vertebra[v]));
        const PatientDecision d = classify_patient(vertebra_scores, cutoff);
        out.push_back({id, status.at(id), d.score, d.pathological});
    }
    return out;
}

namespace {

std::vector<double> scores_of(const std::vector<PatientResult>& patients) {
    std::vector<double> s;
    for (const auto& p : patients) s.push_back(p.score);
    return s;
}

std::vector<bool> truths_of(const std::vector<PatientResult>& patients) {
    std::vector<bool> t;
    for (const auto& p : patients) t.push_back(p.truth);
    return t;
}

// Patch score with band `skip` left out (skip == band count keeps all bands).
double patch_score_from_tags(const PatchTags& patch, std::size_t bands, std::size_t skip) {
    std::array<double, kMaskPixels> pixel{};
    const double denom = double(skip < bands ? bands - 1 : bands);
    for (std::size_t i = 0; i < kMaskPixels; ++i) {
        double sum = 0.0;
        for (std::size_t b = 0; b < bands; ++b)
            if (b != skip) sum += patch.tags[i * bands + b];
        pixel[i] = sum / denom;
    }
    return patch_score_from_pixels(pixel);
}

MetricsReport summarize_folds(const std::vector<FoldResult>& folds, double cutoff) {
    std::vector<double> auc, acc, spec, rec, prec;
    for (const auto& f : folds) {
        auc.push_back(f.roc.auc);
        acc.push_back(f.metrics.accuracy);
        spec.push_back(f.metrics.specificity);
        rec.push_back(f.metrics.recall);
        if (f.metrics.precision) prec.push_back(*f.metrics.precision);
    }
    return {cutoff, summarize(auc), summarize(acc), summarize(spec), summarize(rec), summarize(prec)};
}

}  // namespace

std::vector<PatientResult> score_patients(const EnsembleModel& model, const Manifest& manifest,
                                          const FeatureSet& features, double p_enh) {
    const std::size_t n = model.bands.n_components;
    if (n > features.n_components())
        throw ContractError("score_patients: model expects " + std::to_string(n) + " components, features hold " +
                            std::to_string(features.n_components()));
    if (features.patches.size() != manifest.records.size())
        throw ContractError("score_patients: feature set does not match the manifest");
    std::map<std::size_t, double> patch_scores;
    std::vector<double> sig(n);
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        std::array<double, kMaskPixels> pixel{};
        for (std::size_t p = 0; p < kMaskPixels; ++p) {
            const auto full = features.patches[i].pixel(p, features.n_components());
            std::copy_n(full.begin(), n, sig.begin());
            enhance_in_place(sig, p_enh);
            pixel[p] = predict_pixel(model, sig);
        }
        patch_scores[i] = patch_score_from_pixels(pixel);
    }
    return patient_results(manifest, manifest.patients(), patch_scores, model.cutoff);
}

CvResult run_cv(const Manifest& manifest, const FeatureSet& features, const CvConfig& config, std::uint64_t seed) {
    const BandConfig& bands = config.ensemble.bands;
    const std::size_t n_bands = bands.band_count();
    const std::size_t n = bands.n_components;
    if (n > features.n_components())
        throw ContractError("run_cv: " + std::to_string(n) + " components requested, features hold " +
                            std::to_string(features.n_components()));
    if (features.patches.size() != manifest.records.size())
        throw ContractError("run_cv: feature set does not match the manifest");
    const FoldPlan plan = kfold_by_patient(manifest, config.folds, seed);

    CvResult cv;
    cv.band_count = n_bands;
    cv.folds.resize(plan.k);
    parallel_for(plan.k, config.threads, [&](std::size_t f) {
        FoldResult& out = cv.folds[f];
        out.fold = f;
        const auto train = training_rows(manifest, config.duplicate_lu, [&](const PatchRecord& r) {
            return plan.assignment.at(r.patient_id) != f;
        });
        for (const auto& row : train.rows)
            if (plan.assignment.at(manifest.records[row.record].patient_id) == f)
                throw std::logic_error("run_cv: held-out patch reached training");
        out.training_rows = train.rows.size();
        out.duplicated_rows = train.duplicated;
        if (train.rows.empty()) throw ContractError("run_cv: fold " + std::to_string(f) + " has no training rows");

        const SignatureRows data = signature_rows(manifest, features, train.rows, n, config.p_enh);
        const EnsembleModel model = fit_band_ensemble(data, config.ensemble, mix_seed({seed, f}), 1);

        const auto test_patients = plan.patients(f, manifest);
        const std::set<std::string> test_set(test_patients.begin(), test_patients.end());
        std::map<std::size_t, double> patch_scores;
        std::vector<double> sig(n);
        for (std::size_t i = 0; i < manifest.records.size(); ++i) {
            if (!test_set.contains(manifest.records[i].patient_id)) continue;
            PatchTags patch{i, {}};
            patch.tags.reserve(kMaskPixels * n_bands);
            for (std::size_t p = 0; p < kMaskPixels; ++p) {
                const auto full = features.patches[i].pixel(p, features.n_components());
                std::copy_n(full.begin(), n, sig.begin());
                enhance_in_place(sig, config.p_enh);
                for (int t : model.band_tags(sig)) patch.tags.push_back(static_cast<std::uint8_t>(t));
            }
            patch_scores[i] = patch_score_from_tags(patch, n_bands, n_bands);
            out.patches.push_back(std::move(patch));
        }
        out.patients = patient_results(manifest, test_patients, patch_scores, config.ensemble.cutoff);
        const auto scores = scores_of(out.patients);
        const auto truths = truths_of(out.patients);
        try {
            out.roc = roc_auc(scores, truths);
            out.metrics = metrics_at_cutoff(scores, truths, config.ensemble.cutoff);
        } catch (const ContractError& e) {
            throw ContractError("fold " + std::to_string(f) + ": " + e.what());
        }
    });
    cv.report = summarize_folds(cv.folds, config.ensemble.cutoff);
    return cv;
}

BandImportance band_importance(const Manifest& manifest, const CvResult& cv) {
    const std::size_t bands = cv.band_count;
    if (bands < 2) throw ContractError("band_importance: needs at least 2 bands");
    BandImportance bi;
    bi.auc_all = cv.report.auc.mean;
    for (std::size_t b = 0; b < bands; ++b) {
        std::vector<double> aucs;
        for (const FoldResult& fold : cv.folds) {
            std::map<std::size_t, double> patch_scores;
            for (const auto& patch : fold.patches) patch_scores[patch.record] = patch_score_from_tags(patch, bands, b);
            std::vector<std::string> ids;
            for (const auto& p : fold.patients) ids.push_back(p.id);
            const auto patients = patient_results(manifest, ids, patch_scores, cv.report.cutoff);
            aucs.push_back(roc_auc(scores_of(patients), truths_of(patients)).auc);
        }
        bi.auc_without.push_back(summarize(aucs).mean);
        bi.drop.push_back(bi.auc_all - bi.auc_without.back());
    }
    return bi;
}

BandImportance band_importance(const Manifest& manifest, const FeatureSet& features, const CvConfig& config,
                               std::uint64_t seed) {
    if (config.ensemble.bands.band_count() < 2) throw ContractError("band_importance: needs at least 2 bands");
    return band_importance(manifest, run_cv(manifest, features, config, seed));
}

std::vector<AblationRow> ablation_scales(const Manifest& manifest, const FeatureSet& features,
                                         const std::vector<std::size_t>& scales, const std::vector<bool>& overlapping,
                                         const std::vector<LearnerMode>& modes, const CvConfig& base,
                                         std::uint64_t seed) {
    std::vector<AblationRow> rows;
    for (std::size_t s : scales)
        for (bool ov : overlapping)
            for (LearnerMode mode : modes) {
                AblationRow row{s, ov, mode, {}};
                BandConfig bands = base.ensemble.bands;
                bands.scales_per_band = s;
                bands.overlapping = ov;
                bands.validate();  // reject bad s before any run starts
                rows.push_back(row);
            }
    for (AblationRow& row : rows) {
        CvConfig config = base;
        config.ensemble.bands.scales_per_band = row.scales_per_band;
        config.ensemble.bands.overlapping = row.overlapping;
        config.ensemble.mode = row.mode;
        row.report = run_cv(manifest, features, config, seed).report;
    }
    return rows;
}

std::vector<std::size_t> default_sweep_counts() {
    std::vector<std::size_t> counts;
    for (std::size_t c = 20; c <= 120; c += 10) counts.push_back(c);
    return counts;
}

std::vector<SweepPoint> component_sweep(const Manifest& manifest, const FeatureSet& features,
                                        const std::vector<std::size_t>& counts, const CvConfig& base,
                                        std::uint64_t seed) {
    for (std::size_t c : counts) {
        if (c > features.n_components())
            throw ContractError("component_sweep: " + std::to_string(c) + " exceeds the " +
                                std::to_string(features.n_components()) + " available components");
        BandConfig bands = base.ensemble.bands;
        bands.n_components = c;
        bands.validate();
    }
    std::vector<SweepPoint> out;
    for (std::size_t c : counts) {
        CvConfig config = base;
        config.ensemble.bands.n_components = c;
        out.push_back({c, run_cv(manifest, features, config, seed).report});
    }
    return out;
}

ClassSpectra mean_spectrum_by_class(const Manifest& manifest, const FeatureSet& features) {
    if (features.patches.size() != manifest.records.size())
        throw ContractError("mean_spectrum_by_class: feature set does not match the manifest");
    ClassSpectra out;
    const std::size_t n = features.n_components();
    for (auto& m : out.mean) m.assign(n, 0.0);
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const int c = static_cast<int>(manifest.records[i].label);
        const auto& s = features.patches[i].spectrum;
        for (std::size_t k = 0; k < n; ++k) out.mean[c][k] += s[k];
        ++out.patches[c];
    }
    for (int c = 0; c < kLabelCount; ++c) {
        if (out.patches[c] == 0)
            throw ContractError("mean_spectrum_by_class: no " + std::string(to_string(static_cast<Label3>(c))) +
                                " patch");
        for (double& v : out.mean[c]) v /= double(out.patches[c]);
    }
    return out;
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::string summary_cells(const Summary& s) {
    return s.n ? format_number(s.mean) + "," + format_number(s.sd) : std::string(",");
}

const char* mode_name(LearnerMode m) { return m == LearnerMode::tree ? "tree" : "forest"; }

}  // namespace

std::string cv_folds_csv(const CvResult& cv) {
    std::string out = "fold,test_patients,training_rows,duplicated_rows,cutoff,auc,accuracy,specificity,recall,precision\n";
    for (const auto& f : cv.folds)
        out += std::to_string(f.fold) + "," + std::to_string(f.patients.size()) + "," +
               std::to_string(f.training_rows) + "," + std::to_string(f.duplicated_rows) + "," +
               format_number(cv.report.cutoff) + "," + format_number(f.roc.auc) + "," +
               format_number(f.metrics.accuracy) + "," + format_number(f.metrics.specificity) + "," +
               format_number(f.metrics.recall) + "," + opt(f.metrics.precision) + "\n";
    const auto& r = cv.report;
    const auto row = [&](const char* name, auto get) {
        return std::string(name) + ",,,," + format_number(r.cutoff) + "," + get(r.auc) + "," + get(r.accuracy) + "," +
               get(r.specificity) + "," + get(r.recall) + "," + get(r.precision) + "\n";
    };
    out += row("mean", [](const Summary& s) { return s.n ? format_number(s.mean) : std::string(); });
    out += row("sd", [](const Summary& s) { return s.n ? format_number(s.sd) : std::string(); });
    return out;
}

std::string cv_patients_csv(const CvResult& cv) {
    std::string out = "fold,patient_id,truth,score,predicted\n";
    for (const auto& f : cv.folds)
        for (const auto& p : f.patients)
            out += std::to_string(f.fold) + "," + p.id + "," + (p.truth ? "PATHOLOGICAL" : "NORMAL") + "," +
                   format_number(p.score) + "," + (p.predicted ? "PATHOLOGICAL" : "NORMAL") + "\n";
    return out;
}

std::string patients_csv(const std::vector<PatientResult>& patients) {
    std::string out = "patient_id,truth,score,predicted\n";
    for (const auto& p : patients)
        out += p.id + "," + (p.truth ? "PATHOLOGICAL" : "NORMAL") + "," + format_number(p.score) + "," +
               (p.predicted ? "PATHOLOGICAL" : "NORMAL") + "\n";
    return out;
}

std::string metrics_csv(const std::vector<PatientResult>& patients, double cutoff) {
    const auto scores = scores_of(patients);
    const auto truths = truths_of(patients);
    const RocCurve roc = roc_auc(scores, truths);
    const ThresholdMetrics m = metrics_at_cutoff(scores, truths, cutoff);
    return "patients,cutoff,auc,accuracy,specificity,recall,precision\n" + std::to_string(patients.size()) + "," +
           format_number(cutoff) + "," + format_number(roc.auc) + "," + format_number(m.accuracy) + "," +
           format_number(m.specificity) + "," + format_number(m.recall) + "," + opt(m.precision) + "\n";
}

std::string roc_csv(const CvResult& cv) {
    std::string out = "fold,threshold,fpr,tpr\n";
    for (const auto& f : cv.folds)
        for (const auto& p : f.roc.points)
            out += std::to_string(f.fold) + "," + format_number(p.threshold) + "," + format_number(p.fpr) + "," +
                   format_number(p.tpr) + "\n";
    return out;
}

std::string band_importance_csv(const BandImportance& bi) {
    std::string out = "band,auc_all,auc_without,drop\n";
    for (std::size_t b = 0; b < bi.drop.size(); ++b)
        out += std::to_string(b + 1) + "," + format_number(bi.auc_all) + "," + format_number(bi.auc_without[b]) + "," +
               format_number(bi.drop[b]) + "\n";
    return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out =
        "scales_per_band,overlapping,mode,cutoff,accuracy,accuracy_sd,specificity,specificity_sd,recall,recall_sd,"
        "precision,precision_sd,auc,auc_sd\n";
    for (const auto& r : rows)
        out += std::to_string(r.scales_per_band) + "," + (r.overlapping ? "yes" : "no") + "," + mode_name(r.mode) +
               "," + format_number(r.report.cutoff) + "," + summary_cells(r.report.accuracy) + "," +
               summary_cells(r.report.specificity) + "," + summary_cells(r.report.recall) + "," +
               summary_cells(r.report.precision) + "," + summary_cells(r.report.auc) + "\n";
    return out;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
    std::string out = "components,auc,auc_sd\n";
    for (const auto& p : points)
        out += std::to_string(p.components) + "," + summary_cells(p.report.auc) + "\n";
    return out;
}

std::string spectra_csv(const ClassSpectra& spectra) {
    std::string out = "k,mean_s,class\n";
    for (int c = 0; c < kLabelCount; ++c)
        for (std::size_t k = 0; k < spectra.mean[c].size(); ++k)
            out += std::to_string(k + 1) + "," + format_number(spectra.mean[c][k]) + "," +
                   std::string(to_string(static_cast<Label3>(c))) + "\n";
    return out;
}

}  // namespace stv
