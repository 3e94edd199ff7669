#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "retav/classify.hpp"
#include "retav/features.hpp"

namespace retav {

/// Stratified fold partition: folds differ by at most one sample in total
/// size and at most one per class.
struct FoldAssignment {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> fold_of;  // sample index -> fold index
};

FoldAssignment stratified_kfold(const std::vector<VesselClass>& labels, int k,
                                std::uint64_t seed);

/// Whole images assigned to folds to avoid same-image leakage; stratification
/// is not guaranteed in this mode.
FoldAssignment group_kfold(const std::vector<std::string>& image_ids, int k, std::uint64_t seed);

/// Artery counts as positive.
struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::uint64_t total() const { return tp + fp + tn + fn; }
  void add(VesselClass truth, VesselClass predicted) {
    if (truth == VesselClass::artery)
      (predicted == VesselClass::artery ? tp : fn)++;
    else
      (predicted == VesselClass::artery ? fp : tn)++;
  }
};

/// 100 * (TP + TN) / (TP + FP + TN + FN).
double recognition_rate(const ConfusionCounts& c);

/// Rank-based AUC: probability a random artery outscores a random vein, ties
/// counted half. Equals the trapezoidal area under the ROC curve.
double roc_auc(const std::vector<double>& scores, const std::vector<VesselClass>& labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};
std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<VesselClass>& labels);

struct EvalReport {
  ClassifierSpec spec;
  std::string schema_id;
  int k = 0;
  std::uint64_t cv_seed = 0;
  bool group_by_image = false;
  std::uint64_t n_artery = 0, n_vein = 0;
  std::vector<ConfusionCounts> fold_confusion;
  ConfusionCounts pooled;  // held-out predictions pooled over folds
  double recognition_rate_percent = 0.0;
  double auc = 0.0;
  std::vector<RocPoint> roc;
  /// Resolved run configuration, echoed verbatim into the emitted report.
  std::vector<std::pair<std::string, std::string>> config_echo;
};

/// k-fold cross-validation: train on k-1 folds, score the held-out fold,
/// pool the held-out predictions for the headline metrics (per-fold counts
/// are kept for dispersion).
EvalReport cross_validate(const ClassifierSpec& spec, const Dataset& ds, int k,
                          std::uint64_t seed, bool group_by_image = false);

struct ComparisonCell {
  double recognition_rate = 0.0;
  double auc = 0.0;
};

/// Recognition-rate / AUC matrix over (classifier, feature schema) with
/// per-schema averages and competition ranks (1 = best average).
struct ComparisonTable {
  std::vector<std::string> schema_ids;
  std::vector<std::string> classifier_names;
  std::vector<std::vector<ComparisonCell>> cells;  // [classifier][schema]
  std::vector<double> avg_rate, avg_auc;
  std::vector<int> rank_rate, rank_auc;
  int k = 0;
  std::uint64_t cv_seed = 0;
};

/// All datasets must describe the same underlying segments (same image ids,
/// segment ids and labels in the same order); folds are then identical
/// across schemas.
ComparisonTable compare(const std::vector<ClassifierSpec>& specs,
                        const std::vector<Dataset>& datasets, int k, std::uint64_t seed);

std::string render_report_text(const EvalReport& report);
std::string render_report_json(const EvalReport& report);
void save_report(const EvalReport& report, const std::string& text_path,
                 const std::string& json_path);

std::string render_comparison_text(const ComparisonTable& table);

}  // namespace retav
