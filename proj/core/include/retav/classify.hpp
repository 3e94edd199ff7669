#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "retav/features.hpp"

namespace retav {

enum class ClassifierKind {
  naive_bayes,
  cart,
  random_tree,
  random_forest,
  bagging_cart,
  majority_voting,
  prototype_lbp,
};

const char* to_string(ClassifierKind kind);
ClassifierKind classifier_kind_from_string(const std::string& s);

struct Hyperparams {
  int trees = 100;     // random_forest / bagging_cart ensemble size
  int max_depth = 0;   // tree family; 0 = grow to purity
  int min_leaf = 1;    // minimum samples on each side of a split
  std::vector<ClassifierKind> voting_members{ClassifierKind::naive_bayes, ClassifierKind::cart,
                                             ClassifierKind::random_tree};
};

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::random_forest;
  std::uint64_t seed = 0;
  Hyperparams params;
};

void validate(const ClassifierSpec& spec);

struct Prediction {
  VesselClass cls = VesselClass::vein;
  double artery_score = 0.0;  // in [0,1]; cls is artery iff score >= 0.5
};

// --------------------------------------------------------------------------
// Learned payloads (public so tests can assemble models directly)

struct NaiveBayesModel {
  double log_prior_artery = 0.0;
  double log_prior_vein = 0.0;
  std::vector<double> mean_artery, var_artery;
  std::vector<double> mean_vein, var_vein;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double artery_fraction = 0.0;  // leaves only
};

struct DecisionTreeModel {
  std::vector<TreeNode> nodes;  // root at 0
};

struct ForestModel {
  std::vector<DecisionTreeModel> trees;
};

/// Per-class mean histograms, one block per scale; scored by summed
/// chi-square distance over the blocks.
struct PrototypeModel {
  std::vector<int> blocks;
  std::vector<double> artery;
  std::vector<double> vein;
};

struct TrainedModel;

struct VotingModel {
  std::vector<TrainedModel> members;
};

struct TrainedModel {
  ClassifierSpec spec;
  std::string schema_id;
  std::uint64_t n_features = 0;
  std::uint64_t n_artery = 0;
  std::uint64_t n_vein = 0;
  std::variant<NaiveBayesModel, DecisionTreeModel, ForestModel, VotingModel, PrototypeModel>
      payload;
};

/// Deterministic fit: the same spec, seed and dataset always produce a
/// bit-identical model. Order-free kinds (naive_bayes, prototype_lbp) are
/// additionally invariant to sample order.
TrainedModel train(const ClassifierSpec& spec, const Dataset& ds);

Prediction predict(const TrainedModel& model, const FeatureVector& fv);
Prediction predict(const TrainedModel& model, const std::vector<double>& values);

/// Versioned binary container; round trips preserve every prediction
/// bit-exactly. Truncated files and unknown future versions are errors.
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace retav
