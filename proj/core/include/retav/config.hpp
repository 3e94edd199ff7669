#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "retav/classify.hpp"
#include "retav/features.hpp"
#include "retav/synth.hpp"

namespace retav {

/// Flat key=value run configuration. Every tunable default of the pipeline
/// lives here; unknown keys are rejected so typos cannot silently fall back
/// to defaults. The resolved table is embedded in every emitted report.
class RunConfig {
 public:
  /// Built-in defaults for every key.
  RunConfig();

  /// Defaults overridden by a key=value file ('#' comments, blank lines ok).
  static RunConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  bool get_bool(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;

  /// Resolved entries in registry order (stable across runs).
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  // Typed views over the relevant key groups.
  PipelineParams pipeline() const;
  ClassifierSpec classifier_spec() const;
  SynthParams synth_params() const;
  int cv_folds() const { return get_int("cv.folds"); }
  std::uint64_t cv_seed() const { return get_u64("cv.seed"); }
  bool cv_group_by_image() const { return get_bool("cv.group_by_image"); }
  int pca_components() const { return get_int("pca.components"); }

 private:
  std::size_t index_of(const std::string& key) const;
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace retav
