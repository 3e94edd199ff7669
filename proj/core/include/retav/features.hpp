#pragma once

#include <optional>
#include <string>
#include <vector>

#include "retav/image.hpp"
#include "retav/lbp.hpp"
#include "retav/segmentation.hpp"
#include "retav/skeleton.hpp"

namespace retav {

/// Which scalar plane feeds the texture operator. Green is the default:
/// vessel contrast is highest there in fundus photography.
enum class FieldMode { red = 0, green = 1, blue = 2, luminance = 3 };

std::string to_string(FieldMode mode);
FieldMode field_mode_from_string(const std::string& s);
ScalarField extract_configured_field(const RasterImage& img, FieldMode mode);

struct FeatureVector {
  std::vector<double> values;
  std::string schema_id;
};

struct Sample {
  std::string image_id;
  int segment_id = 0;
  VesselClass label = VesselClass::vein;
  std::vector<double> values;
};

/// Labeled feature matrix. All samples share one extraction recipe.
struct Dataset {
  std::string schema_id;
  std::vector<Sample> samples;

  std::size_t n_features() const { return samples.empty() ? 0 : samples.front().values.size(); }
};

// ---------------------------------------------------------------------------
// Schema identifiers

std::string lbp_schema_id(const std::vector<LbpConfig>& scales, int window, FieldMode mode);
std::string rgb_schema_id(int half_width);

/// Per-scale histogram block lengths for a schema. LBP schemas decompose into
/// one block per scale; anything else is a single block of the full width.
std::vector<int> schema_blocks(const std::string& schema_id, std::size_t total_dim);

// ---------------------------------------------------------------------------
// Per-segment extraction

/// Multiscale rotation-invariant LBP features: per scale, the average of the
/// per-centerline-pixel region histograms over the segment (renormalized),
/// scales concatenated. Points are aggregated in raster order, so the result
/// is independent of the segment's traversal direction.
FeatureVector segment_lbp_features(const ScalarField& field, const VesselSegment& seg,
                                   const std::vector<LbpConfig>& scales, int window,
                                   FieldMode mode_tag = FieldMode::green);

/// Same, reusing precomputed code fields (one per scale).
FeatureVector segment_lbp_features(const std::vector<CodeField>& code_fields,
                                   const VesselSegment& seg, int window,
                                   FieldMode mode_tag = FieldMode::green);

/// Raw-RGB comparison floor: per channel, mean and variance of the pixels
/// within half_width of the centerline after subtracting that neighborhood's
/// channel mean. Six values: R mean, R var, G mean, G var, B mean, B var.
/// (The means are zero up to rounding by construction; the recipe is kept
/// verbatim as the baseline it is.)
FeatureVector segment_rgb_features(const RasterImage& img, const VesselSegment& seg,
                                   int half_width);

/// Majority class of the non-background mask codes within 2 px of the
/// centerline. nullopt when nothing is labeled nearby or the vote ties.
std::optional<VesselClass> label_segment(const VesselSegment& seg, const LabelMask& mask);

// ---------------------------------------------------------------------------
// PCA baseline

struct PcaModel {
  int input_dim = 0;
  int k = 0;
  std::vector<double> mean;                // input_dim
  std::vector<double> components;          // k rows of input_dim, row-major
  std::vector<double> explained_variance;  // k, non-increasing
  std::string base_schema_id;
};

PcaModel pca_fit(const Dataset& ds, int k);
FeatureVector pca_transform(const PcaModel& model, const FeatureVector& fv);
Dataset apply_pca(const Dataset& ds, const PcaModel& model);

// ---------------------------------------------------------------------------
// Whole-pipeline dataset construction

struct PipelineParams {
  FieldMode field_mode = FieldMode::green;
  double mfr_sigma = 2.0;
  int mfr_length = 9;
  int mfr_orientations = 12;
  ProbeParams probe;
  int min_object_size = 50;
  int max_spur_len = 5;
  std::vector<LbpConfig> lbp_scales{{8, 1.0, true}, {8, 2.0, true}};
  int lbp_window = 15;
  int rgb_half_width = 4;
};

enum class FeatureSchema { msri_lbp, rgb };

struct LabeledImage {
  std::string id;
  RasterImage image;
  LabelMask mask;
};

struct ImageBuildStats {
  std::string image_id;
  int n_segments = 0;   // traced segments
  int n_labeled = 0;    // entered the dataset
  int n_unknown = 0;    // no usable ground truth nearby
  int n_failed = 0;     // no valid feature window
};

struct BuildResult {
  Dataset dataset;
  std::vector<ImageBuildStats> stats;
};

/// Runs segmentation -> skeleton -> features -> labels over every image.
/// Unknown-label segments are excluded and reported in the stats. Throws if
/// no usable segment exists at all.
BuildResult build_dataset(const std::vector<LabeledImage>& images, const PipelineParams& params,
                          FeatureSchema schema);

/// Segments of one image under the pipeline params (shared by the CLI).
std::vector<VesselSegment> pipeline_segments(const RasterImage& image,
                                             const PipelineParams& params);

// ---------------------------------------------------------------------------
// Dataset CSV: `# schema_id=...` comment, then
// `image_id,segment_id,class,f0..fN` rows; class is artery|vein.

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

const char* to_string(VesselClass cls);
VesselClass vessel_class_from_string(const std::string& s);

}  // namespace retav
