#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "retav/image.hpp"

namespace retav {

/// Circular-neighborhood configuration: P samples on a circle of radius R
/// around each pixel. rotation_invariant maps codes through ror_min.
struct LbpConfig {
  int neighbors = 8;             // P
  double radius = 1.0;           // R, pixels
  bool rotation_invariant = true;
};

void validate(const LbpConfig& config);

/// Sampling offsets for (P, R). Neighbor 0 sits due east, the rest follow
/// counterclockwise. Offsets are snapped to a 1/65536-pixel grid; with the
/// two-lerp bilinear read below, every sampled value is then exact in double
/// precision, and for P divisible by 4 the offset set is exactly closed
/// under 90-degree rotation. That is what makes rotation-invariant code
/// multisets match their rotated images bit-for-bit.
struct SampleOffset {
  double dx;
  double dy;
};
std::vector<SampleOffset> neighbor_offsets(int neighbors, double radius);

/// Bilinearly interpolated values of the P circle samples around (x,y).
std::vector<double> sample_neighbors(const ScalarField& field, int x, int y, int neighbors,
                                     double radius);

/// Plain circular code: sum over p of s(g_p - g_c) * 2^p, with s(x)=1 for
/// x >= 0 (ties count as 1).
std::uint32_t lbp_code(const ScalarField& field, int x, int y, const LbpConfig& config);

/// Minimum over all circular bit rotations of a P-bit code.
std::uint32_t ror_min(std::uint32_t code, int neighbors);

/// Maps raw P-bit codes to dense histogram bins; in rotation-invariant mode
/// all rotations of a pattern share one bin (36 bins for P=8).
struct LbpCodeMap {
  int neighbors = 0;
  bool rotation_invariant = false;
  int n_bins = 0;
  std::vector<std::int32_t> code_to_bin;  // size 2^P
};
std::shared_ptr<const LbpCodeMap> lbp_code_map(int neighbors, bool rotation_invariant);

/// Per-pixel codes plus a validity plane; pixels within ceil(R) of the
/// border are invalid.
struct CodeField {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> codes;
  std::vector<std::uint8_t> valid;
  LbpConfig config;

  std::uint32_t code_at(int x, int y) const {
    return codes[static_cast<std::size_t>(y) * width + x];
  }
  bool valid_at(int x, int y) const {
    return valid[static_cast<std::size_t>(y) * width + x] != 0;
  }
};

CodeField code_field(const ScalarField& field, const LbpConfig& config);

/// Normalized code-frequency histogram.
struct LbpHistogram {
  std::vector<double> bins;
  std::shared_ptr<const LbpCodeMap> map;
};

/// Histogram of the valid codes inside an odd window centred at (cx,cy).
/// The window is clipped to the field; invalid pixels are skipped, never
/// padded. Throws if no valid pixel falls inside.
LbpHistogram region_histogram(const CodeField& cf, int cx, int cy, int window);

/// Chi-square histogram distance; zero-denominator bins are skipped.
double chi_square(const LbpHistogram& a, const LbpHistogram& b);

/// Multiscale dissimilarity: the per-scale chi-square distances summed over
/// paired sample/model histogram lists.
double multiscale_dissimilarity(const std::vector<LbpHistogram>& sample,
                                const std::vector<LbpHistogram>& model);

/// Raw chi-square on plain vectors (used by the nearest-prototype classifier
/// on stored feature blocks).
double chi_square_raw(const double* a, const double* b, std::size_t n);

/// Codes rendered as gray levels for visual debugging (P=8 only).
RasterImage code_field_to_image(const CodeField& cf);

}  // namespace retav
