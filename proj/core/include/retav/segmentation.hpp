#pragma once

#include <string>
#include <vector>

#include "retav/image.hpp"

namespace retav {

/// Row-major boolean raster. Used for vessel masks and skeletons.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
  }
  bool operator==(const BinaryMask&) const = default;
};

/// One oriented matched-filter kernel, stored as its non-zero taps on an odd
/// square grid of side 2*half_extent+1 centred on the probe pixel.
struct OrientedKernel {
  double angle_deg = 0.0;  // vessel axis direction
  int half_extent = 0;
  struct Tap {
    int dx;
    int dy;
    double weight;
  };
  std::vector<Tap> taps;

  double sum() const {
    double s = 0.0;
    for (const auto& t : taps) s += t.weight;
    return s;
  }
};

/// Bank of zero-mean oriented kernels at equal angular spacing of 180/n deg.
/// The cross-section is an inverted Gaussian, so vessels darker than their
/// background produce positive responses.
struct MatchedFilterBank {
  double sigma = 0.0;   // Gaussian cross-section scale (pixels)
  int length = 0;       // support along the vessel axis (pixels)
  std::vector<OrientedKernel> kernels;

  /// Cross-profile value before mean subtraction, at perpendicular offset u.
  static double profile(double u, double sigma);
};

MatchedFilterBank build_filter_bank(double sigma, int length, int n_orientations);

/// Per-pixel maximum over all orientation correlations. Pixels within the
/// kernel half-extent of the border are set to 0.
ScalarField matched_filter_response(const ScalarField& field, const MatchedFilterBank& bank);

/// Same maximum, but also reporting which orientation won at each pixel
/// (index into bank.kernels; -1 on the untouched border).
struct MfrResult {
  ScalarField response;
  std::vector<int> winner;
};
MfrResult matched_filter_response_with_winners(const ScalarField& field,
                                               const MatchedFilterBank& bank);

struct ProbeParams {
  double threshold_high = 300.0;
  double threshold_low = 100.0;
  double threshold_step = 25.0;
  int min_region_size = 60;
  int max_region_size = 50000;
  double fill_ratio_limit = 1.0;  // region pixels / bounding-box area
};

void validate(const ProbeParams& params);

/// Piecewise threshold probing of an MFR field. Probes are seeded at local
/// maxima >= threshold_high in descending response order. Each probe grows
/// its 8-connected region while the local threshold steps down towards
/// threshold_low; the largest extent that still passes the size and
/// fill-ratio tests is accepted. Pixels of failed probes stay available to
/// later probes. Deterministic for identical inputs.
BinaryMask threshold_probe(const ScalarField& mfr, const ProbeParams& params);

/// Float32 grid container for MFR debugging: 16-byte header (8-byte magic,
/// u32 width, u32 height, little endian) followed by row-major float32.
void save_mfr_grid(const ScalarField& field, const std::string& path);
ScalarField load_mfr_grid(const std::string& path);

/// Mask <-> 8-bit image (white = vessel).
RasterImage mask_to_image(const BinaryMask& mask);
BinaryMask image_to_mask(const RasterImage& img);

}  // namespace retav
