#pragma once

#include <cstdint>
#include <vector>

#include "retav/image.hpp"

namespace retav {

/// Deterministic synthetic fundus generator. Vessels are smooth cubic Bezier
/// curves with a truncated-Gaussian darkness profile; veins render wider and
/// darker, arteries narrower, lighter and with a bright one-pixel centerline
/// ridge. The paired mask paints exact centerline classes.
struct SynthParams {
  int width = 320;
  int height = 240;
  int n_vessels = 8;
  double artery_fraction = 0.5;
  double artery_width_min = 2.5;
  double artery_width_max = 4.0;
  double vein_width_min = 5.0;   // must sit strictly above the artery range
  double vein_width_max = 8.0;
  double reflex_amplitude = 30.0;  // bright centerline ridge, arteries only
  double background = 200.0;
  double vessel_darkness = 80.0;   // vein profile depth; arteries use 0.65x
  double noise_sigma = 4.0;
  std::uint64_t seed = 1;
};

void validate(const SynthParams& params);

/// Fraction of the vein darkness that arteries get (they are lighter).
inline constexpr double kArteryDepthFactor = 0.65;

struct SynthVessel {
  VesselClass cls = VesselClass::vein;
  double width = 0.0;  // full profile width; Gaussian sigma is width/2
  double depth = 0.0;  // peak darkness below background
  std::vector<PixelPoint> centerline;  // deduplicated integer centerline
  /// Dense sub-pixel curve samples (spacing <= 0.25 px). The rendered value
  /// at a pixel is background - max over vessels of
  ///   depth * exp(-d2 / (2 sigma^2))   for d2 = min squared distance to the
  /// vessel's curve_samples, zero beyond 3 sigma; artery centerline pixels
  /// then gain +reflex_amplitude once. The green channel carries exactly
  /// this profile (rounded to 8 bits) when noise_sigma is 0; red and blue
  /// are fixed affine tints of it.
  std::vector<std::pair<double, double>> curve_samples;
};

struct SynthResult {
  RasterImage image;  // 3-channel
  LabelMask mask;
  std::vector<SynthVessel> vessels;
};

/// Same params + seed always produce the identical image, mask and vessel
/// metadata. Throws if a vessel cannot be placed after bounded retries.
SynthResult generate(const SynthParams& params);

}  // namespace retav
