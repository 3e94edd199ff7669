#pragma once

#include <string>
#include <vector>

#include "retav/segmentation.hpp"

namespace retav {

/// One-pixel-wide centerline raster. Always a subset of the mask it came from.
using Skeleton = BinaryMask;

/// Ordered centerline polyline between junctions: consecutive points are
/// 8-adjacent, no point repeats, interior points have exactly two neighbors
/// within the segment.
struct VesselSegment {
  int id = 0;
  std::vector<PixelPoint> points;
};

/// Drops every 8-connected component smaller than min_size pixels.
BinaryMask remove_small_objects(const BinaryMask& mask, int min_size);

/// Two-subiteration morphological thinning to one-pixel centerlines.
/// Iterates to a fixed point, so thin(thin(m)) == thin(m).
Skeleton thin(const BinaryMask& mask);

/// Deletes dead-end branches shorter than max_spur_len pixels that end at a
/// junction. Free-standing lines and longer branches are preserved.
Skeleton prune_spurs(const Skeleton& sk, int max_spur_len);

/// Removes all pixels with more than two 8-neighbors, then traces the
/// remaining chains endpoint-to-endpoint. Chains shorter than 3 pixels are
/// dropped. Segment ids follow raster-scan order of the segment start pixels.
std::vector<VesselSegment> split_segments(const Skeleton& sk);

/// Line-delimited text: `id, n_points, x0 y0 x1 y1 ...`, one segment per line.
void save_segments(const std::vector<VesselSegment>& segments, const std::string& path);
std::vector<VesselSegment> load_segments(const std::string& path);

}  // namespace retav
