#pragma once

#include <string>
#include <vector>

#include "retav/image.hpp"
#include "retav/skeleton.hpp"

namespace retav {

/// Paints classified centerlines onto a copy of the source image: arteries
/// pure red (255,0,0), veins pure blue (0,0,255). Gray sources are expanded
/// to RGB first. classes runs parallel to segments.
RasterImage render_overlay(const RasterImage& base, const std::vector<VesselSegment>& segments,
                           const std::vector<VesselClass>& classes);

void save_overlay(const RasterImage& base, const std::vector<VesselSegment>& segments,
                  const std::vector<VesselClass>& classes, const std::string& path);

}  // namespace retav
