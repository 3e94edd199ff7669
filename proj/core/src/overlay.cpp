#include "retav/overlay.hpp"

#include "retav/error.hpp"

namespace retav {

RasterImage render_overlay(const RasterImage& base, const std::vector<VesselSegment>& segments,
                           const std::vector<VesselClass>& classes) {
  if (segments.size() != classes.size())
    throw std::invalid_argument("render_overlay: segments/classes length mismatch");

  RasterImage out;
  out.width = base.width;
  out.height = base.height;
  out.channels = 3;
  const std::size_t n = static_cast<std::size_t>(base.width) * base.height;
  out.data.resize(n * 3);
  if (base.channels == 3) {
    out.data = base.data;
  } else {
    for (std::size_t i = 0; i < n; ++i)
      out.data[i * 3] = out.data[i * 3 + 1] = out.data[i * 3 + 2] = base.data[i];
  }

  for (std::size_t s = 0; s < segments.size(); ++s) {
    const bool artery = classes[s] == VesselClass::artery;
    for (const auto& p : segments[s].points) {
      if (!out.in_bounds(p.x, p.y))
        throw Error("render_overlay: segment point (" + std::to_string(p.x) + "," +
                    std::to_string(p.y) + ") outside image");
      out.at(p.x, p.y, 0) = artery ? 255 : 0;
      out.at(p.x, p.y, 1) = 0;
      out.at(p.x, p.y, 2) = artery ? 0 : 255;
    }
  }
  return out;
}

void save_overlay(const RasterImage& base, const std::vector<VesselSegment>& segments,
                  const std::vector<VesselClass>& classes, const std::string& path) {
  save_image(render_overlay(base, segments, classes), path);
}

}  // namespace retav
