#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace retav {

/// Multi-channel 8-bit raster, row-major, interleaved samples.
/// channels is 1 (gray) or 3 (RGB).
struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  std::uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

/// Single-channel real-valued field, row-major.
struct ScalarField {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  ScalarField() = default;
  ScalarField(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

/// Per-pixel class codes: 0 background, 1 artery, 2 vein.
enum class PixelClass : std::uint8_t { background = 0, artery = 1, vein = 2 };

/// Segment-level vessel type.
enum class VesselClass : std::uint8_t { artery = 1, vein = 2 };

struct PixelPoint {
  int x = 0;
  int y = 0;
  bool operator==(const PixelPoint&) const = default;
};

struct LabelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> classes;

  LabelMask() = default;
  LabelMask(int w, int h) : width(w), height(h), classes(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t at(int x, int y) const { return classes[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return classes[static_cast<std::size_t>(y) * width + x]; }
};

/// Decodes a PPM (P5/P6) or PNG file; format is sniffed from the magic bytes,
/// not the extension. 24-bit color decodes to channels=3, 8-bit gray to 1.
RasterImage load_image(const std::string& path);

/// Encodes by extension: .png, .ppm (P6, 3-channel), .pgm (P5, 1-channel).
/// Writes are atomic (temp file + rename).
void save_image(const RasterImage& img, const std::string& path);

/// One channel of a raster as a real-valued field (values in [0,255]).
ScalarField extract_field(const RasterImage& img, int channel);

/// Rec.601 luma: (299 R + 587 G + 114 B) / 1000. Gray input passes through.
ScalarField extract_field_luminance(const RasterImage& img);

/// Label masks are ordinary images with an exact color code:
/// (0,0,0) background, (255,0,0) artery, (0,0,255) vein. Any other color
/// is an error. A 1-channel all-zero image is accepted as all-background.
LabelMask load_label_mask(const std::string& path);
void save_label_mask(const LabelMask& mask, const std::string& path);

RasterImage label_mask_to_image(const LabelMask& mask);
LabelMask image_to_label_mask(const RasterImage& img);

}  // namespace retav
