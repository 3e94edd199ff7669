#include "retav/lbp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "retav/error.hpp"

namespace retav {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kOffsetQuantum = 1.0 / 65536.0;

double quantize_offset(double v) { return std::nearbyint(v * 65536.0) * kOffsetQuantum; }

/// Exact two-lerp bilinear read. With dyadic offsets and integer-valued
/// pixels every operation here is exact (no rounding), see neighbor_offsets.
double bilinear(const ScalarField& f, double px, double py) {
  const double fx0 = std::floor(px), fy0 = std::floor(py);
  int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
  const double ax = px - fx0, ay = py - fy0;
  if (x0 < 0 || y0 < 0 || x0 + (ax > 0.0 ? 1 : 0) >= f.width || y0 + (ay > 0.0 ? 1 : 0) >= f.height)
    throw std::invalid_argument("lbp: sample outside field");
  if (ax == 0.0 && ay == 0.0) return f.at(x0, y0);
  const int x1 = ax > 0.0 ? x0 + 1 : x0;
  const int y1 = ay > 0.0 ? y0 + 1 : y0;
  const double a = f.at(x0, y0), b = f.at(x1, y0), c = f.at(x0, y1), d = f.at(x1, y1);
  const double top = a + (b - a) * ax;
  const double bottom = c + (d - c) * ax;
  return top + (bottom - top) * ay;
}

}  // namespace

void validate(const LbpConfig& config) {
  if (config.neighbors < 4 || config.neighbors > 16)
    throw std::invalid_argument("lbp: neighbor count must be in [4,16]");
  if (!(config.radius > 0.0)) throw std::invalid_argument("lbp: radius must be positive");
}

std::vector<SampleOffset> neighbor_offsets(int neighbors, double radius) {
  if (neighbors < 1) throw std::invalid_argument("lbp: neighbor count must be >= 1");
  if (!(radius > 0.0)) throw std::invalid_argument("lbp: radius must be positive");
  std::vector<SampleOffset> offsets(neighbors);
  if (neighbors % 4 == 0) {
    // First quadrant by quantized trig, the rest by exact 90-degree steps
    // ((dx,dy) -> (dy,-dx) is counterclockwise with y pointing down).
    const int quarter = neighbors / 4;
    for (int p = 0; p < quarter; ++p) {
      const double theta = 2.0 * kPi * p / neighbors;
      offsets[p] = {quantize_offset(radius * std::cos(theta)),
                    quantize_offset(-radius * std::sin(theta))};
    }
    for (int p = quarter; p < neighbors; ++p)
      offsets[p] = {offsets[p - quarter].dy, -offsets[p - quarter].dx};
  } else {
    for (int p = 0; p < neighbors; ++p) {
      const double theta = 2.0 * kPi * p / neighbors;
      offsets[p] = {quantize_offset(radius * std::cos(theta)),
                    quantize_offset(-radius * std::sin(theta))};
    }
  }
  return offsets;
}

std::vector<double> sample_neighbors(const ScalarField& field, int x, int y, int neighbors,
                                     double radius) {
  const auto offsets = neighbor_offsets(neighbors, radius);
  std::vector<double> samples(offsets.size());
  for (std::size_t p = 0; p < offsets.size(); ++p)
    samples[p] = bilinear(field, x + offsets[p].dx, y + offsets[p].dy);
  return samples;
}

std::uint32_t lbp_code(const ScalarField& field, int x, int y, const LbpConfig& config) {
  validate(config);
  const auto offsets = neighbor_offsets(config.neighbors, config.radius);
  const double center = field.at(x, y);
  std::uint32_t code = 0;
  for (std::size_t p = 0; p < offsets.size(); ++p) {
    const double sample = bilinear(field, x + offsets[p].dx, y + offsets[p].dy);
    if (sample - center >= 0.0) code |= std::uint32_t{1} << p;
  }
  // The raw circular code; rotation-invariant collapsing happens in
  // code_field so this stays the plain per-pixel operator.
  return code;
}

std::uint32_t ror_min(std::uint32_t code, int neighbors) {
  if (neighbors < 1 || neighbors > 31) throw std::invalid_argument("ror_min: bad neighbor count");
  const std::uint32_t mask = (std::uint32_t{1} << neighbors) - 1;
  if (code > mask) throw std::invalid_argument("ror_min: code out of range");
  std::uint32_t best = code;
  std::uint32_t rotated = code;
  for (int i = 1; i < neighbors; ++i) {
    rotated = ((rotated >> 1) | (rotated << (neighbors - 1))) & mask;
    best = std::min(best, rotated);
  }
  return best;
}

std::shared_ptr<const LbpCodeMap> lbp_code_map(int neighbors, bool rotation_invariant) {
  if (neighbors < 1 || neighbors > 16)
    throw std::invalid_argument("lbp_code_map: neighbor count must be in [1,16]");
  static std::mutex mutex;
  static std::map<std::pair<int, bool>, std::shared_ptr<const LbpCodeMap>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{neighbors, rotation_invariant}];
  if (slot) return slot;

  auto map = std::make_shared<LbpCodeMap>();
  map->neighbors = neighbors;
  map->rotation_invariant = rotation_invariant;
  const std::uint32_t n_codes = std::uint32_t{1} << neighbors;
  map->code_to_bin.assign(n_codes, -1);
  if (!rotation_invariant) {
    map->n_bins = static_cast<int>(n_codes);
    for (std::uint32_t c = 0; c < n_codes; ++c) map->code_to_bin[c] = static_cast<int>(c);
  } else {
    // Rotation classes in increasing order of their minimal representative.
    int next_bin = 0;
    for (std::uint32_t c = 0; c < n_codes; ++c) {
      const std::uint32_t rep = ror_min(c, neighbors);
      if (rep == c) map->code_to_bin[c] = next_bin++;
    }
    for (std::uint32_t c = 0; c < n_codes; ++c)
      map->code_to_bin[c] = map->code_to_bin[ror_min(c, neighbors)];
    map->n_bins = next_bin;
  }
  slot = std::move(map);
  return slot;
}

CodeField code_field(const ScalarField& field, const LbpConfig& config) {
  validate(config);
  const int margin = static_cast<int>(std::ceil(config.radius));
  if (field.width <= 2 * margin || field.height <= 2 * margin)
    throw std::invalid_argument("code_field: field too small for radius");

  CodeField cf;
  cf.width = field.width;
  cf.height = field.height;
  cf.config = config;
  cf.codes.assign(static_cast<std::size_t>(field.width) * field.height, 0);
  cf.valid.assign(cf.codes.size(), 0);

  const auto offsets = neighbor_offsets(config.neighbors, config.radius);
  for (int y = margin; y < field.height - margin; ++y) {
    for (int x = margin; x < field.width - margin; ++x) {
      const double center = field.at(x, y);
      std::uint32_t code = 0;
      for (std::size_t p = 0; p < offsets.size(); ++p) {
        const double sample = bilinear(field, x + offsets[p].dx, y + offsets[p].dy);
        if (sample - center >= 0.0) code |= std::uint32_t{1} << p;
      }
      if (config.rotation_invariant) code = ror_min(code, config.neighbors);
      const std::size_t idx = static_cast<std::size_t>(y) * field.width + x;
      cf.codes[idx] = code;
      cf.valid[idx] = 1;
    }
  }
  return cf;
}

LbpHistogram region_histogram(const CodeField& cf, int cx, int cy, int window) {
  if (window < 3 || window % 2 == 0)
    throw std::invalid_argument("region_histogram: window must be odd and >= 3");
  auto map = lbp_code_map(cf.config.neighbors, cf.config.rotation_invariant);
  LbpHistogram hist;
  hist.map = map;
  hist.bins.assign(map->n_bins, 0.0);

  const int half = window / 2;
  const int x_lo = std::max(0, cx - half), x_hi = std::min(cf.width - 1, cx + half);
  const int y_lo = std::max(0, cy - half), y_hi = std::min(cf.height - 1, cy + half);
  std::size_t total = 0;
  for (int y = y_lo; y <= y_hi; ++y) {
    for (int x = x_lo; x <= x_hi; ++x) {
      if (!cf.valid_at(x, y)) continue;
      hist.bins[map->code_to_bin[cf.code_at(x, y)]] += 1.0;
      ++total;
    }
  }
  if (total == 0)
    throw Error("region_histogram: no valid pixels in window at (" + std::to_string(cx) + "," +
                std::to_string(cy) + ")");
  for (auto& b : hist.bins) b /= static_cast<double>(total);
  return hist;
}

double chi_square_raw(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double denom = a[i] + b[i];
    if (denom > 0.0) {
      const double diff = a[i] - b[i];
      sum += diff * diff / denom;
    }
  }
  return sum;
}

double chi_square(const LbpHistogram& a, const LbpHistogram& b) {
  if (a.bins.size() != b.bins.size())
    throw std::invalid_argument("chi_square: bin count mismatch");
  return chi_square_raw(a.bins.data(), b.bins.data(), a.bins.size());
}

double multiscale_dissimilarity(const std::vector<LbpHistogram>& sample,
                                const std::vector<LbpHistogram>& model) {
  if (sample.size() != model.size())
    throw std::invalid_argument("multiscale_dissimilarity: scale count mismatch");
  double sum = 0.0;
  for (std::size_t n = 0; n < sample.size(); ++n) sum += chi_square(sample[n], model[n]);
  return sum;
}

RasterImage code_field_to_image(const CodeField& cf) {
  if (cf.config.neighbors != 8)
    throw std::invalid_argument("code_field_to_image: only P=8 codes fit 8-bit gray");
  RasterImage img;
  img.width = cf.width;
  img.height = cf.height;
  img.channels = 1;
  img.data.resize(cf.codes.size());
  for (std::size_t i = 0; i < cf.codes.size(); ++i)
    img.data[i] = cf.valid[i] ? static_cast<std::uint8_t>(cf.codes[i]) : 0;
  return img;
}

}  // namespace retav
