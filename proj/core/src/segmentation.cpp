#include "retav/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <tuple>

#include "io_util.hpp"
#include "retav/error.hpp"

namespace retav {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr char kMfrMagic[8] = {'R', 'A', 'V', 'M', 'F', 'R', '0', '1'};
}  // namespace

double MatchedFilterBank::profile(double u, double sigma) {
  return -std::exp(-(u * u) / (2.0 * sigma * sigma));
}

MatchedFilterBank build_filter_bank(double sigma, int length, int n_orientations) {
  if (sigma <= 0.0) throw std::invalid_argument("build_filter_bank: sigma must be positive");
  if (length < 1) throw std::invalid_argument("build_filter_bank: length must be >= 1");
  if (n_orientations < 1)
    throw std::invalid_argument("build_filter_bank: n_orientations must be >= 1");

  MatchedFilterBank bank;
  bank.sigma = sigma;
  bank.length = length;
  bank.kernels.reserve(n_orientations);

  const double half_len = length / 2.0;
  const double cross = 3.0 * sigma;
  const int half_extent = static_cast<int>(std::ceil(std::hypot(half_len, cross)));

  for (int k = 0; k < n_orientations; ++k) {
    OrientedKernel kernel;
    kernel.angle_deg = 180.0 * k / n_orientations;
    kernel.half_extent = half_extent;
    const double theta = kernel.angle_deg * kPi / 180.0;
    const double ax = std::cos(theta), ay = std::sin(theta);  // vessel axis
    for (int dy = -half_extent; dy <= half_extent; ++dy) {
      for (int dx = -half_extent; dx <= half_extent; ++dx) {
        const double along = dx * ax + dy * ay;
        const double across = -dx * ay + dy * ax;
        if (std::abs(along) <= half_len && std::abs(across) <= cross)
          kernel.taps.push_back({dx, dy, MatchedFilterBank::profile(across, sigma)});
      }
    }
    double mean = 0.0;
    for (const auto& t : kernel.taps) mean += t.weight;
    mean /= static_cast<double>(kernel.taps.size());
    for (auto& t : kernel.taps) t.weight -= mean;
    bank.kernels.push_back(std::move(kernel));
  }
  return bank;
}

MfrResult matched_filter_response_with_winners(const ScalarField& field,
                                               const MatchedFilterBank& bank) {
  if (bank.kernels.empty()) throw std::invalid_argument("matched_filter_response: empty bank");
  const int m = bank.kernels.front().half_extent;
  if (field.width <= 2 * m || field.height <= 2 * m)
    throw std::invalid_argument("matched_filter_response: field smaller than kernel support");

  MfrResult out;
  out.response = ScalarField(field.width, field.height, 0.0);
  out.winner.assign(static_cast<std::size_t>(field.width) * field.height, -1);

  for (int y = m; y < field.height - m; ++y) {
    for (int x = m; x < field.width - m; ++x) {
      double best = 0.0;
      int best_k = -1;
      for (std::size_t k = 0; k < bank.kernels.size(); ++k) {
        double acc = 0.0;
        for (const auto& t : bank.kernels[k].taps)
          acc += t.weight * field.at(x + t.dx, y + t.dy);
        if (best_k < 0 || acc > best) {
          best = acc;
          best_k = static_cast<int>(k);
        }
      }
      out.response.at(x, y) = best;
      out.winner[static_cast<std::size_t>(y) * field.width + x] = best_k;
    }
  }
  return out;
}

ScalarField matched_filter_response(const ScalarField& field, const MatchedFilterBank& bank) {
  return matched_filter_response_with_winners(field, bank).response;
}

void validate(const ProbeParams& params) {
  if (params.threshold_high < params.threshold_low)
    throw std::invalid_argument("probe: threshold_high must be >= threshold_low");
  if (params.threshold_step <= 0.0)
    throw std::invalid_argument("probe: threshold_step must be positive");
  if (params.min_region_size < 0 || params.max_region_size < params.min_region_size)
    throw std::invalid_argument("probe: bad region size bounds");
  if (params.fill_ratio_limit <= 0.0 || params.fill_ratio_limit > 1.0)
    throw std::invalid_argument("probe: fill_ratio_limit must be in (0,1]");
}

namespace {

struct Region {
  std::vector<int> pixels;  // linear indices
  int min_x = 0, max_x = 0, min_y = 0, max_y = 0;

  bool passes(const ProbeParams& p) const {
    const int n = static_cast<int>(pixels.size());
    if (n < p.min_region_size || n > p.max_region_size) return false;
    const double bbox = static_cast<double>(max_x - min_x + 1) * (max_y - min_y + 1);
    return static_cast<double>(n) / bbox <= p.fill_ratio_limit;
  }
};

}  // namespace

BinaryMask threshold_probe(const ScalarField& mfr, const ProbeParams& params) {
  validate(params);
  const int w = mfr.width, h = mfr.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;

  // Seeds: 8-neighborhood local maxima at or above the high threshold,
  // probed in descending response order (raster order breaks ties).
  std::vector<int> seeds;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = mfr.at(x, y);
      if (v < params.threshold_high) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx, ny = y + dy;
          if (nx >= 0 && nx < w && ny >= 0 && ny < h && mfr.at(nx, ny) > v) {
            is_max = false;
            break;
          }
        }
      if (is_max) seeds.push_back(y * w + x);
    }
  }
  std::stable_sort(seeds.begin(), seeds.end(),
                   [&](int a, int b) { return mfr.values[a] > mfr.values[b]; });

  BinaryMask accepted(w, h);
  std::vector<std::uint8_t> visited(n, 0);  // scratch, re-stamped per probe
  std::vector<int> stack;

  for (int seed : seeds) {
    if (accepted.bits[seed]) continue;

    Region best;
    bool have_best = false;

    // Threshold schedule for this probe: from just below the seed response
    // down to threshold_low. The region can only grow between steps, so the
    // flood resumes from the previous frontier.
    double t0 = std::min(mfr.values[seed], params.threshold_high);
    std::vector<int> frontier{seed};
    std::vector<int> region_pixels;
    std::fill(visited.begin(), visited.end(), 0);
    visited[seed] = 1;
    Region cur;
    cur.min_x = cur.max_x = seed % w;
    cur.min_y = cur.max_y = seed / w;
    bool aborted = false;

    for (double t = t0; t >= params.threshold_low && !aborted;
         t -= params.threshold_step) {
      // Grow: admit every reachable pixel with response >= t.
      stack = frontier;
      frontier.clear();
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        if (mfr.values[idx] < t) {
          frontier.push_back(idx);  // wait for a lower threshold
          continue;
        }
        region_pixels.push_back(idx);
        const int px = idx % w, py = idx / w;
        cur.min_x = std::min(cur.min_x, px);
        cur.max_x = std::max(cur.max_x, px);
        cur.min_y = std::min(cur.min_y, py);
        cur.max_y = std::max(cur.max_y, py);
        if (static_cast<int>(region_pixels.size()) > params.max_region_size) {
          aborted = true;
          break;
        }
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = px + dx, ny = py + dy;
            if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
            const int nidx = ny * w + nx;
            if (visited[nidx] || accepted.bits[nidx]) continue;
            visited[nidx] = 1;
            stack.push_back(nidx);
          }
      }
      if (aborted) break;
      cur.pixels = region_pixels;
      if (cur.passes(params)) {
        best = cur;
        have_best = true;
      }
    }

    if (have_best)
      for (int idx : best.pixels) accepted.bits[idx] = 1;
  }
  return accepted;
}

void save_mfr_grid(const ScalarField& field, const std::string& path) {
  detail::AtomicWriter w(path);
  std::string head;
  head.append(kMfrMagic, 8);
  detail::put_u32(head, static_cast<std::uint32_t>(field.width));
  detail::put_u32(head, static_cast<std::uint32_t>(field.height));
  w.stream().write(head.data(), static_cast<std::streamsize>(head.size()));
  std::string body;
  body.reserve(field.values.size() * 4);
  for (double v : field.values) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    detail::put_u32(body, bits);
  }
  w.stream().write(body.data(), static_cast<std::streamsize>(body.size()));
  w.commit();
}

ScalarField load_mfr_grid(const std::string& path) {
  const std::string buf = detail::read_file_bytes(path);
  detail::ByteReader r(buf, "mfr grid");
  if (r.raw(8) != std::string(kMfrMagic, 8)) throw Error("mfr grid: bad magic");
  const std::uint32_t w = r.u32(), h = r.u32();
  ScalarField field(static_cast<int>(w), static_cast<int>(h));
  for (auto& v : field.values) {
    const std::uint32_t bits = r.u32();
    float f;
    std::memcpy(&f, &bits, 4);
    v = static_cast<double>(f);
  }
  r.expect_end();
  return field;
}

RasterImage mask_to_image(const BinaryMask& mask) {
  RasterImage img;
  img.width = mask.width;
  img.height = mask.height;
  img.channels = 1;
  img.data.resize(mask.bits.size());
  for (std::size_t i = 0; i < mask.bits.size(); ++i) img.data[i] = mask.bits[i] ? 255 : 0;
  return img;
}

BinaryMask image_to_mask(const RasterImage& img) {
  BinaryMask mask(img.width, img.height);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i) {
    int v = img.channels == 1
                ? img.data[i]
                : (img.data[i * 3] + img.data[i * 3 + 1] + img.data[i * 3 + 2]) / 3;
    mask.bits[i] = v > 127 ? 1 : 0;
  }
  return mask;
}

}  // namespace retav
