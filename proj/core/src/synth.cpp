#include "retav/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "retav/error.hpp"
#include "retav/rng.hpp"

namespace retav {

void validate(const SynthParams& p) {
  if (p.width < 48 || p.height < 48)
    throw std::invalid_argument("synth: image must be at least 48x48");
  if (p.n_vessels < 1) throw std::invalid_argument("synth: n_vessels must be >= 1");
  if (p.artery_fraction < 0.0 || p.artery_fraction > 1.0)
    throw std::invalid_argument("synth: artery_fraction must be in [0,1]");
  if (!(p.artery_width_min > 0.0) || p.artery_width_max < p.artery_width_min)
    throw std::invalid_argument("synth: bad artery width range");
  if (p.vein_width_min <= p.artery_width_max || p.vein_width_max < p.vein_width_min)
    throw std::invalid_argument("synth: vein width range must sit strictly above artery range");
  if (!(p.reflex_amplitude > 0.0))
    throw std::invalid_argument("synth: reflex_amplitude must be positive");
  if (p.background < 0.0 || p.background > 255.0)
    throw std::invalid_argument("synth: background must be in [0,255]");
  if (!(p.vessel_darkness > 0.0))
    throw std::invalid_argument("synth: vessel_darkness must be positive");
  if (p.noise_sigma < 0.0) throw std::invalid_argument("synth: noise_sigma must be >= 0");
}

namespace {

struct Vec2 {
  double x, y;
};

Vec2 bezier(const Vec2& p0, const Vec2& p1, const Vec2& p2, const Vec2& p3, double t) {
  const double u = 1.0 - t;
  const double b0 = u * u * u, b1 = 3 * u * u * t, b2 = 3 * u * t * t, b3 = t * t * t;
  return {b0 * p0.x + b1 * p1.x + b2 * p2.x + b3 * p3.x,
          b0 * p0.y + b1 * p1.y + b2 * p2.y + b3 * p3.y};
}

std::uint8_t clamp8(double v) {
  const long r = std::lround(v);
  return static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
}

}  // namespace

SynthResult generate(const SynthParams& params) {
  validate(params);
  Rng rng(params.seed);
  const int w = params.width, h = params.height;

  // Class sequence: the artery count honors the fraction but both classes
  // appear whenever n_vessels >= 2 and the fraction is interior.
  int n_arteries = static_cast<int>(std::lround(params.n_vessels * params.artery_fraction));
  if (params.artery_fraction > 0.0 && params.n_vessels >= 2)
    n_arteries = std::max(n_arteries, 1);
  if (params.artery_fraction < 1.0 && params.n_vessels >= 2)
    n_arteries = std::min(n_arteries, params.n_vessels - 1);
  n_arteries = std::clamp(n_arteries, 0, params.n_vessels);
  std::vector<VesselClass> classes(params.n_vessels, VesselClass::vein);
  for (int i = 0; i < n_arteries; ++i) classes[i] = VesselClass::artery;
  for (int i = params.n_vessels - 1; i > 0; --i)
    std::swap(classes[i], classes[rng.below(static_cast<std::uint64_t>(i) + 1)]);

  const int margin =
      std::min({w / 4, h / 4, static_cast<int>(std::ceil(1.5 * params.vein_width_max)) + 4});
  const std::size_t n_px = static_cast<std::size_t>(w) * h;

  // Exclusion band around already-placed centerlines, wide enough that two
  // vessel bodies never merge. Attempts that would cross an existing vessel
  // are rejected and retried, so the first placement seeds the prevailing
  // orientation for the image.
  const int separation = std::max(3, static_cast<int>(std::ceil(1.2 * params.vein_width_max)));
  std::vector<std::uint8_t> near_existing(n_px, 0);
  auto stamp_near = [&](int cx, int cy) {
    for (int dy = -separation; dy <= separation; ++dy)
      for (int dx = -separation; dx <= separation; ++dx) {
        if (dx * dx + dy * dy > separation * separation) continue;
        const int nx = cx + dx, ny = cy + dy;
        if (nx >= 0 && nx < w && ny >= 0 && ny < h) near_existing[ny * w + nx] = 1;
      }
  };

  SynthResult out;
  out.vessels.reserve(params.n_vessels);

  for (int vi = 0; vi < params.n_vessels; ++vi) {
    SynthVessel vessel;
    vessel.cls = classes[vi];
    const bool artery = vessel.cls == VesselClass::artery;
    const double w_lo = artery ? params.artery_width_min : params.vein_width_min;
    const double w_hi = artery ? params.artery_width_max : params.vein_width_max;
    vessel.width = w_lo + (w_hi - w_lo) * rng.next_double();
    vessel.depth = params.vessel_darkness * (artery ? kArteryDepthFactor : 1.0);

    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      // Anchors on opposite sides, controls displaced off the chord so the
      // curve genuinely bends.
      const bool horizontal = rng.below(2) == 0;
      Vec2 p0, p3;
      if (horizontal) {
        p0 = {static_cast<double>(margin),
              margin + (h - 2.0 * margin) * rng.next_double()};
        p3 = {static_cast<double>(w - 1 - margin),
              margin + (h - 2.0 * margin) * rng.next_double()};
      } else {
        p0 = {margin + (w - 2.0 * margin) * rng.next_double(),
              static_cast<double>(margin)};
        p3 = {margin + (w - 2.0 * margin) * rng.next_double(),
              static_cast<double>(h - 1 - margin)};
      }
      const double chord = std::hypot(p3.x - p0.x, p3.y - p0.y);
      const Vec2 dir{(p3.x - p0.x) / chord, (p3.y - p0.y) / chord};
      const Vec2 perp{-dir.y, dir.x};
      auto control = [&](double along) {
        const double sign = rng.below(2) == 0 ? 1.0 : -1.0;
        const double off = chord * (0.06 + 0.12 * rng.next_double()) * sign;
        Vec2 c{p0.x + dir.x * chord * along + perp.x * off,
               p0.y + dir.y * chord * along + perp.y * off};
        c.x = std::clamp(c.x, 2.0, w - 3.0);
        c.y = std::clamp(c.y, 2.0, h - 3.0);
        return c;
      };
      const Vec2 p1 = control(1.0 / 3.0), p2 = control(2.0 / 3.0);

      const int n_steps = std::max(8, static_cast<int>(std::ceil(chord * 6.0)));
      std::vector<std::pair<double, double>> samples;
      samples.reserve(n_steps + 1);
      std::vector<PixelPoint> centerline;
      bool in_bounds = true;
      int prev_x = -1, prev_y = -1;
      for (int s = 0; s <= n_steps; ++s) {
        const Vec2 q = bezier(p0, p1, p2, p3, static_cast<double>(s) / n_steps);
        if (q.x < 1.0 || q.x > w - 2.0 || q.y < 1.0 || q.y > h - 2.0) {
          in_bounds = false;
          break;
        }
        samples.emplace_back(q.x, q.y);
        const int cx = static_cast<int>(std::lround(q.x));
        const int cy = static_cast<int>(std::lround(q.y));
        if (cx != prev_x || cy != prev_y) {
          centerline.push_back({cx, cy});
          prev_x = cx;
          prev_y = cy;
        }
      }
      if (!in_bounds || centerline.size() < 16) continue;

      bool collides = false;
      for (const auto& p : centerline)
        if (near_existing[p.y * w + p.x]) {
          collides = true;
          break;
        }
      if (collides) continue;

      vessel.curve_samples = std::move(samples);
      vessel.centerline = std::move(centerline);
      placed = true;
    }
    if (!placed)
      throw Error("synth: vessel placement failed after bounded retries (image too small)");
    for (const auto& p : vessel.centerline) stamp_near(p.x, p.y);
    out.vessels.push_back(std::move(vessel));
  }

  // Darkness: per pixel, the strongest truncated-Gaussian vessel profile.
  std::vector<double> darkness(n_px, 0.0);
  std::vector<double> d2min(n_px);
  for (const auto& vessel : out.vessels) {
    const double sigma = vessel.width / 2.0;
    const double cutoff = 3.0 * sigma;
    const double cutoff2 = cutoff * cutoff;
    const int reach = static_cast<int>(std::ceil(cutoff)) + 1;
    std::fill(d2min.begin(), d2min.end(), std::numeric_limits<double>::infinity());
    for (const auto& [sx, sy] : vessel.curve_samples) {
      const int x_lo = std::max(0, static_cast<int>(std::floor(sx)) - reach);
      const int x_hi = std::min(w - 1, static_cast<int>(std::ceil(sx)) + reach);
      const int y_lo = std::max(0, static_cast<int>(std::floor(sy)) - reach);
      const int y_hi = std::min(h - 1, static_cast<int>(std::ceil(sy)) + reach);
      for (int y = y_lo; y <= y_hi; ++y)
        for (int x = x_lo; x <= x_hi; ++x) {
          const double ddx = x - sx, ddy = y - sy;
          const double d2 = ddx * ddx + ddy * ddy;
          auto& slot = d2min[static_cast<std::size_t>(y) * w + x];
          if (d2 < slot) slot = d2;
        }
    }
    for (std::size_t i = 0; i < n_px; ++i) {
      if (d2min[i] > cutoff2) continue;
      const double c = vessel.depth * std::exp(-d2min[i] / (2.0 * sigma * sigma));
      if (c > darkness[i]) darkness[i] = c;
    }
  }

  // Central reflex: one bright ridge pixel-wide along artery centerlines.
  std::vector<std::uint8_t> reflex(n_px, 0);
  for (const auto& vessel : out.vessels)
    if (vessel.cls == VesselClass::artery)
      for (const auto& p : vessel.centerline) reflex[static_cast<std::size_t>(p.y) * w + p.x] = 1;

  out.image.width = w;
  out.image.height = h;
  out.image.channels = 3;
  out.image.data.resize(n_px * 3);
  for (std::size_t i = 0; i < n_px; ++i) {
    double v = params.background - darkness[i];
    if (reflex[i]) v += params.reflex_amplitude;
    if (params.noise_sigma > 0.0) v += rng.gaussian(0.0, params.noise_sigma);
    out.image.data[i * 3 + 0] = clamp8(v * 1.05 + 8.0);
    out.image.data[i * 3 + 1] = clamp8(v);
    out.image.data[i * 3 + 2] = clamp8(v * 0.55);
  }

  out.mask = LabelMask(w, h);
  for (const auto& vessel : out.vessels)
    for (const auto& p : vessel.centerline)
      out.mask.at(p.x, p.y) = static_cast<std::uint8_t>(vessel.cls);

  return out;
}

}  // namespace retav
