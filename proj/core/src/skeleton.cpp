#include "retav/skeleton.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "io_util.hpp"
#include "retav/error.hpp"

namespace retav {

namespace {

constexpr std::array<int, 8> kDx8 = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr std::array<int, 8> kDy8 = {0, 1, 1, 1, 0, -1, -1, -1};

int neighbor_count(const BinaryMask& m, int x, int y) {
  int n = 0;
  for (int i = 0; i < 8; ++i) {
    const int nx = x + kDx8[i], ny = y + kDy8[i];
    if (m.in_bounds(nx, ny) && m.at(nx, ny)) ++n;
  }
  return n;
}

}  // namespace

BinaryMask remove_small_objects(const BinaryMask& mask, int min_size) {
  if (min_size < 0) throw std::invalid_argument("remove_small_objects: min_size must be >= 0");
  BinaryMask out(mask.width, mask.height);
  std::vector<std::uint8_t> seen(mask.bits.size(), 0);
  std::vector<int> stack, component;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const int start = y * mask.width + x;
      if (!mask.bits[start] || seen[start]) continue;
      component.clear();
      stack.assign(1, start);
      seen[start] = 1;
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        component.push_back(idx);
        const int px = idx % mask.width, py = idx / mask.width;
        for (int i = 0; i < 8; ++i) {
          const int nx = px + kDx8[i], ny = py + kDy8[i];
          if (!mask.in_bounds(nx, ny)) continue;
          const int nidx = ny * mask.width + nx;
          if (mask.bits[nidx] && !seen[nidx]) {
            seen[nidx] = 1;
            stack.push_back(nidx);
          }
        }
      }
      if (static_cast<int>(component.size()) >= min_size)
        for (int idx : component) out.bits[idx] = 1;
    }
  }
  return out;
}

namespace {

// Zhang-Suen conditions on the 8-neighborhood (clockwise from north:
// p2 p3 p4 p5 p6 p7 p8 p9 = N NE E SE S SW W NW).
bool zs_deletable(const std::array<int, 8>& p, bool first_pass) {
  const int b = p[0] + p[1] + p[2] + p[3] + p[4] + p[5] + p[6] + p[7];
  if (b < 2 || b > 6) return false;
  int a = 0;
  for (int i = 0; i < 8; ++i)
    if (p[i] == 0 && p[(i + 1) % 8] == 1) ++a;
  if (a != 1) return false;
  if (first_pass) return (p[0] * p[2] * p[4]) == 0 && (p[2] * p[4] * p[6]) == 0;
  return (p[0] * p[2] * p[6]) == 0 && (p[0] * p[4] * p[6]) == 0;
}

/// Yokoi connectivity number for 8-connected foreground. ring holds the
/// neighborhood counterclockwise from east: E NE N NW W SW S SE.
int yokoi_number(const std::array<int, 8>& ring) {
  int c = 0;
  for (int k = 0; k < 8; k += 2) {
    const int a = 1 - ring[k];
    const int b1 = 1 - ring[(k + 1) % 8];
    const int b2 = 1 - ring[(k + 2) % 8];
    c += a - a * b1 * b2;
  }
  return c;
}

}  // namespace

Skeleton thin(const BinaryMask& mask) {
  Skeleton cur = mask;
  std::vector<int> doomed;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      doomed.clear();
      for (int y = 0; y < cur.height; ++y) {
        for (int x = 0; x < cur.width; ++x) {
          if (!cur.at(x, y)) continue;
          auto probe = [&](int dx, int dy) -> int {
            const int nx = x + dx, ny = y + dy;
            return cur.in_bounds(nx, ny) && cur.at(nx, ny) ? 1 : 0;
          };
          const std::array<int, 8> p = {probe(0, -1), probe(1, -1), probe(1, 0),
                                        probe(1, 1),  probe(0, 1),  probe(-1, 1),
                                        probe(-1, 0), probe(-1, -1)};
          if (zs_deletable(p, pass == 0)) doomed.push_back(y * cur.width + x);
        }
      }
      for (int idx : doomed) cur.bits[idx] = 0;
      if (!doomed.empty()) changed = true;
    }
  }

  // Zhang-Suen leaves staircase pixels along diagonals (3 neighbors without
  // being junctions). Reduce to a minimal skeleton by sequentially deleting
  // simple points that are not endpoints: Yokoi number 1 means removal keeps
  // both foreground and background topology intact.
  bool reduced = true;
  while (reduced) {
    reduced = false;
    for (int y = 0; y < cur.height; ++y) {
      for (int x = 0; x < cur.width; ++x) {
        if (!cur.at(x, y)) continue;
        auto probe = [&](int dx, int dy) -> int {
          const int nx = x + dx, ny = y + dy;
          return cur.in_bounds(nx, ny) && cur.at(nx, ny) ? 1 : 0;
        };
        const std::array<int, 8> ring = {probe(1, 0),  probe(1, -1), probe(0, -1),
                                         probe(-1, -1), probe(-1, 0), probe(-1, 1),
                                         probe(0, 1),  probe(1, 1)};
        const int b = ring[0] + ring[1] + ring[2] + ring[3] + ring[4] + ring[5] + ring[6] +
                      ring[7];
        if (b >= 2 && yokoi_number(ring) == 1) {
          cur.set(x, y, false);
          reduced = true;
        }
      }
    }
  }
  return cur;
}

Skeleton prune_spurs(const Skeleton& sk, int max_spur_len) {
  if (max_spur_len < 0) throw std::invalid_argument("prune_spurs: max_spur_len must be >= 0");
  Skeleton cur = sk;
  if (max_spur_len == 0) return cur;

  // Walk from each original endpoint; delete the branch if it runs into a
  // junction in fewer than max_spur_len pixels.
  std::vector<int> endpoints;
  for (int y = 0; y < cur.height; ++y)
    for (int x = 0; x < cur.width; ++x)
      if (cur.at(x, y) && neighbor_count(cur, x, y) == 1) endpoints.push_back(y * cur.width + x);

  for (int start : endpoints) {
    int x = start % cur.width, y = start / cur.width;
    if (!cur.at(x, y) || neighbor_count(cur, x, y) != 1) continue;  // already altered
    std::vector<int> path;
    int prev_x = -2, prev_y = -2;
    bool hit_junction = false;
    while (static_cast<int>(path.size()) < max_spur_len) {
      path.push_back(y * cur.width + x);
      int next_x = -1, next_y = -1, branches = 0;
      for (int i = 0; i < 8; ++i) {
        const int nx = x + kDx8[i], ny = y + kDy8[i];
        if (!cur.in_bounds(nx, ny) || !cur.at(nx, ny)) continue;
        if (nx == prev_x && ny == prev_y) continue;
        ++branches;
        next_x = nx;
        next_y = ny;
      }
      if (branches == 0) break;  // free end: not attached to a junction
      if (neighbor_count(cur, next_x, next_y) > 2) {
        hit_junction = true;
        break;
      }
      prev_x = x;
      prev_y = y;
      x = next_x;
      y = next_y;
    }
    if (hit_junction && static_cast<int>(path.size()) < max_spur_len)
      for (int idx : path) cur.bits[idx] = 0;
  }
  return cur;
}

std::vector<VesselSegment> split_segments(const Skeleton& sk) {
  Skeleton pruned = sk;
  // Delete junction pixels. Every survivor then has <= 2 neighbors.
  for (int y = 0; y < sk.height; ++y)
    for (int x = 0; x < sk.width; ++x)
      if (sk.at(x, y) && neighbor_count(sk, x, y) > 2) pruned.set(x, y, false);

  std::vector<std::uint8_t> seen(pruned.bits.size(), 0);
  std::vector<VesselSegment> segments;

  for (int y0 = 0; y0 < pruned.height; ++y0) {
    for (int x0 = 0; x0 < pruned.width; ++x0) {
      const int start_idx = y0 * pruned.width + x0;
      if (!pruned.bits[start_idx] || seen[start_idx]) continue;

      std::vector<int> component, stack{start_idx};
      seen[start_idx] = 1;
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        component.push_back(idx);
        const int px = idx % pruned.width, py = idx / pruned.width;
        for (int i = 0; i < 8; ++i) {
          const int nx = px + kDx8[i], ny = py + kDy8[i];
          if (!pruned.in_bounds(nx, ny)) continue;
          const int nidx = ny * pruned.width + nx;
          if (pruned.bits[nidx] && !seen[nidx]) {
            seen[nidx] = 1;
            stack.push_back(nidx);
          }
        }
      }
      if (component.size() < 3) continue;

      // Trace from the raster-first endpoint, or the raster-first pixel for
      // a closed loop.
      std::sort(component.begin(), component.end());
      int trace_start = -1;
      for (int idx : component) {
        if (neighbor_count(pruned, idx % pruned.width, idx / pruned.width) <= 1) {
          trace_start = idx;
          break;
        }
      }
      if (trace_start < 0) trace_start = component.front();

      VesselSegment seg;
      std::vector<std::uint8_t> used(component.size(), 0);
      auto in_component = [&](int idx) {
        return std::binary_search(component.begin(), component.end(), idx);
      };
      auto mark_used = [&](int idx) {
        const auto it = std::lower_bound(component.begin(), component.end(), idx);
        used[static_cast<std::size_t>(it - component.begin())] = 1;
      };
      auto is_used = [&](int idx) {
        const auto it = std::lower_bound(component.begin(), component.end(), idx);
        return used[static_cast<std::size_t>(it - component.begin())] != 0;
      };

      int cx = trace_start % pruned.width, cy = trace_start / pruned.width;
      for (;;) {
        seg.points.push_back({cx, cy});
        mark_used(cy * pruned.width + cx);
        int next = -1;
        for (int i = 0; i < 8; ++i) {
          const int nx = cx + kDx8[i], ny = cy + kDy8[i];
          if (!pruned.in_bounds(nx, ny)) continue;
          const int nidx = ny * pruned.width + nx;
          if (!pruned.bits[nidx] || !in_component(nidx) || is_used(nidx)) continue;
          if (next < 0 || nidx < next) next = nidx;
        }
        if (next < 0) break;
        cx = next % pruned.width;
        cy = next / pruned.width;
      }
      segments.push_back(std::move(seg));
    }
  }

  std::sort(segments.begin(), segments.end(), [&](const VesselSegment& a, const VesselSegment& b) {
    const auto& pa = a.points.front();
    const auto& pb = b.points.front();
    return std::tie(pa.y, pa.x) < std::tie(pb.y, pb.x);
  });
  for (std::size_t i = 0; i < segments.size(); ++i) segments[i].id = static_cast<int>(i);
  return segments;
}

void save_segments(const std::vector<VesselSegment>& segments, const std::string& path) {
  detail::AtomicWriter w(path);
  for (const auto& seg : segments) {
    w.stream() << seg.id << ", " << seg.points.size() << ",";
    for (const auto& p : seg.points) w.stream() << " " << p.x << " " << p.y;
    w.stream() << "\n";
  }
  w.commit();
}

std::vector<VesselSegment> load_segments(const std::string& path) {
  const std::string buf = detail::read_file_bytes(path);
  std::vector<VesselSegment> segments;
  std::istringstream lines(buf);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream ls(line);
    VesselSegment seg;
    std::size_t n_points = 0;
    if (!(ls >> seg.id >> n_points))
      throw Error("segments file: bad record at line " + std::to_string(line_no));
    seg.points.resize(n_points);
    for (auto& p : seg.points)
      if (!(ls >> p.x >> p.y))
        throw Error("segments file: truncated record at line " + std::to_string(line_no));
    segments.push_back(std::move(seg));
  }
  return segments;
}

}  // namespace retav
