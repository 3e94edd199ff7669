#include "retav/features.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "io_util.hpp"
#include "retav/error.hpp"

namespace retav {

std::string to_string(FieldMode mode) {
  switch (mode) {
    case FieldMode::red: return "red";
    case FieldMode::green: return "green";
    case FieldMode::blue: return "blue";
    case FieldMode::luminance: return "luminance";
  }
  return "green";
}

FieldMode field_mode_from_string(const std::string& s) {
  if (s == "red") return FieldMode::red;
  if (s == "green") return FieldMode::green;
  if (s == "blue") return FieldMode::blue;
  if (s == "luminance") return FieldMode::luminance;
  throw Error("unknown field mode '" + s + "' (red|green|blue|luminance)");
}

ScalarField extract_configured_field(const RasterImage& img, FieldMode mode) {
  if (mode == FieldMode::luminance) return extract_field_luminance(img);
  if (img.channels == 1) return extract_field(img, 0);
  return extract_field(img, static_cast<int>(mode));
}

const char* to_string(VesselClass cls) {
  return cls == VesselClass::artery ? "artery" : "vein";
}

VesselClass vessel_class_from_string(const std::string& s) {
  if (s == "artery") return VesselClass::artery;
  if (s == "vein") return VesselClass::vein;
  throw Error("unknown class '" + s + "' (artery|vein)");
}

// ---------------------------------------------------------------------------
// Schema identifiers

std::string lbp_schema_id(const std::vector<LbpConfig>& scales, int window, FieldMode mode) {
  if (scales.empty()) throw std::invalid_argument("lbp schema: no scales");
  bool ri = scales.front().rotation_invariant;
  std::ostringstream ss;
  ss << (ri ? "lbp-ri:" : "lbp-raw:");
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (scales[i].rotation_invariant != ri)
      throw std::invalid_argument("lbp schema: mixed rotation-invariance across scales");
    if (i) ss << ",";
    ss << scales[i].neighbors << "x" << detail::format_double(scales[i].radius);
  }
  ss << ":w" << window << ":" << to_string(mode);
  return ss.str();
}

std::string rgb_schema_id(int half_width) { return "rgb:hw" + std::to_string(half_width); }

std::vector<int> schema_blocks(const std::string& schema_id, std::size_t total_dim) {
  const bool ri = schema_id.rfind("lbp-ri:", 0) == 0;
  const bool raw = schema_id.rfind("lbp-raw:", 0) == 0;
  if (!ri && !raw) return {static_cast<int>(total_dim)};
  const std::size_t start = ri ? 7 : 8;
  const std::size_t end = schema_id.find(':', start);
  if (end == std::string::npos) throw Error("schema '" + schema_id + "': malformed");
  std::vector<int> blocks;
  std::istringstream ss(schema_id.substr(start, end - start));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto x = tok.find('x');
    if (x == std::string::npos) throw Error("schema '" + schema_id + "': malformed scale");
    const int p = std::stoi(tok.substr(0, x));
    blocks.push_back(lbp_code_map(p, ri)->n_bins);
  }
  std::size_t sum = 0;
  for (int b : blocks) sum += static_cast<std::size_t>(b);
  if (sum != total_dim)
    throw Error("schema '" + schema_id + "': block sizes do not match vector length " +
                std::to_string(total_dim));
  return blocks;
}

// ---------------------------------------------------------------------------
// Per-segment extraction

namespace {

std::vector<PixelPoint> raster_sorted(const std::vector<PixelPoint>& points) {
  std::vector<PixelPoint> sorted = points;
  std::sort(sorted.begin(), sorted.end(), [](const PixelPoint& a, const PixelPoint& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  return sorted;
}

}  // namespace

FeatureVector segment_lbp_features(const std::vector<CodeField>& code_fields,
                                   const VesselSegment& seg, int window, FieldMode mode_tag) {
  if (code_fields.empty()) throw std::invalid_argument("segment_lbp_features: no scales");
  if (seg.points.empty()) throw std::invalid_argument("segment_lbp_features: empty segment");

  std::vector<LbpConfig> scales;
  scales.reserve(code_fields.size());
  for (const auto& cf : code_fields) scales.push_back(cf.config);

  FeatureVector fv;
  fv.schema_id = lbp_schema_id(scales, window, mode_tag);
  const auto points = raster_sorted(seg.points);

  for (const auto& cf : code_fields) {
    auto map = lbp_code_map(cf.config.neighbors, cf.config.rotation_invariant);
    std::vector<double> acc(map->n_bins, 0.0);
    std::size_t n_used = 0;
    for (const auto& p : points) {
      if (p.x < 0 || p.x >= cf.width || p.y < 0 || p.y >= cf.height)
        throw std::invalid_argument("segment_lbp_features: segment point outside field");
      LbpHistogram hist;
      try {
        hist = region_histogram(cf, p.x, p.y, window);
      } catch (const Error&) {
        continue;  // window entirely in the invalid border band
      }
      for (std::size_t b = 0; b < acc.size(); ++b) acc[b] += hist.bins[b];
      ++n_used;
    }
    if (n_used == 0)
      throw Error("segment_lbp_features: no valid window anywhere on segment " +
                  std::to_string(seg.id));
    double total = 0.0;
    for (double v : acc) total += v;
    for (double& v : acc) v /= total;
    fv.values.insert(fv.values.end(), acc.begin(), acc.end());
  }
  return fv;
}

FeatureVector segment_lbp_features(const ScalarField& field, const VesselSegment& seg,
                                   const std::vector<LbpConfig>& scales, int window,
                                   FieldMode mode_tag) {
  std::vector<CodeField> code_fields;
  code_fields.reserve(scales.size());
  for (const auto& s : scales) code_fields.push_back(code_field(field, s));
  return segment_lbp_features(code_fields, seg, window, mode_tag);
}

FeatureVector segment_rgb_features(const RasterImage& img, const VesselSegment& seg,
                                   int half_width) {
  if (img.channels != 3)
    throw std::invalid_argument("segment_rgb_features: needs a 3-channel image");
  if (half_width < 0) throw std::invalid_argument("segment_rgb_features: half_width must be >= 0");
  if (seg.points.empty()) throw std::invalid_argument("segment_rgb_features: empty segment");

  // Pixels within half_width (Euclidean) of any centerline point, visited in
  // raster order so the statistics are traversal-independent.
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(img.width) * img.height, 0);
  const int r2 = half_width * half_width;
  for (const auto& p : seg.points) {
    if (!img.in_bounds(p.x, p.y))
      throw std::invalid_argument("segment_rgb_features: segment point outside image");
    for (int dy = -half_width; dy <= half_width; ++dy)
      for (int dx = -half_width; dx <= half_width; ++dx) {
        if (dx * dx + dy * dy > r2) continue;
        const int nx = p.x + dx, ny = p.y + dy;
        if (img.in_bounds(nx, ny)) seen[static_cast<std::size_t>(ny) * img.width + nx] = 1;
      }
  }
  std::vector<std::size_t> idxs;
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i]) idxs.push_back(i);
  if (idxs.empty()) throw Error("segment_rgb_features: empty neighborhood");

  FeatureVector fv;
  fv.schema_id = rgb_schema_id(half_width);
  const double n = static_cast<double>(idxs.size());
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0;
    for (std::size_t i : idxs) sum += img.data[i * 3 + c];
    const double mean = sum / n;
    double res_sum = 0.0, res_sq = 0.0;
    for (std::size_t i : idxs) {
      const double r = img.data[i * 3 + c] - mean;
      res_sum += r;
      res_sq += r * r;
    }
    fv.values.push_back(res_sum / n);
    fv.values.push_back(res_sq / n);
  }
  return fv;
}

std::optional<VesselClass> label_segment(const VesselSegment& seg, const LabelMask& mask) {
  if (seg.points.empty()) throw std::invalid_argument("label_segment: empty segment");
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(mask.width) * mask.height, 0);
  std::size_t artery = 0, vein = 0;
  for (const auto& p : seg.points) {
    if (p.x < 0 || p.x >= mask.width || p.y < 0 || p.y >= mask.height)
      throw Error("label_segment: segment does not fit the mask dimensions");
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) {
        if (dx * dx + dy * dy > 4) continue;
        const int nx = p.x + dx, ny = p.y + dy;
        if (nx < 0 || nx >= mask.width || ny < 0 || ny >= mask.height) continue;
        const std::size_t idx = static_cast<std::size_t>(ny) * mask.width + nx;
        if (seen[idx]) continue;
        seen[idx] = 1;
        if (mask.classes[idx] == 1) ++artery;
        else if (mask.classes[idx] == 2) ++vein;
      }
  }
  if (artery == vein) return std::nullopt;  // covers the nothing-nearby case
  return artery > vein ? VesselClass::artery : VesselClass::vein;
}

// ---------------------------------------------------------------------------
// PCA

PcaModel pca_fit(const Dataset& ds, int k) {
  const int n = static_cast<int>(ds.samples.size());
  const int d = static_cast<int>(ds.n_features());
  if (n < 2) throw std::invalid_argument("pca_fit: needs at least 2 samples");
  if (k < 1 || k > d) throw std::invalid_argument("pca_fit: k must be in [1, dim]");

  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = ds.samples[i].values[j];
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("pca_fit: eigendecomposition failed");

  PcaModel model;
  model.input_dim = d;
  model.k = k;
  model.base_schema_id = ds.schema_id;
  model.mean.assign(mean.data(), mean.data() + d);
  model.components.resize(static_cast<std::size_t>(k) * d);
  model.explained_variance.resize(k);
  // Eigen returns ascending eigenvalues; take the top k in descending order.
  for (int c = 0; c < k; ++c) {
    const int src = d - 1 - c;
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    // Deterministic sign: largest-magnitude entry positive.
    int arg = 0;
    for (int j = 1; j < d; ++j)
      if (std::abs(v(j)) > std::abs(v(arg))) arg = j;
    if (v(arg) < 0.0) v = -v;
    for (int j = 0; j < d; ++j) model.components[static_cast<std::size_t>(c) * d + j] = v(j);
    model.explained_variance[c] = std::max(0.0, solver.eigenvalues()(src));
  }
  return model;
}

FeatureVector pca_transform(const PcaModel& model, const FeatureVector& fv) {
  if (static_cast<int>(fv.values.size()) != model.input_dim)
    throw Error("pca_transform: vector length " + std::to_string(fv.values.size()) +
                " does not match model dim " + std::to_string(model.input_dim));
  FeatureVector out;
  out.schema_id = "pca:" + std::to_string(model.k) + ":" + model.base_schema_id;
  out.values.resize(model.k);
  for (int c = 0; c < model.k; ++c) {
    double acc = 0.0;
    for (int j = 0; j < model.input_dim; ++j)
      acc += (fv.values[j] - model.mean[j]) * model.components[static_cast<std::size_t>(c) * model.input_dim + j];
    out.values[c] = acc;
  }
  return out;
}

Dataset apply_pca(const Dataset& ds, const PcaModel& model) {
  if (ds.schema_id != model.base_schema_id)
    throw Error("apply_pca: dataset schema '" + ds.schema_id + "' does not match model base '" +
                model.base_schema_id + "'");
  Dataset out;
  out.schema_id = "pca:" + std::to_string(model.k) + ":" + model.base_schema_id;
  out.samples.reserve(ds.samples.size());
  for (const auto& s : ds.samples) {
    FeatureVector fv{s.values, ds.schema_id};
    Sample t{s.image_id, s.segment_id, s.label, pca_transform(model, fv).values};
    out.samples.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

std::vector<VesselSegment> pipeline_segments(const RasterImage& image,
                                             const PipelineParams& params) {
  const ScalarField field = extract_configured_field(image, params.field_mode);
  const auto bank = build_filter_bank(params.mfr_sigma, params.mfr_length,
                                      params.mfr_orientations);
  const ScalarField mfr = matched_filter_response(field, bank);
  BinaryMask mask = threshold_probe(mfr, params.probe);
  mask = remove_small_objects(mask, params.min_object_size);
  Skeleton sk = thin(mask);
  sk = prune_spurs(sk, params.max_spur_len);
  return split_segments(sk);
}

BuildResult build_dataset(const std::vector<LabeledImage>& images, const PipelineParams& params,
                          FeatureSchema schema) {
  if (images.empty()) throw std::invalid_argument("build_dataset: no images");

  BuildResult result;
  result.dataset.schema_id = schema == FeatureSchema::msri_lbp
                                 ? lbp_schema_id(params.lbp_scales, params.lbp_window,
                                                 params.field_mode)
                                 : rgb_schema_id(params.rgb_half_width);

  for (const auto& li : images) {
    if (li.mask.width != li.image.width || li.mask.height != li.image.height)
      throw Error("build_dataset: image '" + li.id + "' and its mask differ in size");

    ImageBuildStats stats;
    stats.image_id = li.id;
    const auto segments = pipeline_segments(li.image, params);
    stats.n_segments = static_cast<int>(segments.size());

    std::vector<CodeField> code_fields;
    if (schema == FeatureSchema::msri_lbp) {
      const ScalarField field = extract_configured_field(li.image, params.field_mode);
      for (const auto& s : params.lbp_scales) code_fields.push_back(code_field(field, s));
    }

    for (const auto& seg : segments) {
      const auto label = label_segment(seg, li.mask);
      if (!label) {
        ++stats.n_unknown;
        continue;
      }
      try {
        FeatureVector fv =
            schema == FeatureSchema::msri_lbp
                ? segment_lbp_features(code_fields, seg, params.lbp_window, params.field_mode)
                : segment_rgb_features(li.image, seg, params.rgb_half_width);
        result.dataset.samples.push_back({li.id, seg.id, *label, std::move(fv.values)});
        ++stats.n_labeled;
      } catch (const Error&) {
        ++stats.n_failed;
      }
    }
    result.stats.push_back(stats);
  }
  if (result.dataset.samples.empty()) throw Error("build_dataset: zero usable segments");
  return result;
}

// ---------------------------------------------------------------------------
// CSV

void save_dataset(const Dataset& ds, const std::string& path) {
  if (ds.samples.empty()) throw Error("save_dataset: empty dataset");
  detail::AtomicWriter w(path);
  auto& out = w.stream();
  out << "# schema_id=" << ds.schema_id << "\n";
  out << "image_id,segment_id,class";
  const std::size_t d = ds.n_features();
  for (std::size_t j = 0; j < d; ++j) out << ",f" << j;
  out << "\n";
  for (const auto& s : ds.samples) {
    if (s.image_id.find(',') != std::string::npos)
      throw Error("save_dataset: image id contains a comma: " + s.image_id);
    if (s.values.size() != d) throw Error("save_dataset: inhomogeneous vector lengths");
    out << s.image_id << "," << s.segment_id << "," << to_string(s.label);
    for (double v : s.values) out << "," << detail::format_double(v);
    out << "\n";
  }
  w.commit();
}

Dataset load_dataset(const std::string& path) {
  const std::string buf = detail::read_file_bytes(path);
  std::istringstream in(buf);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# schema_id=", 0) != 0)
    throw Error("dataset csv: missing '# schema_id=' comment line: " + path);
  Dataset ds;
  ds.schema_id = line.substr(12);
  if (!std::getline(in, line) || line.rfind("image_id,segment_id,class", 0) != 0)
    throw Error("dataset csv: missing header line: " + path);

  std::size_t expected = std::string::npos;
  int line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string image_id, seg_id, cls;
    if (!std::getline(ls, image_id, ',') || !std::getline(ls, seg_id, ',') ||
        !std::getline(ls, cls, ','))
      throw Error("dataset csv: bad row at line " + std::to_string(line_no));
    Sample s;
    s.image_id = image_id;
    try {
      s.segment_id = std::stoi(seg_id);
    } catch (const std::exception&) {
      throw Error("dataset csv: bad segment id at line " + std::to_string(line_no));
    }
    s.label = vessel_class_from_string(cls);
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0')
        throw Error("dataset csv: bad value '" + tok + "' at line " + std::to_string(line_no));
      s.values.push_back(v);
    }
    if (expected == std::string::npos) expected = s.values.size();
    if (s.values.size() != expected || expected == 0)
      throw Error("dataset csv: inconsistent vector length at line " + std::to_string(line_no));
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw Error("dataset csv: no samples: " + path);
  return ds;
}

}  // namespace retav
