#include "retav/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "retav/error.hpp"

namespace retav {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

const std::vector<std::pair<std::string, std::string>>& registry() {
  static const std::vector<std::pair<std::string, std::string>> defaults = {
      {"io.field", "green"},
      {"mfr.sigma", "2.0"},
      {"mfr.length", "9"},
      {"mfr.orientations", "12"},
      {"probe.threshold_high", "300"},
      {"probe.threshold_low", "100"},
      {"probe.threshold_step", "25"},
      {"probe.min_region_size", "60"},
      {"probe.max_region_size", "50000"},
      {"probe.fill_ratio_limit", "1.0"},
      {"skeleton.min_object_size", "50"},
      {"skeleton.max_spur_len", "5"},
      {"lbp.scales", "8x1,8x2"},
      {"lbp.rotation_invariant", "true"},
      {"lbp.window", "15"},
      {"rgb.half_width", "4"},
      {"pca.components", "0"},
      {"classifier.kind", "random_forest"},
      {"classifier.seed", "20080"},
      {"classifier.trees", "100"},
      {"classifier.max_depth", "0"},
      {"classifier.min_leaf", "1"},
      {"classifier.voting_members", "naive_bayes,cart,random_tree"},
      {"cv.folds", "10"},
      {"cv.seed", "7"},
      {"cv.group_by_image", "false"},
      {"synth.width", "320"},
      {"synth.height", "240"},
      {"synth.n_vessels", "8"},
      {"synth.artery_fraction", "0.5"},
      {"synth.artery_width_min", "2.5"},
      {"synth.artery_width_max", "4.0"},
      {"synth.vein_width_min", "5.0"},
      {"synth.vein_width_max", "8.0"},
      {"synth.reflex_amplitude", "30"},
      {"synth.background", "200"},
      {"synth.vessel_darkness", "80"},
      {"synth.noise_sigma", "4.0"},
      {"synth.seed", "11"},
  };
  return defaults;
}

}  // namespace

RunConfig::RunConfig() : entries_(registry()) {}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot open " + path);
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error("config: line " + std::to_string(line_no) + " is not key=value: " + t);
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

std::size_t RunConfig::index_of(const std::string& key) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].first == key) return i;
  throw Error("config: unknown key '" + key + "'");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  entries_[index_of(key)].second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  return entries_[index_of(key)].second;
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config: key '" + key + "' is not a boolean: " + v);
}

int RunConfig::get_int(const std::string& key) const {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(get(key), &pos);
    if (pos != get(key).size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw Error("config: key '" + key + "' is not an integer: " + get(key));
  }
}

double RunConfig::get_double(const std::string& key) const {
  try {
    std::size_t pos = 0;
    const double v = std::stod(get(key), &pos);
    if (pos != get(key).size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw Error("config: key '" + key + "' is not a number: " + get(key));
  }
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(get(key), &pos);
    if (pos != get(key).size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw Error("config: key '" + key + "' is not an unsigned integer: " + get(key));
  }
}

PipelineParams RunConfig::pipeline() const {
  PipelineParams p;
  p.field_mode = field_mode_from_string(get("io.field"));
  p.mfr_sigma = get_double("mfr.sigma");
  p.mfr_length = get_int("mfr.length");
  p.mfr_orientations = get_int("mfr.orientations");
  p.probe.threshold_high = get_double("probe.threshold_high");
  p.probe.threshold_low = get_double("probe.threshold_low");
  p.probe.threshold_step = get_double("probe.threshold_step");
  p.probe.min_region_size = get_int("probe.min_region_size");
  p.probe.max_region_size = get_int("probe.max_region_size");
  p.probe.fill_ratio_limit = get_double("probe.fill_ratio_limit");
  p.min_object_size = get_int("skeleton.min_object_size");
  p.max_spur_len = get_int("skeleton.max_spur_len");
  p.lbp_window = get_int("lbp.window");
  p.rgb_half_width = get_int("rgb.half_width");

  p.lbp_scales.clear();
  const bool ri = get_bool("lbp.rotation_invariant");
  std::istringstream ss(get("lbp.scales"));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto x = tok.find('x');
    if (x == std::string::npos)
      throw Error("config: lbp.scales entries must look like 8x1 (got '" + tok + "')");
    try {
      LbpConfig c;
      c.neighbors = std::stoi(tok.substr(0, x));
      c.radius = std::stod(tok.substr(x + 1));
      c.rotation_invariant = ri;
      p.lbp_scales.push_back(c);
    } catch (const std::exception&) {
      throw Error("config: bad lbp scale '" + tok + "'");
    }
  }
  if (p.lbp_scales.empty()) throw Error("config: lbp.scales is empty");
  return p;
}

ClassifierSpec RunConfig::classifier_spec() const {
  ClassifierSpec spec;
  spec.kind = classifier_kind_from_string(get("classifier.kind"));
  spec.seed = get_u64("classifier.seed");
  spec.params.trees = get_int("classifier.trees");
  spec.params.max_depth = get_int("classifier.max_depth");
  spec.params.min_leaf = get_int("classifier.min_leaf");
  spec.params.voting_members.clear();
  std::istringstream ss(get("classifier.voting_members"));
  std::string tok;
  while (std::getline(ss, tok, ','))
    spec.params.voting_members.push_back(classifier_kind_from_string(trim(tok)));
  return spec;
}

SynthParams RunConfig::synth_params() const {
  SynthParams p;
  p.width = get_int("synth.width");
  p.height = get_int("synth.height");
  p.n_vessels = get_int("synth.n_vessels");
  p.artery_fraction = get_double("synth.artery_fraction");
  p.artery_width_min = get_double("synth.artery_width_min");
  p.artery_width_max = get_double("synth.artery_width_max");
  p.vein_width_min = get_double("synth.vein_width_min");
  p.vein_width_max = get_double("synth.vein_width_max");
  p.reflex_amplitude = get_double("synth.reflex_amplitude");
  p.background = get_double("synth.background");
  p.vessel_darkness = get_double("synth.vessel_darkness");
  p.noise_sigma = get_double("synth.noise_sigma");
  p.seed = get_u64("synth.seed");
  return p;
}

}  // namespace retav
