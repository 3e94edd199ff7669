// retav: retinal artery/vein classification pipeline, one subcommand per
// pipeline stage. Exit codes: 0 ok, 1 usage/config error, 2 data error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "../core/src/io_util.hpp"
#include "retav/classify.hpp"
#include "retav/config.hpp"
#include "retav/error.hpp"
#include "retav/eval.hpp"
#include "retav/features.hpp"
#include "retav/overlay.hpp"
#include "retav/segmentation.hpp"
#include "retav/skeleton.hpp"
#include "retav/synth.hpp"

namespace {

using retav::Error;
using retav::RunConfig;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value configuration file");
    cmd->add_option("--set", sets, "override one config key (key=value, repeatable)");
  }

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig() : RunConfig::from_file(config_path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }
};

void write_text_atomic(const std::string& path, const std::string& text) {
  retav::detail::AtomicWriter w(path);
  w.stream().write(text.data(), static_cast<std::streamsize>(text.size()));
  w.commit();
}

std::string basename_no_ext(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

std::string format_score(double v) { return retav::detail::format_double(v); }

// Column-based class lookup used by `overlay`: accepts dataset CSVs (class
// column) and prediction CSVs (predicted column).
std::map<int, retav::VesselClass> load_segment_classes(const std::string& path,
                                                       const std::string& image_filter) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open class file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error("class file is empty: " + path);
  if (line.rfind("#", 0) == 0 && !std::getline(in, line))
    throw Error("class file has no header: " + path);
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string tok;
    while (std::getline(hs, tok, ',')) header.push_back(tok);
  }
  int col_image = -1, col_segment = -1, col_class = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "image_id") col_image = static_cast<int>(i);
    if (header[i] == "segment_id") col_segment = static_cast<int>(i);
    if (header[i] == "predicted") col_class = static_cast<int>(i);
    if (col_class < 0 && header[i] == "class") col_class = static_cast<int>(i);
  }
  if (col_segment < 0 || col_class < 0)
    throw Error("class file needs segment_id and class/predicted columns: " + path);

  std::map<int, retav::VesselClass> classes;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) cols.push_back(tok);
    if (static_cast<int>(cols.size()) <= std::max(col_segment, col_class))
      throw Error("class file: short row: " + line);
    if (!image_filter.empty() && col_image >= 0 && cols[col_image] != image_filter) continue;
    classes[std::stoi(cols[col_segment])] = retav::vessel_class_from_string(cols[col_class]);
  }
  return classes;
}

// ---------------------------------------------------------------------------
// Subcommand bodies

int run_segment(const RunConfig& cfg, const std::string& image_path, const std::string& out_path,
                const std::string& mfr_out) {
  const auto img = retav::load_image(image_path);
  const auto params = cfg.pipeline();
  const auto field = retav::extract_configured_field(img, params.field_mode);
  const auto bank =
      retav::build_filter_bank(params.mfr_sigma, params.mfr_length, params.mfr_orientations);
  const auto mfr = retav::matched_filter_response(field, bank);
  if (!mfr_out.empty()) retav::save_mfr_grid(mfr, mfr_out);
  const auto mask = retav::threshold_probe(mfr, params.probe);
  retav::save_image(retav::mask_to_image(mask), out_path);
  std::cout << "segment: " << mask.count() << " vessel pixels -> " << out_path << "\n";
  return 0;
}

int run_skeletonize(const RunConfig& cfg, const std::string& mask_path,
                    const std::string& out_path) {
  const auto params = cfg.pipeline();
  auto mask = retav::image_to_mask(retav::load_image(mask_path));
  mask = retav::remove_small_objects(mask, params.min_object_size);
  auto sk = retav::thin(mask);
  sk = retav::prune_spurs(sk, params.max_spur_len);
  const auto segments = retav::split_segments(sk);
  retav::save_segments(segments, out_path);
  std::cout << "skeletonize: " << segments.size() << " segments -> " << out_path << "\n";
  return 0;
}

int run_features(const RunConfig& cfg, const std::vector<std::string>& images,
                 const std::vector<std::string>& masks, std::vector<std::string> ids,
                 const std::string& schema_name, const std::string& out_path) {
  if (images.size() != masks.size()) throw Error("features: --image and --mask counts differ");
  if (!ids.empty() && ids.size() != images.size())
    throw Error("features: --id count must match --image count");
  if (ids.empty())
    for (const auto& p : images) ids.push_back(basename_no_ext(p));

  retav::FeatureSchema schema;
  if (schema_name == "msri_lbp") schema = retav::FeatureSchema::msri_lbp;
  else if (schema_name == "rgb") schema = retav::FeatureSchema::rgb;
  else throw Error("features: unknown schema '" + schema_name + "' (msri_lbp|rgb)");

  std::vector<retav::LabeledImage> labeled;
  labeled.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i)
    labeled.push_back({ids[i], retav::load_image(images[i]), retav::load_label_mask(masks[i])});

  auto result = retav::build_dataset(labeled, cfg.pipeline(), schema);
  for (const auto& st : result.stats)
    std::cout << "features: " << st.image_id << ": " << st.n_labeled << " labeled of "
              << st.n_segments << " segments (" << st.n_unknown << " unknown, " << st.n_failed
              << " unusable)\n";

  const int k = cfg.pca_components();
  if (k > 0) {
    const auto pca = retav::pca_fit(result.dataset, k);
    result.dataset = retav::apply_pca(result.dataset, pca);
    std::cout << "features: projected to " << k << " principal components\n";
  }
  retav::save_dataset(result.dataset, out_path);
  std::cout << "features: " << result.dataset.samples.size() << " samples, schema "
            << result.dataset.schema_id << " -> " << out_path << "\n";
  return 0;
}

int run_train(const RunConfig& cfg, const std::string& data_path, const std::string& out_path) {
  const auto ds = retav::load_dataset(data_path);
  const auto model = retav::train(cfg.classifier_spec(), ds);
  retav::save_model(model, out_path);
  std::cout << "train: " << retav::to_string(model.spec.kind) << " on " << ds.samples.size()
            << " samples (schema " << ds.schema_id << ") -> " << out_path << "\n";
  return 0;
}

int run_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_path) {
  const auto model = retav::load_model(model_path);
  const auto ds = retav::load_dataset(data_path);
  if (ds.schema_id != model.schema_id)
    throw Error("predict: dataset schema '" + ds.schema_id + "' does not match model schema '" +
                model.schema_id + "'");
  std::ostringstream out;
  out << "image_id,segment_id,true_class,predicted,artery_score\n";
  for (const auto& s : ds.samples) {
    const auto pred = retav::predict(model, s.values);
    out << s.image_id << "," << s.segment_id << "," << retav::to_string(s.label) << ","
        << retav::to_string(pred.cls) << "," << format_score(pred.artery_score) << "\n";
  }
  write_text_atomic(out_path, out.str());
  std::cout << "predict: " << ds.samples.size() << " predictions -> " << out_path << "\n";
  return 0;
}

int run_evaluate(const RunConfig& cfg, const std::string& data_path,
                 const std::string& out_prefix) {
  const auto ds = retav::load_dataset(data_path);
  auto report = retav::cross_validate(cfg.classifier_spec(), ds, cfg.cv_folds(), cfg.cv_seed(),
                                      cfg.cv_group_by_image());
  report.config_echo = cfg.entries();
  retav::save_report(report, out_prefix + ".txt", out_prefix + ".json");
  std::cout << "evaluate: recognition_rate=" << format_score(report.recognition_rate_percent)
            << " auc=" << format_score(report.auc) << " -> " << out_prefix << ".{txt,json}\n";
  return 0;
}

int run_compare(const RunConfig& cfg, const std::vector<std::string>& data_paths,
                const std::string& kinds_csv, const std::string& out_path) {
  if (data_paths.size() < 2) throw Error("compare: need at least two --data files");
  std::vector<retav::Dataset> datasets;
  for (const auto& p : data_paths) datasets.push_back(retav::load_dataset(p));

  std::vector<retav::ClassifierSpec> specs;
  std::istringstream ss(kinds_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    retav::ClassifierSpec spec = cfg.classifier_spec();
    spec.kind = retav::classifier_kind_from_string(tok);
    specs.push_back(spec);
  }
  if (specs.empty()) throw Error("compare: --kinds is empty");

  const auto table = retav::compare(specs, datasets, cfg.cv_folds(), cfg.cv_seed());
  const std::string text = retav::render_comparison_text(table);
  write_text_atomic(out_path, text);
  std::cout << text;
  return 0;
}

int run_overlay(const std::string& image_path, const std::string& segments_path,
                const std::string& classes_path, const std::string& image_filter,
                const std::string& out_path) {
  const auto img = retav::load_image(image_path);
  const auto segments = retav::load_segments(segments_path);
  const auto classes = load_segment_classes(classes_path, image_filter);

  std::vector<retav::VesselSegment> keep;
  std::vector<retav::VesselClass> keep_cls;
  for (const auto& seg : segments) {
    const auto it = classes.find(seg.id);
    if (it == classes.end()) continue;  // unclassified segments stay unpainted
    keep.push_back(seg);
    keep_cls.push_back(it->second);
  }
  if (keep.empty()) throw Error("overlay: no segment ids matched the class file");
  retav::save_overlay(img, keep, keep_cls, out_path);
  std::cout << "overlay: painted " << keep.size() << " segments -> " << out_path << "\n";
  return 0;
}

int run_synth(const RunConfig& cfg, const std::string& out_image, const std::string& out_mask) {
  const auto result = retav::generate(cfg.synth_params());
  retav::save_image(result.image, out_image);
  retav::save_label_mask(result.mask, out_mask);
  std::size_t arteries = 0;
  for (const auto& v : result.vessels)
    if (v.cls == retav::VesselClass::artery) ++arteries;
  std::cout << "synth: " << result.vessels.size() << " vessels (" << arteries << " arteries) -> "
            << out_image << ", " << out_mask << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"retinal artery/vein classification with multiscale rotation-invariant LBP"};
  app.require_subcommand(1);

  auto* c_segment = app.add_subcommand("segment", "image -> vessel mask PNG");
  CommonOpts segment_common;
  segment_common.attach(c_segment);
  std::string seg_image, seg_out, seg_mfr_out;
  c_segment->add_option("--image", seg_image, "input image (PPM/PNG)")->required();
  c_segment->add_option("--out", seg_out, "output mask PNG (white = vessel)")->required();
  c_segment->add_option("--mfr-out", seg_mfr_out, "also dump the raw MFR float grid");

  auto* c_skel = app.add_subcommand("skeletonize", "vessel mask -> segments text");
  CommonOpts skel_common;
  skel_common.attach(c_skel);
  std::string skel_mask, skel_out;
  c_skel->add_option("--mask", skel_mask, "vessel mask image")->required();
  c_skel->add_option("--out", skel_out, "output segments file")->required();

  auto* c_feat = app.add_subcommand("features", "images + label masks -> dataset CSV");
  CommonOpts feat_common;
  feat_common.attach(c_feat);
  std::vector<std::string> feat_images, feat_masks, feat_ids;
  std::string feat_schema = "msri_lbp", feat_out;
  c_feat->add_option("--image", feat_images, "input image (repeatable)")->required();
  c_feat->add_option("--mask", feat_masks, "paired label mask (repeatable)")->required();
  c_feat->add_option("--id", feat_ids, "image id override (repeatable)");
  c_feat->add_option("--schema", feat_schema, "feature schema: msri_lbp|rgb");
  c_feat->add_option("--out", feat_out, "output dataset CSV")->required();
  int feat_pca = -1;
  c_feat->add_option("--pca-k", feat_pca, "project to k principal components (0 = off)");

  auto* c_train = app.add_subcommand("train", "dataset CSV -> model file");
  CommonOpts train_common;
  train_common.attach(c_train);
  std::string train_data, train_out, train_kind;
  std::int64_t train_seed = -1;
  c_train->add_option("--data", train_data, "training dataset CSV")->required();
  c_train->add_option("--out", train_out, "output model file")->required();
  c_train->add_option("--kind", train_kind, "classifier kind override");
  c_train->add_option("--seed", train_seed, "classifier seed override");

  auto* c_pred = app.add_subcommand("predict", "model + dataset CSV -> predictions CSV");
  std::string pred_model, pred_data, pred_out;
  c_pred->add_option("--model", pred_model, "trained model file")->required();
  c_pred->add_option("--data", pred_data, "dataset CSV to score")->required();
  c_pred->add_option("--out", pred_out, "output predictions CSV")->required();

  auto* c_eval = app.add_subcommand("evaluate", "dataset CSV -> cross-validated report");
  CommonOpts eval_common;
  eval_common.attach(c_eval);
  std::string eval_data, eval_prefix, eval_kind;
  std::int64_t eval_folds = -1;
  c_eval->add_option("--data", eval_data, "dataset CSV")->required();
  c_eval->add_option("--out-prefix", eval_prefix, "report path prefix (.txt/.json)")->required();
  c_eval->add_option("--kind", eval_kind, "classifier kind override");
  c_eval->add_option("--folds", eval_folds, "fold count override");
  bool eval_by_image = false;
  c_eval->add_flag("--group-by-image", eval_by_image, "assign whole images to folds");

  auto* c_cmp = app.add_subcommand("compare", "datasets x classifiers -> ranking table");
  CommonOpts cmp_common;
  cmp_common.attach(c_cmp);
  std::vector<std::string> cmp_data;
  std::string cmp_kinds =
      "naive_bayes,cart,random_tree,random_forest,bagging_cart,majority_voting,prototype_lbp";
  std::string cmp_out;
  c_cmp->add_option("--data", cmp_data, "dataset CSV per feature schema (repeatable)")->required();
  c_cmp->add_option("--kinds", cmp_kinds, "comma-separated classifier kinds");
  c_cmp->add_option("--out", cmp_out, "output table path")->required();

  auto* c_ovl = app.add_subcommand("overlay", "paint classified centerlines red/blue");
  std::string ovl_image, ovl_segments, ovl_classes, ovl_filter, ovl_out;
  c_ovl->add_option("--image", ovl_image, "base image")->required();
  c_ovl->add_option("--segments", ovl_segments, "segments text file")->required();
  c_ovl->add_option("--classes", ovl_classes, "dataset or predictions CSV with classes")
      ->required();
  c_ovl->add_option("--id", ovl_filter, "restrict class rows to this image id");
  c_ovl->add_option("--out", ovl_out, "output overlay PNG")->required();

  auto* c_synth = app.add_subcommand("synth", "generate a synthetic fundus + label mask");
  CommonOpts synth_common;
  synth_common.attach(c_synth);
  std::string synth_image, synth_mask;
  std::int64_t synth_seed = -1;
  c_synth->add_option("--out-image", synth_image, "output image PNG")->required();
  c_synth->add_option("--out-mask", synth_mask, "output label mask PNG")->required();
  c_synth->add_option("--seed", synth_seed, "synth seed override");

  CLI11_PARSE(app, argc, argv);

  // Resolve configuration; bad config is a usage error.
  RunConfig cfg;
  try {
    if (c_segment->parsed()) cfg = segment_common.resolve();
    else if (c_skel->parsed()) cfg = skel_common.resolve();
    else if (c_feat->parsed()) {
      cfg = feat_common.resolve();
      if (feat_pca >= 0) cfg.set("pca.components", std::to_string(feat_pca));
    } else if (c_train->parsed()) {
      cfg = train_common.resolve();
      if (!train_kind.empty()) cfg.set("classifier.kind", train_kind);
      if (train_seed >= 0) cfg.set("classifier.seed", std::to_string(train_seed));
    } else if (c_eval->parsed()) {
      cfg = eval_common.resolve();
      if (!eval_kind.empty()) cfg.set("classifier.kind", eval_kind);
      if (eval_folds >= 0) cfg.set("cv.folds", std::to_string(eval_folds));
      if (eval_by_image) cfg.set("cv.group_by_image", "true");
    } else if (c_cmp->parsed()) {
      cfg = cmp_common.resolve();
    } else if (c_synth->parsed()) {
      cfg = synth_common.resolve();
      if (synth_seed >= 0) cfg.set("synth.seed", std::to_string(synth_seed));
    }
  } catch (const std::exception& e) {
    std::cerr << "retav: " << e.what() << "\n";
    return 1;
  }

  try {
    if (c_segment->parsed()) return run_segment(cfg, seg_image, seg_out, seg_mfr_out);
    if (c_skel->parsed()) return run_skeletonize(cfg, skel_mask, skel_out);
    if (c_feat->parsed())
      return run_features(cfg, feat_images, feat_masks, feat_ids, feat_schema, feat_out);
    if (c_train->parsed()) return run_train(cfg, train_data, train_out);
    if (c_pred->parsed()) return run_predict(pred_model, pred_data, pred_out);
    if (c_eval->parsed()) return run_evaluate(cfg, eval_data, eval_prefix);
    if (c_cmp->parsed()) return run_compare(cfg, cmp_data, cmp_kinds, cmp_out);
    if (c_ovl->parsed())
      return run_overlay(ovl_image, ovl_segments, ovl_classes, ovl_filter, ovl_out);
    if (c_synth->parsed()) return run_synth(cfg, synth_image, synth_mask);
  } catch (const std::exception& e) {
    std::cerr << "retav: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
