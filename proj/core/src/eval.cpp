#include "retav/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "io_util.hpp"
#include "retav/error.hpp"
#include "retav/rng.hpp"

namespace retav {

FoldAssignment stratified_kfold(const std::vector<VesselClass>& labels, int k,
                                std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be >= 2");
  FoldAssignment fa;
  fa.k = k;
  fa.seed = seed;
  fa.fold_of.assign(labels.size(), -1);

  Rng rng(seed);
  int offset = 0;
  for (VesselClass cls : {VesselClass::artery, VesselClass::vein}) {
    std::vector<std::size_t> idxs;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idxs.push_back(i);
    if (static_cast<int>(idxs.size()) < k)
      throw Error(std::string("stratified_kfold: class '") + to_string(cls) + "' has " +
                  std::to_string(idxs.size()) + " samples, fewer than k=" + std::to_string(k));
    for (std::size_t i = idxs.size() - 1; i > 0; --i)
      std::swap(idxs[i], idxs[rng.below(i + 1)]);
    // Round-robin deal; the rotating offset keeps total fold sizes within 1.
    for (std::size_t j = 0; j < idxs.size(); ++j)
      fa.fold_of[idxs[j]] = static_cast<int>((offset + j) % k);
    offset = static_cast<int>((offset + idxs.size()) % k);
  }
  return fa;
}

FoldAssignment group_kfold(const std::vector<std::string>& image_ids, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("group_kfold: k must be >= 2");
  std::vector<std::string> groups;
  std::map<std::string, int> group_of;
  for (const auto& id : image_ids)
    if (group_of.emplace(id, static_cast<int>(groups.size())).second) groups.push_back(id);
  if (static_cast<int>(groups.size()) < k)
    throw Error("group_kfold: only " + std::to_string(groups.size()) +
                " distinct images for k=" + std::to_string(k));

  std::vector<int> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i)
    std::swap(order[i], order[rng.below(i + 1)]);
  std::vector<int> fold_of_group(groups.size());
  for (std::size_t j = 0; j < order.size(); ++j)
    fold_of_group[order[j]] = static_cast<int>(j % k);

  FoldAssignment fa;
  fa.k = k;
  fa.seed = seed;
  fa.fold_of.resize(image_ids.size());
  for (std::size_t i = 0; i < image_ids.size(); ++i)
    fa.fold_of[i] = fold_of_group[group_of[image_ids[i]]];
  return fa;
}

double recognition_rate(const ConfusionCounts& c) {
  const std::uint64_t total = c.total();
  if (total == 0) throw std::invalid_argument("recognition_rate: empty counts");
  return 100.0 * static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
}

double roc_auc(const std::vector<double>& scores, const std::vector<VesselClass>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("roc_auc: scores/labels length mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (auto l : labels) (l == VesselClass::artery ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) throw Error("roc_auc: both classes required");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average ranks over tie groups (1-based), then Mann-Whitney U.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t)
      if (labels[order[t]] == VesselClass::artery) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<RocPoint> roc_points(const std::vector<double>& scores,
                                 const std::vector<VesselClass>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("roc_points: scores/labels length mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (auto l : labels) (l == VesselClass::artery ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) throw Error("roc_points: both classes required");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> points{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    for (std::size_t t = i; t <= j; ++t)
      (labels[order[t]] == VesselClass::artery ? tp : fp)++;
    points.push_back({static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos});
    i = j + 1;
  }
  return points;
}

EvalReport cross_validate(const ClassifierSpec& spec, const Dataset& ds, int k,
                          std::uint64_t seed, bool group_by_image) {
  if (ds.samples.empty()) throw Error("cross_validate: empty dataset");
  std::vector<VesselClass> labels;
  labels.reserve(ds.samples.size());
  for (const auto& s : ds.samples) labels.push_back(s.label);

  FoldAssignment folds;
  if (group_by_image) {
    std::vector<std::string> ids;
    ids.reserve(ds.samples.size());
    for (const auto& s : ds.samples) ids.push_back(s.image_id);
    folds = group_kfold(ids, k, seed);
  } else {
    folds = stratified_kfold(labels, k, seed);
  }

  EvalReport report;
  report.spec = spec;
  report.schema_id = ds.schema_id;
  report.k = k;
  report.cv_seed = seed;
  report.group_by_image = group_by_image;
  report.fold_confusion.assign(k, {});
  for (auto l : labels) (l == VesselClass::artery ? report.n_artery : report.n_vein)++;

  std::vector<double> pooled_scores(ds.samples.size(), 0.0);
  for (int fold = 0; fold < k; ++fold) {
    Dataset train_ds;
    train_ds.schema_id = ds.schema_id;
    std::vector<std::size_t> test_idx;
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      if (folds.fold_of[i] == fold)
        test_idx.push_back(i);
      else
        train_ds.samples.push_back(ds.samples[i]);
    }
    const TrainedModel model = train(spec, train_ds);
    for (std::size_t i : test_idx) {
      const Prediction pred = predict(model, ds.samples[i].values);
      pooled_scores[i] = pred.artery_score;
      report.fold_confusion[fold].add(labels[i], pred.cls);
    }
  }

  for (const auto& c : report.fold_confusion) {
    report.pooled.tp += c.tp;
    report.pooled.fp += c.fp;
    report.pooled.tn += c.tn;
    report.pooled.fn += c.fn;
  }
  report.recognition_rate_percent = recognition_rate(report.pooled);
  report.auc = roc_auc(pooled_scores, labels);
  report.roc = roc_points(pooled_scores, labels);
  return report;
}

ComparisonTable compare(const std::vector<ClassifierSpec>& specs,
                        const std::vector<Dataset>& datasets, int k, std::uint64_t seed) {
  if (specs.empty() || datasets.empty())
    throw std::invalid_argument("compare: need at least one spec and one dataset");
  for (std::size_t s = 1; s < datasets.size(); ++s) {
    const auto& a = datasets[0].samples;
    const auto& b = datasets[s].samples;
    bool same = a.size() == b.size();
    for (std::size_t i = 0; same && i < a.size(); ++i)
      same = a[i].image_id == b[i].image_id && a[i].segment_id == b[i].segment_id &&
             a[i].label == b[i].label;
    if (!same)
      throw Error("compare: datasets do not cover the same segments (schema '" +
                  datasets[s].schema_id + "' vs '" + datasets[0].schema_id + "')");
  }

  ComparisonTable table;
  table.k = k;
  table.cv_seed = seed;
  for (const auto& ds : datasets) table.schema_ids.push_back(ds.schema_id);
  for (const auto& spec : specs) table.classifier_names.push_back(to_string(spec.kind));

  table.cells.resize(specs.size());
  for (std::size_t c = 0; c < specs.size(); ++c) {
    table.cells[c].resize(datasets.size());
    for (std::size_t s = 0; s < datasets.size(); ++s) {
      const EvalReport rep = cross_validate(specs[c], datasets[s], k, seed);
      table.cells[c][s] = {rep.recognition_rate_percent, rep.auc};
    }
  }

  table.avg_rate.assign(datasets.size(), 0.0);
  table.avg_auc.assign(datasets.size(), 0.0);
  for (std::size_t s = 0; s < datasets.size(); ++s) {
    for (std::size_t c = 0; c < specs.size(); ++c) {
      table.avg_rate[s] += table.cells[c][s].recognition_rate;
      table.avg_auc[s] += table.cells[c][s].auc;
    }
    table.avg_rate[s] /= static_cast<double>(specs.size());
    table.avg_auc[s] /= static_cast<double>(specs.size());
  }
  auto ranks = [](const std::vector<double>& avgs) {
    std::vector<int> r(avgs.size());
    for (std::size_t i = 0; i < avgs.size(); ++i) {
      int rank = 1;
      for (std::size_t j = 0; j < avgs.size(); ++j)
        if (avgs[j] > avgs[i]) ++rank;
      r[i] = rank;
    }
    return r;
  };
  table.rank_rate = ranks(table.avg_rate);
  table.rank_auc = ranks(table.avg_auc);
  return table;
}

// ---------------------------------------------------------------------------
// Rendering

std::string render_report_text(const EvalReport& r) {
  std::ostringstream out;
  out << "retav evaluation report\n";
  out << "schema_id: " << r.schema_id << "\n";
  out << "classifier: " << to_string(r.spec.kind) << "\n";
  out << "classifier_seed: " << r.spec.seed << "\n";
  out << "classifier_trees: " << r.spec.params.trees << "\n";
  out << "classifier_max_depth: " << r.spec.params.max_depth << "\n";
  out << "classifier_min_leaf: " << r.spec.params.min_leaf << "\n";
  out << "cv_folds: " << r.k << "\n";
  out << "cv_seed: " << r.cv_seed << "\n";
  out << "fold_mode: " << (r.group_by_image ? "by-image" : "by-segment") << "\n";
  out << "metric_policy: pooled held-out predictions (not fold-averaged)\n";
  out << "samples: " << (r.n_artery + r.n_vein) << " (artery " << r.n_artery << ", vein "
      << r.n_vein << ")\n";
  out << "pooled_confusion: TP=" << r.pooled.tp << " FP=" << r.pooled.fp << " TN=" << r.pooled.tn
      << " FN=" << r.pooled.fn << "\n";
  out << "recognition_rate: " << detail::format_double(r.recognition_rate_percent) << "\n";
  out << "auc: " << detail::format_double(r.auc) << "\n";
  if (!r.config_echo.empty()) {
    out << "config:\n";
    for (const auto& [key, value] : r.config_echo) out << "  " << key << "=" << value << "\n";
  }
  out << "folds_csv:\n";
  out << "fold,tp,fp,tn,fn,recognition_rate\n";
  for (std::size_t f = 0; f < r.fold_confusion.size(); ++f) {
    const auto& c = r.fold_confusion[f];
    out << f << "," << c.tp << "," << c.fp << "," << c.tn << "," << c.fn << ","
        << detail::format_double(recognition_rate(c)) << "\n";
  }
  out << "roc_csv:\n";
  out << "fpr,tpr\n";
  for (const auto& p : r.roc)
    out << detail::format_double(p.fpr) << "," << detail::format_double(p.tpr) << "\n";
  return out.str();
}

std::string render_report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["schema_id"] = r.schema_id;
  j["classifier"] = {{"kind", to_string(r.spec.kind)},
                     {"seed", r.spec.seed},
                     {"trees", r.spec.params.trees},
                     {"max_depth", r.spec.params.max_depth},
                     {"min_leaf", r.spec.params.min_leaf}};
  j["cv"] = {{"folds", r.k},
             {"seed", r.cv_seed},
             {"fold_mode", r.group_by_image ? "by-image" : "by-segment"},
             {"metric_policy", "pooled held-out predictions (not fold-averaged)"}};
  j["samples"] = {{"artery", r.n_artery}, {"vein", r.n_vein}};
  j["pooled_confusion"] = {
      {"tp", r.pooled.tp}, {"fp", r.pooled.fp}, {"tn", r.pooled.tn}, {"fn", r.pooled.fn}};
  j["recognition_rate"] = r.recognition_rate_percent;
  j["auc"] = r.auc;
  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < r.fold_confusion.size(); ++f) {
    const auto& c = r.fold_confusion[f];
    folds.push_back({{"fold", f},
                     {"tp", c.tp},
                     {"fp", c.fp},
                     {"tn", c.tn},
                     {"fn", c.fn},
                     {"recognition_rate", recognition_rate(c)}});
  }
  j["folds"] = std::move(folds);
  nlohmann::ordered_json roc = nlohmann::ordered_json::array();
  for (const auto& p : r.roc) roc.push_back({p.fpr, p.tpr});
  j["roc"] = std::move(roc);
  if (!r.config_echo.empty()) {
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [key, value] : r.config_echo) cfg[key] = value;
    j["config"] = std::move(cfg);
  }
  return j.dump(2) + "\n";
}

void save_report(const EvalReport& report, const std::string& text_path,
                 const std::string& json_path) {
  {
    detail::AtomicWriter w(text_path);
    const std::string text = render_report_text(report);
    w.stream().write(text.data(), static_cast<std::streamsize>(text.size()));
    w.commit();
  }
  {
    detail::AtomicWriter w(json_path);
    const std::string json = render_report_json(report);
    w.stream().write(json.data(), static_cast<std::streamsize>(json.size()));
    w.commit();
  }
}

std::string render_comparison_text(const ComparisonTable& t) {
  std::ostringstream out;
  out << "retav comparison (" << t.k << "-fold cv, seed " << t.cv_seed << ")\n";

  auto fixed = [](double v, int prec) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(prec) << v;
    return ss.str();
  };

  std::size_t name_w = std::string("Ave. perf.").size();
  for (const auto& n : t.classifier_names) name_w = std::max(name_w, n.size());
  std::vector<std::size_t> col_w(t.schema_ids.size());
  for (std::size_t s = 0; s < t.schema_ids.size(); ++s)
    col_w[s] = std::max<std::size_t>(t.schema_ids[s].size(), 8);

  auto emit_block = [&](const std::string& title, auto cell_value, const std::vector<double>& avgs,
                        const std::vector<int>& ranks, int prec) {
    out << "\n" << title << "\n";
    out << std::left << std::setw(static_cast<int>(name_w + 2)) << "classifier";
    for (std::size_t s = 0; s < t.schema_ids.size(); ++s)
      out << "  " << std::right << std::setw(static_cast<int>(col_w[s])) << t.schema_ids[s];
    out << "\n";
    for (std::size_t c = 0; c < t.classifier_names.size(); ++c) {
      out << std::left << std::setw(static_cast<int>(name_w + 2)) << t.classifier_names[c];
      for (std::size_t s = 0; s < t.schema_ids.size(); ++s)
        out << "  " << std::right << std::setw(static_cast<int>(col_w[s]))
            << fixed(cell_value(t.cells[c][s]), prec);
      out << "\n";
    }
    out << std::left << std::setw(static_cast<int>(name_w + 2)) << "Ave. perf.";
    for (std::size_t s = 0; s < t.schema_ids.size(); ++s)
      out << "  " << std::right << std::setw(static_cast<int>(col_w[s])) << fixed(avgs[s], prec);
    out << "\n";
    out << std::left << std::setw(static_cast<int>(name_w + 2)) << "Ranking";
    for (std::size_t s = 0; s < t.schema_ids.size(); ++s)
      out << "  " << std::right << std::setw(static_cast<int>(col_w[s])) << ranks[s];
    out << "\n";
  };

  emit_block("recognition rate (%)",
             [](const ComparisonCell& c) { return c.recognition_rate; }, t.avg_rate, t.rank_rate,
             1);
  emit_block("AUC", [](const ComparisonCell& c) { return c.auc; }, t.avg_auc, t.rank_auc, 3);
  return out.str();
}

}  // namespace retav
