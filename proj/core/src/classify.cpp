#include "retav/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "io_util.hpp"
#include "retav/error.hpp"
#include "retav/rng.hpp"

namespace retav {

namespace {
constexpr double kVarianceFloor = 1e-9;
constexpr char kModelMagic[8] = {'R', 'A', 'V', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

const char* to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::naive_bayes: return "naive_bayes";
    case ClassifierKind::cart: return "cart";
    case ClassifierKind::random_tree: return "random_tree";
    case ClassifierKind::random_forest: return "random_forest";
    case ClassifierKind::bagging_cart: return "bagging_cart";
    case ClassifierKind::majority_voting: return "majority_voting";
    case ClassifierKind::prototype_lbp: return "prototype_lbp";
  }
  return "?";
}

ClassifierKind classifier_kind_from_string(const std::string& s) {
  for (auto k : {ClassifierKind::naive_bayes, ClassifierKind::cart, ClassifierKind::random_tree,
                 ClassifierKind::random_forest, ClassifierKind::bagging_cart,
                 ClassifierKind::majority_voting, ClassifierKind::prototype_lbp})
    if (s == to_string(k)) return k;
  throw Error("unknown classifier kind '" + s + "'");
}

void validate(const ClassifierSpec& spec) {
  const auto& p = spec.params;
  if (p.max_depth < 0) throw std::invalid_argument("classifier: max_depth must be >= 0");
  if (p.min_leaf < 1) throw std::invalid_argument("classifier: min_leaf must be >= 1");
  if (spec.kind == ClassifierKind::random_forest || spec.kind == ClassifierKind::bagging_cart)
    if (p.trees < 1) throw std::invalid_argument("classifier: tree count must be >= 1");
  if (spec.kind == ClassifierKind::majority_voting) {
    if (p.voting_members.empty())
      throw std::invalid_argument("classifier: majority_voting needs members");
    for (auto m : p.voting_members)
      if (m == ClassifierKind::majority_voting)
        throw std::invalid_argument("classifier: voting members cannot nest majority_voting");
  }
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace {

/// Order-independent sum: addends are sorted before accumulation, so
/// permuting the dataset cannot change the result.
double stable_sum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

struct ClassStats {
  std::vector<double> mean;
  std::vector<double> var;  // population variance, floored
};

ClassStats gaussian_stats(const Dataset& ds, VesselClass cls) {
  const std::size_t d = ds.n_features();
  ClassStats out;
  out.mean.resize(d);
  out.var.resize(d);
  std::vector<double> column;
  for (std::size_t j = 0; j < d; ++j) {
    column.clear();
    for (const auto& s : ds.samples)
      if (s.label == cls) column.push_back(s.values[j]);
    const double n = static_cast<double>(column.size());
    std::vector<double> tmp = column;
    const double mean = stable_sum(tmp) / n;
    std::vector<double> sq(column.size());
    for (std::size_t i = 0; i < column.size(); ++i) {
      const double r = column[i] - mean;
      sq[i] = r * r;
    }
    out.mean[j] = mean;
    out.var[j] = std::max(stable_sum(sq) / n, kVarianceFloor);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CART family

struct TreeBuilder {
  const Dataset& ds;
  const Hyperparams& params;
  int n_random_features;  // 0: consider every feature
  Rng rng;

  DecisionTreeModel model;

  int build(std::vector<int>& indices, int depth) {
    const int node_idx = static_cast<int>(model.nodes.size());
    model.nodes.emplace_back();

    std::size_t artery = 0;
    for (int i : indices)
      if (ds.samples[i].label == VesselClass::artery) ++artery;
    const double fraction = static_cast<double>(artery) / static_cast<double>(indices.size());
    model.nodes[node_idx].artery_fraction = fraction;

    const bool pure = artery == 0 || artery == indices.size();
    const bool depth_capped = params.max_depth > 0 && depth >= params.max_depth;
    if (pure || depth_capped || static_cast<int>(indices.size()) < 2 * params.min_leaf)
      return node_idx;

    const int d = static_cast<int>(ds.n_features());
    std::vector<int> candidates;
    if (n_random_features <= 0 || n_random_features >= d) {
      candidates.resize(d);
      for (int j = 0; j < d; ++j) candidates[j] = j;
    } else {
      // Partial Fisher-Yates over the feature index pool.
      std::vector<int> pool(d);
      for (int j = 0; j < d; ++j) pool[j] = j;
      for (int j = 0; j < n_random_features; ++j) {
        const int pick = j + static_cast<int>(rng.below(static_cast<std::uint64_t>(d - j)));
        std::swap(pool[j], pool[pick]);
      }
      candidates.assign(pool.begin(), pool.begin() + n_random_features);
      std::sort(candidates.begin(), candidates.end());
    }

    double best_gini = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<double, int>> order(indices.size());
    const double n_total = static_cast<double>(indices.size());
    for (int f : candidates) {
      for (std::size_t i = 0; i < indices.size(); ++i)
        order[i] = {ds.samples[indices[i]].values[f], indices[i]};
      std::sort(order.begin(), order.end());

      std::size_t left_n = 0, left_artery = 0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        ++left_n;
        if (ds.samples[order[i].second].label == VesselClass::artery) ++left_artery;
        if (order[i].first == order[i + 1].first) continue;  // no boundary here
        const std::size_t right_n = order.size() - left_n;
        if (left_n < static_cast<std::size_t>(params.min_leaf) ||
            right_n < static_cast<std::size_t>(params.min_leaf))
          continue;
        const double threshold = order[i].first + (order[i + 1].first - order[i].first) / 2.0;
        if (!(threshold > order[i].first) || !(threshold <= order[i + 1].first))
          continue;  // adjacent doubles, midpoint degenerates
        const double pa_l = static_cast<double>(left_artery) / left_n;
        const std::size_t right_artery = artery - left_artery;
        const double pa_r = static_cast<double>(right_artery) / right_n;
        const double gini_l = 2.0 * pa_l * (1.0 - pa_l);
        const double gini_r = 2.0 * pa_r * (1.0 - pa_r);
        const double weighted = (left_n * gini_l + right_n * gini_r) / n_total;
        if (weighted < best_gini) {
          best_gini = weighted;
          best_feature = f;
          best_threshold = threshold;
        }
      }
    }
    if (best_feature < 0) return node_idx;  // all candidates constant

    std::vector<int> left, right;
    for (int i : indices) {
      if (ds.samples[i].values[best_feature] < best_threshold)
        left.push_back(i);
      else
        right.push_back(i);
    }
    if (left.empty() || right.empty()) return node_idx;

    model.nodes[node_idx].feature = best_feature;
    model.nodes[node_idx].threshold = best_threshold;
    const int l = build(left, depth + 1);
    model.nodes[node_idx].left = l;
    const int r = build(right, depth + 1);
    model.nodes[node_idx].right = r;
    return node_idx;
  }
};

DecisionTreeModel fit_tree(const Dataset& ds, const std::vector<int>& indices,
                           const Hyperparams& params, int n_random_features, Rng rng) {
  TreeBuilder builder{ds, params, n_random_features, rng, {}};
  std::vector<int> idx = indices;
  builder.build(idx, 0);
  return std::move(builder.model);
}

int sqrt_feature_count(std::size_t d) {
  return std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(d)))));
}

std::vector<int> bootstrap_indices(std::size_t n, Rng& rng) {
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(rng.below(n));
  return idx;
}

std::vector<int> all_indices(std::size_t n) {
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  return idx;
}

double tree_score(const DecisionTreeModel& tree, const std::vector<double>& values) {
  int node = 0;
  for (;;) {
    const TreeNode& nd = tree.nodes[node];
    if (nd.feature < 0) return nd.artery_fraction;
    node = values[nd.feature] < nd.threshold ? nd.left : nd.right;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Training

TrainedModel train(const ClassifierSpec& spec, const Dataset& ds) {
  validate(spec);
  if (ds.samples.empty()) throw Error("train: empty dataset");
  const std::size_t d = ds.n_features();
  std::uint64_t n_artery = 0, n_vein = 0;
  for (const auto& s : ds.samples) {
    if (s.values.size() != d) throw Error("train: inhomogeneous vector lengths");
    (s.label == VesselClass::artery ? n_artery : n_vein)++;
  }
  if (n_artery == 0 || n_vein == 0)
    throw Error("train: dataset must contain both classes (artery " + std::to_string(n_artery) +
                ", vein " + std::to_string(n_vein) + ")");

  TrainedModel model;
  model.spec = spec;
  model.schema_id = ds.schema_id;
  model.n_features = d;
  model.n_artery = n_artery;
  model.n_vein = n_vein;

  const Rng base(spec.seed);
  switch (spec.kind) {
    case ClassifierKind::naive_bayes: {
      NaiveBayesModel nb;
      const auto a = gaussian_stats(ds, VesselClass::artery);
      const auto v = gaussian_stats(ds, VesselClass::vein);
      nb.mean_artery = a.mean;
      nb.var_artery = a.var;
      nb.mean_vein = v.mean;
      nb.var_vein = v.var;
      const double total = static_cast<double>(n_artery + n_vein);
      nb.log_prior_artery = std::log(n_artery / total);
      nb.log_prior_vein = std::log(n_vein / total);
      model.payload = std::move(nb);
      break;
    }
    case ClassifierKind::cart: {
      auto idx = all_indices(ds.samples.size());
      model.payload = fit_tree(ds, idx, spec.params, 0, base.child(0));
      break;
    }
    case ClassifierKind::random_tree: {
      auto idx = all_indices(ds.samples.size());
      model.payload = fit_tree(ds, idx, spec.params, sqrt_feature_count(d), base.child(0));
      break;
    }
    case ClassifierKind::random_forest:
    case ClassifierKind::bagging_cart: {
      const bool random_splits = spec.kind == ClassifierKind::random_forest;
      ForestModel forest;
      forest.trees.reserve(spec.params.trees);
      for (int t = 0; t < spec.params.trees; ++t) {
        Rng tree_rng = base.child(static_cast<std::uint64_t>(t) + 1);
        const auto idx = bootstrap_indices(ds.samples.size(), tree_rng);
        forest.trees.push_back(fit_tree(ds, idx, spec.params,
                                        random_splits ? sqrt_feature_count(d) : 0, tree_rng));
      }
      model.payload = std::move(forest);
      break;
    }
    case ClassifierKind::majority_voting: {
      VotingModel voting;
      voting.members.reserve(spec.params.voting_members.size());
      for (std::size_t m = 0; m < spec.params.voting_members.size(); ++m) {
        ClassifierSpec member_spec;
        member_spec.kind = spec.params.voting_members[m];
        member_spec.seed = base.child(1000 + m).seed();
        member_spec.params = spec.params;
        voting.members.push_back(train(member_spec, ds));
      }
      model.payload = std::move(voting);
      break;
    }
    case ClassifierKind::prototype_lbp: {
      PrototypeModel proto;
      proto.blocks = schema_blocks(ds.schema_id, d);
      const auto a = gaussian_stats(ds, VesselClass::artery);
      const auto v = gaussian_stats(ds, VesselClass::vein);
      proto.artery = a.mean;
      proto.vein = v.mean;
      model.payload = std::move(proto);
      break;
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Prediction

Prediction predict(const TrainedModel& model, const std::vector<double>& values) {
  if (values.size() != model.n_features)
    throw Error("predict: vector length " + std::to_string(values.size()) +
                " does not match model (" + std::to_string(model.n_features) + ")");
  for (double v : values)
    if (!std::isfinite(v)) throw Error("predict: non-finite feature value");

  double score = 0.5;
  if (const auto* nb = std::get_if<NaiveBayesModel>(&model.payload)) {
    double log_a = nb->log_prior_artery, log_v = nb->log_prior_vein;
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double ra = values[j] - nb->mean_artery[j];
      const double rv = values[j] - nb->mean_vein[j];
      log_a += -0.5 * std::log(2.0 * 3.14159265358979323846 * nb->var_artery[j]) -
               ra * ra / (2.0 * nb->var_artery[j]);
      log_v += -0.5 * std::log(2.0 * 3.14159265358979323846 * nb->var_vein[j]) -
               rv * rv / (2.0 * nb->var_vein[j]);
    }
    score = 1.0 / (1.0 + std::exp(log_v - log_a));
  } else if (const auto* tree = std::get_if<DecisionTreeModel>(&model.payload)) {
    score = tree_score(*tree, values);
  } else if (const auto* forest = std::get_if<ForestModel>(&model.payload)) {
    std::size_t votes = 0;
    for (const auto& t : forest->trees)
      if (tree_score(t, values) >= 0.5) ++votes;
    score = static_cast<double>(votes) / static_cast<double>(forest->trees.size());
  } else if (const auto* voting = std::get_if<VotingModel>(&model.payload)) {
    std::size_t votes = 0;
    for (const auto& m : voting->members)
      if (predict(m, values).cls == VesselClass::artery) ++votes;
    score = static_cast<double>(votes) / static_cast<double>(voting->members.size());
  } else if (const auto* proto = std::get_if<PrototypeModel>(&model.payload)) {
    double dist_a = 0.0, dist_v = 0.0;
    std::size_t off = 0;
    for (int block : proto->blocks) {
      dist_a += chi_square_raw(values.data() + off, proto->artery.data() + off, block);
      dist_v += chi_square_raw(values.data() + off, proto->vein.data() + off, block);
      off += static_cast<std::size_t>(block);
    }
    // Larger vein distance means the sample leans artery.
    score = dist_a + dist_v > 0.0 ? dist_v / (dist_a + dist_v) : 0.5;
  }

  Prediction pred;
  pred.artery_score = score;
  pred.cls = score >= 0.5 ? VesselClass::artery : VesselClass::vein;
  return pred;
}

Prediction predict(const TrainedModel& model, const FeatureVector& fv) {
  if (!fv.schema_id.empty() && fv.schema_id != model.schema_id)
    throw Error("predict: feature schema '" + fv.schema_id + "' does not match model schema '" +
                model.schema_id + "'");
  return predict(model, fv.values);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void write_model_body(std::string& out, const TrainedModel& model) {
  detail::put_str(out, model.schema_id);
  out.push_back(static_cast<char>(model.spec.kind));
  detail::put_u64(out, model.spec.seed);
  detail::put_u32(out, static_cast<std::uint32_t>(model.spec.params.trees));
  detail::put_u32(out, static_cast<std::uint32_t>(model.spec.params.max_depth));
  detail::put_u32(out, static_cast<std::uint32_t>(model.spec.params.min_leaf));
  detail::put_u32(out, static_cast<std::uint32_t>(model.spec.params.voting_members.size()));
  for (auto m : model.spec.params.voting_members) out.push_back(static_cast<char>(m));
  detail::put_u64(out, model.n_features);
  detail::put_u64(out, model.n_artery);
  detail::put_u64(out, model.n_vein);

  auto write_vec = [&](const std::vector<double>& v) {
    detail::put_u64(out, v.size());
    for (double x : v) detail::put_f64(out, x);
  };
  auto write_tree = [&](const DecisionTreeModel& t) {
    detail::put_u32(out, static_cast<std::uint32_t>(t.nodes.size()));
    for (const auto& nd : t.nodes) {
      detail::put_u32(out, static_cast<std::uint32_t>(nd.feature));
      detail::put_f64(out, nd.threshold);
      detail::put_u32(out, static_cast<std::uint32_t>(nd.left));
      detail::put_u32(out, static_cast<std::uint32_t>(nd.right));
      detail::put_f64(out, nd.artery_fraction);
    }
  };

  if (const auto* nb = std::get_if<NaiveBayesModel>(&model.payload)) {
    detail::put_f64(out, nb->log_prior_artery);
    detail::put_f64(out, nb->log_prior_vein);
    write_vec(nb->mean_artery);
    write_vec(nb->var_artery);
    write_vec(nb->mean_vein);
    write_vec(nb->var_vein);
  } else if (const auto* tree = std::get_if<DecisionTreeModel>(&model.payload)) {
    write_tree(*tree);
  } else if (const auto* forest = std::get_if<ForestModel>(&model.payload)) {
    detail::put_u32(out, static_cast<std::uint32_t>(forest->trees.size()));
    for (const auto& t : forest->trees) write_tree(t);
  } else if (const auto* voting = std::get_if<VotingModel>(&model.payload)) {
    detail::put_u32(out, static_cast<std::uint32_t>(voting->members.size()));
    for (const auto& m : voting->members) write_model_body(out, m);
  } else if (const auto* proto = std::get_if<PrototypeModel>(&model.payload)) {
    detail::put_u32(out, static_cast<std::uint32_t>(proto->blocks.size()));
    for (int b : proto->blocks) detail::put_u32(out, static_cast<std::uint32_t>(b));
    write_vec(proto->artery);
    write_vec(proto->vein);
  }
}

TrainedModel read_model_body(detail::ByteReader& r) {
  TrainedModel model;
  model.schema_id = r.str();
  const std::uint8_t kind_byte = static_cast<std::uint8_t>(r.raw(1)[0]);
  if (kind_byte > static_cast<std::uint8_t>(ClassifierKind::prototype_lbp))
    throw Error("model file: unknown classifier kind tag");
  model.spec.kind = static_cast<ClassifierKind>(kind_byte);
  model.spec.seed = r.u64();
  model.spec.params.trees = static_cast<int>(r.u32());
  model.spec.params.max_depth = static_cast<int>(r.u32());
  model.spec.params.min_leaf = static_cast<int>(r.u32());
  const std::uint32_t n_members = r.u32();
  model.spec.params.voting_members.clear();
  for (std::uint32_t i = 0; i < n_members; ++i) {
    const std::uint8_t mk = static_cast<std::uint8_t>(r.raw(1)[0]);
    if (mk > static_cast<std::uint8_t>(ClassifierKind::prototype_lbp))
      throw Error("model file: unknown member kind tag");
    model.spec.params.voting_members.push_back(static_cast<ClassifierKind>(mk));
  }
  model.n_features = r.u64();
  model.n_artery = r.u64();
  model.n_vein = r.u64();

  auto read_vec = [&]() {
    const std::uint64_t n = r.u64();
    std::vector<double> v(n);
    for (auto& x : v) x = r.f64();
    return v;
  };
  auto read_tree = [&]() {
    DecisionTreeModel t;
    const std::uint32_t n = r.u32();
    t.nodes.resize(n);
    for (auto& nd : t.nodes) {
      nd.feature = static_cast<int>(r.u32());
      nd.threshold = r.f64();
      nd.left = static_cast<int>(r.u32());
      nd.right = static_cast<int>(r.u32());
      nd.artery_fraction = r.f64();
    }
    return t;
  };

  switch (model.spec.kind) {
    case ClassifierKind::naive_bayes: {
      NaiveBayesModel nb;
      nb.log_prior_artery = r.f64();
      nb.log_prior_vein = r.f64();
      nb.mean_artery = read_vec();
      nb.var_artery = read_vec();
      nb.mean_vein = read_vec();
      nb.var_vein = read_vec();
      model.payload = std::move(nb);
      break;
    }
    case ClassifierKind::cart:
    case ClassifierKind::random_tree:
      model.payload = read_tree();
      break;
    case ClassifierKind::random_forest:
    case ClassifierKind::bagging_cart: {
      ForestModel forest;
      const std::uint32_t n = r.u32();
      forest.trees.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) forest.trees.push_back(read_tree());
      model.payload = std::move(forest);
      break;
    }
    case ClassifierKind::majority_voting: {
      VotingModel voting;
      const std::uint32_t n = r.u32();
      voting.members.reserve(n);
      for (std::uint32_t i = 0; i < n; ++i) voting.members.push_back(read_model_body(r));
      model.payload = std::move(voting);
      break;
    }
    case ClassifierKind::prototype_lbp: {
      PrototypeModel proto;
      const std::uint32_t n = r.u32();
      proto.blocks.resize(n);
      for (auto& b : proto.blocks) b = static_cast<int>(r.u32());
      proto.artery = read_vec();
      proto.vein = read_vec();
      model.payload = std::move(proto);
      break;
    }
  }
  return model;
}

}  // namespace

void save_model(const TrainedModel& model, const std::string& path) {
  std::string out;
  out.append(kModelMagic, 8);
  detail::put_u32(out, kModelVersion);
  write_model_body(out, model);
  detail::AtomicWriter w(path);
  w.stream().write(out.data(), static_cast<std::streamsize>(out.size()));
  w.commit();
}

TrainedModel load_model(const std::string& path) {
  const std::string buf = detail::read_file_bytes(path);
  detail::ByteReader r(buf, "model file");
  if (buf.size() < 12 || r.raw(8) != std::string(kModelMagic, 8))
    throw Error("model file: bad magic (not a model file): " + path);
  const std::uint32_t version = r.u32();
  if (version != kModelVersion)
    throw Error("model file: unsupported format version " + std::to_string(version));
  TrainedModel model = read_model_body(r);
  r.expect_end();
  return model;
}

}  // namespace retav
