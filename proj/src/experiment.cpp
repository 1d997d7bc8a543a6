#include "r2dsvd/experiment.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "r2dsvd/eval.hpp"
#include "r2dsvd/model_io.hpp"
#include "r2dsvd/rng.hpp"
#include "r2dsvd/tensor_ext.hpp"

namespace r2dsvd {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config parsing
// ---------------------------------------------------------------------------

void expect_keys(const json& j, const std::string& ctx, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("config: '" + ctx + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError("config: unknown key '" + ctx + "." + key + "'");
}

template <typename T>
T get_field(const json& j, const std::string& ctx, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for '" + ctx + "." + key + "'");
  }
}

ExperimentKind parse_experiment(const std::string& s) {
  if (s == "classify") return ExperimentKind::Classify;
  if (s == "cluster") return ExperimentKind::Cluster;
  if (s == "reconstruct") return ExperimentKind::Reconstruct;
  if (s == "decompose") return ExperimentKind::Decompose;
  throw ConfigError("config: unknown experiment '" + s + "'");
}

const char* experiment_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Classify: return "classify";
    case ExperimentKind::Cluster: return "cluster";
    case ExperimentKind::Reconstruct: return "reconstruct";
    default: return "decompose";
  }
}

Method parse_method(const std::string& s) {
  if (s == "svd2d") return Method::Svd2d;
  if (s == "r1svd2d") return Method::R1Svd2d;
  if (s == "gkrsl2dsvd") return Method::Gkrsl2dSvd;
  if (s == "ho_gkrsl") return Method::HoGkrsl;
  throw ConfigError("config: unknown method '" + s + "'");
}

MeanUpdate parse_mean_update(const std::string& s) {
  if (s == "normalized") return MeanUpdate::Normalized;
  if (s == "unnormalized") return MeanUpdate::Unnormalized;
  if (s == "frozen") return MeanUpdate::Frozen;
  throw ConfigError("config: unknown mean_update '" + s + "'");
}

OutlierMode parse_outlier_mode(const std::string& s) {
  if (s == "none") return OutlierMode::None;
  if (s == "scaled") return OutlierMode::Scaled;
  if (s == "dummy") return OutlierMode::Dummy;
  throw ConfigError("config: unknown outlier mode '" + s + "'");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  expect_keys(j, "", {"experiment", "method", "data", "ranks", "loss", "solver", "outliers",
                      "trials", "seed", "clusters", "dc_percentile", "output", "sweep"});
  ExperimentConfig c;
  c.echo = j;
  if (j.contains("experiment")) c.experiment = parse_experiment(j.at("experiment").get<std::string>());
  if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());

  bool normalize_set = false;
  if (j.contains("data")) {
    const json& d = j.at("data");
    expect_keys(d, "data", {"train_images", "train_labels", "test_images", "test_labels",
                            "image_dir", "format", "per_class_train", "normalize"});
    c.train_images = get_field<std::string>(d, "data", "train_images", "");
    c.train_labels = get_field<std::string>(d, "data", "train_labels", "");
    c.test_images = get_field<std::string>(d, "data", "test_images", "");
    c.test_labels = get_field<std::string>(d, "data", "test_labels", "");
    c.image_dir = get_field<std::string>(d, "data", "image_dir", "");
    const std::string fmt = get_field<std::string>(d, "data", "format", "pgm");
    if (fmt == "pgm") c.format = ImageFormat::Pgm;
    else if (fmt == "csv") c.format = ImageFormat::Csv;
    else throw ConfigError("config: unknown data.format '" + fmt + "'");
    c.per_class_train = get_field<int>(d, "data", "per_class_train", 0);
    if (d.contains("normalize")) {
      c.normalize = get_field<bool>(d, "data", "normalize", false);
      normalize_set = true;
    }
  }
  if (!normalize_set) c.normalize = c.experiment == ExperimentKind::Classify;

  if (j.contains("ranks")) {
    const json& r = j.at("ranks");
    expect_keys(r, "ranks", {"k1", "k2", "grid"});
    c.k1 = get_field<int>(r, "ranks", "k1", 0);
    c.k2 = get_field<int>(r, "ranks", "k2", 0);
    c.rank_grid = get_field<std::vector<int>>(r, "ranks", "grid", {});
  }

  if (j.contains("loss")) {
    const json& l = j.at("loss");
    expect_keys(l, "loss", {"lambda", "p", "sigma"});
    c.lambda = get_field<double>(l, "loss", "lambda", 8.0);
    c.p = get_field<double>(l, "loss", "p", 8.0);
    if (l.contains("sigma")) {
      if (l.at("sigma").is_string()) {
        if (l.at("sigma").get<std::string>() != "adaptive")
          throw ConfigError("config: loss.sigma must be a number or \"adaptive\"");
        c.fixed_sigma = 0.0;
      } else {
        c.fixed_sigma = get_field<double>(l, "loss", "sigma", 0.0);
        if (c.fixed_sigma <= 0.0) throw ConfigError("config: loss.sigma must be positive");
      }
    }
    if (c.lambda <= 0.0 || c.p <= 0.0) throw ConfigError("config: lambda and p must be positive");
  }

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    expect_keys(s, "solver", {"max_iterations", "tolerance", "mean_update"});
    c.solver.max_iterations = get_field<int>(s, "solver", "max_iterations", 100);
    c.solver.tolerance = get_field<double>(s, "solver", "tolerance", 1e-5);
    c.solver.mean_update =
        parse_mean_update(get_field<std::string>(s, "solver", "mean_update", "normalized"));
    if (c.solver.max_iterations < 1) throw ConfigError("config: solver.max_iterations < 1");
    if (c.solver.tolerance <= 0.0) throw ConfigError("config: solver.tolerance must be positive");
  }

  if (j.contains("outliers")) {
    const json& o = j.at("outliers");
    expect_keys(o, "outliers", {"mode", "fraction", "magnitude", "count", "intensity"});
    c.outlier_mode = parse_outlier_mode(get_field<std::string>(o, "outliers", "mode", "none"));
    c.outlier_fraction = get_field<double>(o, "outliers", "fraction", 0.05);
    c.outlier_magnitude = get_field<double>(o, "outliers", "magnitude", 50.0);
    c.dummy_count = get_field<int>(o, "outliers", "count", 30);
    if (o.contains("intensity")) {
      const auto range = get_field<std::vector<double>>(o, "outliers", "intensity", {0.0, 255.0});
      if (range.size() != 2) throw ConfigError("config: outliers.intensity must be [lo, hi]");
      c.intensity_lo = range[0];
      c.intensity_hi = range[1];
    }
  }

  c.trials = get_field<int>(j, "", "trials", 1);
  if (c.trials < 1) throw ConfigError("config: trials must be >= 1");
  c.seed = get_field<std::uint64_t>(j, "", "seed", 0);
  c.clusters = get_field<int>(j, "", "clusters", 0);
  c.dc_percentile = get_field<double>(j, "", "dc_percentile", 0.02);
  c.output = get_field<std::string>(j, "", "output", "results");

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    expect_keys(s, "sweep", {"lambda", "p"});
    c.sweep_lambda = get_field<std::vector<double>>(s, "sweep", "lambda", {});
    c.sweep_p = get_field<std::vector<double>>(s, "sweep", "p", {});
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
  }
  return from_json(j);
}

namespace {

// ---------------------------------------------------------------------------
// shared pipeline pieces
// ---------------------------------------------------------------------------

SampleSet load_idx_checked(const std::string& images, const std::string& labels) {
  try {
    return load_idx(images, labels.empty() ? std::nullopt : std::make_optional(labels));
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

SampleSet load_training_data(const ExperimentConfig& c) {
  if (!c.image_dir.empty()) {
    try {
      return load_image_dir(c.image_dir, c.format);
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
  }
  if (c.train_images.empty()) throw ConfigError("config: no data source configured");
  return load_idx_checked(c.train_images, c.train_labels);
}

SampleSet subsample_per_class(const SampleSet& data, int per_class, SplitMix64& rng) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) by_class[(*data.labels)[i]].push_back(i);
  SampleSet out;
  out.labels = std::vector<int>{};
  for (const auto& [label, members] : by_class) {
    if (static_cast<int>(members.size()) < per_class)
      throw DataError("classify: class " + std::to_string(label) + " has fewer than " +
                      std::to_string(per_class) + " samples");
    auto picks = sample_without_replacement(members.size(), static_cast<std::size_t>(per_class), rng);
    std::sort(picks.begin(), picks.end());
    for (std::size_t p : picks) {
      out.samples.push_back(data.samples[members[p]]);
      out.labels->push_back(label);
    }
  }
  return out;
}

ContaminatedSet contaminate(const SampleSet& data, const ExperimentConfig& c,
                            std::uint64_t outlier_seed) {
  if (c.outlier_mode == OutlierMode::None) return ContaminatedSet{data, {}, {}};
  OutlierConfig oc;
  oc.mode = c.outlier_mode == OutlierMode::Scaled ? OutlierConfig::Mode::Scaled
                                                  : OutlierConfig::Mode::Dummy;
  oc.fraction = c.outlier_fraction;
  oc.magnitude = c.outlier_magnitude;
  oc.dummy_count = c.dummy_count;
  oc.intensity_lo = c.intensity_lo;
  oc.intensity_hi = c.intensity_hi;
  oc.seed = outlier_seed;
  return inject_outliers(data, oc);
}

// Uniform facade over the 2D solvers and the order-2 tensor solver.
struct FittedModel {
  std::optional<Decomposition2D> plane;
  std::optional<TensorModel> tensor;

  Eigen::VectorXd features(const Eigen::MatrixXd& x) const {
    if (plane) return flatten_row_major(project(*plane, x));
    const DenseTensor core = ho_project(*tensor, DenseTensor::from_matrix(x));
    return Eigen::Map<const Eigen::VectorXd>(core.values().data(), core.size());
  }
  Eigen::MatrixXd rebuild(const Eigen::MatrixXd& x) const {
    if (plane) return reconstruct(*plane, x);
    return ho_reconstruct(*tensor, DenseTensor::from_matrix(x)).to_matrix();
  }
  const std::vector<double>& trace() const {
    return plane ? plane->objective_trace : tensor->objective_trace;
  }
  const FitDiagnostics& diagnostics() const {
    return plane ? plane->diagnostics : tensor->diagnostics;
  }
  const IterationState& state() const {
    return plane ? plane->iteration_state : tensor->iteration_state;
  }
};

FittedModel fit_model(const SampleSet& data, const ExperimentConfig& c, int k1, int k2) {
  SolverConfig sc = c.solver;
  sc.seed = c.seed;
  if (c.fixed_sigma > 0.0) {
    sc.sigma_mode = SigmaMode::Fixed;
    sc.sigma = c.fixed_sigma;
  } else {
    sc.sigma_mode = SigmaMode::Adaptive;
  }
  const RankConfig ranks{k1, k2};
  FittedModel out;
  switch (c.method) {
    case Method::Svd2d:
      out.plane = svd2d_fit(data, ranks, sc);
      break;
    case Method::R1Svd2d:
      out.plane = r1_svd2d_fit(data, ranks, sc);
      break;
    case Method::Gkrsl2dSvd:
      out.plane = gkrsl_svd2d_fit(data, ranks,
                                  GkrslParams{c.lambda, c.p, c.fixed_sigma > 0 ? c.fixed_sigma : 1.0},
                                  sc);
      break;
    case Method::HoGkrsl: {
      std::vector<DenseTensor> tensors;
      tensors.reserve(data.size());
      for (const auto& x : data.samples) tensors.push_back(DenseTensor::from_matrix(x));
      out.tensor = ho_gkrsl_fit(tensors, {k1, k2},
                                GkrslParams{c.lambda, c.p, c.fixed_sigma > 0 ? c.fixed_sigma : 1.0},
                                sc);
      break;
    }
  }
  return out;
}

// 1NN with ties to the lowest training index, batched through one GEMM.
std::vector<int> knn1_batch(const std::vector<Eigen::VectorXd>& train,
                            const std::vector<int>& labels,
                            const std::vector<Eigen::VectorXd>& queries) {
  const Eigen::Index d = train.front().size();
  Eigen::MatrixXd T(static_cast<Eigen::Index>(train.size()), d);
  for (std::size_t i = 0; i < train.size(); ++i) T.row(static_cast<Eigen::Index>(i)) = train[i];
  Eigen::MatrixXd Q(static_cast<Eigen::Index>(queries.size()), d);
  for (std::size_t i = 0; i < queries.size(); ++i) Q.row(static_cast<Eigen::Index>(i)) = queries[i];
  const Eigen::VectorXd t2 = T.rowwise().squaredNorm();
  std::vector<int> out(queries.size());
  const Eigen::MatrixXd cross = Q * T.transpose();
  for (Eigen::Index qi = 0; qi < Q.rows(); ++qi) {
    Eigen::Index best = 0;
    double best_d = t2(0) - 2.0 * cross(qi, 0);
    for (Eigen::Index ti = 1; ti < T.rows(); ++ti) {
      const double dd = t2(ti) - 2.0 * cross(qi, ti);
      if (dd < best_d) {
        best_d = dd;
        best = ti;
      }
    }
    out[static_cast<std::size_t>(qi)] = labels[static_cast<std::size_t>(best)];
  }
  return out;
}

json trace_summary(const std::vector<double>& trace) {
  return json{{"iterations", trace.size() - 1}, {"first", trace.front()}, {"last", trace.back()}};
}

void finish_aggregates(ResultRecord& rec, const std::vector<std::string>& metric_columns) {
  for (const std::string& col : metric_columns) {
    const auto it = std::find(rec.columns.begin(), rec.columns.end(), col);
    const std::size_t ci = static_cast<std::size_t>(it - rec.columns.begin());
    double sum = 0.0;
    for (const auto& row : rec.rows) sum += row[ci];
    const double mean = sum / static_cast<double>(rec.rows.size());
    double var = 0.0;
    for (const auto& row : rec.rows) var += (row[ci] - mean) * (row[ci] - mean);
    rec.means[col] = mean;
    rec.stds[col] = std::sqrt(var / static_cast<double>(rec.rows.size()));
  }
  json agg = json::object();
  for (const auto& [k, v] : rec.means) agg[k] = json{{"mean", v}, {"std", rec.stds[k]}};
  rec.summary["aggregates"] = agg;
}

json indices_json(const std::vector<std::size_t>& idx) {
  json a = json::array();
  for (std::size_t i : idx) a.push_back(i);
  return a;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

// ---------------------------------------------------------------------------
// experiments
// ---------------------------------------------------------------------------

ResultRecord run_classify(const ExperimentConfig& c) {
  Stopwatch clock;
  if (c.k1 < 1 || c.k2 < 1) throw ConfigError("classify: ranks.k1 and ranks.k2 required");
  if (c.test_images.empty()) throw ConfigError("classify: data.test_images required");
  SampleSet train_all = load_idx_checked(c.train_images, c.train_labels);
  SampleSet test = load_idx_checked(c.test_images, c.test_labels);
  if (!train_all.labels || !test.labels) throw DataError("classify: labeled train and test sets required");
  if (c.normalize) test = normalize_frobenius(test);

  ResultRecord rec;
  rec.columns = {"trial", "accuracy"};
  rec.summary = json{{"experiment", "classify"}, {"config", c.echo}, {"trials", json::array()}};

  for (int t = 0; t < c.trials; ++t) {
    const std::uint64_t seed_t = c.seed + static_cast<std::uint64_t>(t);
    SplitMix64 stream(seed_t);
    SampleSet train =
        c.per_class_train > 0 ? subsample_per_class(train_all, c.per_class_train, stream) : train_all;
    if (c.normalize) train = normalize_frobenius(train);
    const ContaminatedSet cont = contaminate(train, c, stream.next_u64());

    const FittedModel model = fit_model(cont.samples, c, c.k1, c.k2);
    std::vector<Eigen::VectorXd> train_feats;
    train_feats.reserve(cont.samples.size());
    for (const auto& x : cont.samples.samples) train_feats.push_back(model.features(x));
    std::vector<Eigen::VectorXd> test_feats;
    test_feats.reserve(test.size());
    for (const auto& x : test.samples) test_feats.push_back(model.features(x));

    const std::vector<int> predicted = knn1_batch(train_feats, *cont.samples.labels, test_feats);
    int hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
      if (predicted[i] == (*test.labels)[i]) ++hits;
    const double accuracy = static_cast<double>(hits) / static_cast<double>(predicted.size());

    rec.rows.push_back({static_cast<double>(t), accuracy});
    rec.summary["trials"].push_back(json{{"trial", t},
                                         {"seed", seed_t},
                                         {"outlier_indices", indices_json(cont.outlier_indices)},
                                         {"objective", trace_summary(model.trace())},
                                         {"accuracy", accuracy}});
  }
  finish_aggregates(rec, {"accuracy"});
  rec.wall_clock_seconds = clock.seconds();
  return rec;
}

ResultRecord run_cluster(const ExperimentConfig& c) {
  Stopwatch clock;
  if (c.k1 < 1 || c.k2 < 1) throw ConfigError("cluster: ranks.k1 and ranks.k2 required");
  SampleSet data = load_training_data(c);
  if (!data.labels) throw DataError("cluster: labeled data required for scoring");
  if (c.normalize) data = normalize_frobenius(data);
  int k = c.clusters;
  if (k == 0) k = static_cast<int>(std::set<int>(data.labels->begin(), data.labels->end()).size());
  if (k > static_cast<int>(data.size())) throw ConfigError("cluster: more clusters than samples");

  ResultRecord rec;
  rec.columns = {"trial", "ac", "nmi"};
  rec.summary = json{{"experiment", "cluster"}, {"config", c.echo}, {"trials", json::array()}};

  for (int t = 0; t < c.trials; ++t) {
    const std::uint64_t seed_t = c.seed + static_cast<std::uint64_t>(t);
    SplitMix64 stream(seed_t);
    const ContaminatedSet cont = contaminate(data, c, stream.next_u64());
    const FittedModel model = fit_model(cont.samples, c, c.k1, c.k2);

    std::vector<bool> is_outlier(cont.samples.size(), false);
    for (std::size_t i : cont.outlier_indices) is_outlier[i] = true;
    FeatureSet feats;
    feats.labels = std::vector<int>{};
    for (std::size_t i = 0; i < cont.samples.size(); ++i) {
      if (is_outlier[i]) continue;
      feats.vectors.push_back(model.features(cont.samples.samples[i]));
      feats.labels->push_back((*cont.samples.labels)[i]);
    }
    const DensityPeaksResult init = density_peaks_init(feats, k, c.dc_percentile);
    const ClusteringResult res = kmeans(feats, k, init.centers);

    rec.rows.push_back({static_cast<double>(t), *res.ac, *res.nmi});
    rec.summary["trials"].push_back(json{{"trial", t},
                                         {"seed", seed_t},
                                         {"outlier_indices", indices_json(cont.outlier_indices)},
                                         {"objective", trace_summary(model.trace())},
                                         {"ac", *res.ac},
                                         {"nmi", *res.nmi}});
  }
  finish_aggregates(rec, {"ac", "nmi"});
  rec.wall_clock_seconds = clock.seconds();
  return rec;
}

ResultRecord run_reconstruct(const ExperimentConfig& c) {
  Stopwatch clock;
  if (c.rank_grid.empty()) throw ConfigError("reconstruct: ranks.grid required");
  SampleSet data = load_training_data(c);
  if (c.normalize) data = normalize_frobenius(data);

  ResultRecord rec;
  rec.columns = {"trial", "rank", "error"};
  rec.summary = json{{"experiment", "reconstruct"}, {"config", c.echo}, {"trials", json::array()}};

  std::map<int, std::vector<double>> per_rank;
  for (int t = 0; t < c.trials; ++t) {
    const std::uint64_t seed_t = c.seed + static_cast<std::uint64_t>(t);
    SplitMix64 stream(seed_t);
    const ContaminatedSet cont = contaminate(data, c, stream.next_u64());
    std::vector<bool> is_outlier(cont.samples.size(), false);
    for (std::size_t i : cont.outlier_indices) is_outlier[i] = true;

    json trial_entry = json{{"trial", t},
                            {"seed", seed_t},
                            {"outlier_indices", indices_json(cont.outlier_indices)},
                            {"errors", json::array()}};
    for (int r : c.rank_grid) {
      const FittedModel model = fit_model(cont.samples, c, r, r);
      SampleSet originals, rebuilt;
      for (std::size_t i = 0; i < cont.samples.size(); ++i) {
        if (is_outlier[i]) continue;
        originals.samples.push_back(cont.samples.samples[i]);
        rebuilt.samples.push_back(model.rebuild(cont.samples.samples[i]));
      }
      const double err = reconstruction_error(originals, rebuilt);
      rec.rows.push_back({static_cast<double>(t), static_cast<double>(r), err});
      per_rank[r].push_back(err);
      trial_entry["errors"].push_back(json{{"rank", r}, {"error", err}});
    }
    rec.summary["trials"].push_back(std::move(trial_entry));
  }

  json curve = json::array();
  for (const auto& [r, errs] : per_rank) {
    double mean = 0.0;
    for (double e : errs) mean += e;
    mean /= static_cast<double>(errs.size());
    double var = 0.0;
    for (double e : errs) var += (e - mean) * (e - mean);
    const double sd = std::sqrt(var / static_cast<double>(errs.size()));
    curve.push_back(json{{"rank", r}, {"mean", mean}, {"std", sd}});
    rec.means["error@" + std::to_string(r)] = mean;
    rec.stds["error@" + std::to_string(r)] = sd;
  }
  rec.summary["curve"] = curve;
  json agg = json::object();
  for (const auto& [k, v] : rec.means) agg[k] = json{{"mean", v}, {"std", rec.stds[k]}};
  rec.summary["aggregates"] = agg;
  rec.wall_clock_seconds = clock.seconds();
  return rec;
}

DecomposeResult run_decompose(const ExperimentConfig& c) {
  if (c.k1 < 1 || c.k2 < 1) throw ConfigError("decompose: ranks.k1 and ranks.k2 required");
  SampleSet data = load_training_data(c);
  if (c.normalize) data = normalize_frobenius(data);
  SplitMix64 stream(c.seed);
  const ContaminatedSet cont = contaminate(data, c, stream.next_u64());
  const FittedModel model = fit_model(cont.samples, c, c.k1, c.k2);

  const std::string model_path = c.output + ".model";
  const std::string sidecar_path = c.output + ".json";
  try {
    if (model.plane) save_model(*model.plane, model_path);
    else save_tensor_model(*model.tensor, model_path);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }

  const IterationState& st = model.state();
  double wmin = 0.0, wmax = 0.0, wmean = 0.0;
  if (!st.weights.empty()) {
    wmin = *std::min_element(st.weights.begin(), st.weights.end());
    wmax = *std::max_element(st.weights.begin(), st.weights.end());
    for (double w : st.weights) wmean += w;
    wmean /= static_cast<double>(st.weights.size());
  }
  const FitDiagnostics& diag = model.diagnostics();
  json sidecar{{"config", c.echo},
               {"model_file", model_path},
               {"objective_trace", model.trace()},
               {"iterations", diag.iterations},
               {"converged", diag.converged},
               {"stalled", diag.stalled},
               {"damped_steps", diag.damped_steps},
               {"weights", json{{"min", wmin}, {"max", wmax}, {"mean", wmean}}},
               {"outlier_indices", indices_json(cont.outlier_indices)}};
  std::ofstream out(sidecar_path);
  if (!out) throw DataError("decompose: cannot create " + sidecar_path);
  out << sidecar.dump(2) << "\n";
  return {model_path, sidecar_path};
}

ResultRecord run_sweep(const ExperimentConfig& c) {
  Stopwatch clock;
  if (c.sweep_lambda.empty() || c.sweep_p.empty())
    throw ConfigError("sweep: config.sweep.lambda and config.sweep.p required");
  ResultRecord rec;
  rec.summary = json{{"experiment", std::string(experiment_name(c.experiment)) + "-sweep"},
                     {"config", c.echo},
                     {"grid", json::array()}};
  std::vector<std::string> metrics;
  switch (c.experiment) {
    case ExperimentKind::Classify: metrics = {"accuracy"}; break;
    case ExperimentKind::Cluster: metrics = {"ac", "nmi"}; break;
    case ExperimentKind::Reconstruct: metrics = {"error"}; break;
    default: throw ConfigError("sweep: not supported for decompose");
  }
  rec.columns = {"lambda", "p"};
  for (const auto& m : metrics) rec.columns.push_back(m);

  for (double lambda : c.sweep_lambda)
    for (double p : c.sweep_p) {
      ExperimentConfig combo = c;
      combo.lambda = lambda;
      combo.p = p;
      ResultRecord inner;
      switch (c.experiment) {
        case ExperimentKind::Classify: inner = run_classify(combo); break;
        case ExperimentKind::Cluster: inner = run_cluster(combo); break;
        default: {
          if (c.rank_grid.empty()) throw ConfigError("sweep: ranks.grid required");
          // one swept rank per combo: the grid's first entry
          combo.rank_grid = {c.rank_grid.front()};
          inner = run_reconstruct(combo);
          inner.means["error"] = inner.means.begin()->second;
          break;
        }
      }
      std::vector<double> row{lambda, p};
      json cell{{"lambda", lambda}, {"p", p}};
      for (const auto& m : metrics) {
        row.push_back(inner.means.at(m));
        cell[m] = inner.means.at(m);
      }
      rec.rows.push_back(std::move(row));
      rec.summary["grid"].push_back(std::move(cell));
    }
  rec.wall_clock_seconds = clock.seconds();
  return rec;
}

void write_csv(const ResultRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("csv: cannot create " + path);
  for (std::size_t i = 0; i < record.columns.size(); ++i)
    out << (i ? "," : "") << record.columns[i];
  out << "\n";
  char buf[64];
  for (const auto& row : record.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[i]);
      out << (i ? "," : "") << buf;
    }
    out << "\n";
  }
}

void write_summary_json(const ResultRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("json: cannot create " + path);
  out << record.summary.dump(2) << "\n";
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"robust two-dimensional decomposition experiments"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  bool sweep = false;
  std::map<std::string, ExperimentKind> kinds{{"classify", ExperimentKind::Classify},
                                              {"cluster", ExperimentKind::Cluster},
                                              {"reconstruct", ExperimentKind::Reconstruct},
                                              {"decompose", ExperimentKind::Decompose}};
  for (const auto& [name, kind] : kinds) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_flag("--sweep", sweep, "run the lambda x p sweep from config.sweep");
    sub->add_option("--out", out_override, "override config.output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
    const std::string sub = app.get_subcommands().front()->get_name();
    const ExperimentKind kind = kinds.at(sub);
    if (cfg.echo.contains("experiment") && cfg.experiment != kind)
      throw ConfigError("config: experiment '" + cfg.echo["experiment"].get<std::string>() +
                        "' does not match subcommand '" + sub + "'");
    cfg.experiment = kind;
    if (!out_override.empty()) cfg.output = out_override;

    if (kind == ExperimentKind::Decompose) {
      if (sweep) throw ConfigError("sweep: not supported for decompose");
      const DecomposeResult res = run_decompose(cfg);
      std::cout << res.model_path << "\n" << res.sidecar_path << "\n";
      return 0;
    }
    ResultRecord rec;
    if (sweep) {
      rec = run_sweep(cfg);
    } else {
      switch (kind) {
        case ExperimentKind::Classify: rec = run_classify(cfg); break;
        case ExperimentKind::Cluster: rec = run_cluster(cfg); break;
        default: rec = run_reconstruct(cfg); break;
      }
    }
    write_csv(rec, cfg.output + ".csv");
    write_summary_json(rec, cfg.output + ".json");
    std::cout << cfg.output << ".csv\n" << cfg.output << ".json\n";
    std::cerr << "wall clock: " << rec.wall_clock_seconds << " s\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace r2dsvd
