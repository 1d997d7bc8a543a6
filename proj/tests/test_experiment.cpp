#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "r2dsvd/eval.hpp"
#include "r2dsvd/experiment.hpp"
#include "r2dsvd/model_io.hpp"
#include "support/synth.hpp"

using namespace r2dsvd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("r2dsvd_exp_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// small labeled digit corpus on disk, shared across cases
void write_digit_corpus(const TempDir& tmp, int train_per_class, int test_per_class,
                        std::uint64_t seed) {
  SplitMix64 rng(seed);
  const SampleSet train = synth::make_digit_set(train_per_class, rng, 14);
  const SampleSet test = synth::make_digit_set(test_per_class, rng, 14);
  write_idx(train, tmp.file("train.idx"), tmp.file("train-labels.idx"));
  write_idx(test, tmp.file("test.idx"), tmp.file("test-labels.idx"));
}

json classify_config(const TempDir& tmp) {
  return json{
      {"experiment", "classify"},
      {"method", "gkrsl2dsvd"},
      {"data",
       {{"train_images", tmp.file("train.idx")},
        {"train_labels", tmp.file("train-labels.idx")},
        {"test_images", tmp.file("test.idx")},
        {"test_labels", tmp.file("test-labels.idx")},
        {"per_class_train", 6}}},
      {"ranks", {{"k1", 4}, {"k2", 4}}},
      {"loss", {{"lambda", 8.0}, {"p", 8.0}}},
      {"solver", {{"max_iterations", 15}}},
      {"outliers", {{"mode", "scaled"}, {"fraction", 0.1}, {"magnitude", 50.0}}},
      {"trials", 2},
      {"seed", 5},
      {"output", tmp.file("out")}};
}

}  // namespace

TEST_CASE("config parsing: strict keys and validation") {
  json good = json{{"experiment", "classify"}, {"method", "svd2d"}};
  CHECK(ExperimentConfig::from_json(good).method == Method::Svd2d);
  CHECK(ExperimentConfig::from_json(good).normalize);  // classify default

  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"experimnt", "classify"}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"data", {{"train_imgs", "x"}}}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"method", "pca"}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"trials", 0}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"loss", {{"sigma", -1.0}}}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"loss", {{"sigma", "auto"}}}}), ConfigError);
  CHECK(ExperimentConfig::from_json(json{{"loss", {{"sigma", "adaptive"}}}}).fixed_sigma == 0.0);
  CHECK(ExperimentConfig::from_json(json{{"loss", {{"sigma", 2.5}}}}).fixed_sigma == 2.5);
}

TEST_CASE("classify: determinism, aggregates, clean full-rank equals raw pixels") {
  TempDir tmp;
  write_digit_corpus(tmp, 12, 3, 101);
  const json base = classify_config(tmp);

  SUBCASE("same config and seed give byte-identical outputs") {
    const ExperimentConfig cfg = ExperimentConfig::from_json(base);
    const ResultRecord a = run_classify(cfg);
    const ResultRecord b = run_classify(cfg);
    write_csv(a, tmp.file("a.csv"));
    write_csv(b, tmp.file("b.csv"));
    write_summary_json(a, tmp.file("a.json"));
    write_summary_json(b, tmp.file("b.json"));
    CHECK(slurp(tmp.file("a.csv")) == slurp(tmp.file("b.csv")));
    CHECK(slurp(tmp.file("a.json")) == slurp(tmp.file("b.json")));
    CHECK(!a.rows.empty());

    // aggregates recompute from the emitted rows
    double mean = 0.0;
    for (const auto& row : a.rows) mean += row[1];
    mean /= static_cast<double>(a.rows.size());
    double var = 0.0;
    for (const auto& row : a.rows) var += (row[1] - mean) * (row[1] - mean);
    CHECK(std::abs(a.means.at("accuracy") - mean) < 1e-12);
    CHECK(std::abs(a.stds.at("accuracy") - std::sqrt(var / a.rows.size())) < 1e-12);
    // contamination indices are reported per trial
    for (const auto& trial : a.summary.at("trials"))
      CHECK(trial.at("outlier_indices").size() == 6);  // floor(0.1 * 60)
  }

  SUBCASE("single trial has zero deviation") {
    json one = base;
    one["trials"] = 1;
    const ResultRecord rec = run_classify(ExperimentConfig::from_json(one));
    CHECK(rec.stds.at("accuracy") == 0.0);
  }

  SUBCASE("unit magnitude and full rank reproduce raw-pixel accuracy") {
    json clean = base;
    clean["outliers"]["magnitude"] = 1.0;
    clean["ranks"] = {{"k1", 14}, {"k2", 14}};
    clean["method"] = "svd2d";
    clean["trials"] = 1;
    const ResultRecord rec = run_classify(ExperimentConfig::from_json(clean));

    // reference: raw-pixel 1NN on the same subset, computed here
    const ExperimentConfig cfg = ExperimentConfig::from_json(clean);
    SampleSet train = load_idx(cfg.train_images, cfg.train_labels);
    SampleSet test = load_idx(cfg.test_images, cfg.test_labels);
    SplitMix64 stream(cfg.seed);
    // mirror the pipeline's per-trial subsampling draw
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < train.size(); ++i) by_class[(*train.labels)[i]].push_back(i);
    FeatureSet feats;
    feats.labels = std::vector<int>{};
    for (auto& [label, members] : by_class) {
      auto picks = sample_without_replacement(members.size(), 6, stream);
      std::sort(picks.begin(), picks.end());
      for (std::size_t p : picks) {
        const Eigen::MatrixXd& x = train.samples[members[p]];
        feats.vectors.push_back(flatten_row_major(x / x.norm()));
        feats.labels->push_back(label);
      }
    }
    int hits = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const Eigen::MatrixXd q = test.samples[i] / test.samples[i].norm();
      if (knn1_classify(feats, flatten_row_major(q)) == (*test.labels)[i]) ++hits;
    }
    const double pixel_acc = static_cast<double>(hits) / static_cast<double>(test.size());
    CHECK(rec.rows[0][1] == doctest::Approx(pixel_acc).epsilon(1e-12));
  }
}

TEST_CASE("cluster: separable blobs score perfectly and deterministically") {
  TempDir tmp;
  SplitMix64 rng(7);
  const SampleSet blobs = synth::make_two_blob_set(8, 6, 5, rng);
  write_idx(blobs, tmp.file("blobs.idx"), tmp.file("blobs-labels.idx"));
  const json cfg_json{{"experiment", "cluster"},
                      {"method", "gkrsl2dsvd"},
                      {"data",
                       {{"train_images", tmp.file("blobs.idx")},
                        {"train_labels", tmp.file("blobs-labels.idx")}}},
                      {"ranks", {{"k1", 2}, {"k2", 2}}},
                      {"loss", {{"lambda", 8.0}, {"p", 8.0}}},
                      {"solver", {{"max_iterations", 20}}},
                      {"trials", 1},
                      {"seed", 3},
                      {"output", tmp.file("cl")}};
  const ExperimentConfig cfg = ExperimentConfig::from_json(cfg_json);
  const ResultRecord rec = run_cluster(cfg);
  CHECK(rec.means.at("ac") == doctest::Approx(1.0));
  CHECK(rec.means.at("nmi") == doctest::Approx(1.0));

  const ResultRecord again = run_cluster(cfg);
  CHECK(again.rows == rec.rows);
}

TEST_CASE("reconstruct: full-rank endpoint and wide-kernel reduction") {
  TempDir tmp;
  SplitMix64 rng(8);
  const SampleSet faces = synth::make_face_set(24, 8, 8, rng);
  write_idx(faces, tmp.file("faces.idx"));
  json base{{"experiment", "reconstruct"},
            {"method", "gkrsl2dsvd"},
            {"data", {{"train_images", tmp.file("faces.idx")}, {"normalize", true}}},
            {"ranks", {{"grid", {2, 8}}}},
            {"loss", {{"lambda", 0.5}, {"p", 0.5}}},
            {"solver", {{"max_iterations", 20}}},
            {"trials", 1},
            {"seed", 1},
            {"output", tmp.file("rc")}};

  const ResultRecord rec = run_reconstruct(ExperimentConfig::from_json(base));
  CHECK(rec.means.at("error@8") < 1e-18);  // full-rank endpoint

  json wide = base;
  wide["loss"] = {{"lambda", 0.5}, {"p", 0.5}, {"sigma", 1e6}};
  json plain = base;
  plain["method"] = "svd2d";
  const ResultRecord w = run_reconstruct(ExperimentConfig::from_json(wide));
  const ResultRecord s = run_reconstruct(ExperimentConfig::from_json(plain));
  CHECK(std::abs(w.means.at("error@2") - s.means.at("error@2")) < 1e-6);
}

TEST_CASE("decompose: bitwise projection round trip and faithful sidecar") {
  TempDir tmp;
  SplitMix64 rng(9);
  const SampleSet data = synth::make_face_set(10, 6, 5, rng);
  write_idx(data, tmp.file("d.idx"));
  const json cfg_json{{"experiment", "decompose"},
                      {"method", "gkrsl2dsvd"},
                      {"data", {{"train_images", tmp.file("d.idx")}}},
                      {"ranks", {{"k1", 3}, {"k2", 2}}},
                      {"loss", {{"lambda", 2.0}, {"p", 2.0}, {"sigma", 50.0}}},
                      {"solver", {{"max_iterations", 30}}},
                      {"seed", 4},
                      {"output", tmp.file("model_out")}};
  const ExperimentConfig cfg = ExperimentConfig::from_json(cfg_json);
  const DecomposeResult res = run_decompose(cfg);

  const Decomposition2D loaded = load_model(res.model_path);
  const SampleSet on_disk = load_idx(tmp.file("d.idx"));  // what the pipeline saw
  const Decomposition2D direct = gkrsl_svd2d_fit(
      on_disk, {3, 2}, {2.0, 2.0, 50.0},
      [&] {
        SolverConfig sc = cfg.solver;
        sc.sigma_mode = SigmaMode::Fixed;
        sc.sigma = 50.0;
        sc.seed = cfg.seed;
        return sc;
      }());
  SplitMix64 prng(10);
  for (int i = 0; i < 5; ++i) {
    const Eigen::MatrixXd x = synth::random_matrix(6, 5, prng);
    const Eigen::MatrixXd a = project(loaded, x);
    const Eigen::MatrixXd b = project(direct, x);
    REQUIRE(a.size() == b.size());
    for (Eigen::Index j = 0; j < a.size(); ++j) CHECK(a.data()[j] == b.data()[j]);
  }

  json sidecar;
  std::ifstream(res.sidecar_path) >> sidecar;
  CHECK(sidecar.at("config") == cfg_json);  // exact echo
  const auto trace = sidecar.at("objective_trace").get<std::vector<double>>();
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-10);
}

TEST_CASE("higher-order method runs through the pipelines") {
  TempDir tmp;
  SplitMix64 rng(12);
  const SampleSet data = synth::make_face_set(8, 5, 4, rng);
  write_idx(data, tmp.file("t.idx"));
  json cfg_json{{"experiment", "decompose"},
                {"method", "ho_gkrsl"},
                {"data", {{"train_images", tmp.file("t.idx")}}},
                {"ranks", {{"k1", 2}, {"k2", 2}}},
                {"loss", {{"lambda", 2.0}, {"p", 2.0}, {"sigma", 40.0}}},
                {"solver", {{"max_iterations", 20}}},
                {"seed", 2},
                {"output", tmp.file("ho_out")}};
  const DecomposeResult res = run_decompose(ExperimentConfig::from_json(cfg_json));
  const TensorModel loaded = load_tensor_model(res.model_path);
  REQUIRE(loaded.factors.size() == 2);
  CHECK(loaded.factors[0].cols() == 2);
  CHECK(loaded.mean.order() == 2);

  // the order-2 tensor route classifies like the 2D route
  write_digit_corpus(tmp, 6, 2, 77);
  json classify = classify_config(tmp);
  classify["method"] = "ho_gkrsl";
  classify["trials"] = 1;
  classify["data"]["per_class_train"] = 4;
  classify["solver"]["max_iterations"] = 6;
  const ResultRecord ho = run_classify(ExperimentConfig::from_json(classify));
  classify["method"] = "gkrsl2dsvd";
  const ResultRecord plane = run_classify(ExperimentConfig::from_json(classify));
  CHECK(ho.rows[0][1] == doctest::Approx(plane.rows[0][1]).epsilon(1e-12));
}

TEST_CASE("cli: exit codes and sweep output") {
  TempDir tmp;
  write_digit_corpus(tmp, 8, 2, 55);
  json cfg = classify_config(tmp);
  cfg["trials"] = 1;
  cfg["data"]["per_class_train"] = 4;
  cfg["solver"]["max_iterations"] = 8;

  auto run_args = [&](std::vector<std::string> args) {
    std::vector<const char*> argv{"r2dsvd"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
  };

  SUBCASE("valid run succeeds and writes outputs") {
    std::ofstream(tmp.file("cfg.json")) << cfg.dump();
    CHECK(run_args({"classify", "--config", tmp.file("cfg.json")}) == 0);
    CHECK(fs::exists(tmp.file("out.csv")));
    CHECK(fs::exists(tmp.file("out.json")));
    const std::string csv = slurp(tmp.file("out.csv"));
    CHECK(csv.rfind("trial,accuracy\n", 0) == 0);
  }
  SUBCASE("missing config file is a config error") {
    CHECK(run_args({"classify", "--config", tmp.file("nope.json")}) == 2);
  }
  SUBCASE("unknown key is a config error") {
    json bad = cfg;
    bad["extra_key"] = 1;
    std::ofstream(tmp.file("bad.json")) << bad.dump();
    CHECK(run_args({"classify", "--config", tmp.file("bad.json")}) == 2);
  }
  SUBCASE("subcommand mismatch is a config error") {
    std::ofstream(tmp.file("cfg.json")) << cfg.dump();
    CHECK(run_args({"cluster", "--config", tmp.file("cfg.json")}) == 2);
  }
  SUBCASE("missing data file is a data error") {
    json gone = cfg;
    gone["data"]["train_images"] = tmp.file("missing.idx");
    std::ofstream(tmp.file("gone.json")) << gone.dump();
    CHECK(run_args({"classify", "--config", tmp.file("gone.json")}) == 3);
  }
  SUBCASE("sweep emits the long-format grid") {
    json sw = cfg;
    sw["sweep"] = {{"lambda", {1.0, 4.0}}, {"p", {2.0}}};
    std::ofstream(tmp.file("sw.json")) << sw.dump();
    CHECK(run_args({"classify", "--config", tmp.file("sw.json"), "--sweep"}) == 0);
    const std::string csv = slurp(tmp.file("out.csv"));
    CHECK(csv.rfind("lambda,p,accuracy\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 combos
  }
}

TEST_CASE("sweep: cluster and reconstruct branches") {
  TempDir tmp;
  SplitMix64 rng(66);
  const SampleSet blobs = synth::make_two_blob_set(6, 6, 5, rng);
  write_idx(blobs, tmp.file("b.idx"), tmp.file("b-labels.idx"));

  json cl{{"experiment", "cluster"},
          {"method", "gkrsl2dsvd"},
          {"data",
           {{"train_images", tmp.file("b.idx")}, {"train_labels", tmp.file("b-labels.idx")}}},
          {"ranks", {{"k1", 2}, {"k2", 2}}},
          {"solver", {{"max_iterations", 10}}},
          {"trials", 1},
          {"seed", 2},
          {"sweep", {{"lambda", {2.0}}, {"p", {2.0, 4.0}}}},
          {"output", tmp.file("swc")}};
  const ResultRecord c = run_sweep(ExperimentConfig::from_json(cl));
  CHECK(c.columns == std::vector<std::string>{"lambda", "p", "ac", "nmi"});
  CHECK(c.rows.size() == 2);

  json rc{{"experiment", "reconstruct"},
          {"method", "gkrsl2dsvd"},
          {"data", {{"train_images", tmp.file("b.idx")}}},
          {"ranks", {{"grid", {2, 4}}}},
          {"solver", {{"max_iterations", 10}}},
          {"trials", 1},
          {"seed", 2},
          {"sweep", {{"lambda", {0.5, 1.0}}, {"p", {0.5}}}},
          {"output", tmp.file("swr")}};
  const ResultRecord r = run_sweep(ExperimentConfig::from_json(rc));
  CHECK(r.columns == std::vector<std::string>{"lambda", "p", "error"});
  CHECK(r.rows.size() == 2);
  for (const auto& row : r.rows) CHECK(row[2] >= 0.0);

  json no_grid = rc;
  no_grid.erase("ranks");
  CHECK_THROWS_AS(run_sweep(ExperimentConfig::from_json(no_grid)), ConfigError);
}
