#pragma once

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

#include "r2dsvd/data_io.hpp"
#include "r2dsvd/decomp2d.hpp"

namespace r2dsvd {

/// Bad or inconsistent configuration: CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Missing or malformed data files: CLI exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { Classify, Cluster, Reconstruct, Decompose };
enum class Method { Svd2d, R1Svd2d, Gkrsl2dSvd, HoGkrsl };
enum class OutlierMode { None, Scaled, Dummy };

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Classify;
  Method method = Method::Gkrsl2dSvd;

  // data
  std::string train_images, train_labels, test_images, test_labels;
  std::string image_dir;
  ImageFormat format = ImageFormat::Pgm;
  int per_class_train = 0;  ///< 0 = use every training sample
  bool normalize = false;

  // model
  int k1 = 0, k2 = 0;
  std::vector<int> rank_grid;  ///< reconstruct: swept k1 = k2 values
  double lambda = 8.0, p = 8.0;
  double fixed_sigma = 0.0;  ///< 0 = adaptive
  SolverConfig solver;

  // contamination
  OutlierMode outlier_mode = OutlierMode::None;
  double outlier_fraction = 0.05;
  double outlier_magnitude = 50.0;
  int dummy_count = 30;
  double intensity_lo = 0.0, intensity_hi = 255.0;

  int trials = 1;
  std::uint64_t seed = 0;
  int clusters = 0;  ///< 0 = number of distinct labels
  double dc_percentile = 0.02;
  std::string output = "results";

  std::vector<double> sweep_lambda, sweep_p;

  nlohmann::json echo;  ///< the document the config was parsed from

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
};

/// Per-trial rows plus aggregates and a JSON summary. Wall-clock stays out of
/// the emitted files so identical config + seed gives identical bytes.
struct ResultRecord {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::map<std::string, double> means;
  std::map<std::string, double> stds;
  nlohmann::json summary;
  double wall_clock_seconds = 0.0;
};

ResultRecord run_classify(const ExperimentConfig& config);
ResultRecord run_cluster(const ExperimentConfig& config);
ResultRecord run_reconstruct(const ExperimentConfig& config);

struct DecomposeResult {
  std::string model_path;
  std::string sidecar_path;
};

/// Fits the configured method and writes the model container plus a JSON
/// sidecar (trace, iterations, config echo, weight summary, contamination).
DecomposeResult run_decompose(const ExperimentConfig& config);

/// Long-format lambda x p sweep of the configured experiment.
ResultRecord run_sweep(const ExperimentConfig& config);

void write_csv(const ResultRecord& record, const std::string& path);
void write_summary_json(const ResultRecord& record, const std::string& path);

/// Full command-line entry point; returns the process exit code
/// (0 success, 2 config error, 3 data error).
int run_cli(int argc, const char* const* argv);

}  // namespace r2dsvd
