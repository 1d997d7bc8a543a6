#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

#include "r2dsvd/sample_set.hpp"

namespace r2dsvd {

/// Equal-length feature vectors, optionally labeled.
struct FeatureSet {
  std::vector<Eigen::VectorXd> vectors;
  std::optional<std::vector<int>> labels;

  void validate() const;
};

/// Row-major flattening used for all matrix-valued features.
Eigen::VectorXd flatten_row_major(const Eigen::MatrixXd& m);

/// Label of the Euclidean-nearest training vector; ties break to the lowest
/// training index.
int knn1_classify(const FeatureSet& train, const Eigen::VectorXd& query);

struct DensityPeaksResult {
  std::vector<int> indices;  ///< selected points, by decreasing rho*delta
  std::vector<Eigen::VectorXd> centers;
  bool degenerate = false;   ///< all points identical
};

/// Density-peaks center selection: Gaussian local density with cutoff at the
/// given percentile of pairwise distances, separation delta to the nearest
/// denser point, top-k by rho*delta (ties to the lowest index).
DensityPeaksResult density_peaks_init(const FeatureSet& features, int k,
                                      double dc_percentile = 0.02);

struct ClusteringResult {
  std::vector<int> assignments;
  std::vector<Eigen::VectorXd> centers;
  std::optional<double> ac;   ///< filled when the feature set is labeled
  std::optional<double> nmi;
};

/// Lloyd iterations to an assignment fixpoint (at most max_iterations);
/// an empty cluster seizes the point farthest from its assigned center.
ClusteringResult kmeans(const FeatureSet& features, int k,
                        const std::vector<Eigen::VectorXd>& init_centers,
                        int max_iterations = 300);

/// Best agreement fraction over one-to-one matchings of cluster indices to
/// labels (optimal assignment on the contingency matrix).
double clustering_accuracy(std::span<const int> truth, std::span<const int> predicted);

/// I(U;V) / sqrt(H(U) H(V)) with natural logs; 1 when both partitions are
/// single-cluster, 0 when exactly one entropy vanishes.
double nmi(std::span<const int> truth, std::span<const int> predicted);

/// Mean squared Frobenius distance over non-excluded sample pairs.
double reconstruction_error(const SampleSet& originals, const SampleSet& reconstructions,
                            std::span<const std::size_t> exclude = {});

/// Canonical angles (radians, ascending) between the column spans of two
/// orthonormal matrices of equal shape.
std::vector<double> principal_angles(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

}  // namespace r2dsvd
