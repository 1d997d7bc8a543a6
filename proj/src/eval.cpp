#include "r2dsvd/eval.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace r2dsvd {

namespace {

// Maximum-total assignment on a square gain matrix (Hungarian method with
// potentials, O(n^3)).
double assignment_max(const std::vector<std::vector<double>>& gain) {
  const int n = static_cast<int>(gain.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -gain[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j)
    if (p[j] != 0) total += gain[p[j] - 1][j - 1];
  return total;
}

std::vector<int> compact_ids(std::span<const int> values, std::map<int, int>& dict) {
  std::vector<int> out;
  out.reserve(values.size());
  for (int v : values) {
    auto [it, inserted] = dict.try_emplace(v, static_cast<int>(dict.size()));
    out.push_back(it->second);
  }
  return out;
}

void check_partitions(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.empty()) throw std::invalid_argument("partition metric: empty input");
  if (truth.size() != predicted.size())
    throw std::invalid_argument("partition metric: length mismatch");
}

}  // namespace

void FeatureSet::validate() const {
  if (!vectors.empty()) {
    const Eigen::Index d = vectors.front().size();
    for (const auto& v : vectors) {
      if (v.size() != d) throw std::invalid_argument("FeatureSet: vector length mismatch");
      if (!v.allFinite()) throw std::invalid_argument("FeatureSet: non-finite entry");
    }
  }
  if (labels && labels->size() != vectors.size())
    throw std::invalid_argument("FeatureSet: label count mismatch");
}

Eigen::VectorXd flatten_row_major(const Eigen::MatrixXd& m) {
  Eigen::VectorXd v(m.size());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v(k++) = m(i, j);
  return v;
}

int knn1_classify(const FeatureSet& train, const Eigen::VectorXd& query) {
  train.validate();
  if (train.vectors.empty()) throw std::invalid_argument("knn1_classify: empty training set");
  if (!train.labels) throw std::invalid_argument("knn1_classify: unlabeled training set");
  if (train.vectors.front().size() != query.size())
    throw std::invalid_argument("knn1_classify: query length mismatch");
  std::size_t best = 0;
  double best_d = (train.vectors[0] - query).squaredNorm();
  for (std::size_t i = 1; i < train.vectors.size(); ++i) {
    const double d = (train.vectors[i] - query).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return (*train.labels)[best];
}

DensityPeaksResult density_peaks_init(const FeatureSet& features, int k, double dc_percentile) {
  features.validate();
  const int n = static_cast<int>(features.vectors.size());
  if (k < 1 || k > n) throw std::invalid_argument("density_peaks_init: k out of range");

  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> pairwise;
  pairwise.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = (features.vectors[i] - features.vectors[j]).norm();
      dist(i, j) = dist(j, i) = d;
      pairwise.push_back(d);
    }

  double dc = 1e-12;
  if (!pairwise.empty()) {
    std::sort(pairwise.begin(), pairwise.end());
    const auto idx = std::min(static_cast<std::size_t>(dc_percentile * pairwise.size()),
                              pairwise.size() - 1);
    dc = std::max(pairwise[idx], 1e-12);
  }

  std::vector<double> rho(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (j != i) rho[i] += std::exp(-(dist(i, j) / dc) * (dist(i, j) / dc));

  std::vector<double> delta(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double nearest_higher = std::numeric_limits<double>::infinity();
    double farthest = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      farthest = std::max(farthest, dist(i, j));
      if (rho[j] > rho[i]) nearest_higher = std::min(nearest_higher, dist(i, j));
    }
    delta[i] = std::isinf(nearest_higher) ? farthest : nearest_higher;
  }

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return rho[a] * delta[a] > rho[b] * delta[b];
  });

  DensityPeaksResult out;
  out.degenerate = std::all_of(pairwise.begin(), pairwise.end(), [](double d) { return d == 0.0; });
  for (int i = 0; i < k; ++i) {
    out.indices.push_back(order[i]);
    out.centers.push_back(features.vectors[order[i]]);
  }
  return out;
}

ClusteringResult kmeans(const FeatureSet& features, int k,
                        const std::vector<Eigen::VectorXd>& init_centers, int max_iterations) {
  features.validate();
  const int n = static_cast<int>(features.vectors.size());
  if (k < 1) throw std::invalid_argument("kmeans: k must be positive");
  if (n < k) throw std::invalid_argument("kmeans: fewer samples than clusters");
  if (static_cast<int>(init_centers.size()) != k)
    throw std::invalid_argument("kmeans: need exactly k initial centers");

  std::vector<Eigen::VectorXd> centers = init_centers;
  std::vector<int> assign(n, -1);

  for (int it = 0; it < max_iterations; ++it) {
    std::vector<int> next(n);
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (features.vectors[i] - centers[0]).squaredNorm();
      for (int j = 1; j < k; ++j) {
        const double d = (features.vectors[i] - centers[j]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      next[i] = best;
    }
    // repair empty clusters: lowest empty index seizes the globally farthest
    // point whose own cluster keeps at least one member
    for (int j = 0; j < k; ++j) {
      if (std::count(next.begin(), next.end(), j) > 0) continue;
      std::vector<int> count(k, 0);
      for (int a : next) ++count[a];
      int steal = -1;
      double steal_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (count[next[i]] <= 1) continue;
        const double d = (features.vectors[i] - centers[next[i]]).squaredNorm();
        if (d > steal_d) {
          steal_d = d;
          steal = i;
        }
      }
      if (steal >= 0) next[steal] = j;
    }
    const bool fixed = (next == assign);
    assign = std::move(next);
    if (fixed) break;
    for (int j = 0; j < k; ++j) {
      Eigen::VectorXd c = Eigen::VectorXd::Zero(features.vectors.front().size());
      int cnt = 0;
      for (int i = 0; i < n; ++i)
        if (assign[i] == j) {
          c += features.vectors[i];
          ++cnt;
        }
      if (cnt > 0) centers[j] = c / cnt;
    }
  }

  ClusteringResult out;
  out.assignments = assign;
  out.centers.resize(k);
  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(features.vectors.front().size());
    int cnt = 0;
    for (int i = 0; i < n; ++i)
      if (assign[i] == j) {
        c += features.vectors[i];
        ++cnt;
      }
    out.centers[j] = cnt > 0 ? Eigen::VectorXd(c / cnt) : init_centers[j];
  }
  if (features.labels) {
    out.ac = clustering_accuracy(*features.labels, assign);
    out.nmi = nmi(*features.labels, assign);
  }
  return out;
}

double clustering_accuracy(std::span<const int> truth, std::span<const int> predicted) {
  check_partitions(truth, predicted);
  std::map<int, int> tdict, pdict;
  const std::vector<int> t = compact_ids(truth, tdict);
  const std::vector<int> p = compact_ids(predicted, pdict);
  const int n = std::max(static_cast<int>(tdict.size()), static_cast<int>(pdict.size()));
  std::vector<std::vector<double>> counts(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < t.size(); ++i) counts[p[i]][t[i]] += 1.0;
  return assignment_max(counts) / static_cast<double>(truth.size());
}

double nmi(std::span<const int> truth, std::span<const int> predicted) {
  check_partitions(truth, predicted);
  std::map<int, int> tdict, pdict;
  const std::vector<int> t = compact_ids(truth, tdict);
  const std::vector<int> p = compact_ids(predicted, pdict);
  const int kt = static_cast<int>(tdict.size());
  const int kp = static_cast<int>(pdict.size());
  const double n = static_cast<double>(truth.size());

  std::vector<std::vector<double>> joint(kt, std::vector<double>(kp, 0.0));
  std::vector<double> mt(kt, 0.0), mp(kp, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    joint[t[i]][p[i]] += 1.0;
    mt[t[i]] += 1.0;
    mp[p[i]] += 1.0;
  }
  double ht = 0.0, hp = 0.0, info = 0.0;
  for (double c : mt)
    if (c > 0.0) ht -= c / n * std::log(c / n);
  for (double c : mp)
    if (c > 0.0) hp -= c / n * std::log(c / n);
  if (ht == 0.0 && hp == 0.0) return 1.0;
  if (ht == 0.0 || hp == 0.0) return 0.0;
  for (int a = 0; a < kt; ++a)
    for (int b = 0; b < kp; ++b)
      if (joint[a][b] > 0.0)
        info += joint[a][b] / n * std::log(n * joint[a][b] / (mt[a] * mp[b]));
  return std::clamp(info / std::sqrt(ht * hp), 0.0, 1.0);
}

double reconstruction_error(const SampleSet& originals, const SampleSet& reconstructions,
                            std::span<const std::size_t> exclude) {
  originals.validate();
  reconstructions.validate();
  if (originals.size() != reconstructions.size() || originals.rows() != reconstructions.rows() ||
      originals.cols() != reconstructions.cols())
    throw std::invalid_argument("reconstruction_error: set shape mismatch");
  std::vector<bool> skip(originals.size(), false);
  for (std::size_t i : exclude)
    if (i < skip.size()) skip[i] = true;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < originals.size(); ++i) {
    if (skip[i]) continue;
    sum += (originals.samples[i] - reconstructions.samples[i]).squaredNorm();
    ++count;
  }
  if (count == 0) throw std::invalid_argument("reconstruction_error: every index excluded");
  return sum / static_cast<double>(count);
}

std::vector<double> principal_angles(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw std::invalid_argument("principal_angles: shape mismatch");
  const auto check_ortho = [](const Eigen::MatrixXd& M) {
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(M.cols(), M.cols());
    if ((M.transpose() * M - I).norm() > 1e-6)
      throw std::invalid_argument("principal_angles: input columns not orthonormal");
  };
  check_ortho(A);
  check_ortho(B);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A.transpose() * B);
  std::vector<double> angles(static_cast<std::size_t>(svd.singularValues().size()));
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    angles[static_cast<std::size_t>(i)] =
        std::acos(std::clamp(svd.singularValues()(i), 0.0, 1.0));
  return angles;  // singular values descend, so angles ascend
}

}  // namespace r2dsvd
