#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace r2dsvd {

/// An ordered collection of equally sized real matrices, optionally labeled.
struct SampleSet {
  std::vector<Eigen::MatrixXd> samples;
  std::optional<std::vector<int>> labels;

  SampleSet() = default;
  explicit SampleSet(std::vector<Eigen::MatrixXd> s,
                     std::optional<std::vector<int>> l = std::nullopt)
      : samples(std::move(s)), labels(std::move(l)) {
    validate();
  }

  std::size_t size() const { return samples.size(); }
  Eigen::Index rows() const { return samples.empty() ? 0 : samples.front().rows(); }
  Eigen::Index cols() const { return samples.empty() ? 0 : samples.front().cols(); }

  /// Throws std::invalid_argument on mixed shapes, non-finite entries, or a
  /// label list whose length differs from the sample count.
  void validate() const;
};

}  // namespace r2dsvd
