#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "r2dsvd/sample_set.hpp"

namespace r2dsvd {

/// IDX container (big-endian): magic 0x00000803 + N, rows, cols + uint8
/// payload for images; magic 0x00000801 + N + uint8 payload for labels.
SampleSet load_idx(const std::string& images_path,
                   const std::optional<std::string>& labels_path = std::nullopt);

/// Writes an IDX image file (and labels, when the set is labeled and a path
/// is given). Pixel values must round to integers in [0, 255].
void write_idx(const SampleSet& data, const std::string& images_path,
               const std::optional<std::string>& labels_path = std::nullopt);

enum class ImageFormat { Pgm, Csv };

/// Loads every matching file in the directory, lexicographically by name.
/// A directory of class subdirectories yields labels (ids follow the sorted
/// subdirectory names); a flat directory yields an unlabeled set.
SampleSet load_image_dir(const std::string& path, ImageFormat format);

/// Binary 8-bit PGM (P5, maxval 255).
Eigen::MatrixXd load_pgm(const std::string& path);
void write_pgm(const Eigen::MatrixXd& image, const std::string& path);

/// Comma-separated matrix, one file per sample.
Eigen::MatrixXd load_csv_matrix(const std::string& path);
void write_csv_matrix(const Eigen::MatrixXd& m, const std::string& path);

/// Every sample scaled to unit Frobenius norm; zero-norm samples are errors.
SampleSet normalize_frobenius(const SampleSet& data);

struct OutlierConfig {
  enum class Mode { Scaled, Dummy };
  Mode mode = Mode::Scaled;
  double fraction = 0.05;    ///< Scaled: floor(fraction * N) samples chosen
  double magnitude = 50.0;   ///< Scaled: multiplier a
  int dummy_count = 30;      ///< Dummy: appended matrices
  double intensity_lo = 0.0; ///< Dummy: uniform entry range
  double intensity_hi = 255.0;
  std::uint64_t seed = 0;
};

struct ContaminatedSet {
  SampleSet samples;
  std::vector<std::size_t> outlier_indices;  ///< ascending
  OutlierConfig provenance;
};

/// Scaled mode multiplies seeded-chosen samples in place; dummy mode appends
/// uniform matrices (labeled -1 when the set is labeled). Deterministic for a
/// given seed (SplitMix64).
ContaminatedSet inject_outliers(const SampleSet& data, const OutlierConfig& config);

}  // namespace r2dsvd
