#include "r2dsvd/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "r2dsvd/rng.hpp"

namespace r2dsvd {

namespace {

namespace fs = std::filesystem;

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("idx: truncated " + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::vector<int> load_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("idx: cannot open " + path);
  if (read_u32_be(in, "label magic") != kLabelMagic)
    throw std::runtime_error("idx: bad label magic in " + path);
  const std::uint32_t n = read_u32_be(in, "label count");
  std::vector<unsigned char> buf(n);
  if (n > 0 && !in.read(reinterpret_cast<char*>(buf.data()), n))
    throw std::runtime_error("idx: truncated label payload in " + path);
  return {buf.begin(), buf.end()};
}

int pgm_token(std::istream& in) {
  // next integer token, skipping whitespace and '#' comments
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  if (c == EOF || !std::isdigit(c)) throw std::runtime_error("pgm: malformed header");
  int v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = in.get();
  }
  return v;
}

}  // namespace

SampleSet load_idx(const std::string& images_path, const std::optional<std::string>& labels_path) {
  std::ifstream in(images_path, std::ios::binary);
  if (!in) throw std::runtime_error("idx: cannot open " + images_path);
  if (read_u32_be(in, "image magic") != kImageMagic)
    throw std::runtime_error("idx: bad image magic in " + images_path);
  const std::uint32_t n = read_u32_be(in, "image count");
  const std::uint32_t rows = read_u32_be(in, "row count");
  const std::uint32_t cols = read_u32_be(in, "column count");
  if (n > 0 && (rows == 0 || cols == 0))
    throw std::runtime_error("idx: zero image dimensions in " + images_path);

  SampleSet out;
  out.samples.reserve(n);
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
      throw std::runtime_error("idx: truncated image payload in " + images_path);
    Eigen::MatrixXd m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c)
        m(r, c) = static_cast<double>(buf[static_cast<std::size_t>(r) * cols + c]);
    out.samples.push_back(std::move(m));
  }
  if (labels_path) {
    std::vector<int> labels = load_idx_labels(*labels_path);
    if (labels.size() != out.samples.size())
      throw std::runtime_error("idx: label/image count mismatch");
    out.labels = std::move(labels);
  }
  return out;
}

void write_idx(const SampleSet& data, const std::string& images_path,
               const std::optional<std::string>& labels_path) {
  data.validate();
  std::ofstream out(images_path, std::ios::binary);
  if (!out) throw std::runtime_error("idx: cannot create " + images_path);
  write_u32_be(out, kImageMagic);
  write_u32_be(out, static_cast<std::uint32_t>(data.size()));
  write_u32_be(out, static_cast<std::uint32_t>(data.rows()));
  write_u32_be(out, static_cast<std::uint32_t>(data.cols()));
  for (const auto& m : data.samples) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const long v = std::lround(m(r, c));
        if (v < 0 || v > 255)
          throw std::invalid_argument("write_idx: pixel outside [0, 255]");
        out.put(static_cast<char>(static_cast<unsigned char>(v)));
      }
  }
  if (labels_path) {
    if (!data.labels) throw std::invalid_argument("write_idx: set has no labels");
    std::ofstream lout(*labels_path, std::ios::binary);
    if (!lout) throw std::runtime_error("idx: cannot create " + *labels_path);
    write_u32_be(lout, kLabelMagic);
    write_u32_be(lout, static_cast<std::uint32_t>(data.size()));
    for (int l : *data.labels) {
      if (l < 0 || l > 255) throw std::invalid_argument("write_idx: label outside [0, 255]");
      lout.put(static_cast<char>(static_cast<unsigned char>(l)));
    }
  }
}

Eigen::MatrixXd load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("pgm: cannot open " + path);
  char p, five;
  in.get(p);
  in.get(five);
  if (p != 'P' || five != '5') throw std::runtime_error("pgm: not a binary P5 file: " + path);
  const int w = pgm_token(in);
  const int h = pgm_token(in);
  const int maxval = pgm_token(in);
  if (w <= 0 || h <= 0) throw std::runtime_error("pgm: bad dimensions in " + path);
  if (maxval != 255) throw std::runtime_error("pgm: only 8-bit (maxval 255) supported: " + path);
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw std::runtime_error("pgm: truncated payload in " + path);
  Eigen::MatrixXd m(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) m(r, c) = static_cast<double>(buf[static_cast<std::size_t>(r) * w + c]);
  return m;
}

void write_pgm(const Eigen::MatrixXd& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pgm: cannot create " + path);
  out << "P5\n" << image.cols() << " " << image.rows() << "\n255\n";
  for (Eigen::Index r = 0; r < image.rows(); ++r)
    for (Eigen::Index c = 0; c < image.cols(); ++c) {
      const long v = std::lround(image(r, c));
      if (v < 0 || v > 255) throw std::invalid_argument("write_pgm: pixel outside [0, 255]");
      out.put(static_cast<char>(static_cast<unsigned char>(v)));
    }
}

Eigen::MatrixXd load_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error("csv: malformed value '" + cell + "' in " + path);
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("csv: ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("csv: empty matrix in " + path);
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

void write_csv_matrix(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot create " + path);
  char buf[64];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
      out << (c > 0 ? "," : "") << buf;
    }
    out << "\n";
  }
}

SampleSet load_image_dir(const std::string& path, ImageFormat format) {
  const fs::path root(path);
  if (!fs::is_directory(root)) throw std::runtime_error("load_image_dir: not a directory: " + path);
  const std::string ext = format == ImageFormat::Pgm ? ".pgm" : ".csv";

  std::vector<std::string> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());

  auto files_in = [&](const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ext)
        names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
  };
  auto load_one = [&](const fs::path& p) {
    return format == ImageFormat::Pgm ? load_pgm(p.string()) : load_csv_matrix(p.string());
  };

  SampleSet out;
  if (!class_dirs.empty()) {
    std::vector<int> labels;
    for (std::size_t c = 0; c < class_dirs.size(); ++c)
      for (const auto& name : files_in(root / class_dirs[c])) {
        out.samples.push_back(load_one(root / class_dirs[c] / name));
        labels.push_back(static_cast<int>(c));
      }
    out.labels = std::move(labels);
  } else {
    for (const auto& name : files_in(root)) out.samples.push_back(load_one(root / name));
  }
  if (out.samples.empty())
    throw std::runtime_error("load_image_dir: no " + ext + " files under " + path);
  out.validate();  // rejects mixed shapes
  return out;
}

SampleSet normalize_frobenius(const SampleSet& data) {
  data.validate();
  SampleSet out = data;
  for (auto& m : out.samples) {
    const double norm = m.norm();
    if (norm == 0.0) throw std::invalid_argument("normalize_frobenius: zero-norm sample");
    m /= norm;
  }
  return out;
}

ContaminatedSet inject_outliers(const SampleSet& data, const OutlierConfig& config) {
  data.validate();
  if (config.fraction < 0.0 || config.fraction > 1.0)
    throw std::invalid_argument("inject_outliers: fraction outside [0, 1]");
  if (config.magnitude <= 0.0) throw std::invalid_argument("inject_outliers: magnitude <= 0");
  if (config.dummy_count < 0) throw std::invalid_argument("inject_outliers: negative dummy count");
  if (config.intensity_lo > config.intensity_hi)
    throw std::invalid_argument("inject_outliers: empty intensity range");

  ContaminatedSet out{data, {}, config};
  SplitMix64 rng(config.seed);
  if (config.mode == OutlierConfig::Mode::Scaled) {
    const auto count =
        static_cast<std::size_t>(std::floor(config.fraction * static_cast<double>(data.size())));
    out.outlier_indices = sample_without_replacement(data.size(), count, rng);
    std::sort(out.outlier_indices.begin(), out.outlier_indices.end());
    for (std::size_t i : out.outlier_indices) out.samples.samples[i] *= config.magnitude;
  } else {
    for (int d = 0; d < config.dummy_count; ++d) {
      Eigen::MatrixXd m(data.rows(), data.cols());
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
          m(r, c) = rng.uniform(config.intensity_lo, config.intensity_hi);
      out.outlier_indices.push_back(out.samples.samples.size());
      out.samples.samples.push_back(std::move(m));
      if (out.samples.labels) out.samples.labels->push_back(-1);
    }
  }
  return out;
}

}  // namespace r2dsvd
