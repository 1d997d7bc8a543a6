#include "r2dsvd/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace r2dsvd {

namespace {

constexpr char kModelMagic[8] = {'R', '2', 'D', 'M', '0', '0', '0', '1'};
constexpr char kTensorModelMagic[8] = {'R', '2', 'D', 'T', '0', '0', '0', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("model: truncated file");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("model: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& out, double d) { write_u64(out, std::bit_cast<std::uint64_t>(d)); }
double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  write_tensor(out, DenseTensor::from_matrix(m));
}

Eigen::MatrixXd read_matrix(std::istream& in) { return read_tensor(in).to_matrix(); }

void write_trace(std::ostream& out, const std::vector<double>& trace) {
  write_u64(out, trace.size());
  for (double v : trace) write_f64(out, v);
}

std::vector<double> read_trace(std::istream& in) {
  std::vector<double> trace(read_u64(in));
  for (double& v : trace) v = read_f64(in);
  return trace;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("model: cannot create " + path);
  return out;
}

std::ifstream open_in(const std::string& path, const char (&magic)[8]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("model: cannot open " + path);
  char got[8];
  if (!in.read(got, 8) || std::memcmp(got, magic, 8) != 0)
    throw std::runtime_error("model: bad magic in " + path);
  return in;
}

}  // namespace

void write_tensor(std::ostream& out, const DenseTensor& t) {
  write_u32(out, static_cast<std::uint32_t>(t.order()));
  for (Eigen::Index d : t.shape()) write_u32(out, static_cast<std::uint32_t>(d));
  for (double v : t.values()) write_f64(out, v);
}

DenseTensor read_tensor(std::istream& in) {
  const std::uint32_t order = read_u32(in);
  std::vector<Eigen::Index> shape(order);
  for (auto& d : shape) d = static_cast<Eigen::Index>(read_u32(in));
  DenseTensor t(shape);
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = read_f64(in);
  return t;
}

void save_model(const Decomposition2D& model, const std::string& path) {
  auto out = open_out(path);
  out.write(kModelMagic, 8);
  write_u32(out, static_cast<std::uint32_t>(model.mean.rows()));
  write_u32(out, static_cast<std::uint32_t>(model.mean.cols()));
  write_u32(out, static_cast<std::uint32_t>(model.L.cols()));
  write_u32(out, static_cast<std::uint32_t>(model.R.cols()));
  write_matrix(out, model.mean);
  write_matrix(out, model.L);
  write_matrix(out, model.R);
  write_trace(out, model.objective_trace);
  if (!out) throw std::runtime_error("model: write failed for " + path);
}

Decomposition2D load_model(const std::string& path) {
  auto in = open_in(path, kModelMagic);
  const std::uint32_t m = read_u32(in);
  const std::uint32_t n = read_u32(in);
  const std::uint32_t k1 = read_u32(in);
  const std::uint32_t k2 = read_u32(in);
  Decomposition2D model;
  model.mean = read_matrix(in);
  model.L = read_matrix(in);
  model.R = read_matrix(in);
  model.objective_trace = read_trace(in);
  if (model.mean.rows() != m || model.mean.cols() != n || model.L.rows() != m ||
      model.L.cols() != k1 || model.R.rows() != n || model.R.cols() != k2)
    throw std::runtime_error("model: inconsistent header in " + path);
  return model;
}

void save_tensor_model(const TensorModel& model, const std::string& path) {
  auto out = open_out(path);
  out.write(kTensorModelMagic, 8);
  write_u32(out, static_cast<std::uint32_t>(model.factors.size()));
  write_tensor(out, model.mean);
  for (const auto& f : model.factors) write_matrix(out, f);
  write_trace(out, model.objective_trace);
  if (!out) throw std::runtime_error("model: write failed for " + path);
}

TensorModel load_tensor_model(const std::string& path) {
  auto in = open_in(path, kTensorModelMagic);
  const std::uint32_t modes = read_u32(in);
  TensorModel model;
  model.mean = read_tensor(in);
  model.factors.resize(modes);
  for (auto& f : model.factors) f = read_matrix(in);
  model.objective_trace = read_trace(in);
  if (model.mean.order() != static_cast<int>(modes))
    throw std::runtime_error("model: inconsistent header in " + path);
  return model;
}

}  // namespace r2dsvd
