#pragma once

#include <iosfwd>
#include <string>

#include "r2dsvd/decomp2d.hpp"
#include "r2dsvd/tensor.hpp"
#include "r2dsvd/tensor_ext.hpp"

namespace r2dsvd {

/// Tensor container: u32 order, u32 extents, row-major IEEE-754 doubles,
/// all little-endian. Shared by the model files below.
void write_tensor(std::ostream& out, const DenseTensor& t);
DenseTensor read_tensor(std::istream& in);

/// Two-sided model container: magic "R2DM0001", u32 m, n, k1, k2, tensor
/// records for mean, L, R, then u64 count + objective trace doubles.
/// Round-trips every double bit-exactly.
void save_model(const Decomposition2D& model, const std::string& path);
Decomposition2D load_model(const std::string& path);

/// Higher-order variant: magic "R2DT0001", u32 mode count, mean record,
/// factor records, trace.
void save_tensor_model(const TensorModel& model, const std::string& path);
TensorModel load_tensor_model(const std::string& path);

}  // namespace r2dsvd
