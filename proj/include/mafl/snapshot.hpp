#pragma once

#include <string>

#include "mafl/grid.hpp"

namespace mafl {

// Binary field snapshot. Layout, all little-endian:
//   "MAFL" magic, u32 version, u32 n, u32 res, u32 rank,
//   rank u8 signature codes, 2n f64 periods,
//   then f64 (re,im) pairs in row-major point order with tensor
//   components fastest-varying. Scalar fields have rank 0.
// Round trips are bit exact.
void save_snapshot(const std::string& path, const TensorField& t);
void save_snapshot(const std::string& path, const ScalarField& f);

TensorField load_snapshot(const std::string& path);
ScalarField load_scalar_snapshot(const std::string& path);

}  // namespace mafl
