#pragma once

#include <iosfwd>
#include <string>
#include <variant>

#include "symconv/tensor.hpp"

namespace symconv {

// Tensor container format, little-endian throughout:
//   magic "SYMT" | u32 rank | u32 dims[rank] | u8 precision | raw buffer
// precision tag: 0 = 32-bit float, 1 = 64-bit float.

void write_tensor(std::ostream& os, const Tensor& t);
void write_tensor(std::ostream& os, const Tensor64& t);

using AnyTensor = std::variant<Tensor, Tensor64>;

AnyTensor read_tensor(std::istream& is);

// Convenience: read expecting a specific precision; precision mismatch or a
// malformed header is a FormatError.
Tensor read_tensor_f32(std::istream& is);
Tensor64 read_tensor_f64(std::istream& is);

void save_tensor(const std::string& path, const Tensor& t);
void save_tensor(const std::string& path, const Tensor64& t);
AnyTensor load_tensor(const std::string& path);

}  // namespace symconv
