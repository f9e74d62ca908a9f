#pragma once

#include <iosfwd>
#include <string>

#include "tlr/tensor.hpp"

namespace tlr {

/// Self-describing binary layout: magic "TLRT", version u32, D u32,
/// dims u32 x D, then little-endian 64-bit floats in row-major order.
void save_dense_tensor(const DenseTensor& tensor, std::ostream& out);
void save_dense_tensor(const DenseTensor& tensor, const std::string& path);

DenseTensor load_dense_tensor(std::istream& in);
DenseTensor load_dense_tensor(const std::string& path);

/// JSON fixture import/export: {"dims": [...], "data": [...]} with the flat
/// array in row-major order. Meant for small hand-written fixtures.
DenseTensor dense_tensor_from_json(const std::string& text);
std::string dense_tensor_to_json(const DenseTensor& tensor);

/// Loads either format, picking by content (binary magic first, JSON otherwise).
DenseTensor load_dense_tensor_any(const std::string& path);

}  // namespace tlr
