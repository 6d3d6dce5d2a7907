#pragma once

#include <string>
#include <vector>

#include "gmlab/optim.hpp"
#include "gmlab/tensor.hpp"

namespace gmlab {

/// One named array inside the container format.
struct Blob {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

/// Container layout: magic "GMLAB001" + newline, one manifest line per
/// blob ("name dims byte-offset", dims 'x'-separated), an "end" line,
/// then the little-endian float64 payload in manifest order.  Writing is
/// canonical, so save -> load -> save is byte-identical.
void write_container(const std::string& path, const std::vector<Blob>& blobs);
std::vector<Blob> read_container(const std::string& path);

/// Model persistence on top of the container.
void save_checkpoint(const std::string& path, const NamedParams& params);
/// Fills the named tensors in place; names and shapes must match exactly.
void load_checkpoint(const std::string& path, NamedParams& params);

}  // namespace gmlab
