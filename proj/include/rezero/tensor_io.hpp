#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rezero/tensor.hpp"

namespace rezero {

// Text dump: a `shape: d1 ... dk` header line followed by the row-major
// values at 17 significant digits, which round-trips doubles exactly.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

std::string format_double(double v);

// Checkpoints hold one `[param <name>]` section per parameter, each followed
// by a tensor dump.
void write_checkpoint(const std::string& path, const std::vector<Parameter*>& params);
/// Loads values into `params` by name; every parameter must be present.
void read_checkpoint(const std::string& path, const std::vector<Parameter*>& params);

}  // namespace rezero
