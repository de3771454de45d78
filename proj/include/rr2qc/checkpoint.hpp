#ifndef RR2QC_CHECKPOINT_HPP
#define RR2QC_CHECKPOINT_HPP

#include <string>
#include <utility>
#include <vector>

#include "rr2qc/types.hpp"

namespace rr2qc {

// Named-tensor archive: little-endian binary, names stable across
// save/load, doubles column-major. One file per archive.
using NamedTensors = std::vector<std::pair<std::string, Mat>>;

void save_tensors(const std::string& path, const NamedTensors& tensors);
NamedTensors load_tensors(const std::string& path);

}  // namespace rr2qc

#endif  // RR2QC_CHECKPOINT_HPP
