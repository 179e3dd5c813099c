#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stylekit/tensor.hpp"

namespace stylekit {

// Named-tensor view over a module's parameters. Entries are kept sorted by
// name so serialization and hashing are order-stable.
using ParamList = std::vector<std::pair<std::string, Tensor*>>;

void sort_params(ParamList& params);

// Versioned little-endian binary archive of named float64 tensors.
void save_checkpoint(const std::string& path, const ParamList& params);

// Loads an archive into a name -> tensor map.
std::map<std::string, Tensor> load_checkpoint(const std::string& path);

// Copies archive contents into live parameters; every archive entry must
// match an existing name and shape, and every parameter must be covered.
void restore_params(const std::string& path, const ParamList& params);

// FNV-1a over names and raw tensor bytes; used for freezing audits and
// provenance metadata.
std::uint64_t params_hash(const ParamList& params);

std::string hash_hex(std::uint64_t h);

}  // namespace stylekit
