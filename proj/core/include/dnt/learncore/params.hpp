#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dnt::learn {

/// Flat 32-bit parameter vector plus a shape manifest. This is the unit of
/// federated exchange and the on-disk model format (little-endian f32 blob
/// with a JSON sidecar).
struct ParamVector {
  std::vector<float> values;
  std::vector<int> manifest;

  bool same_shape(const ParamVector& other) const {
    return manifest == other.manifest && values.size() == other.values.size();
  }
  bool operator==(const ParamVector&) const = default;
};

/// Writes `path` + ".bin" (raw little-endian f32) and `path` + ".json"
/// ({schema_version, dims, window}).
void save_params(const std::string& path_base, const ParamVector& params,
                 int window = 0);
ParamVector load_params(const std::string& path_base);

bool all_finite(const ParamVector& params);

}  // namespace dnt::learn
