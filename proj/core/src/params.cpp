#include "dnt/learncore/params.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "dnt/error.hpp"
#include "nlohmann/json.hpp"

namespace dnt::learn {

namespace {

void put_f32_le(std::ofstream& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  const char bytes[4] = {
      static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
      static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
  out.write(bytes, 4);
}

float get_f32_le(std::ifstream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                             (static_cast<std::uint32_t>(bytes[1]) << 8) |
                             (static_cast<std::uint32_t>(bytes[2]) << 16) |
                             (static_cast<std::uint32_t>(bytes[3]) << 24);
  return std::bit_cast<float>(bits);
}

}  // namespace

void save_params(const std::string& path_base, const ParamVector& params, int window) {
  std::ofstream bin(path_base + ".bin", std::ios::binary);
  if (!bin) throw Error("save_params: cannot write " + path_base + ".bin");
  for (float v : params.values) put_f32_le(bin, v);
  bin.close();

  nlohmann::json side;
  side["schema_version"] = 1;
  side["dims"] = params.manifest;
  side["count"] = params.values.size();
  side["window"] = window;
  std::ofstream js(path_base + ".json", std::ios::binary);
  if (!js) throw Error("save_params: cannot write " + path_base + ".json");
  js << side.dump(2) << "\n";
}

ParamVector load_params(const std::string& path_base) {
  std::ifstream js(path_base + ".json", std::ios::binary);
  if (!js) throw Error("load_params: cannot read " + path_base + ".json");
  nlohmann::json side = nlohmann::json::parse(js);
  if (side.value("schema_version", 0) != 1)
    throw Error("load_params: unsupported schema_version in " + path_base + ".json");
  ParamVector pv;
  pv.manifest = side.at("dims").get<std::vector<int>>();
  const std::size_t count = side.at("count").get<std::size_t>();

  std::ifstream bin(path_base + ".bin", std::ios::binary);
  if (!bin) throw Error("load_params: cannot read " + path_base + ".bin");
  pv.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    pv.values[i] = get_f32_le(bin);
    if (!bin) throw Error("load_params: truncated blob " + path_base + ".bin");
  }
  return pv;
}

bool all_finite(const ParamVector& params) {
  for (float v : params.values)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace dnt::learn
