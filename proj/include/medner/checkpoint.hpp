#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>

#include "medner/optim.hpp"

namespace medner {

// Flat binary parameter container: magic, version, then per parameter a
// length-prefixed name, rank, extents and float32 data (little-endian host
// order). A JSON manifest rides alongside at <path>.json.
inline constexpr char kCheckpointMagic[4] = {'M', 'N', 'C', 'K'};

template <class T>
void save_params(const ParamStore<T>& params, const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigInvalid("cannot open checkpoint for writing: " + path);
  os.write(kCheckpointMagic, 4);
  std::uint32_t version = 1, count = static_cast<std::uint32_t>(params.slots.size());
  os.write(reinterpret_cast<const char*>(&version), 4);
  os.write(reinterpret_cast<const char*>(&count), 4);
  for (const auto& [name, slot] : params.slots) {
    std::uint16_t nlen = static_cast<std::uint16_t>(name.size());
    os.write(reinterpret_cast<const char*>(&nlen), 2);
    os.write(name.data(), nlen);
    std::uint8_t rank = static_cast<std::uint8_t>(slot.value.rank());
    os.write(reinterpret_cast<const char*>(&rank), 1);
    for (int d = 0; d < slot.value.rank(); ++d) {
      std::uint32_t extent = static_cast<std::uint32_t>(slot.value.dim(d));
      os.write(reinterpret_cast<const char*>(&extent), 4);
    }
    for (std::int64_t i = 0; i < slot.value.size(); ++i) {
      float v = static_cast<float>(slot.value[i]);
      os.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
  if (!os) throw ConfigInvalid("checkpoint write failed: " + path);
}

template <class T>
ParamStore<T> load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigInvalid("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw MalformedHeader("bad checkpoint magic in " + path);
  std::uint32_t version = 0, count = 0;
  is.read(reinterpret_cast<char*>(&version), 4);
  is.read(reinterpret_cast<char*>(&count), 4);
  if (!is || version != 1) throw MalformedHeader("unsupported checkpoint version in " + path);
  ParamStore<T> params;
  for (std::uint32_t k = 0; k < count; ++k) {
    std::uint16_t nlen = 0;
    is.read(reinterpret_cast<char*>(&nlen), 2);
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    std::uint8_t rank = 0;
    is.read(reinterpret_cast<char*>(&rank), 1);
    Shape shape(rank);
    for (int d = 0; d < rank; ++d) {
      std::uint32_t extent = 0;
      is.read(reinterpret_cast<char*>(&extent), 4);
      shape[static_cast<std::size_t>(d)] = extent;
    }
    if (!is) throw MalformedHeader("truncated checkpoint: " + path);
    Tensor<T> t(shape);
    for (std::int64_t i = 0; i < t.size(); ++i) {
      float v = 0;
      is.read(reinterpret_cast<char*>(&v), 4);
      t[i] = static_cast<T>(v);
    }
    if (!is) throw MalformedHeader("truncated checkpoint data: " + path);
    params.add(name, std::move(t));
  }
  return params;
}

template <class T>
void save_checkpoint(const ParamStore<T>& params, const std::string& path,
                     std::uint64_t seed, long step, const nlohmann::json& extra = {}) {
  save_params(params, path);
  nlohmann::json manifest;
  manifest["precision"] = sizeof(T) == 4 ? 32 : 64;
  manifest["seed"] = seed;
  manifest["step"] = step;
  nlohmann::json plist = nlohmann::json::array();
  for (const auto& [name, slot] : params.slots) {
    nlohmann::json p;
    p["name"] = name;
    p["shape"] = slot.value.shape();
    plist.push_back(p);
  }
  manifest["params"] = plist;
  if (!extra.is_null() && !extra.empty()) manifest["model"] = extra;
  std::ofstream os(path + ".json");
  if (!os) throw ConfigInvalid("cannot write manifest: " + path + ".json");
  os << manifest.dump(2) << "\n";
}

inline nlohmann::json load_manifest(const std::string& path) {
  std::ifstream is(path + ".json");
  if (!is) throw ConfigInvalid("missing checkpoint manifest: " + path + ".json");
  nlohmann::json j;
  is >> j;
  return j;
}

}  // namespace medner
