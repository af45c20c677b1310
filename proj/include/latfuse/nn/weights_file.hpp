#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "latfuse/core/error.hpp"
#include "latfuse/core/fs.hpp"
#include "latfuse/nn/params.hpp"

namespace latfuse::nn {

// Named-tensor file. Layout (little-endian):
//   char[8]  magic "LFWT0001"
//   uint32   tensor count
//   per tensor: uint32 name length, name bytes, uint32 rank, uint32 dims[rank],
//               float32 values (row-major)
inline constexpr std::array<char, 8> kWeightsMagic = {'L', 'F', 'W', 'T', '0', '0', '0', '1'};

struct NamedTensor {
  std::vector<int> shape;
  std::vector<float> values;
};

using TensorMap = std::map<std::string, NamedTensor>;

inline void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw IoError("weights file truncated");
  return v;
}

inline void write_tensors(std::ostream& os, const TensorMap& tensors) {
  os.write(kWeightsMagic.data(), kWeightsMagic.size());
  write_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) write_u32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * 4));
  }
}

inline TensorMap read_tensors(std::istream& is) {
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kWeightsMagic) throw IoError("not a weights file (bad magic)");
  TensorMap out;
  const std::uint32_t count = read_u32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = read_u32(is);
    if (len > 4096) throw IoError("weights file: implausible tensor name length");
    std::string name(len, '\0');
    is.read(name.data(), len);
    const std::uint32_t rank = read_u32(is);
    if (rank > 8) throw IoError("weights file: implausible rank for " + name);
    NamedTensor t;
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(static_cast<int>(read_u32(is)));
      n *= static_cast<std::size_t>(t.shape.back());
    }
    t.values.resize(n);
    is.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(n * 4));
    if (!is) throw IoError("weights file truncated in " + name);
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

inline void save_tensors(const std::filesystem::path& path, const TensorMap& tensors) {
  AtomicFile out(path);
  {
    std::ofstream f(out.temp_path(), std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    write_tensors(f, tensors);
    if (!f) throw IoError("short write to " + path.string());
  }
  out.commit();
}

inline TensorMap load_tensors(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open weights file " + path.string());
  return read_tensors(f);
}

/// Copies every store entry from `tensors` by name (optionally prefixed); shapes must match.
template <class T>
void assign_from(ParamStore<T>& store, const TensorMap& tensors, const std::string& prefix = "") {
  for (std::size_t h = 0; h < store.entries().size(); ++h) {
    const auto& e = store.entries()[h];
    const auto it = tensors.find(prefix + e.name);
    if (it == tensors.end()) throw IoError("weights file lacks tensor '" + prefix + e.name + "'");
    if (it->second.values.size() != e.size) throw ShapeError("weights file: size mismatch for '" + e.name + "'");
    auto dst = store.value(h);
    std::copy(it->second.values.begin(), it->second.values.end(), dst.begin());
  }
}

template <class T>
TensorMap export_store(const ParamStore<T>& store, std::span<const T> values, const std::string& prefix = "") {
  TensorMap out;
  for (const auto& e : store.entries()) {
    NamedTensor t;
    t.shape = e.shape;
    t.values.assign(values.begin() + e.offset, values.begin() + e.offset + e.size);
    out.emplace(prefix + e.name, std::move(t));
  }
  return out;
}

}  // namespace latfuse::nn
