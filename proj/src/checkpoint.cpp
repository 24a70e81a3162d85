#include "p23d/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "p23d/error.hpp"

namespace p23d {

namespace {

constexpr char kMagic[4] = {'P', '2', '3', 'D'};

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw DataError("truncated checkpoint: " + path);
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
         (uint32_t(b[3]) << 24);
}

void write_f32(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

float read_f32(std::istream& is, const std::string& path) {
  const uint32_t bits = read_u32(is, path);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const NamedTensors& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os.write(kMagic, 4);
  write_u32(os, kCheckpointVersion);
  write_u32(os, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(t.shape().size()));
    for (int d : t.shape()) write_u32(os, static_cast<uint32_t>(d));
    for (double v : t.data()) write_f32(os, static_cast<float>(v));
  }
  if (!os) throw DataError("write failed: " + path);
}

NamedTensors load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("bad checkpoint magic: " + path);
  }
  const uint32_t version = read_u32(is, path);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version in " + path);
  }
  const uint32_t count = read_u32(is, path);
  NamedTensors out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_u32(is, path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw DataError("truncated checkpoint: " + path);
    const uint32_t rank = read_u32(is, path);
    num::Shape shape(rank);
    for (auto& d : shape) d = static_cast<int>(read_u32(is, path));
    std::vector<double> data(static_cast<size_t>(num::numel(shape)));
    for (auto& v : data) v = static_cast<double>(read_f32(is, path));
    out.emplace_back(name,
                     num::Tensor::from_data(std::move(shape), std::move(data)));
  }
  return out;
}

const num::Tensor& find_tensor(const NamedTensors& tensors,
                               const std::string& name) {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw DataError("checkpoint entry not found: " + name);
}

bool has_tensor(const NamedTensors& tensors, const std::string& name) {
  for (const auto& [n, t] : tensors) {
    if (n == name) return true;
  }
  return false;
}

}  // namespace p23d
