#include "checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <set>

namespace ls::num {

namespace {

constexpr char kMagic[4] = {'L', 'S', 'C', 'P'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

void write_f32le(std::ostream& out, const std::vector<real>& data) {
  std::vector<unsigned char> buf(data.size() * 4);
  for (size_t i = 0; i < data.size(); i++) {
    const float f = float(data[i]);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    buf[i * 4] = static_cast<unsigned char>(bits);
    buf[i * 4 + 1] = static_cast<unsigned char>(bits >> 8);
    buf[i * 4 + 2] = static_cast<unsigned char>(bits >> 16);
    buf[i * 4 + 3] = static_cast<unsigned char>(bits >> 24);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
}

void read_f32le(std::istream& in, std::vector<real>& data) {
  std::vector<unsigned char> buf(data.size() * 4);
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
  for (size_t i = 0; i < data.size(); i++) {
    const uint32_t bits = uint32_t(buf[i * 4]) | uint32_t(buf[i * 4 + 1]) << 8 |
                          uint32_t(buf[i * 4 + 2]) << 16 | uint32_t(buf[i * 4 + 3]) << 24;
    float f;
    std::memcpy(&f, &bits, 4);
    data[i] = real(f);
  }
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const ParamStore*>>& stores) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  uint32_t count = 0;
  for (const auto& [prefix, ps] : stores) count += uint32_t(ps->size());
  write_u32(out, count);
  for (const auto& [prefix, ps] : stores) {
    for (size_t i = 0; i < ps->size(); i++) {
      const auto& [name, tensor] = ps->item(i);
      const std::string full = prefix + "/" + name;
      write_u32(out, uint32_t(full.size()));
      out.write(full.data(), std::streamsize(full.size()));
      write_u32(out, uint32_t(tensor.shape.size()));
      for (int d : tensor.shape) write_u32(out, uint32_t(d));
      write_f32le(out, tensor.data);
    }
  }
  if (!out) throw Error("failed writing checkpoint: " + path);
}

void load_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, ParamStore*>>& stores) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("not a checkpoint file: " + path);
  const uint32_t version = read_u32(in);
  if (version != kVersion)
    throw Error("unsupported checkpoint version " + std::to_string(version));
  const uint32_t count = read_u32(in);

  std::set<std::string> expected;
  for (const auto& [prefix, ps] : stores)
    for (size_t i = 0; i < ps->size(); i++) expected.insert(prefix + "/" + ps->item(i).first);

  for (uint32_t i = 0; i < count; i++) {
    const uint32_t name_len = read_u32(in);
    std::string full(name_len, '\0');
    in.read(full.data(), name_len);
    const uint32_t rank = read_u32(in);
    std::vector<int> shape(rank);
    for (uint32_t d = 0; d < rank; d++) shape[d] = int(read_u32(in));
    if (!in) throw Error("truncated checkpoint: " + path);

    const size_t slash = full.find('/');
    check(slash != std::string::npos, "malformed checkpoint entry " + full);
    const std::string prefix = full.substr(0, slash);
    const std::string name = full.substr(slash + 1);

    ParamStore* target = nullptr;
    for (const auto& [p, ps] : stores)
      if (p == prefix) target = ps;
    if (target == nullptr || !target->has(name))
      throw Error("checkpoint parameter " + full + " does not match this configuration");
    Tensor& tensor = target->get(name);
    if (tensor.shape != shape)
      throw Error("checkpoint shape mismatch for " + full + ": file " +
                  Tensor(shape).shape_str() + " vs model " + tensor.shape_str());
    read_f32le(in, tensor.data);
    if (!in) throw Error("truncated checkpoint payload: " + path);
    expected.erase(full);
  }
  if (!expected.empty())
    throw Error("checkpoint is missing parameter " + *expected.begin());
}

}  // namespace ls::num
