#pragma once

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "ecovnet/model.hpp"
#include "ecovnet/tensor.hpp"

// Parameter container: "ECOV" magic, version, element width, then named
// tensors (length-prefixed name, rank, u32 dims, raw little-endian values),
// closed by a CRC32 of every preceding byte.

namespace ecov {

namespace snapshot_detail {

constexpr uint16_t kVersion = 1;

inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

struct Reader {
  const std::vector<uint8_t>& bytes;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > bytes.size()) throw DataError("truncated snapshot file");
  }
  uint8_t u8() {
    need(1);
    return bytes[pos++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[pos + static_cast<size_t>(i)]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes[pos + static_cast<size_t>(i)]) << (8 * i);
    pos += 8;
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
};

} // namespace snapshot_detail

template <typename T>
void save_snapshot(const std::vector<std::pair<std::string, Tensor<T>>>& tensors,
                   const std::string& path) {
  namespace sd = snapshot_detail;
  std::vector<uint8_t> out;
  out.insert(out.end(), {'E', 'C', 'O', 'V'});
  sd::put_u16(out, sd::kVersion);
  out.push_back(static_cast<uint8_t>(sizeof(T)));
  sd::put_u32(out, static_cast<uint32_t>(tensors.size()));

  for (const auto& [name, tensor] : tensors) {
    if (name.size() > 0xffff) throw ArgumentError("save_snapshot: tensor name too long");
    sd::put_u16(out, static_cast<uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<uint8_t>(tensor.rank()));
    for (int64_t d = 0; d < tensor.rank(); ++d)
      sd::put_u32(out, static_cast<uint32_t>(tensor.dim(d)));
    for (int64_t i = 0; i < tensor.numel(); ++i) {
      if constexpr (sizeof(T) == 4) {
        sd::put_u32(out, std::bit_cast<uint32_t>(static_cast<float>(tensor[i])));
      } else {
        sd::put_u64(out, std::bit_cast<uint64_t>(static_cast<double>(tensor[i])));
      }
    }
  }

  sd::put_u32(out, static_cast<uint32_t>(crc32(0, out.data(), static_cast<uInt>(out.size()))));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("cannot open '" + path + "' for writing");
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw DataError("short write to '" + path + "'");
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> load_snapshot(const std::string& path) {
  namespace sd = snapshot_detail;
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open snapshot '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());

  if (bytes.size() < 4 + 2 + 1 + 4 + 4) throw DataError("truncated snapshot file");
  const uint32_t stored_crc = static_cast<uint32_t>(bytes[bytes.size() - 4]) |
                              (static_cast<uint32_t>(bytes[bytes.size() - 3]) << 8) |
                              (static_cast<uint32_t>(bytes[bytes.size() - 2]) << 16) |
                              (static_cast<uint32_t>(bytes[bytes.size() - 1]) << 24);
  const uint32_t actual_crc =
      static_cast<uint32_t>(crc32(0, bytes.data(), static_cast<uInt>(bytes.size() - 4)));
  if (stored_crc != actual_crc)
    throw DataError("snapshot '" + path + "' failed its checksum (corrupt or truncated)");

  sd::Reader r{bytes};
  if (r.str(4) != "ECOV") throw DataError("'" + path + "' is not a snapshot file (bad magic)");
  const uint16_t version = r.u16();
  if (version != sd::kVersion)
    throw DataError("snapshot '" + path + "' has unsupported version " + std::to_string(version));
  const uint8_t width = r.u8();
  if (width != sizeof(T))
    throw DataError("snapshot '" + path + "' stores " + std::to_string(width) +
                    "-byte elements but this build uses " + std::to_string(sizeof(T)) + "-byte");
  const uint32_t count = r.u32();

  std::vector<std::pair<std::string, Tensor<T>>> tensors;
  tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = r.u16();
    std::string name = r.str(name_len);
    const uint8_t rank = r.u8();
    if (rank == 0) throw DataError("snapshot tensor '" + name + "' has rank 0");
    std::vector<int64_t> shape;
    int64_t numel = 1;
    for (uint8_t d = 0; d < rank; ++d) {
      const uint32_t extent = r.u32();
      if (extent == 0) throw DataError("snapshot tensor '" + name + "' has a zero extent");
      shape.push_back(static_cast<int64_t>(extent));
      numel *= static_cast<int64_t>(extent);
    }
    Tensor<T> t(shape);
    for (int64_t j = 0; j < numel; ++j) {
      if constexpr (sizeof(T) == 4) {
        t[j] = static_cast<T>(std::bit_cast<float>(r.u32()));
      } else {
        t[j] = static_cast<T>(std::bit_cast<double>(r.u64()));
      }
    }
    tensors.emplace_back(std::move(name), std::move(t));
  }
  if (r.pos != bytes.size() - 4)
    throw DataError("snapshot '" + path + "' has trailing bytes after its tensors");
  return tensors;
}

template <typename T>
void load_snapshot_into(Model<T>& model, const std::string& path) {
  auto stored = load_snapshot<T>(path);
  auto views = model.params();
  if (stored.size() != views.size())
    throw DataError("snapshot '" + path + "' holds " + std::to_string(stored.size()) +
                    " tensors but the model expects " + std::to_string(views.size()));
  for (size_t i = 0; i < views.size(); ++i) {
    auto& [name, tensor] = stored[i];
    if (name != views[i].name)
      throw DataError("snapshot tensor '" + name + "' does not match model tensor '" +
                      views[i].name + "'");
    if (!views[i].tensor->same_shape(tensor))
      throw DataError("snapshot tensor '" + name + "' has shape " + shape_string(tensor.shape()) +
                      " but the model expects " + shape_string(views[i].tensor->shape()));
    *views[i].tensor = std::move(tensor);
  }
}

} // namespace ecov
