#include "ecovnet/image_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "ecovnet/errors.hpp"

namespace ecov {

namespace {

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image file '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to '" + path + "'");
}

// Reads one whitespace-delimited token, skipping '#' comment lines.
std::string next_pgm_token(const std::vector<uint8_t>& bytes, size_t& pos, const std::string& path) {
  while (pos < bytes.size()) {
    const char c = static_cast<char>(bytes[pos]);
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++pos;
    } else {
      break;
    }
  }
  std::string token;
  while (pos < bytes.size()) {
    const char c = static_cast<char>(bytes[pos]);
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '#') break;
    token += c;
    ++pos;
  }
  if (token.empty()) throw DataError("truncated header in '" + path + "'");
  return token;
}

int64_t parse_extent(const std::string& token, const std::string& path) {
  try {
    const long long v = std::stoll(token);
    if (v < 1) throw DataError("nonpositive extent in '" + path + "'");
    return v;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception&) {
    throw DataError("malformed number '" + token + "' in '" + path + "'");
  }
}

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32_be(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

const uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void append_png_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& body) {
  put_u32_be(out, static_cast<uint32_t>(body.size()));
  const size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), body.begin(), body.end());
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0, out.data() + type_at, static_cast<uInt>(4 + body.size())));
  put_u32_be(out, crc);
}

std::vector<uint8_t> zlib_deflate(const std::vector<uint8_t>& raw) {
  uLongf cap = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> out(cap);
  if (compress2(out.data(), &cap, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw DataError("deflate failed");
  out.resize(cap);
  return out;
}

std::vector<uint8_t> zlib_inflate(const std::vector<uint8_t>& comp, size_t expected,
                                  const std::string& path) {
  std::vector<uint8_t> out(expected);
  uLongf got = static_cast<uLongf>(expected);
  const int rc = uncompress(out.data(), &got, comp.data(), static_cast<uLong>(comp.size()));
  if (rc != Z_OK || got != expected)
    throw DataError("corrupt compressed image data in '" + path + "'");
  return out;
}

void write_png(const std::string& path, int64_t h, int64_t w, int channels,
               const std::vector<uint8_t>& pixels) {
  if (h < 1 || w < 1) throw ArgumentError("png write: extents must be positive");
  if (pixels.size() != static_cast<size_t>(h * w * channels))
    throw DimensionError("png write: pixel buffer does not match extents");

  std::vector<uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<uint32_t>(w));
  put_u32_be(ihdr, static_cast<uint32_t>(h));
  ihdr.push_back(8);                                    // bit depth
  ihdr.push_back(channels == 1 ? 0 : 2);                // gray or truecolor
  ihdr.push_back(0);                                    // compression
  ihdr.push_back(0);                                    // filter method
  ihdr.push_back(0);                                    // no interlace

  const size_t stride = static_cast<size_t>(w) * static_cast<size_t>(channels);
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(h) * (stride + 1));
  for (int64_t r = 0; r < h; ++r) {
    raw.push_back(0); // filter type none
    const uint8_t* row = pixels.data() + static_cast<size_t>(r) * stride;
    raw.insert(raw.end(), row, row + stride);
  }

  std::vector<uint8_t> out(kPngSig, kPngSig + 8);
  append_png_chunk(out, "IHDR", ihdr);
  append_png_chunk(out, "IDAT", zlib_deflate(raw));
  append_png_chunk(out, "IEND", {});
  write_file(path, out);
}

uint8_t paeth(uint8_t a, uint8_t b, uint8_t c) {
  const int p = static_cast<int>(a) + static_cast<int>(b) - static_cast<int>(c);
  const int pa = std::abs(p - static_cast<int>(a));
  const int pb = std::abs(p - static_cast<int>(b));
  const int pc = std::abs(p - static_cast<int>(c));
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

} // namespace

ImageU8 read_pgm(const std::string& path) {
  const auto bytes = read_file(path);
  size_t pos = 0;
  const std::string magic = next_pgm_token(bytes, pos, path);
  if (magic != "P5")
    throw DataError("'" + path + "' is not a binary PGM (magic '" + magic + "', expected P5)");
  const int64_t w = parse_extent(next_pgm_token(bytes, pos, path), path);
  const int64_t h = parse_extent(next_pgm_token(bytes, pos, path), path);
  const int64_t maxval = parse_extent(next_pgm_token(bytes, pos, path), path);
  if (maxval != 255)
    throw DataError("'" + path + "' has max value " + std::to_string(maxval) + ", only 8-bit supported");
  ++pos; // single whitespace byte after the header
  const size_t need = static_cast<size_t>(h) * static_cast<size_t>(w);
  if (bytes.size() < pos + need) throw DataError("'" + path + "' is truncated");

  ImageU8 img;
  img.h = h;
  img.w = w;
  img.pixels.assign(bytes.begin() + static_cast<int64_t>(pos),
                    bytes.begin() + static_cast<int64_t>(pos + need));
  return img;
}

void write_pgm(const std::string& path, const ImageU8& img) {
  if (img.pixels.size() != static_cast<size_t>(img.h * img.w))
    throw DimensionError("pgm write: pixel buffer does not match extents");
  std::string header = "P5\n" + std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n";
  std::vector<uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), img.pixels.begin(), img.pixels.end());
  write_file(path, bytes);
}

ImageU8 read_png_gray(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSig, 8) != 0)
    throw DataError("'" + path + "' is not a PNG file");

  int64_t w = 0, h = 0;
  int bit_depth = 0, color_type = 0, interlace = 0;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  bool saw_ihdr = false, saw_iend = false;
  while (pos + 8 <= bytes.size()) {
    const uint32_t len = get_u32_be(bytes.data() + pos);
    if (pos + 12 + len > bytes.size()) throw DataError("'" + path + "' has a truncated chunk");
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const uint8_t* body = bytes.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw DataError("'" + path + "' has a malformed header chunk");
      w = get_u32_be(body);
      h = get_u32_be(body + 4);
      bit_depth = body[8];
      color_type = body[9];
      interlace = body[12];
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), body, body + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
      break;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || !saw_iend) throw DataError("'" + path + "' is missing required PNG chunks");
  if (color_type != 0 || bit_depth != 8)
    throw DataError("'" + path + "' must be 8-bit grayscale PNG (color type " +
                    std::to_string(color_type) + ", depth " + std::to_string(bit_depth) + ")");
  if (interlace != 0) throw DataError("'" + path + "' uses interlacing, not supported");
  if (w < 1 || h < 1) throw DataError("'" + path + "' has empty dimensions");

  const size_t stride = static_cast<size_t>(w);
  const auto raw = zlib_inflate(idat, static_cast<size_t>(h) * (stride + 1), path);

  ImageU8 img;
  img.h = h;
  img.w = w;
  img.pixels.resize(static_cast<size_t>(h) * stride);
  std::vector<uint8_t> prev(stride, 0);
  for (int64_t r = 0; r < h; ++r) {
    const uint8_t filter = raw[static_cast<size_t>(r) * (stride + 1)];
    const uint8_t* src = raw.data() + static_cast<size_t>(r) * (stride + 1) + 1;
    uint8_t* dst = img.pixels.data() + static_cast<size_t>(r) * stride;
    for (size_t c = 0; c < stride; ++c) {
      const uint8_t left = c > 0 ? dst[c - 1] : 0;
      const uint8_t up = prev[c];
      const uint8_t ul = c > 0 ? prev[c - 1] : 0;
      switch (filter) {
        case 0: dst[c] = src[c]; break;
        case 1: dst[c] = static_cast<uint8_t>(src[c] + left); break;
        case 2: dst[c] = static_cast<uint8_t>(src[c] + up); break;
        case 3: dst[c] = static_cast<uint8_t>(src[c] + ((left + up) >> 1)); break;
        case 4: dst[c] = static_cast<uint8_t>(src[c] + paeth(left, up, ul)); break;
        default: throw DataError("'" + path + "' uses unknown PNG filter type");
      }
    }
    std::memcpy(prev.data(), dst, stride);
  }
  return img;
}

void write_png_gray(const std::string& path, const ImageU8& img) {
  write_png(path, img.h, img.w, 1, img.pixels);
}

void write_png_rgb(const std::string& path, int64_t h, int64_t w, const std::vector<uint8_t>& rgb) {
  write_png(path, h, w, 3, rgb);
}

ImageU8 read_image(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) return read_png_gray(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return read_pgm(path);
  throw DataError("'" + path + "' is neither a binary PGM nor a PNG file");
}

} // namespace ecov
