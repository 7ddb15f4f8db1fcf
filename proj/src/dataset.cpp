#include "ecovnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include "ecovnet/errors.hpp"
#include "ecovnet/rng.hpp"

namespace fs = std::filesystem;

namespace ecov {

const std::vector<std::string>& default_class_names() {
  static const std::vector<std::string> names = {"covid19", "normal", "pneumonia"};
  return names;
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

} // namespace

Manifest load_manifest(const std::string& csv_path, const std::vector<std::string>& class_set) {
  if (class_set.empty()) throw ArgumentError("load_manifest: class set must be nonempty");
  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open manifest '" + csv_path + "'");

  Manifest manifest;
  manifest.class_names = class_set;
  const fs::path base = fs::path(csv_path).parent_path();

  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest '" + csv_path + "' is empty");
  if (trim(line) != "path,label")
    throw DataError("manifest '" + csv_path + "' must start with header 'path,label', got '" +
                    trim(line) + "'");

  std::set<std::string> seen;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const size_t comma = t.rfind(',');
    if (comma == std::string::npos)
      throw DataError("manifest '" + csv_path + "' row " + std::to_string(row) + " has no comma");
    const std::string raw_path = trim(t.substr(0, comma));
    const std::string label = trim(t.substr(comma + 1));
    if (raw_path.empty())
      throw DataError("manifest '" + csv_path + "' row " + std::to_string(row) + " has an empty path");

    const auto it = std::find(class_set.begin(), class_set.end(), label);
    if (it == class_set.end())
      throw DataError("manifest '" + csv_path + "' row " + std::to_string(row) + " has unknown label '" +
                      label + "'");

    fs::path p(raw_path);
    if (p.is_relative()) p = base / p;
    const std::string resolved = p.lexically_normal().string();
    if (!seen.insert(resolved).second)
      throw DataError("manifest '" + csv_path + "' row " + std::to_string(row) + " duplicates path '" +
                      resolved + "'");
    if (!fs::exists(p))
      throw DataError("manifest '" + csv_path + "' row " + std::to_string(row) +
                      " references missing file '" + resolved + "'");

    manifest.entries.push_back({resolved, static_cast<int>(it - class_set.begin())});
  }
  return manifest;
}

void save_manifest(const Manifest& manifest, const std::string& csv_path) {
  std::ofstream out(csv_path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + csv_path + "' for writing");
  out << "path,label\n";
  const fs::path base = fs::path(csv_path).parent_path();
  for (const auto& e : manifest.entries) {
    if (e.label < 0 || e.label >= static_cast<int>(manifest.class_names.size()))
      throw ArgumentError("save_manifest: label index out of range");
    const std::string rel = fs::path(e.path).lexically_proximate(base).string();
    out << rel << ',' << manifest.class_names[static_cast<size_t>(e.label)] << '\n';
  }
  if (!out) throw DataError("short write to '" + csv_path + "'");
}

std::pair<Manifest, Manifest> split_dataset(const Manifest& full, double val_fraction, uint64_t seed) {
  if (!(val_fraction > 0.0) || !(val_fraction < 1.0))
    throw ArgumentError("split_dataset: validation fraction must be in (0,1)");

  const int num_classes = static_cast<int>(full.class_names.size());
  std::vector<std::vector<size_t>> by_class(static_cast<size_t>(num_classes));
  for (size_t i = 0; i < full.entries.size(); ++i)
    by_class[static_cast<size_t>(full.entries[i].label)].push_back(i);

  Manifest train, val;
  train.class_names = full.class_names;
  val.class_names = full.class_names;

  for (int c = 0; c < num_classes; ++c) {
    auto& idx = by_class[static_cast<size_t>(c)];
    if (idx.size() < 2)
      throw ArgumentError("split_dataset: class '" + full.class_names[static_cast<size_t>(c)] +
                          "' has fewer than 2 samples");
    Rng rng(mix_seed(seed, static_cast<uint64_t>(c), 0x53504c49ULL));
    for (size_t i = idx.size() - 1; i > 0; --i) {
      const size_t j = static_cast<size_t>(rng.below(static_cast<uint64_t>(i + 1)));
      std::swap(idx[i], idx[j]);
    }
    const size_t n_val = static_cast<size_t>(
        std::floor(static_cast<double>(idx.size()) * val_fraction));
    for (size_t i = 0; i < idx.size(); ++i) {
      (i < n_val ? val : train).entries.push_back(full.entries[idx[i]]);
    }
  }
  return {train, val};
}

namespace {

// Intensity recipe constants for the synthetic classes; values chosen so the
// planted structure clears the noise floor by a wide margin.
constexpr double kBase = 0.30;
constexpr double kNoiseSigma = 0.02;
constexpr double kBlobAmp = 0.65;
constexpr double kBlobSigma = 6.0;
constexpr double kBandAmp = 0.50;
constexpr double kBandPeriod = 6.0;

uint8_t to_byte(double v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

ImageU8 toy_image(int class_idx, int64_t size, Rng& rng) {
  ImageU8 img;
  img.h = size;
  img.w = size;
  img.pixels.resize(static_cast<size_t>(size * size));

  std::vector<double> field(static_cast<size_t>(size * size), kBase);
  for (auto& v : field) v += kNoiseSigma * rng.normal();

  if (class_idx == 0) {
    // bright blob centered inside the upper-left quadrant, jittered
    const double q = static_cast<double>(size) / 4.0;
    const double cy = q + rng.uniform(-q / 4.0, q / 4.0);
    const double cx = q + rng.uniform(-q / 4.0, q / 4.0);
    for (int64_t r = 0; r < size; ++r)
      for (int64_t c = 0; c < size; ++c) {
        const double dy = static_cast<double>(r) - cy;
        const double dx = static_cast<double>(c) - cx;
        field[static_cast<size_t>(r * size + c)] +=
            kBlobAmp * std::exp(-(dy * dy + dx * dx) / (2.0 * kBlobSigma * kBlobSigma));
      }
  } else if (class_idx == 2) {
    // horizontal bands across the lower half, random phase
    const double phase = rng.uniform(0.0, kBandPeriod);
    for (int64_t r = size / 2; r < size; ++r) {
      const double s =
          0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (static_cast<double>(r) + phase) / kBandPeriod);
      for (int64_t c = 0; c < size; ++c) field[static_cast<size_t>(r * size + c)] += kBandAmp * s;
    }
  }

  for (size_t i = 0; i < field.size(); ++i) img.pixels[i] = to_byte(field[i]);
  return img;
}

} // namespace

std::string generate_toy_split(const std::string& dir, const std::string& split, int n_per_class,
                               int64_t size, uint64_t seed) {
  if (n_per_class < 10) throw ArgumentError("generate_toy_split: need at least 10 images per class");
  if (size < 16) throw ArgumentError("generate_toy_split: size must be at least 16");

  std::error_code ec;
  fs::create_directories(fs::path(dir) / split, ec);
  if (ec) throw DataError("cannot create directory '" + dir + "/" + split + "': " + ec.message());

  const auto& names = default_class_names();
  Manifest manifest;
  manifest.class_names = names;

  uint64_t split_key = 1469598103934665603ULL; // FNV-1a, stable across builds
  for (const char ch : split) {
    split_key ^= static_cast<uint64_t>(static_cast<unsigned char>(ch));
    split_key *= 1099511628211ULL;
  }
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < n_per_class; ++i) {
      Rng rng(mix_seed(seed, split_key, static_cast<uint64_t>(c), static_cast<uint64_t>(i)));
      const ImageU8 img = toy_image(c, size, rng);
      std::ostringstream name;
      name << names[static_cast<size_t>(c)] << "_" << std::setw(4) << std::setfill('0') << i << ".pgm";
      const fs::path out = fs::path(dir) / split / name.str();
      write_pgm(out.string(), img);
      manifest.entries.push_back({out.lexically_normal().string(), c});
    }
  }

  const std::string csv = (fs::path(dir) / (split + ".csv")).string();
  save_manifest(manifest, csv);
  return csv;
}

void generate_toy_dataset(const std::string& dir, int n_per_class, int64_t size, uint64_t seed) {
  generate_toy_split(dir, "train", n_per_class, size, seed);
  generate_toy_split(dir, "test", n_per_class, size, seed);
}

} // namespace ecov
