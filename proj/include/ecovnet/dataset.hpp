#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ecovnet/image_io.hpp"
#include "ecovnet/tensor.hpp"

// Manifest-driven dataset handling: CSV manifests mapping image paths to class
// labels, stratified train/validation splitting, image ingestion to normalized
// 3-channel tensors, and a synthetic three-class generator for fast runs.

namespace ecov {

struct ManifestEntry {
  std::string path;
  int label = 0;
};

struct Manifest {
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;
};

const std::vector<std::string>& default_class_names(); // covid19, normal, pneumonia

// CSV with a `path,label` header; relative paths resolve against the CSV's
// directory. Unknown labels, duplicate paths, and missing files are rejected.
Manifest load_manifest(const std::string& csv_path, const std::vector<std::string>& class_set);

void save_manifest(const Manifest& manifest, const std::string& csv_path);

// Stratified split: per class, floor(count * val_fraction) samples go to the
// validation side, chosen by a seeded shuffle.
std::pair<Manifest, Manifest> split_dataset(const Manifest& full, double val_fraction, uint64_t seed);

// Writes n_per_class PGM images for each of the three synthetic classes plus a
// manifest CSV; returns the manifest path. Class 0 carries a bright blob in
// the upper-left quadrant, class 1 is plain noise, class 2 has horizontal
// bands in the lower half.
std::string generate_toy_split(const std::string& dir, const std::string& split, int n_per_class,
                               int64_t size, uint64_t seed);

// Train and test splits in one call: <dir>/train.csv and <dir>/test.csv.
void generate_toy_dataset(const std::string& dir, int n_per_class, int64_t size, uint64_t seed);

template <typename T>
struct LabeledData {
  std::vector<Tensor<T>> images; // each (3,H,W) scaled to [0,1]
  std::vector<int> labels;
  std::vector<std::string> paths;
};

// Grayscale file -> (3,R,R) tensor in [0,1]; the single channel is replicated
// so the backbone keeps its three-channel input contract.
template <typename T>
Tensor<T> load_image(const std::string& path, int64_t target_resolution) {
  if (target_resolution < 1) throw ArgumentError("load_image: target resolution must be positive");
  const ImageU8 raw = read_image(path);
  Tensor<T> gray({raw.h, raw.w});
  for (int64_t i = 0; i < gray.numel(); ++i)
    gray[i] = static_cast<T>(raw.pixels[static_cast<size_t>(i)]) / T(255);
  if (raw.h != target_resolution || raw.w != target_resolution)
    gray = bilinear_resize(gray, target_resolution, target_resolution);

  Tensor<T> out({3, target_resolution, target_resolution});
  const int64_t plane = target_resolution * target_resolution;
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t i = 0; i < plane; ++i) out[c * plane + i] = gray[i];
  return out;
}

template <typename T>
LabeledData<T> load_labeled_data(const Manifest& manifest, int64_t target_resolution) {
  LabeledData<T> data;
  data.images.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    data.images.push_back(load_image<T>(e.path, target_resolution));
    data.labels.push_back(e.label);
    data.paths.push_back(e.path);
  }
  return data;
}

} // namespace ecov
