#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pfnet/data/holes.hpp"
#include "pfnet/data/shapes.hpp"
#include "pfnet/key_value.hpp"

namespace pfnet::data {

struct DatasetSpec {
  static constexpr std::uint64_t kVersion = 1;

  std::size_t n_points = 2048;
  double missing_ratio = 0.25;
  std::size_t n_holes = 1;
  std::vector<ShapeFamily> categories{kAllFamilies.begin(), kAllFamilies.end()};
  std::size_t shapes_per_category = 10;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t missing_points() const { return missing_count(n_points, missing_ratio); }

  KeyValues to_key_values() const;
  static DatasetSpec from_key_values(const KeyValues& kv);
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

struct DatasetEntry {
  std::string split;  // "train" or "test"
  std::string category;
  std::size_t id = 0;
  std::uint64_t shape_seed = 0;
  std::uint64_t hole_seed = 0;
  CompletionSample sample;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<DatasetEntry> entries;

  std::vector<CompletionSample> split(const std::string& name) const;
};

// Deterministic in the spec alone: same spec, same dataset.
Dataset generate_dataset(const DatasetSpec& spec);

// Builds samples from externally sampled clouds laid out as
// <dir>/<category>/<name>.{xyz,ply}; each cloud must hold spec.n_points points.
Dataset import_external_clouds(const std::filesystem::path& dir, const DatasetSpec& spec);

// Layout: <dir>/dataset_spec.txt, <dir>/manifest.csv and
// <dir>/<split>/<category>/<id>.{full,partial,missing}.xyz
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Loads one split of a directory in the layout above, sorted by category then id.
std::vector<CompletionSample> load_split(const std::filesystem::path& dir, const std::string& split);

}  // namespace pfnet::data
