#include "pfnet/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "pfnet/data/cloud_io.hpp"
#include "pfnet/errors.hpp"
#include "pfnet/geometry/normalize.hpp"

namespace pfnet::data {

namespace fs = std::filesystem;

void DatasetSpec::validate() const {
  if (n_points < 4) throw ConfigError("dataset: n_points must be at least 4");
  if (!(missing_ratio > 0.0 && missing_ratio < 1.0))
    throw ConfigError("dataset: missing_ratio must lie strictly between 0 and 1");
  if (n_holes == 0) throw ConfigError("dataset: n_holes must be at least 1");
  if (n_holes > default_viewpoints().size())
    throw ConfigError("dataset: at most " + std::to_string(default_viewpoints().size()) +
                      " holes fit the viewpoint set");
  const std::size_t m = missing_points();
  if (m < n_holes || m >= n_points)
    throw ConfigError("dataset: " + std::to_string(m) + " missing points cannot form " +
                      std::to_string(n_holes) + " holes in " + std::to_string(n_points) + " points");
  if (categories.empty()) throw ConfigError("dataset: no categories");
  if (shapes_per_category == 0) throw ConfigError("dataset: shapes_per_category must be positive");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
    throw ConfigError("dataset: train_fraction must lie in [0, 1]");
}

KeyValues DatasetSpec::to_key_values() const {
  KeyValues kv;
  kv["version"] = std::to_string(kVersion);
  kv["n_points"] = std::to_string(n_points);
  kv["missing_ratio"] = format_double(missing_ratio);
  kv["n_holes"] = std::to_string(n_holes);
  std::string cats;
  for (ShapeFamily f : categories) cats += (cats.empty() ? "" : ",") + std::string(family_name(f));
  kv["categories"] = cats;
  kv["shapes_per_category"] = std::to_string(shapes_per_category);
  kv["train_fraction"] = format_double(train_fraction);
  kv["seed"] = std::to_string(seed);
  return kv;
}

DatasetSpec DatasetSpec::from_key_values(const KeyValues& kv) {
  if (kv.count("version") && kv_uint(kv, "version") != kVersion)
    throw ConfigError("dataset spec version " + kv.at("version") + " is not supported");
  DatasetSpec spec;
  for (const auto& [key, value] : kv) {
    if (key == "version") continue;
    if (key == "n_points") spec.n_points = kv_uint(kv, key);
    else if (key == "missing_ratio") spec.missing_ratio = kv_double(kv, key);
    else if (key == "n_holes") spec.n_holes = kv_uint(kv, key);
    else if (key == "shapes_per_category") spec.shapes_per_category = kv_uint(kv, key);
    else if (key == "train_fraction") spec.train_fraction = kv_double(kv, key);
    else if (key == "seed") spec.seed = kv_uint(kv, key);
    else if (key == "categories") {
      spec.categories.clear();
      std::stringstream ss(value);
      for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) spec.categories.push_back(parse_family(item));
    } else {
      throw ConfigError("dataset spec: unknown key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  // splitmix64 finalizer applied over the fields in turn
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  for (std::uint64_t v : {a, b, c}) h = mix(h ^ v);
  return h;
}

std::vector<CompletionSample> Dataset::split(const std::string& name) const {
  std::vector<CompletionSample> out;
  for (const DatasetEntry& e : entries)
    if (e.split == name) out.push_back(e.sample);
  return out;
}

namespace {

// Train membership per shape index of one category.
std::vector<char> split_mask(const DatasetSpec& spec, std::size_t category_index, std::size_t count) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(spec.seed, category_index, 2));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train =
      static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(count)));
  std::vector<char> train(count, 0);
  for (std::size_t i = 0; i < n_train && i < count; ++i) train[order[i]] = 1;
  return train;
}

CompletionSample make_sample(const geometry::PointCloud& full, const DatasetSpec& spec,
                             std::uint64_t hole_seed, const std::string& category) {
  const auto viewpoints = default_viewpoints();
  const auto counts = split_hole_counts(spec.missing_points(), spec.n_holes);
  CompletionSample sample = generate_multi_hole(full, viewpoints, counts, hole_seed);
  sample.category = category;
  return sample;
}

std::string id_string(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu", id);
  return buf;
}

}  // namespace

Dataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.spec = spec;
  for (std::size_t ci = 0; ci < spec.categories.size(); ++ci) {
    const ShapeFamily family = spec.categories[ci];
    const std::string category(family_name(family));
    const auto train = split_mask(spec, ci, spec.shapes_per_category);
    for (std::size_t id = 0; id < spec.shapes_per_category; ++id) {
      DatasetEntry e;
      e.split = train[id] ? "train" : "test";
      e.category = category;
      e.id = id;
      e.shape_seed = mix_seed(spec.seed, static_cast<std::uint64_t>(family), id, 0);
      e.hole_seed = mix_seed(spec.seed, static_cast<std::uint64_t>(family), id, 1);
      std::mt19937_64 param_rng(e.shape_seed);
      const ShapeParams params = random_shape_params(family, param_rng);
      const SyntheticShape shape = sample_synthetic_shape(params, spec.n_points, mix_seed(e.shape_seed, 3));
      e.sample = make_sample(shape.cloud, spec, e.hole_seed, category);
      ds.entries.push_back(std::move(e));
    }
  }
  return ds;
}

Dataset import_external_clouds(const fs::path& dir, const DatasetSpec& spec) {
  spec.validate();
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  Dataset ds;
  ds.spec = spec;
  std::vector<fs::path> categories;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory()) categories.push_back(entry.path());
  std::sort(categories.begin(), categories.end());
  for (std::size_t ci = 0; ci < categories.size(); ++ci) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(categories[ci])) {
      const auto ext = entry.path().extension();
      if (entry.is_regular_file() && (ext == ".xyz" || ext == ".ply")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    const auto train = split_mask(spec, ci, files.size());
    const std::string category = categories[ci].filename().string();
    for (std::size_t id = 0; id < files.size(); ++id) {
      const geometry::PointCloud raw = read_cloud(files[id]);
      if (raw.size() != spec.n_points)
        throw DomainError(files[id].string() + ": expected " + std::to_string(spec.n_points) +
                          " points, found " + std::to_string(raw.size()));
      DatasetEntry e;
      e.split = train[id] ? "train" : "test";
      e.category = category;
      e.id = id;
      e.hole_seed = mix_seed(spec.seed, ci, id, 1);
      e.sample = make_sample(geometry::normalize_unit_cube(raw).cloud, spec, e.hole_seed, category);
      ds.entries.push_back(std::move(e));
    }
  }
  if (ds.entries.empty()) throw DomainError(dir.string() + ": no point clouds found");
  return ds;
}

void write_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  write_key_values(dir / "dataset_spec.txt", dataset.spec.to_key_values());
  std::ofstream manifest(dir / "manifest.csv", std::ios::trunc);
  if (!manifest) throw IoError("cannot write manifest in " + dir.string());
  manifest << "split,category,id,shape_seed,hole_seed,n_partial,n_missing,viewpoints\n";
  for (const DatasetEntry& e : dataset.entries) {
    const fs::path cat_dir = dir / e.split / e.category;
    fs::create_directories(cat_dir);
    const std::string stem = id_string(e.id);
    write_cloud(e.sample.full, cat_dir / (stem + ".full.xyz"), CloudFormat::xyz);
    write_cloud(e.sample.partial, cat_dir / (stem + ".partial.xyz"), CloudFormat::xyz);
    write_cloud(e.sample.missing_gt, cat_dir / (stem + ".missing.xyz"), CloudFormat::xyz);
    std::string views;
    for (const auto& v : e.sample.viewpoints)
      views += (views.empty() ? "" : ";") + format_double(v[0]) + " " + format_double(v[1]) + " " +
               format_double(v[2]);
    manifest << e.split << ',' << e.category << ',' << stem << ',' << e.shape_seed << ','
             << e.hole_seed << ',' << e.sample.partial.size() << ',' << e.sample.missing_gt.size()
             << ',' << views << '\n';
  }
}

std::vector<CompletionSample> load_split(const fs::path& dir, const std::string& split) {
  const fs::path root = dir / split;
  if (!fs::is_directory(root)) throw IoError("dataset split directory " + root.string() + " not found");
  std::vector<fs::path> categories;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) categories.push_back(entry.path());
  std::sort(categories.begin(), categories.end());

  const std::string suffix = ".full.xyz";
  std::vector<CompletionSample> samples;
  for (const fs::path& cat : categories) {
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(cat)) {
      const std::string name = entry.path().filename().string();
      if (name.size() > suffix.size() && name.ends_with(suffix))
        stems.push_back(name.substr(0, name.size() - suffix.size()));
    }
    std::sort(stems.begin(), stems.end());
    for (const std::string& stem : stems) {
      CompletionSample s;
      s.category = cat.filename().string();
      s.full = read_cloud(cat / (stem + ".full.xyz"), CloudFormat::xyz);
      s.partial = read_cloud(cat / (stem + ".partial.xyz"), CloudFormat::xyz);
      s.missing_gt = read_cloud(cat / (stem + ".missing.xyz"), CloudFormat::xyz);
      if (s.partial.size() + s.missing_gt.size() != s.full.size())
        throw DomainError(cat.string() + "/" + stem + ": partial and missing do not add up to full");
      samples.push_back(std::move(s));
    }
  }
  if (samples.empty()) throw DomainError("dataset split " + root.string() + " holds no samples");
  return samples;
}

}  // namespace pfnet::data
