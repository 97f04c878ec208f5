#pragma once

#include "gbs/split/coco.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace gbs::split {

// Sorted, deduplicated image ids.
using ImageIdSet = std::vector<ImageId>;

struct SplitConfig {
  std::vector<CategoryId> majority;
  std::vector<CategoryId> minority;
  double fraction = 0.10;
  std::size_t min_instances = 10;
  std::uint64_t seed = 0;
  ClassRemap remap;
  bool lvis_mode = false;
  std::size_t lvis_min_per_class = 1;
  // Set when the majority/minority lists came from random_class_partition.
  std::optional<std::uint64_t> partition_seed;

  // Disjoint known classes, fraction in (0, 1], min_instances >= 1.
  void validate(const AnnotationIndex& index) const;
};

// Uniform integer in [0, bound) from raw generator output, so draws are the
// same across standard libraries.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound);
// Fisher-Yates on top of draw_below.
template <class T>
void portable_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[draw_below(rng, i)]);
}

// Images that contain at least one of the classes.
ImageIdSet images_with_any(const AnnotationIndex& index, const std::vector<CategoryId>& classes);

// ceil(fraction * |pool|) images drawn without replacement from the
// majority-containing pool. Throws InputError when the pool is empty.
ImageIdSet build_majority_split(const AnnotationIndex& index, const SplitConfig& cfg);

// Adds images per minority class (seeded class order) until every class has
// at least min_instances instances across already_selected and the new
// images. Returns only the new images. min_instances = 0 returns empty.
ImageIdSet build_minority_split(const AnnotationIndex& index, const SplitConfig& cfg,
                                const ImageIdSet& already_selected);

struct Splits {
  ImageIdSet labeled;
  ImageIdSet unlabeled;
  ImageIdSet majority_pick;  // D_m (empty in LVIS mode)
  ImageIdSet minority_pick;  // D_s, or the coverage additions in LVIS mode
};

Splits assemble_splits(const AnnotationIndex& index, const ImageIdSet& majority, const ImageIdSet& minority);

// Seeded fraction of all images, then one image at a time for each class
// still below lvis_min_per_class instances.
Splits lvis_split(const AnnotationIndex& index, const SplitConfig& cfg);

// Runs the configured mode on an already remapped index.
Splits build_splits(const AnnotationIndex& index, const SplitConfig& cfg);

struct ClassPartition {
  std::vector<CategoryId> majority;
  std::vector<CategoryId> minority;
};

// Seeded random choice of `minority_count` classes as minority; the rest are
// majority. Both lists come back sorted.
ClassPartition random_class_partition(std::vector<CategoryId> classes, std::size_t minority_count,
                                      std::uint64_t seed);

struct ClassAudit {
  CategoryId id = 0;
  std::string name;
  std::string role;  // majority, minority or other
  std::size_t corpus_instances = 0;
  std::size_t corpus_images = 0;
  std::size_t labeled_instances = 0;
  std::size_t labeled_images = 0;
  std::size_t unlabeled_instances = 0;
  std::size_t unlabeled_images = 0;
};

std::vector<ClassAudit> audit_splits(const AnnotationIndex& index, const Splits& splits, const SplitConfig& cfg);

// Labeled images with all of their annotations.
AnnotationIndex labeled_index(const AnnotationIndex& index, const Splits& splits);

// labeled.json (COCO), unlabeled.json (ids and file names only), audit.csv
// (one row per class) and split_summary.json.
void write_splits(const AnnotationIndex& index, const Splits& splits, const SplitConfig& cfg,
                  const std::filesystem::path& out_dir);

}  // namespace gbs::split
