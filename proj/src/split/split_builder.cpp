#include "gbs/split/split_builder.hpp"

#include "gbs/errors.hpp"
#include "gbs/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace gbs::split {

using nlohmann::json;

void SplitConfig::validate(const AnnotationIndex& index) const {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InputError("split: fraction must be in (0, 1]");
  if (!lvis_mode && min_instances < 1) throw InputError("split: min-instances must be >= 1");
  if (lvis_mode && lvis_min_per_class < 1) throw InputError("split: lvis min-per-class must be >= 1");
  std::set<CategoryId> seen;
  for (CategoryId c : majority) {
    if (!index.has_category(c)) throw InputError("split: unknown majority class " + std::to_string(c));
    seen.insert(c);
  }
  for (CategoryId c : minority) {
    if (!index.has_category(c)) throw InputError("split: unknown minority class " + std::to_string(c));
    if (seen.count(c)) throw InputError("split: class " + std::to_string(c) + " is both majority and minority");
  }
}

std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) throw InputError("draw_below: empty range");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

ImageIdSet images_with_any(const AnnotationIndex& index, const std::vector<CategoryId>& classes) {
  std::set<ImageId> pool;
  for (CategoryId c : classes) {
    const auto& ids = index.images_with(c);
    pool.insert(ids.begin(), ids.end());
  }
  return {pool.begin(), pool.end()};
}

namespace {

ImageIdSet sorted(std::vector<ImageId> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::size_t ceil_fraction(double fraction, std::size_t n) {
  // Guard against 0.1 * 100 landing a hair above 10.
  const double x = fraction * static_cast<double>(n);
  const double r = std::round(x);
  const std::size_t k = std::abs(x - r) < 1e-9 ? static_cast<std::size_t>(r) : static_cast<std::size_t>(std::ceil(x));
  return std::min(k, n);
}

ImageIdSet sample(ImageIdSet pool, std::size_t k, std::mt19937_64& rng) {
  portable_shuffle(pool, rng);
  pool.resize(k);
  return sorted(std::move(pool));
}

std::string class_label(const AnnotationIndex& index, CategoryId c) {
  return std::to_string(c) + " (" + index.category(c).name + ")";
}

}  // namespace

ImageIdSet build_majority_split(const AnnotationIndex& index, const SplitConfig& cfg) {
  cfg.validate(index);
  ImageIdSet pool = images_with_any(index, cfg.majority);
  if (pool.empty()) throw InputError("split: no image contains a majority class");
  auto rng = substream(cfg.seed, "majority");
  const std::size_t k = ceil_fraction(cfg.fraction, pool.size());
  return sample(std::move(pool), k, rng);
}

ImageIdSet build_minority_split(const AnnotationIndex& index, const SplitConfig& cfg,
                                const ImageIdSet& already_selected) {
  SplitConfig checked = cfg;
  checked.min_instances = std::max<std::size_t>(cfg.min_instances, 1);
  checked.validate(index);
  if (cfg.min_instances == 0) return {};

  for (CategoryId c : cfg.minority) {
    const std::size_t total = index.instance_count(c);
    if (total < cfg.min_instances) {
      throw InputError("split: minority class " + class_label(index, c) + " has " + std::to_string(total) +
                       " instances, fewer than " + std::to_string(cfg.min_instances));
    }
  }

  auto rng = substream(cfg.seed, "minority");
  std::vector<CategoryId> order = cfg.minority;
  std::sort(order.begin(), order.end());
  portable_shuffle(order, rng);

  std::set<ImageId> selected(already_selected.begin(), already_selected.end());
  std::vector<ImageId> added;
  for (CategoryId c : order) {
    std::size_t have = 0;
    for (ImageId i : index.images_with(c)) {
      if (selected.count(i)) have += index.instances(i, c);
    }
    if (have >= cfg.min_instances) continue;
    std::vector<ImageId> candidates;
    for (ImageId i : index.images_with(c)) {
      if (!selected.count(i)) candidates.push_back(i);
    }
    portable_shuffle(candidates, rng);
    for (ImageId i : candidates) {
      if (have >= cfg.min_instances) break;
      selected.insert(i);
      added.push_back(i);
      have += index.instances(i, c);
    }
  }
  return sorted(std::move(added));
}

Splits assemble_splits(const AnnotationIndex& index, const ImageIdSet& majority, const ImageIdSet& minority) {
  Splits s;
  s.majority_pick = sorted(majority);
  s.minority_pick = sorted(minority);
  std::vector<ImageId> all = s.majority_pick;
  all.insert(all.end(), s.minority_pick.begin(), s.minority_pick.end());
  s.labeled = sorted(std::move(all));
  for (ImageId i : s.labeled) {
    if (!index.has_image(i)) throw InputError("split: selected image " + std::to_string(i) + " is not in the index");
  }
  for (const auto& im : index.images()) {
    if (!std::binary_search(s.labeled.begin(), s.labeled.end(), im.id)) s.unlabeled.push_back(im.id);
  }
  return s;
}

Splits lvis_split(const AnnotationIndex& index, const SplitConfig& cfg) {
  cfg.validate(index);
  for (const auto& c : index.categories()) {
    if (index.instance_count(c.id) < cfg.lvis_min_per_class) {
      throw InputError("split: class " + class_label(index, c.id) + " cannot be covered by the labeled set");
    }
  }
  ImageIdSet all;
  for (const auto& im : index.images()) all.push_back(im.id);
  if (all.empty()) throw InputError("split: no images");

  auto rng = substream(cfg.seed, "lvis");
  ImageIdSet base = sample(all, ceil_fraction(cfg.fraction, all.size()), rng);
  std::set<ImageId> selected(base.begin(), base.end());
  std::vector<ImageId> added;
  for (const auto& cat : index.categories()) {
    std::size_t have = 0;
    for (ImageId i : index.images_with(cat.id)) {
      if (selected.count(i)) have += index.instances(i, cat.id);
    }
    if (have >= cfg.lvis_min_per_class) continue;
    std::vector<ImageId> candidates;
    for (ImageId i : index.images_with(cat.id)) {
      if (!selected.count(i)) candidates.push_back(i);
    }
    portable_shuffle(candidates, rng);
    for (ImageId i : candidates) {
      if (have >= cfg.lvis_min_per_class) break;
      selected.insert(i);
      added.push_back(i);
      have += index.instances(i, cat.id);
    }
  }
  Splits s = assemble_splits(index, {}, sorted(std::move(added)));
  std::vector<ImageId> labeled(selected.begin(), selected.end());
  s.labeled = labeled;
  s.unlabeled.clear();
  for (ImageId i : all) {
    if (!selected.count(i)) s.unlabeled.push_back(i);
  }
  return s;
}

Splits build_splits(const AnnotationIndex& index, const SplitConfig& cfg) {
  if (cfg.lvis_mode) return lvis_split(index, cfg);
  ImageIdSet dm = build_majority_split(index, cfg);
  ImageIdSet ds = build_minority_split(index, cfg, dm);
  return assemble_splits(index, dm, ds);
}

ClassPartition random_class_partition(std::vector<CategoryId> classes, std::size_t minority_count,
                                      std::uint64_t seed) {
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (minority_count > classes.size()) throw InputError("split: more minority classes requested than exist");
  auto rng = substream(seed, "partition");
  portable_shuffle(classes, rng);
  ClassPartition p;
  p.minority.assign(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(minority_count));
  p.majority.assign(classes.begin() + static_cast<std::ptrdiff_t>(minority_count), classes.end());
  std::sort(p.minority.begin(), p.minority.end());
  std::sort(p.majority.begin(), p.majority.end());
  return p;
}

std::vector<ClassAudit> audit_splits(const AnnotationIndex& index, const Splits& splits, const SplitConfig& cfg) {
  std::set<CategoryId> maj(cfg.majority.begin(), cfg.majority.end());
  std::set<CategoryId> mnr(cfg.minority.begin(), cfg.minority.end());
  std::vector<ClassAudit> rows;
  for (const auto& cat : index.categories()) {
    ClassAudit a;
    a.id = cat.id;
    a.name = cat.name;
    a.role = maj.count(cat.id) ? "majority" : mnr.count(cat.id) ? "minority" : "other";
    for (ImageId i : index.images_with(cat.id)) {
      const std::size_t n = index.instances(i, cat.id);
      a.corpus_instances += n;
      ++a.corpus_images;
      if (std::binary_search(splits.labeled.begin(), splits.labeled.end(), i)) {
        a.labeled_instances += n;
        ++a.labeled_images;
      } else {
        a.unlabeled_instances += n;
        ++a.unlabeled_images;
      }
    }
    rows.push_back(std::move(a));
  }
  return rows;
}

AnnotationIndex labeled_index(const AnnotationIndex& index, const Splits& splits) {
  std::vector<CocoImage> images;
  std::vector<CocoAnnotation> annotations;
  for (ImageId i : splits.labeled) {
    images.push_back(index.image(i));
    for (const auto* a : index.annotations_of(i)) annotations.push_back(*a);
  }
  return AnnotationIndex(std::move(images), std::move(annotations), index.categories());
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw InputError("cannot open '" + p.string() + "' for writing");
  return f;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + '"';
}

json remap_json(const ClassRemap& remap) {
  json j = json::object();
  for (const auto& [from, to] : remap.rules) j[from] = to ? json(*to) : json(nullptr);
  return j;
}

}  // namespace

void write_splits(const AnnotationIndex& index, const Splits& splits, const SplitConfig& cfg,
                  const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  save_annotations(labeled_index(index, splits), out_dir / "labeled.json");

  json images = json::array();
  for (ImageId i : splits.unlabeled) images.push_back({{"id", i}, {"file_name", index.image(i).file_name}});
  {
    auto f = open_out(out_dir / "unlabeled.json");
    f << json{{"images", images}}.dump(1) << '\n';
  }

  const auto rows = audit_splits(index, splits, cfg);
  std::size_t labeled_total = 0;
  for (const auto& r : rows) labeled_total += r.labeled_instances;
  {
    auto f = open_out(out_dir / "audit.csv");
    f << "class_id,name,role,corpus_instances,corpus_images,labeled_instances,labeled_images,unlabeled_instances,"
         "unlabeled_images,labeled_share\n";
    char share[32];
    for (const auto& r : rows) {
      const double s = labeled_total ? static_cast<double>(r.labeled_instances) / static_cast<double>(labeled_total) : 0.0;
      std::snprintf(share, sizeof share, "%.6f", s);
      f << r.id << ',' << csv_field(r.name) << ',' << r.role << ',' << r.corpus_instances << ',' << r.corpus_images
        << ',' << r.labeled_instances << ',' << r.labeled_images << ',' << r.unlabeled_instances << ','
        << r.unlabeled_images << ',' << share << '\n';
    }
  }

  json summary{{"mode", cfg.lvis_mode ? "lvis" : "majority-minority"},
               {"seed", cfg.seed},
               {"fraction", cfg.fraction},
               {"min_instances", cfg.lvis_mode ? cfg.lvis_min_per_class : cfg.min_instances},
               {"majority", cfg.majority},
               {"minority", cfg.minority},
               {"remap", remap_json(cfg.remap)},
               {"partition_seed", cfg.partition_seed ? json(*cfg.partition_seed) : json(nullptr)},
               {"images", index.images().size()},
               {"labeled_images", splits.labeled.size()},
               {"unlabeled_images", splits.unlabeled.size()},
               {"majority_pick", splits.majority_pick.size()},
               {"minority_pick", splits.minority_pick.size()}};
  auto f = open_out(out_dir / "split_summary.json");
  f << summary.dump(1) << '\n';
}

}  // namespace gbs::split
