#pragma once

#include "json.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gbs::split {

using ImageId = std::int64_t;
using CategoryId = std::int64_t;

struct CocoImage {
  ImageId id = 0;
  std::string file_name;
  std::int64_t width = 0;
  std::int64_t height = 0;

  bool operator==(const CocoImage&) const = default;
};

struct CocoAnnotation {
  std::int64_t id = 0;
  ImageId image_id = 0;
  CategoryId category_id = 0;
  std::array<double, 4> bbox{};  // x, y, w, h
  double area = 0.0;
  int iscrowd = 0;

  bool operator==(const CocoAnnotation&) const = default;
};

struct CocoCategory {
  CategoryId id = 0;
  std::string name;
  std::string supercategory;

  bool operator==(const CocoCategory&) const = default;
};

// Images, annotations and categories sorted by id, with reverse maps.
class AnnotationIndex {
public:
  AnnotationIndex() = default;
  // Throws ValidationError on duplicate ids or dangling references.
  AnnotationIndex(std::vector<CocoImage> images, std::vector<CocoAnnotation> annotations,
                  std::vector<CocoCategory> categories);

  const std::vector<CocoImage>& images() const { return images_; }
  const std::vector<CocoAnnotation>& annotations() const { return annotations_; }
  const std::vector<CocoCategory>& categories() const { return categories_; }

  bool has_image(ImageId id) const { return image_pos_.count(id) != 0; }
  bool has_category(CategoryId id) const { return category_pos_.count(id) != 0; }
  const CocoImage& image(ImageId id) const;
  const CocoCategory& category(CategoryId id) const;
  std::optional<CategoryId> category_by_name(const std::string& name) const;

  // Sorted, deduplicated.
  const std::vector<ImageId>& images_with(CategoryId c) const;
  const std::vector<CategoryId>& classes_in(ImageId i) const;

  std::size_t instances(ImageId i, CategoryId c) const;
  std::size_t instance_count(CategoryId c) const;
  std::vector<const CocoAnnotation*> annotations_of(ImageId i) const;

  bool operator==(const AnnotationIndex& o) const {
    return images_ == o.images_ && annotations_ == o.annotations_ && categories_ == o.categories_;
  }

private:
  std::vector<CocoImage> images_;
  std::vector<CocoAnnotation> annotations_;
  std::vector<CocoCategory> categories_;
  std::map<ImageId, std::size_t> image_pos_;
  std::map<CategoryId, std::size_t> category_pos_;
  std::map<CategoryId, std::vector<ImageId>> class_images_;
  std::map<ImageId, std::vector<CategoryId>> image_classes_;
  std::map<std::pair<ImageId, CategoryId>, std::size_t> instances_;
  std::map<ImageId, std::vector<std::size_t>> image_annotations_;
};

// `source` names the input in error messages.
AnnotationIndex parse_annotations(const nlohmann::json& doc, const std::string& source = "<json>");
AnnotationIndex parse_annotations_text(const std::string& text, const std::string& source = "<text>");
AnnotationIndex load_annotations(const std::filesystem::path& path);

nlohmann::json to_coco_json(const AnnotationIndex& index);
void save_annotations(const AnnotationIndex& index, const std::filesystem::path& path);

// Category rename/drop rules keyed by name. A rule mapping to nullopt drops
// the category and its annotations. Renaming onto an existing name merges
// into that category.
struct ClassRemap {
  std::map<std::string, std::optional<std::string>> rules;

  bool empty() const { return rules.empty(); }
  static ClassRemap from_json(const nlohmann::json& j);
};

AnnotationIndex apply_remap(const AnnotationIndex& index, const ClassRemap& remap);

}  // namespace gbs::split
