#include "gbs/split/coco.hpp"

#include "gbs/errors.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace gbs::split {

using nlohmann::json;

AnnotationIndex::AnnotationIndex(std::vector<CocoImage> images, std::vector<CocoAnnotation> annotations,
                                 std::vector<CocoCategory> categories)
    : images_(std::move(images)), annotations_(std::move(annotations)), categories_(std::move(categories)) {
  auto by_id = [](const auto& a, const auto& b) { return a.id < b.id; };
  std::sort(images_.begin(), images_.end(), by_id);
  std::sort(annotations_.begin(), annotations_.end(), by_id);
  std::sort(categories_.begin(), categories_.end(), by_id);

  for (std::size_t i = 0; i < images_.size(); ++i) {
    if (!image_pos_.emplace(images_[i].id, i).second) {
      throw ValidationError("duplicate image id " + std::to_string(images_[i].id));
    }
  }
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    if (!category_pos_.emplace(categories_[i].id, i).second) {
      throw ValidationError("duplicate category id " + std::to_string(categories_[i].id));
    }
    class_images_[categories_[i].id];
  }
  for (std::size_t i = 0; i < annotations_.size(); ++i) {
    const auto& a = annotations_[i];
    if (i > 0 && annotations_[i - 1].id == a.id) {
      throw ValidationError("duplicate annotation id " + std::to_string(a.id));
    }
    if (!has_image(a.image_id)) {
      throw ValidationError("annotation " + std::to_string(a.id) + " references missing image " +
                            std::to_string(a.image_id));
    }
    if (!has_category(a.category_id)) {
      throw ValidationError("annotation " + std::to_string(a.id) + " references missing category " +
                            std::to_string(a.category_id));
    }
    ++instances_[{a.image_id, a.category_id}];
    image_annotations_[a.image_id].push_back(i);
  }
  for (const auto& [key, count] : instances_) {
    (void)count;
    class_images_[key.second].push_back(key.first);
    image_classes_[key.first].push_back(key.second);
  }
  // instances_ is ordered by (image, class), so image lists need sorting and
  // class lists are already sorted.
  for (auto& [c, ids] : class_images_) std::sort(ids.begin(), ids.end());
}

const CocoImage& AnnotationIndex::image(ImageId id) const {
  auto it = image_pos_.find(id);
  if (it == image_pos_.end()) throw InputError("unknown image id " + std::to_string(id));
  return images_[it->second];
}

const CocoCategory& AnnotationIndex::category(CategoryId id) const {
  auto it = category_pos_.find(id);
  if (it == category_pos_.end()) throw InputError("unknown category id " + std::to_string(id));
  return categories_[it->second];
}

std::optional<CategoryId> AnnotationIndex::category_by_name(const std::string& name) const {
  for (const auto& c : categories_) {
    if (c.name == name) return c.id;
  }
  return std::nullopt;
}

const std::vector<ImageId>& AnnotationIndex::images_with(CategoryId c) const {
  auto it = class_images_.find(c);
  if (it == class_images_.end()) throw InputError("unknown category id " + std::to_string(c));
  return it->second;
}

const std::vector<CategoryId>& AnnotationIndex::classes_in(ImageId i) const {
  static const std::vector<CategoryId> none;
  if (!has_image(i)) throw InputError("unknown image id " + std::to_string(i));
  auto it = image_classes_.find(i);
  return it == image_classes_.end() ? none : it->second;
}

std::size_t AnnotationIndex::instances(ImageId i, CategoryId c) const {
  auto it = instances_.find({i, c});
  return it == instances_.end() ? 0 : it->second;
}

std::size_t AnnotationIndex::instance_count(CategoryId c) const {
  std::size_t total = 0;
  for (ImageId i : images_with(c)) total += instances(i, c);
  return total;
}

std::vector<const CocoAnnotation*> AnnotationIndex::annotations_of(ImageId i) const {
  std::vector<const CocoAnnotation*> out;
  auto it = image_annotations_.find(i);
  if (it != image_annotations_.end()) {
    for (std::size_t k : it->second) out.push_back(&annotations_[k]);
  }
  return out;
}

namespace {

[[noreturn]] void bad(const std::string& source, const std::string& where, const std::string& what) {
  throw ParseError(source + ": " + where + ": " + what);
}

const json& field(const json& obj, const char* key, const std::string& source, const std::string& where) {
  if (!obj.is_object()) bad(source, where, "expected object");
  auto it = obj.find(key);
  if (it == obj.end()) bad(source, where, std::string("missing '") + key + "'");
  return *it;
}

std::int64_t get_int(const json& obj, const char* key, const std::string& source, const std::string& where) {
  const json& v = field(obj, key, source, where);
  if (!v.is_number_integer()) bad(source, where + "/" + key, "expected integer");
  return v.get<std::int64_t>();
}

std::string get_string(const json& obj, const char* key, const std::string& source, const std::string& where,
                       bool required) {
  if (!required && (!obj.contains(key) || obj[key].is_null())) return {};
  const json& v = field(obj, key, source, where);
  if (!v.is_string()) bad(source, where + "/" + key, "expected string");
  return v.get<std::string>();
}

const json& array_at(const json& doc, const char* key, const std::string& source, bool required) {
  static const json empty = json::array();
  if (!doc.contains(key)) {
    if (required) bad(source, "/", std::string("missing '") + key + "' array");
    return empty;
  }
  const json& v = doc[key];
  if (!v.is_array()) bad(source, std::string("/") + key, "expected array");
  return v;
}

}  // namespace

AnnotationIndex parse_annotations(const json& doc, const std::string& source) {
  if (!doc.is_object()) bad(source, "/", "expected a COCO object with images/annotations/categories");

  std::vector<CocoImage> images;
  const json& ji = array_at(doc, "images", source, true);
  for (std::size_t k = 0; k < ji.size(); ++k) {
    const std::string where = "/images/" + std::to_string(k);
    CocoImage im;
    im.id = get_int(ji[k], "id", source, where);
    im.file_name = get_string(ji[k], "file_name", source, where, false);
    if (ji[k].contains("width")) im.width = get_int(ji[k], "width", source, where);
    if (ji[k].contains("height")) im.height = get_int(ji[k], "height", source, where);
    images.push_back(std::move(im));
  }

  std::vector<CocoCategory> categories;
  const json& jc = array_at(doc, "categories", source, true);
  for (std::size_t k = 0; k < jc.size(); ++k) {
    const std::string where = "/categories/" + std::to_string(k);
    CocoCategory c;
    c.id = get_int(jc[k], "id", source, where);
    c.name = get_string(jc[k], "name", source, where, true);
    c.supercategory = get_string(jc[k], "supercategory", source, where, false);
    categories.push_back(std::move(c));
  }

  std::vector<CocoAnnotation> annotations;
  const json& ja = array_at(doc, "annotations", source, false);
  for (std::size_t k = 0; k < ja.size(); ++k) {
    const std::string where = "/annotations/" + std::to_string(k);
    CocoAnnotation a;
    a.id = get_int(ja[k], "id", source, where);
    a.image_id = get_int(ja[k], "image_id", source, where);
    a.category_id = get_int(ja[k], "category_id", source, where);
    const json& box = field(ja[k], "bbox", source, where);
    if (!box.is_array() || box.size() != 4) bad(source, where + "/bbox", "expected 4 numbers");
    for (std::size_t b = 0; b < 4; ++b) {
      if (!box[b].is_number()) bad(source, where + "/bbox", "expected 4 numbers");
      a.bbox[b] = box[b].get<double>();
    }
    if (ja[k].contains("area")) {
      if (!ja[k]["area"].is_number()) bad(source, where + "/area", "expected number");
      a.area = ja[k]["area"].get<double>();
    } else {
      a.area = a.bbox[2] * a.bbox[3];
    }
    if (ja[k].contains("iscrowd")) a.iscrowd = static_cast<int>(get_int(ja[k], "iscrowd", source, where));
    annotations.push_back(a);
  }

  try {
    return AnnotationIndex(std::move(images), std::move(annotations), std::move(categories));
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

AnnotationIndex parse_annotations_text(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + ": byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return parse_annotations(doc, source);
}

AnnotationIndex load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open annotations '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_annotations_text(ss.str(), path.string());
}

json to_coco_json(const AnnotationIndex& index) {
  json images = json::array();
  for (const auto& im : index.images()) {
    json j{{"id", im.id}, {"file_name", im.file_name}};
    if (im.width) j["width"] = im.width;
    if (im.height) j["height"] = im.height;
    images.push_back(std::move(j));
  }
  json annotations = json::array();
  for (const auto& a : index.annotations()) {
    annotations.push_back({{"id", a.id},
                           {"image_id", a.image_id},
                           {"category_id", a.category_id},
                           {"bbox", a.bbox},
                           {"area", a.area},
                           {"iscrowd", a.iscrowd}});
  }
  json categories = json::array();
  for (const auto& c : index.categories()) {
    categories.push_back({{"id", c.id}, {"name", c.name}, {"supercategory", c.supercategory}});
  }
  return {{"images", images}, {"annotations", annotations}, {"categories", categories}};
}

void save_annotations(const AnnotationIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  out << to_coco_json(index).dump(1) << '\n';
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

ClassRemap ClassRemap::from_json(const json& j) {
  if (!j.is_object()) throw InputError("class remap: expected an object of name -> name|null");
  ClassRemap r;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.value().is_null()) r.rules[it.key()] = std::nullopt;
    else if (it.value().is_string()) r.rules[it.key()] = it.value().get<std::string>();
    else throw InputError("class remap: value for '" + it.key() + "' must be a string or null");
  }
  return r;
}

AnnotationIndex apply_remap(const AnnotationIndex& index, const ClassRemap& remap) {
  for (const auto& [from, to] : remap.rules) {
    (void)to;
    if (!index.category_by_name(from)) throw InputError("class remap: unknown category '" + from + "'");
  }
  // old id -> new id, or nullopt when dropped.
  std::map<CategoryId, std::optional<CategoryId>> target;
  std::vector<CocoCategory> categories;
  for (const auto& c : index.categories()) {
    auto rule = remap.rules.find(c.name);
    if (rule == remap.rules.end()) {
      target[c.id] = c.id;
      categories.push_back(c);
    }
  }
  for (const auto& c : index.categories()) {
    auto rule = remap.rules.find(c.name);
    if (rule == remap.rules.end()) continue;
    if (!rule->second) {
      target[c.id] = std::nullopt;
      continue;
    }
    auto existing = std::find_if(categories.begin(), categories.end(),
                                 [&](const CocoCategory& k) { return k.name == *rule->second; });
    if (existing != categories.end()) {
      target[c.id] = existing->id;
    } else {
      CocoCategory renamed = c;
      renamed.name = *rule->second;
      categories.push_back(renamed);
      target[c.id] = c.id;
    }
  }
  std::vector<CocoAnnotation> annotations;
  for (const auto& a : index.annotations()) {
    const auto& t = target.at(a.category_id);
    if (!t) continue;
    CocoAnnotation b = a;
    b.category_id = *t;
    annotations.push_back(b);
  }
  return AnnotationIndex(index.images(), std::move(annotations), std::move(categories));
}

}  // namespace gbs::split
