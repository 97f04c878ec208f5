#include "doctest.h"

#include "gbs/errors.hpp"
#include "gbs/split/split_builder.hpp"
#include "support.hpp"

#include <set>

using namespace gbs;
using namespace gbs::split;

namespace {

// Images 1..n; `layout[i]` lists the classes annotated in image i+1.
AnnotationIndex make_index(const std::vector<std::vector<CategoryId>>& layout, std::size_t classes) {
  std::vector<CocoImage> images;
  std::vector<CocoAnnotation> anns;
  std::vector<CocoCategory> cats;
  for (std::size_t c = 1; c <= classes; ++c) cats.push_back({static_cast<CategoryId>(c), "c" + std::to_string(c), ""});
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto id = static_cast<ImageId>(i + 1);
    images.push_back({id, "im" + std::to_string(id) + ".jpg", 0, 0});
    for (CategoryId c : layout[i]) {
      anns.push_back({static_cast<std::int64_t>(anns.size() + 1), id, c, {0, 0, 1, 1}, 1.0, 0});
    }
  }
  return AnnotationIndex(images, anns, cats);
}

std::size_t labeled_instances(const AnnotationIndex& idx, const ImageIdSet& labeled, CategoryId c) {
  std::size_t n = 0;
  for (ImageId i : labeled) n += idx.instances(i, c);
  return n;
}

}  // namespace

TEST_SUITE("split_coco") {
  TEST_CASE("empty annotation list") {
    const auto idx = parse_annotations_text(R"({"images": [], "annotations": [], "categories": []})");
    CHECK(idx.images().empty());
    CHECK(idx.annotations().empty());
  }

  TEST_CASE("hand-written three-image fixture") {
    const auto idx = load_annotations(gbs::test::data_dir() / "coco_3.json");
    CHECK(idx.images().size() == 3);
    CHECK(idx.annotations().size() == 5);
    CHECK(idx.categories().size() == 3);
    CHECK(idx.instance_count(1) == 3);
    CHECK(idx.instance_count(2) == 1);
    CHECK(idx.instance_count(3) == 1);
    CHECK(idx.images_with(1) == std::vector<ImageId>{1, 3});
    CHECK(idx.classes_in(1) == std::vector<CategoryId>{1, 2});
    CHECK(idx.instances(1, 1) == 2);
    CHECK(idx.annotations_of(1).size() == 3);
    CHECK(idx.annotations()[2].area == 12.0);  // missing area = w * h
    CHECK(idx.image(3).width == 0);
  }

  TEST_CASE("serialization round-trip") {
    const auto idx = load_annotations(gbs::test::data_dir() / "coco_200.json");
    const auto dir = gbs::test::scratch_dir("coco_roundtrip");
    save_annotations(idx, dir / "copy.json");
    CHECK(load_annotations(dir / "copy.json") == idx);
  }

  TEST_CASE("parse errors carry a location") {
    try {
      parse_annotations_text("{\"images\": [1, }", "bad.json");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("bad.json: byte") != std::string::npos);
    }
    try {
      parse_annotations_text(R"({"images": [{"id": 1}], "categories": [{"id": 1}]})", "x.json");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("/categories/0") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_annotations_text(R"({"images": [], "annotations": []})"), ParseError);
    CHECK_THROWS_AS(
        parse_annotations_text(
            R"({"images": [], "categories": [], "annotations": [{"id": 1, "image_id": 1, "category_id": 1, "bbox": [0,0,1]}]})"),
        ParseError);
  }

  TEST_CASE("dangling references and duplicates") {
    CHECK_THROWS_AS(
        parse_annotations_text(
            R"({"images": [{"id": 1}], "categories": [{"id": 1, "name": "a"}], "annotations": [{"id": 1, "image_id": 2, "category_id": 1, "bbox": [0,0,1,1]}]})"),
        ValidationError);
    CHECK_THROWS_AS(
        parse_annotations_text(
            R"({"images": [{"id": 1}], "categories": [{"id": 1, "name": "a"}], "annotations": [{"id": 1, "image_id": 1, "category_id": 7, "bbox": [0,0,1,1]}]})"),
        ValidationError);
    CHECK_THROWS_AS(parse_annotations_text(R"({"images": [{"id": 1}, {"id": 1}], "categories": []})"), ValidationError);
    CHECK_THROWS_AS(load_annotations("/nonexistent/file.json"), InputError);
  }

  TEST_CASE("class remap") {
    const auto idx = load_annotations(gbs::test::data_dir() / "coco_3.json");
    ClassRemap r = ClassRemap::from_json(nlohmann::json{{"teddy bear", "bear"}});
    const auto merged = apply_remap(idx, r);
    CHECK(merged.categories().size() == 2);
    CHECK(merged.instance_count(3) == 2);
    CHECK(merged.images_with(3) == std::vector<ImageId>{1, 2});

    const auto dropped = apply_remap(idx, ClassRemap::from_json(nlohmann::json{{"teddy bear", nullptr}}));
    CHECK(dropped.annotations().size() == 4);
    CHECK(!dropped.has_category(2));

    const auto renamed = apply_remap(idx, ClassRemap::from_json(nlohmann::json{{"person", "human"}}));
    CHECK(renamed.category(1).name == "human");

    CHECK_THROWS_AS(apply_remap(idx, ClassRemap::from_json(nlohmann::json{{"zebra", nullptr}})), InputError);
    CHECK_THROWS_AS(ClassRemap::from_json(nlohmann::json{{"a", 3}}), InputError);
  }
}

TEST_SUITE("split_builder") {
  TEST_CASE("majority sample size") {
    std::vector<std::vector<CategoryId>> layout(100, {1});
    layout.push_back({2});
    const auto idx = make_index(layout, 2);
    SplitConfig cfg;
    cfg.majority = {1};
    cfg.minority = {2};
    cfg.min_instances = 1;
    CHECK(build_majority_split(idx, cfg).size() == 10);
    cfg.fraction = 1.0;
    CHECK(build_majority_split(idx, cfg) == images_with_any(idx, {1}));
    cfg.fraction = 0.15;
    CHECK(build_majority_split(idx, cfg).size() == 15);
    cfg.fraction = 0.101;
    CHECK(build_majority_split(idx, cfg).size() == 11);
  }

  TEST_CASE("majority sample is seeded") {
    std::vector<std::vector<CategoryId>> layout(100, {1});
    const auto idx = make_index(layout, 2);
    SplitConfig cfg;
    cfg.majority = {1};
    cfg.seed = 3;
    CHECK(build_majority_split(idx, cfg) == build_majority_split(idx, cfg));
    SplitConfig other = cfg;
    other.seed = 4;
    CHECK(build_majority_split(idx, cfg) != build_majority_split(idx, other));
  }

  TEST_CASE("no majority images") {
    const auto idx = make_index({{2}, {2}}, 2);
    SplitConfig cfg;
    cfg.majority = {1};
    CHECK_THROWS_AS(build_majority_split(idx, cfg), InputError);
  }

  TEST_CASE("isolated minority classes need exactly k images") {
    std::vector<std::vector<CategoryId>> layout;
    for (int k = 0; k < 30; ++k) layout.push_back({2});
    for (int k = 0; k < 30; ++k) layout.push_back({3});
    const auto idx = make_index(layout, 3);
    SplitConfig cfg;
    cfg.majority = {1};
    cfg.minority = {2, 3};
    const auto ds = build_minority_split(idx, cfg, {});
    CHECK(ds.size() == 20);
    CHECK(labeled_instances(idx, ds, 2) == 10);
    CHECK(labeled_instances(idx, ds, 3) == 10);
  }

  TEST_CASE("co-occurring minority classes are satisfied together") {
    // Every image carries one instance of class 2 and one of class 3.
    std::vector<std::vector<CategoryId>> layout(25, {2, 3});
    const auto idx = make_index(layout, 3);
    SplitConfig cfg;
    cfg.majority = {1};
    cfg.minority = {2, 3};
    const auto ds = build_minority_split(idx, cfg, {});
    CHECK(ds.size() == 10);
    CHECK(labeled_instances(idx, ds, 2) == 10);
    CHECK(labeled_instances(idx, ds, 3) == 10);
  }

  TEST_CASE("instances in already selected images count") {
    std::vector<std::vector<CategoryId>> layout(12, {1, 2});
    const auto idx = make_index(layout, 2);
    SplitConfig cfg;
    cfg.majority = {1};
    cfg.minority = {2};
    cfg.min_instances = 4;
    const auto ds = build_minority_split(idx, cfg, {1, 2, 3});
    CHECK(ds.size() == 1);
  }

  TEST_CASE("k = 0 gives nothing, too few instances is an error naming the class") {
    const auto idx = make_index({{2}, {2}, {1}}, 2);
    SplitConfig cfg;
    cfg.majority = {1};
    cfg.minority = {2};
    cfg.min_instances = 0;
    CHECK(build_minority_split(idx, cfg, {}).empty());
    cfg.min_instances = 3;
    try {
      build_minority_split(idx, cfg, {});
      FAIL("expected InputError");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("2 (c2)") != std::string::npos);
    }
  }

  TEST_CASE("config validation") {
    const auto idx = make_index({{1}, {2}}, 2);
    SplitConfig cfg;
    cfg.majority = {1};
    cfg.minority = {1};
    CHECK_THROWS_AS(cfg.validate(idx), InputError);
    cfg.minority = {9};
    CHECK_THROWS_AS(cfg.validate(idx), InputError);
    cfg.minority = {2};
    cfg.fraction = 0.0;
    CHECK_THROWS_AS(cfg.validate(idx), InputError);
    cfg.fraction = 1.5;
    CHECK_THROWS_AS(cfg.validate(idx), InputError);
    cfg.fraction = 0.1;
    cfg.min_instances = 0;
    CHECK_THROWS_AS(cfg.validate(idx), InputError);
  }

  TEST_CASE("assemble") {
    const auto idx = make_index({{1}, {1}, {2}, {2}, {}}, 2);
    const auto none = assemble_splits(idx, {}, {});
    CHECK(none.labeled.empty());
    CHECK(none.unlabeled == std::vector<ImageId>{1, 2, 3, 4, 5});
    const auto s = assemble_splits(idx, {1, 3}, {3, 4});
    CHECK(s.labeled == std::vector<ImageId>{1, 3, 4});
    CHECK(s.unlabeled == std::vector<ImageId>{2, 5});
  }

  TEST_CASE("LVIS mode") {
    SUBCASE("every class in every image is a plain sample") {
      std::vector<std::vector<CategoryId>> layout(50, {1, 2, 3});
      const auto idx = make_index(layout, 3);
      SplitConfig cfg;
      cfg.lvis_mode = true;
      const auto s = lvis_split(idx, cfg);
      CHECK(s.labeled.size() == 5);
      CHECK(s.minority_pick.empty());
    }
    SUBCASE("a class seen once forces its image in") {
      std::vector<std::vector<CategoryId>> layout(60, {1});
      layout[37] = {1, 2};
      const auto idx = make_index(layout, 2);
      SplitConfig cfg;
      cfg.lvis_mode = true;
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        cfg.seed = seed;
        const auto s = lvis_split(idx, cfg);
        CHECK(std::binary_search(s.labeled.begin(), s.labeled.end(), ImageId{38}));
      }
    }
    SUBCASE("size bound on a 1000-image corpus") {
      std::mt19937_64 rng(8);
      std::vector<std::vector<CategoryId>> layout(1000);
      for (auto& im : layout) {
        const auto k = draw_below(rng, 4);
        for (std::uint64_t j = 0; j < k; ++j) im.push_back(static_cast<CategoryId>(1 + draw_below(rng, 30)));
      }
      layout[0].push_back(31);  // rare classes
      layout[1].push_back(32);
      const auto idx = make_index(layout, 32);
      SplitConfig cfg;
      cfg.lvis_mode = true;
      const auto s = lvis_split(idx, cfg);
      CHECK(s.labeled.size() >= 100);
      CHECK(s.labeled.size() <= 100 + 32);
      for (CategoryId c = 1; c <= 32; ++c) CHECK(labeled_instances(idx, s.labeled, c) >= 1);
      CHECK(s.labeled.size() + s.unlabeled.size() == 1000);
    }
    SUBCASE("uncoverable class") {
      const auto idx = make_index({{1}, {1}}, 2);
      SplitConfig cfg;
      cfg.lvis_mode = true;
      CHECK_THROWS_AS(lvis_split(idx, cfg), InputError);
    }
  }

  TEST_CASE("random class partition") {
    std::vector<CategoryId> all;
    for (CategoryId c = 1; c <= 80; ++c) all.push_back(c);
    const auto p = random_class_partition(all, 40, 17);
    CHECK(p.minority.size() == 40);
    CHECK(p.majority.size() == 40);
    std::set<CategoryId> u(p.minority.begin(), p.minority.end());
    u.insert(p.majority.begin(), p.majority.end());
    CHECK(u.size() == 80);
    CHECK(random_class_partition(all, 40, 17).minority == p.minority);
    CHECK(random_class_partition(all, 40, 18).minority != p.minority);
    CHECK_THROWS_AS(random_class_partition(all, 81, 1), InputError);
  }

  TEST_CASE("portable draws are uniform enough") {
    std::mt19937_64 rng(1);
    std::vector<int> counts(7, 0);
    for (int k = 0; k < 70000; ++k) ++counts[draw_below(rng, 7)];
    for (int c : counts) CHECK(std::abs(c - 10000) < 400);
  }

  TEST_CASE("written splits: partition, no leakage, audit rows, round-trip") {
    const auto idx = load_annotations(gbs::test::data_dir() / "coco_200.json");
    SplitConfig cfg;
    cfg.majority = {1, 2, 3, 4, 5, 6};
    cfg.minority = {7, 8, 9, 10};
    cfg.seed = 5;
    const auto s = build_splits(idx, cfg);
    const auto dir = gbs::test::scratch_dir("split_written");
    write_splits(idx, s, cfg, dir);

    const auto labeled = load_annotations(dir / "labeled.json");
    CHECK(labeled == labeled_index(idx, s));
    const auto unl = nlohmann::json::parse(gbs::test::slurp(dir / "unlabeled.json"));
    CHECK(unl["images"].size() == s.unlabeled.size());
    for (const auto& im : unl["images"]) {
      CHECK(im.size() == 2);
      CHECK(im.contains("id"));
      CHECK(im.contains("file_name"));
    }
    CHECK(unl.size() == 1);

    const std::string audit = gbs::test::slurp(dir / "audit.csv");
    CHECK(std::count(audit.begin(), audit.end(), '\n') == 1 + 11);

    for (CategoryId c : cfg.minority) CHECK(labeled_instances(idx, s.labeled, c) >= 10);
    // Every annotation of a labeled image is kept.
    std::size_t expect = 0;
    for (ImageId i : s.labeled) expect += idx.annotations_of(i).size();
    CHECK(labeled.annotations().size() == expect);
  }
}
