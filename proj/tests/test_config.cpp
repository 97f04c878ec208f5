#include "doctest.h"

#include "gbs/config.hpp"
#include "gbs/errors.hpp"

using namespace gbs;

TEST_SUITE("config") {
  TEST_CASE("defaults convert to the documented harness settings") {
    const auto h = harness_config_from_json(json::object());
    CHECK(h.task.n_majority == 15);
    CHECK(h.task.n_minority == 5);
    CHECK(h.task.labeled_per_minority == 10);
    CHECK(h.task.unlabeled_images == 2000);
    CHECK(h.generations == 10);
    CHECK(h.steps_per_generation == 500);
    CHECK(h.eta_p == 0.9995);
    CHECK(h.eta_g == 0.9995);
    CHECK(h.solver.beta == 0.5);
    CHECK(h.thresholds.theta_base == 0.9);
    CHECK(h.rebalance.gamma == 0.5);
    CHECK(h.sgd.momentum == 0.9);
    CHECK(h.sgd.weight_decay == 1e-4);
    CHECK(h.loss.kind == LossKind::softmax_focal);
    CHECK(h.modules.thresholds == ThresholdMode::combined);
    CHECK(h.labeled_per_batch * 4 == h.unlabeled_per_batch);
  }

  TEST_CASE("presets") {
    for (const auto& name : preset_names()) {
      json cfg = default_config();
      merge_config(cfg, preset(name));
      CHECK_NOTHROW(harness_config_from_json(cfg));
    }
    json cfg = default_config();
    merge_config(cfg, preset("baseline"));
    const auto h = harness_config_from_json(cfg);
    CHECK(!h.modules.crs);
    CHECK(!h.modules.gbr);
    CHECK(h.modules.thresholds == ThresholdMode::fixed);
    CHECK(h.loss.kind == LossKind::softmax_cross_entropy);
    CHECK_THROWS_AS(preset("everything"), InputError);
  }

  TEST_CASE("overrides and precedence") {
    json cfg = default_config();
    merge_config(cfg, preset("full"));
    merge_config(cfg, json{{"seed", 9}, {"task", {{"separation", 4}}}});
    apply_override(cfg, "seed=11");
    apply_override(cfg, "modules.threshold_mode=gbt");
    apply_override(cfg, "thresholds.theta_base=0.8");
    const auto h = harness_config_from_json(cfg);
    CHECK(h.seed == 11);
    CHECK(h.task.seed == 11);
    CHECK(h.task.separation == 4.0);
    CHECK(h.modules.thresholds == ThresholdMode::gbt);
    CHECK(h.thresholds.theta_base == 0.8);
    CHECK(cfg["task"]["separation"].is_number_float());
  }

  TEST_CASE("unknown keys and wrong types are rejected") {
    json cfg = default_config();
    CHECK_THROWS_AS(apply_override(cfg, "task.colour=red"), InputError);
    CHECK_THROWS_AS(apply_override(cfg, "nope=1"), InputError);
    CHECK_THROWS_AS(apply_override(cfg, "seed=1.5"), InputError);
    CHECK_THROWS_AS(apply_override(cfg, "modules.crs=3"), InputError);
    CHECK_THROWS_AS(apply_override(cfg, "task=3"), InputError);
    CHECK_THROWS_AS(apply_override(cfg, "seed"), InputError);
    CHECK_THROWS_AS(apply_override(cfg, "seed=-2"), InputError);
    CHECK_THROWS_AS(merge_config(cfg, json{{"training", {{"epochs", 3}}}}), InputError);
    CHECK_THROWS_AS(harness_config_from_json(json{{"modules", {{"threshold_mode", "magic"}}}}), InputError);
  }

  TEST_CASE("toggles") {
    json cfg = default_config();
    apply_toggles(cfg, "none");
    auto h = harness_config_from_json(cfg);
    CHECK(!h.modules.crs);
    CHECK(!h.modules.gbr);
    CHECK(h.modules.thresholds == ThresholdMode::fixed);
    CHECK(h.loss.kind == LossKind::softmax_cross_entropy);
    apply_toggles(cfg, "crs,fl");
    h = harness_config_from_json(cfg);
    CHECK(h.modules.crs);
    CHECK(h.loss.kind == LossKind::softmax_focal);
    CHECK_THROWS_AS(apply_toggles(cfg, "crs,xyz"), InputError);
  }

  TEST_CASE("schema covers every key") {
    const json s = config_schema();
    const json d = default_config();
    for (auto it = d.begin(); it != d.end(); ++it) {
      REQUIRE(s["properties"].contains(it.key()));
      if (it.value().is_object()) {
        for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) {
          CHECK(s["properties"][it.key()]["properties"].contains(jt.key()));
        }
      }
    }
    CHECK(s["additionalProperties"] == false);
  }
}
