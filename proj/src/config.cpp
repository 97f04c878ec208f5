#include "gbs/config.hpp"

#include "gbs/errors.hpp"

#include <sstream>

namespace gbs {

json default_config() {
  return json{
      {"seed", 1},
      {"task",
       {{"n_majority", 15},
        {"n_minority", 5},
        {"labeled_per_majority", 500},
        {"labeled_per_minority", 10},
        {"unlabeled_images", 2000},
        {"proposals_per_image", 8},
        {"objects_per_image", 3},
        {"eval_per_class", 200},
        {"scenario", "abundant"},
        {"feature_dim", 16},
        {"separation", 6.0},
        {"noise", 1.0},
        {"background_noise", 1.0}}},
      {"modules", {{"crs", true}, {"gbr", true}, {"threshold_mode", "combined"}, {"resampling", "crs"}}},
      {"loss", {{"kind", "softmax-focal"}, {"gamma_focal", 2.0}}},
      {"optimizer", {{"lr", 0.01}, {"momentum", 0.9}, {"weight_decay", 1e-4}}},
      {"solver",
       {{"eta_g", 0.9995},
        {"lr_align", 0.01},
        {"beta", 0.5},
        {"diag_floor", 1e-8},
        {"w_min", 1e-3},
        {"w_max_fraction", 0.999}}},
      {"thresholds",
       {{"theta_base", 0.9},
        {"theta_min", 0.05},
        {"quantile", 0.95},
        {"window", 10000},
        {"min_samples", 20},
        {"refresh_every", 100}}},
      {"sampling", {{"gamma", 0.5}, {"s_cap", 20.0}, {"rfs_tau", 0.001}}},
      {"training",
       {{"generations", 10},
        {"steps_per_generation", 500},
        {"burn_in_steps", 500},
        {"labeled_per_batch", 4},
        {"unlabeled_per_batch", 16},
        {"eta_p", 0.9995},
        {"pseudo_refresh", "generation"},
        {"unlabeled_background", "confident"},
        {"init_scale", 0.01}}},
  };
}

std::vector<std::string> preset_names() {
  return {"baseline", "fl", "crs", "gbt", "gbr", "gbt_gbr", "crs_gbr", "crs_gbt", "full", "naive"};
}

json preset(std::string_view name) {
  auto modules = [](bool crs, bool gbt, bool gbr, bool fl) {
    return json{{"modules", {{"crs", crs}, {"gbr", gbr}, {"threshold_mode", gbt ? "combined" : "fixed"}}},
                {"loss", {{"kind", fl ? "softmax-focal" : "softmax-cross-entropy"}}}};
  };
  if (name == "baseline") return modules(false, false, false, false);
  if (name == "fl") return modules(false, false, false, true);
  if (name == "crs") return modules(true, false, false, true);
  if (name == "gbt") return modules(false, true, false, true);
  if (name == "gbr") return modules(false, false, true, true);
  if (name == "gbt_gbr") return modules(false, true, true, true);
  if (name == "crs_gbr") return modules(true, false, true, true);
  if (name == "crs_gbt") return modules(true, true, false, true);
  if (name == "full") return modules(true, true, true, true);
  if (name == "naive") {
    json p = modules(true, true, true, true);
    p["modules"]["resampling"] = "naive";
    return p;
  }
  throw InputError("unknown preset '" + std::string(name) + "'");
}

namespace {

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) {
    // Integers in the defaults stay integers; reals accept integers.
    return !(a.is_number_integer() && b.is_number_float());
  }
  return a.type() == b.type();
}

}  // namespace

void merge_config(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) throw InputError("config" + (where.empty() ? "" : " at '" + where + "'") + ": expected object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) throw InputError("config: unknown key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_config(slot, it.value(), key);
    } else {
      if (!same_kind(slot, it.value())) throw InputError("config: key '" + key + "' has the wrong type");
      if (it.value().is_number_integer() && slot.is_number_integer() && it.value().get<long long>() < 0) {
        throw InputError("config: key '" + key + "' must be nonnegative");
      }
      slot = it.value().is_number_integer() && slot.is_number_float() ? json(it.value().get<double>()) : it.value();
    }
  }
}

void apply_override(json& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw InputError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json patch = value;
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  merge_config(cfg, patch);
}

void apply_toggles(json& cfg, std::string_view toggles) {
  bool crs = false, gbt = false, gbr = false, fl = false;
  if (toggles != "none") {
    std::stringstream ss{std::string(toggles)};
    for (std::string t; std::getline(ss, t, ',');) {
      if (t == "crs") crs = true;
      else if (t == "gbt") gbt = true;
      else if (t == "gbr") gbr = true;
      else if (t == "fl") fl = true;
      else throw InputError("unknown toggle '" + t + "' (crs,gbt,gbr,fl or none)");
    }
  }
  cfg["modules"]["crs"] = crs;
  cfg["modules"]["gbr"] = gbr;
  cfg["modules"]["threshold_mode"] = gbt ? "combined" : "fixed";
  cfg["loss"]["kind"] = fl ? "softmax-focal" : "softmax-cross-entropy";
}

sim::HarnessConfig harness_config_from_json(const json& in) {
  json cfg = default_config();
  merge_config(cfg, in);

  sim::HarnessConfig h;
  h.seed = cfg["seed"].get<std::uint64_t>();

  const json& t = cfg["task"];
  h.task.n_majority = t["n_majority"].get<std::size_t>();
  h.task.n_minority = t["n_minority"].get<std::size_t>();
  h.task.labeled_per_majority = t["labeled_per_majority"].get<std::size_t>();
  h.task.labeled_per_minority = t["labeled_per_minority"].get<std::size_t>();
  h.task.unlabeled_images = t["unlabeled_images"].get<std::size_t>();
  h.task.proposals_per_image = t["proposals_per_image"].get<std::size_t>();
  h.task.objects_per_image = t["objects_per_image"].get<std::size_t>();
  h.task.eval_per_class = t["eval_per_class"].get<std::size_t>();
  h.task.scenario = sim::parse_scenario(t["scenario"].get<std::string>());
  h.task.feature_dim = t["feature_dim"].get<std::size_t>();
  h.task.separation = t["separation"].get<double>();
  h.task.noise = t["noise"].get<double>();
  h.task.background_noise = t["background_noise"].get<double>();
  h.task.seed = h.seed;

  const json& m = cfg["modules"];
  h.modules.crs = m["crs"].get<bool>();
  h.modules.gbr = m["gbr"].get<bool>();
  h.modules.thresholds = parse_threshold_mode(m["threshold_mode"].get<std::string>());
  h.resampling = sim::parse_resampling(m["resampling"].get<std::string>());

  h.loss.kind = parse_loss_kind(cfg["loss"]["kind"].get<std::string>());
  h.loss.gamma_focal = cfg["loss"]["gamma_focal"].get<double>();

  const json& o = cfg["optimizer"];
  h.sgd = {o["lr"].get<double>(), o["momentum"].get<double>(), o["weight_decay"].get<double>()};

  const json& s = cfg["solver"];
  h.eta_g = s["eta_g"].get<double>();
  h.solver.lr_align = s["lr_align"].get<double>();
  h.solver.beta = s["beta"].get<double>();
  h.solver.diag_floor = s["diag_floor"].get<double>();
  h.solver.w_min = s["w_min"].get<double>();
  h.solver.w_max_fraction = s["w_max_fraction"].get<double>();

  const json& th = cfg["thresholds"];
  h.thresholds.theta_base = th["theta_base"].get<double>();
  h.thresholds.theta_min = th["theta_min"].get<double>();
  h.thresholds.quantile = th["quantile"].get<double>();
  h.thresholds.window = th["window"].get<std::size_t>();
  h.thresholds.min_samples = th["min_samples"].get<std::size_t>();
  h.threshold_refresh = th["refresh_every"].get<std::size_t>();

  const json& sp = cfg["sampling"];
  h.rebalance.gamma = sp["gamma"].get<double>();
  h.rebalance.s_cap = sp["s_cap"].get<double>();
  h.rebalance.rfs_tau = sp["rfs_tau"].get<double>();

  const json& tr = cfg["training"];
  h.generations = tr["generations"].get<std::size_t>();
  h.steps_per_generation = tr["steps_per_generation"].get<std::size_t>();
  h.burn_in_steps = tr["burn_in_steps"].get<std::size_t>();
  h.labeled_per_batch = tr["labeled_per_batch"].get<std::size_t>();
  h.unlabeled_per_batch = tr["unlabeled_per_batch"].get<std::size_t>();
  h.eta_p = tr["eta_p"].get<double>();
  h.pseudo_refresh = sim::parse_pseudo_refresh(tr["pseudo_refresh"].get<std::string>());
  h.unlabeled_background = sim::parse_unlabeled_background(tr["unlabeled_background"].get<std::string>());
  h.init_scale = tr["init_scale"].get<double>();

  h.validate();
  return h;
}

namespace {

json schema_of(const json& v) {
  if (v.is_object()) {
    json props = json::object();
    for (auto it = v.begin(); it != v.end(); ++it) {
      props[it.key()] = schema_of(it.value());
    }
    return {{"type", "object"}, {"properties", props}, {"additionalProperties", false}};
  }
  json s;
  if (v.is_boolean()) s["type"] = "boolean";
  else if (v.is_number_integer()) s["type"] = "integer";
  else if (v.is_number()) s["type"] = "number";
  else s["type"] = "string";
  s["default"] = v;
  return s;
}

}  // namespace

json config_schema() {
  json s = schema_of(default_config());
  s["$schema"] = "https://json-schema.org/draft/2020-12/schema";
  s["title"] = "gbs simulate run configuration";
  auto& p = s["properties"];
  p["task"]["properties"]["scenario"]["enum"] = {"abundant", "scarce"};
  p["modules"]["properties"]["threshold_mode"]["enum"] = {"fixed", "gbt", "score", "combined"};
  p["modules"]["properties"]["resampling"]["enum"] = {"crs", "naive"};
  p["loss"]["properties"]["kind"]["enum"] = {"softmax-cross-entropy", "softmax-focal"};
  p["training"]["properties"]["pseudo_refresh"]["enum"] = {"generation", "step"};
  p["training"]["properties"]["unlabeled_background"]["enum"] = {"all", "confident"};
  return s;
}

}  // namespace gbs
