#include "gbs/cli/commands.hpp"

#include "gbs/config.hpp"
#include "gbs/errors.hpp"
#include "gbs/grad_ledger.hpp"
#include "gbs/sim/harness.hpp"
#include "gbs/sim/records.hpp"
#include "gbs/split/split_builder.hpp"
#include "gbs/weight_solver.hpp"

#include "CLI11.hpp"

#include <Eigen/Core>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace gbs::cli {

namespace fs = std::filesystem;

std::string version_json() {
  json v{{"name", "gbs"},
         {"version", GBS_VERSION},
         {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION)},
         {"subcommands", {"simulate", "solve-weights", "split", "report"}}};
  return v.dump();
}

namespace {

fs::path output_root() {
  const char* env = std::getenv("GBS_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

json read_json_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open '" + p.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(p.string() + ": byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

struct SimulateArgs {
  std::string config;
  std::string preset;
  std::string toggles;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string threshold_mode;
  std::optional<double> theta_base;
  std::string out;
  bool print_config = false;
};

int simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  json cfg = default_config();
  sim::HarnessConfig h;
  try {
    if (!a.preset.empty()) merge_config(cfg, preset(a.preset));
    if (!a.config.empty()) merge_config(cfg, read_json_file(a.config));
    if (!a.toggles.empty()) apply_toggles(cfg, a.toggles);
    if (a.seed) cfg["seed"] = *a.seed;
    if (!a.threshold_mode.empty()) cfg["modules"]["threshold_mode"] = a.threshold_mode;
    if (a.theta_base) cfg["thresholds"]["theta_base"] = *a.theta_base;
    for (const auto& o : a.overrides) apply_override(cfg, o);
    h = harness_config_from_json(cfg);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kInput;
  }
  if (a.print_config) {
    out << cfg.dump(2) << '\n';
    return kOk;
  }

  fs::path dir = a.out.empty() ? output_root() / ("simulate-" + (a.preset.empty() ? std::string("run") : a.preset) +
                                                  "-s" + std::to_string(h.seed))
                               : fs::path(a.out);
  try {
    fs::create_directories(dir);
    std::ofstream f(dir / "effective_config.json", std::ios::binary);
    if (!f) throw InputError("cannot write '" + (dir / "effective_config.json").string() + "'");
    f << cfg.dump(2) << '\n';
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << '\n';
    return kIo;
  }

  sim::RunResult result;
  try {
    result = sim::run_generations(h);
  } catch (const sim::RunError& e) {
    err << "run failed: " << e.what() << '\n';
    return kRun;
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << '\n';
    return kRun;
  }
  try {
    sim::write_run_artifacts(dir, result, h.task.n_majority);
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << '\n';
    return kIo;
  }
  const auto& last = result.records.back();
  out << "generation " << last.generation << ": accuracy " << sim::format_double(last.eval.overall) << " majority "
      << sim::format_double(last.eval.majority_mean) << " minority " << sim::format_double(last.eval.minority_mean)
      << '\n'
      << "artifacts in " << dir.string() << '\n';
  return kOk;
}

struct SolveArgs {
  std::string input;
  std::string mode = "both";
  std::size_t max_steps = 10000;
  double lr_align = 0.01;
  double tol = 1e-12;
};

void print_rows(std::ostream& out, const char* mode, const Vector& w, const Vector& residual) {
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    out << mode << ',' << i << ',' << sim::format_double(w[i]) << ',' << sim::format_double(residual[i]) << '\n';
  }
}

int solve_weights(const SolveArgs& a, std::ostream& out, std::ostream& err) {
  Matrix g;
  try {
    if (a.input == "-") {
      g = read_matrix(std::cin);
    } else {
      std::ifstream in(a.input);
      if (!in) throw InputError("cannot open '" + a.input + "'");
      g = read_matrix(in);
    }
    if (g.rows() < 2) throw InputError("gradient matrix needs at least 2 classes");
  } catch (const std::exception& e) {
    err << "input error: " << e.what() << '\n';
    return kInput;
  }

  SolverOptions opts;
  opts.lr_align = a.lr_align;
  const bool direct = a.mode == "direct" || a.mode == "both";
  const bool iterative = a.mode == "iterative" || a.mode == "both";

  out << "mode,class,weight,residual\n";
  int status = kOk;
  if (direct) {
    try {
      const Vector w = solve_direct(g);
      print_rows(out, "direct", w, balance_residuals(g, w));
    } catch (const SolverError& e) {
      err << "direct: " << e.what() << '\n';
      status = kSingular;
    }
  }
  if (iterative) {
    const IterativeSolution sol = solve_iterative(g, a.max_steps, opts, a.tol);
    if (sol.cold_start) err << "warning: gradient matrix has no usable diagonal; weights stay uniform\n";
    else if (!sol.converged) err << "warning: iterative solver stopped after " << sol.steps << " steps\n";
    print_rows(out, "iterative", sol.weights.w, balance_residuals(g, sol.weights.w));
  }
  return status;
}

struct SplitArgs {
  std::string annotations;
  std::string majority;
  std::string minority;
  double fraction = 0.10;
  std::size_t min_instances = 10;
  std::uint64_t seed = 0;
  std::string out;
  bool lvis = false;
  std::string remap;
  std::optional<std::size_t> random_minority;
  std::uint64_t partition_seed = 0;
};

// Comma list of ids or names, or a file with one entry per line.
std::vector<split::CategoryId> class_list(const std::string& spec, const split::AnnotationIndex& index) {
  std::vector<std::string> items;
  if (!spec.empty() && fs::is_regular_file(spec)) {
    std::ifstream in(spec);
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) items.push_back(line);
    }
  } else {
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ',');) {
      if (!item.empty()) items.push_back(item);
    }
  }
  std::vector<split::CategoryId> ids;
  for (const auto& item : items) {
    if (auto byname = index.category_by_name(item)) {
      ids.push_back(*byname);
      continue;
    }
    std::size_t used = 0;
    long long id = 0;
    try {
      id = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw InputError("unknown class '" + item + "'");
    ids.push_back(id);
  }
  return ids;
}

int split_cmd(const SplitArgs& a, std::ostream& out, std::ostream& err) {
  split::AnnotationIndex index;
  split::SplitConfig cfg;
  try {
    index = split::load_annotations(a.annotations);
    if (!a.remap.empty()) {
      cfg.remap = split::ClassRemap::from_json(read_json_file(a.remap));
      index = split::apply_remap(index, cfg.remap);
    }
    cfg.fraction = a.fraction;
    cfg.min_instances = a.min_instances;
    cfg.seed = a.seed;
    cfg.lvis_mode = a.lvis;
    if (a.random_minority) {
      std::vector<split::CategoryId> all;
      for (const auto& c : index.categories()) all.push_back(c.id);
      auto p = split::random_class_partition(all, *a.random_minority, a.partition_seed);
      cfg.majority = p.majority;
      cfg.minority = p.minority;
      cfg.partition_seed = a.partition_seed;
    } else {
      cfg.majority = class_list(a.majority, index);
      cfg.minority = class_list(a.minority, index);
    }
    if (!cfg.lvis_mode && cfg.majority.empty()) throw InputError("split: --majority is required");
  } catch (const std::exception& e) {
    err << "input error: " << e.what() << '\n';
    return kInput;
  }

  split::Splits s;
  try {
    s = split::build_splits(index, cfg);
  } catch (const std::exception& e) {
    err << "split error: " << e.what() << '\n';
    return kInput;
  }
  const fs::path dir = a.out.empty() ? output_root() / ("split-s" + std::to_string(a.seed)) : fs::path(a.out);
  try {
    split::write_splits(index, s, cfg, dir);
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << '\n';
    return kIo;
  }
  out << "images " << index.images().size() << " labeled " << s.labeled.size() << " unlabeled " << s.unlabeled.size()
      << '\n'
      << "artifacts in " << dir.string() << '\n';
  return kOk;
}

int report(const std::string& metrics, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  fs::path path(metrics);
  if (fs::is_directory(path)) path /= "metrics.jsonl";
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    err << "input error: cannot open '" << path.string() << "'\n";
    return kInput;
  }
  const fs::path dir = out_dir.empty() ? path.parent_path() : fs::path(out_dir);
  try {
    sim::render_report(in, dir.empty() ? fs::path(".") : dir);
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << '\n';
    return kIo;
  }
  out << "tables in " << (dir.empty() ? std::string(".") : dir.string()) << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient-based class-rebalancing tools for semi-supervised detection", "gbs"};
  app.require_subcommand(0, 1);
  bool show_version = false, show_schema = false;
  app.add_flag("--version", show_version, "Print version information as JSON");
  app.add_flag("--config-schema", show_schema, "Print the simulate config JSON schema");

  SimulateArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the synthetic self-training harness");
  sim_cmd->add_option("--config", sa.config, "JSON config file");
  sim_cmd->add_option("--preset", sa.preset, "Ablation preset")->check(CLI::IsMember(preset_names()));
  sim_cmd->add_option("--toggles", sa.toggles, "Comma list of crs,gbt,gbr,fl or none");
  sim_cmd->add_option("--set", sa.overrides, "Override as dotted.key=value (repeatable)");
  sim_cmd->add_option("--seed", sa.seed, "Root seed");
  sim_cmd->add_option("--threshold-mode", sa.threshold_mode, "fixed, gbt, score or combined")
      ->check(CLI::IsMember({"fixed", "gbt", "score", "combined"}));
  sim_cmd->add_option("--theta-base", sa.theta_base, "Global pseudo-label threshold");
  sim_cmd->add_option("--out", sa.out, "Output directory (default: $GBS_OUTPUT_ROOT/simulate-<preset>-s<seed>)");
  sim_cmd->add_flag("--print-config", sa.print_config, "Print the effective config and exit");

  SolveArgs wa;
  auto* solve_cmd = app.add_subcommand("solve-weights", "Solve class weights from a gradient-matrix dump");
  solve_cmd->add_option("--input", wa.input, "Matrix text file, '-' for stdin")->required();
  solve_cmd->add_option("--mode", wa.mode, "direct, iterative or both")
      ->check(CLI::IsMember({"direct", "iterative", "both"}));
  solve_cmd->add_option("--max-steps", wa.max_steps, "Iterative step budget");
  solve_cmd->add_option("--lr-align", wa.lr_align, "Alignment learning rate");
  solve_cmd->add_option("--tol", wa.tol, "Stop when max |a - log w_hat| falls below this");

  SplitArgs pa;
  auto* split_sub = app.add_subcommand("split", "Build labeled/unlabeled splits from COCO annotations");
  split_sub->add_option("--annotations", pa.annotations, "COCO annotation JSON")->required();
  split_sub->add_option("--majority", pa.majority, "Class ids/names, comma separated, or a file");
  split_sub->add_option("--minority", pa.minority, "Class ids/names, comma separated, or a file");
  split_sub->add_option("--fraction", pa.fraction, "Majority image fraction");
  split_sub->add_option("--min-instances", pa.min_instances, "Minimum labeled instances per minority class");
  split_sub->add_option("--seed", pa.seed, "Sampling seed");
  split_sub->add_option("--out", pa.out, "Output directory (default: $GBS_OUTPUT_ROOT/split-s<seed>)");
  split_sub->add_flag("--lvis-mode", pa.lvis, "Fraction of all images plus one image per uncovered class");
  split_sub->add_option("--remap", pa.remap, "JSON object of class renames (null drops a class)");
  split_sub->add_option("--random-minority", pa.random_minority, "Pick this many minority classes at random");
  split_sub->add_option("--partition-seed", pa.partition_seed, "Seed for --random-minority");

  std::string metrics, report_out;
  auto* report_cmd = app.add_subcommand("report", "Render CSV tables from a metrics JSONL file");
  report_cmd->add_option("--metrics", metrics, "metrics.jsonl or a run directory")->required();
  report_cmd->add_option("--out", report_out, "Output directory (default: next to the metrics file)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  if (show_version) {
    out << version_json() << '\n';
    return kOk;
  }
  if (show_schema) {
    out << config_schema().dump(2) << '\n';
    return kOk;
  }
  if (*sim_cmd) return simulate(sa, out, err);
  if (*solve_cmd) return solve_weights(wa, out, err);
  if (*split_sub) return split_cmd(pa, out, err);
  if (*report_cmd) return report(metrics, report_out, out, err);
  out << app.help();
  return kUsage;
}

}  // namespace gbs::cli
