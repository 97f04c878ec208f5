#pragma once

#include "gbs/sim/harness.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace gbs::sim {

// One metrics line. "pseudo" is null for the burn-in record.
nlohmann::json record_to_json(const GenerationRecord& r, std::size_t n_majority);

void write_metrics_jsonl(std::ostream& out, const RunResult& run, std::size_t n_majority);

// Final generation, one row per foreground class. Undefined values are empty.
void write_summary_csv(std::ostream& out, const RunResult& run, std::size_t n_majority);

// generation,class,w,w_labeled (background row included).
void write_weights_csv(std::ostream& out, const RunResult& run);

// generation,class,theta,theta_p,theta_c
void write_thresholds_csv(std::ostream& out, const RunResult& run);

// Writes metrics.jsonl, summary.csv, weights.csv, thresholds.csv and
// sampling.csv into dir.
void write_run_artifacts(const std::filesystem::path& dir, const RunResult& run, std::size_t n_majority);

// Plot-ready tables from a metrics JSONL stream: pr_table.csv,
// accuracy_groups.csv and accuracy_per_class.csv in out_dir. An empty stream
// gives header-only tables. Throws ParseError naming the bad line.
void render_report(std::istream& jsonl, const std::filesystem::path& out_dir);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace gbs::sim
