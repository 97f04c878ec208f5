#include "gbs/sim/records.hpp"

#include "gbs/errors.hpp"

#include <charconv>
#include <fstream>
#include <ostream>

namespace gbs::sim {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json to_json(const std::vector<std::optional<double>>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(x ? json(*x) : json(nullptr));
  return a;
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw InputError("cannot open '" + p.string() + "' for writing");
  return f;
}

}  // namespace

json record_to_json(const GenerationRecord& r, std::size_t n_majority) {
  json j;
  j["generation"] = r.generation;
  j["step"] = r.step;
  j["n_majority"] = n_majority;
  j["eval"] = {{"overall", r.eval.overall},
               {"majority", r.eval.majority_mean},
               {"minority", r.eval.minority_mean},
               {"per_class", r.eval.per_class}};
  if (r.pseudo) {
    j["pseudo"] = {{"precision", to_json(r.pseudo->precision)},
                   {"recall", to_json(r.pseudo->recall)},
                   {"count", r.pseudo->count},
                   {"correct", r.pseudo->correct},
                   {"truth", r.pseudo->truth}};
  } else {
    j["pseudo"] = nullptr;
  }
  j["weights"] = to_json(r.weights);
  j["weights_labeled"] = to_json(r.weights_labeled);
  j["thresholds"] = {{"theta", to_json(r.table.theta)},
                     {"theta_p", to_json(r.table.theta_p)},
                     {"theta_c", r.table.theta_c ? to_json(*r.table.theta_c) : json(nullptr)}};
  j["sampling"] = {{"epsilon", r.epsilon},
                   {"m", r.image_counts},
                   {"S", r.class_rates},
                   {"epoch_unlabeled", r.epoch_unlabeled}};
  j["losses"] = {{"labeled", r.mean_labeled_loss},
                 {"unlabeled", r.mean_unlabeled_loss},
                 {"align", r.mean_align_loss}};
  return j;
}

void write_metrics_jsonl(std::ostream& out, const RunResult& run, std::size_t n_majority) {
  for (const auto& r : run.records) out << record_to_json(r, n_majority).dump() << '\n';
}

void write_summary_csv(std::ostream& out, const RunResult& run, std::size_t n_majority) {
  out << "class,group,eval_accuracy,precision,recall,pseudo_count,weight,threshold\n";
  if (run.records.empty()) return;
  const auto& r = run.records.back();
  const std::size_t n = r.eval.per_class.size();
  for (std::size_t c = 0; c < n; ++c) {
    out << c << ',' << (c < n_majority ? "majority" : "minority") << ',' << format_double(r.eval.per_class[c]) << ',';
    if (r.pseudo) {
      out << opt(r.pseudo->precision[c]) << ',' << opt(r.pseudo->recall[c]) << ',' << r.pseudo->count[c];
    } else {
      out << ",,";
    }
    out << ',' << format_double(r.weights[static_cast<Eigen::Index>(c)]) << ','
        << format_double(r.table.theta[static_cast<Eigen::Index>(c)]) << '\n';
  }
}

void write_weights_csv(std::ostream& out, const RunResult& run) {
  out << "generation,class,w,w_labeled\n";
  for (const auto& r : run.records) {
    for (Eigen::Index c = 0; c < r.weights.size(); ++c) {
      out << r.generation << ',' << c << ',' << format_double(r.weights[c]) << ','
          << format_double(r.weights_labeled[c]) << '\n';
    }
  }
}

void write_thresholds_csv(std::ostream& out, const RunResult& run) {
  out << "generation,class,theta,theta_p,theta_c\n";
  for (const auto& r : run.records) {
    for (Eigen::Index c = 0; c < r.table.theta.size(); ++c) {
      out << r.generation << ',' << c << ',' << format_double(r.table.theta[c]) << ','
          << format_double(r.table.theta_p[c]) << ',';
      if (r.table.theta_c) out << format_double((*r.table.theta_c)[c]);
      out << '\n';
    }
  }
}

void write_run_artifacts(const std::filesystem::path& dir, const RunResult& run, std::size_t n_majority) {
  std::filesystem::create_directories(dir);
  {
    auto f = open_out(dir / "metrics.jsonl");
    write_metrics_jsonl(f, run, n_majority);
  }
  {
    auto f = open_out(dir / "summary.csv");
    write_summary_csv(f, run, n_majority);
  }
  {
    auto f = open_out(dir / "weights.csv");
    write_weights_csv(f, run);
  }
  {
    auto f = open_out(dir / "thresholds.csv");
    write_thresholds_csv(f, run);
  }
  {
    auto f = open_out(dir / "sampling.csv");
    write_sampling_report_header(f);
    for (const auto& s : run.sampling) write_sampling_report(f, s);
  }
}

namespace {

std::string cell(const json& v) { return v.is_null() ? std::string() : format_double(v.get<double>()); }

const json& need(const json& obj, const char* key, std::size_t line) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError("metrics line " + std::to_string(line) + ": missing '" + key + "'");
  }
  return obj[key];
}

}  // namespace

void render_report(std::istream& jsonl, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto pr = open_out(out_dir / "pr_table.csv");
  auto groups = open_out(out_dir / "accuracy_groups.csv");
  auto per_class = open_out(out_dir / "accuracy_per_class.csv");
  pr << "generation,class,group,precision,recall,pseudo_count,truth\n";
  groups << "generation,step,overall,majority,minority\n";
  per_class << "generation,class,group,accuracy\n";

  std::string text;
  for (std::size_t line = 1; std::getline(jsonl, text); ++line) {
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json r;
    try {
      r = json::parse(text);
      const auto gen = need(r, "generation", line).get<std::size_t>();
      const auto n_major = need(r, "n_majority", line).get<std::size_t>();
      const json& ev = need(r, "eval", line);
      groups << gen << ',' << need(r, "step", line).get<std::size_t>() << ',' << cell(need(ev, "overall", line))
             << ',' << cell(need(ev, "majority", line)) << ',' << cell(need(ev, "minority", line)) << '\n';
      const json& acc = need(ev, "per_class", line);
      for (std::size_t c = 0; c < acc.size(); ++c) {
        per_class << gen << ',' << c << ',' << (c < n_major ? "majority" : "minority") << ',' << cell(acc[c])
                  << '\n';
      }
      const json& ps = need(r, "pseudo", line);
      if (ps.is_null()) continue;
      const json& prec = need(ps, "precision", line);
      const json& rec = need(ps, "recall", line);
      const json& cnt = need(ps, "count", line);
      const json& tru = need(ps, "truth", line);
      for (std::size_t c = 0; c < prec.size(); ++c) {
        pr << gen << ',' << c << ',' << (c < n_major ? "majority" : "minority") << ',' << cell(prec[c]) << ','
           << cell(rec.at(c)) << ',' << cnt.at(c).get<std::size_t>() << ',' << tru.at(c).get<std::size_t>() << '\n';
      }
    } catch (const json::exception& e) {
      throw ParseError("metrics line " + std::to_string(line) + ": " + e.what());
    }
  }
}

}  // namespace gbs::sim
