#include "gbs/rebalance.hpp"

#include "gbs/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

namespace gbs {

namespace {

void mark_classes(std::vector<char>& seen, std::vector<std::size_t>& counts, auto&& classes) {
  std::fill(seen.begin(), seen.end(), 0);
  for (ClassIndex c : classes) {
    if (c < 0 || static_cast<std::size_t>(c) >= counts.size()) {
      throw InputError("count_class_images: class " + std::to_string(c) + " out of range");
    }
    if (!seen[static_cast<std::size_t>(c)]) {
      seen[static_cast<std::size_t>(c)] = 1;
      ++counts[static_cast<std::size_t>(c)];
    }
  }
}

}  // namespace

std::vector<std::size_t> count_class_images(std::span<const ImageClasses> labeled, const PseudoLabelSet& pseudo,
                                            std::size_t num_foreground) {
  std::vector<std::size_t> counts(num_foreground, 0);
  std::vector<char> seen(num_foreground, 0);
  for (const auto& img : labeled) mark_classes(seen, counts, img);
  ImageClasses tmp;
  for (const auto& img : pseudo) {
    tmp.clear();
    for (const auto& pl : img) tmp.push_back(pl.cls);
    mark_classes(seen, counts, tmp);
  }
  return counts;
}

double epsilon_schedule(double gamma, std::size_t generation, std::size_t total_generations) {
  if (total_generations == 0) throw InputError("epsilon_schedule: total generations must be positive");
  if (generation > total_generations) throw InputError("epsilon_schedule: generation exceeds total generations");
  if (!(gamma > 0.0)) throw InputError("epsilon_schedule: gamma must be positive");
  return gamma * static_cast<double>(generation) / static_cast<double>(total_generations);
}

std::vector<double> class_repeat_rates(std::span<const std::size_t> image_counts, double epsilon, std::size_t n_total,
                                       double s_cap) {
  if (n_total == 0) throw InputError("class_repeat_rates: N_total must be positive");
  std::vector<double> rates(image_counts.size(), 1.0);
  if (epsilon <= 0.0) return rates;
  const double scaled = epsilon * static_cast<double>(n_total);
  for (std::size_t i = 0; i < image_counts.size(); ++i) {
    rates[i] = image_counts[i] == 0 ? s_cap : std::max(1.0, std::sqrt(scaled / static_cast<double>(image_counts[i])));
  }
  return rates;
}

double image_repeat_rate(std::span<const PseudoLabel> labels, std::span<const double> class_rates,
                         const ThresholdTable& table) {
  double rate = 0.0;
  bool first = true;
  for (const auto& pl : labels) {
    if (pl.cls < 0 || static_cast<std::size_t>(pl.cls) >= class_rates.size() ||
        static_cast<std::size_t>(pl.cls) >= table.size()) {
      throw InputError("image_repeat_rate: class " + std::to_string(pl.cls) + " out of range");
    }
    const double theta = table.theta[pl.cls];
    if (pl.score < theta) {
      throw ContractError("image_repeat_rate: pseudo label of class " + std::to_string(pl.cls) +
                          " scores below its threshold; filter before sampling");
    }
    const double r = class_rates[static_cast<std::size_t>(pl.cls)] * (pl.score - theta);
    rate = first ? r : std::max(rate, r);
    first = false;
  }
  return rate;
}

double naive_image_repeat_rate(std::span<const PseudoLabel> labels, std::span<const double> class_rates) {
  double rate = 0.0;
  for (const auto& pl : labels) rate = std::max(rate, class_rates[static_cast<std::size_t>(pl.cls)]);
  return rate;
}

std::size_t realize_repeats(double rate, std::mt19937_64& rng) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) throw InputError("realize_repeats: rate must be finite and nonnegative");
  const double effective = std::max(1.0, rate);
  const double whole = std::floor(effective);
  const double frac = effective - whole;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool extra = unit(rng) < frac;
  return static_cast<std::size_t>(whole) + (extra ? 1 : 0);
}

std::vector<double> class_image_frequencies(std::span<const ImageClasses> images, std::size_t num_foreground) {
  std::vector<double> f(num_foreground, 0.0);
  if (images.empty()) return f;
  const auto counts = count_class_images(images, PseudoLabelSet{}, num_foreground);
  for (std::size_t c = 0; c < num_foreground; ++c) {
    f[c] = static_cast<double>(counts[c]) / static_cast<double>(images.size());
  }
  return f;
}

std::vector<double> labeled_rfs(std::span<const ImageClasses> images, std::span<const double> class_frequencies,
                                double tau) {
  if (!(tau > 0.0)) throw InputError("labeled_rfs: tau must be positive");
  std::vector<double> class_rate(class_frequencies.size());
  for (std::size_t c = 0; c < class_frequencies.size(); ++c) {
    const double f = class_frequencies[c];
    if (!(f > 0.0 && f <= 1.0)) {
      throw InputError("labeled_rfs: frequency of class " + std::to_string(c) + " must lie in (0, 1]");
    }
    class_rate[c] = std::max(1.0, std::sqrt(tau / f));
  }
  std::vector<double> factors(images.size(), 1.0);
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (ClassIndex c : images[i]) {
      if (c < 0 || static_cast<std::size_t>(c) >= class_rate.size()) {
        throw InputError("labeled_rfs: class " + std::to_string(c) + " out of range");
      }
      factors[i] = std::max(factors[i], class_rate[static_cast<std::size_t>(c)]);
    }
  }
  return factors;
}

void write_sampling_report_header(std::ostream& out) { out << "generation,class,m,S,epsilon\n"; }

void write_sampling_report(std::ostream& out, const SamplingReport& report) {
  auto text = [](double v) {
    char buf[32];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
  };
  for (std::size_t c = 0; c < report.class_rates.size(); ++c) {
    out << report.generation << ',' << c << ',' << report.image_counts[c] << ',' << text(report.class_rates[c]) << ','
        << text(report.epsilon) << '\n';
  }
}

}  // namespace gbs
