#pragma once

#include "gbs/thresholds.hpp"
#include "gbs/types.hpp"

#include <cstddef>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

namespace gbs {

// Foreground classes annotated in one image (duplicates allowed).
using ImageClasses = std::vector<ClassIndex>;

struct RebalanceOptions {
  double gamma = 0.5;
  double s_cap = 20.0;  // rate for classes with no image at all
  double rfs_tau = 0.001;
};

// m_i = number of images in labeled ∪ pseudo-labeled that carry class i.
std::vector<std::size_t> count_class_images(std::span<const ImageClasses> labeled, const PseudoLabelSet& pseudo,
                                            std::size_t num_foreground);

// epsilon = gamma * t / N_t.
double epsilon_schedule(double gamma, std::size_t generation, std::size_t total_generations);

// S_i = max(1, sqrt(epsilon * N_total / m_i)); s_cap when m_i = 0 and
// epsilon > 0.
std::vector<double> class_repeat_rates(std::span<const std::size_t> image_counts, double epsilon, std::size_t n_total,
                                       double s_cap = 20.0);

// max_j S_{c_j} (p_j - theta_{c_j}) over an image's pseudo labels, 0 if none.
// Throws ContractError if a label scores below its threshold.
double image_repeat_rate(std::span<const PseudoLabel> labels, std::span<const double> class_rates,
                         const ThresholdTable& table);

// Score-blind variant: max_j S_{c_j}, 0 if none.
double naive_image_repeat_rate(std::span<const PseudoLabel> labels, std::span<const double> class_rates);

// floor(max(1, rate)) plus one Bernoulli draw on the fractional part. Exactly
// one uniform variate is consumed per call.
std::size_t realize_repeats(double rate, std::mt19937_64& rng);

std::vector<double> class_image_frequencies(std::span<const ImageClasses> images, std::size_t num_foreground);

// Repeat factor sampling for labeled images: r_c = max(1, sqrt(tau / f_c)),
// image factor = max over its classes (1 for images without classes).
std::vector<double> labeled_rfs(std::span<const ImageClasses> images, std::span<const double> class_frequencies,
                                double tau);

struct SamplingReport {
  std::size_t generation = 0;
  double epsilon = 0.0;
  std::vector<std::size_t> image_counts;
  std::vector<double> class_rates;
};

void write_sampling_report_header(std::ostream& out);
void write_sampling_report(std::ostream& out, const SamplingReport& report);

}  // namespace gbs
