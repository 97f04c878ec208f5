#pragma once

#include "gbs/rebalance.hpp"
#include "gbs/thresholds.hpp"
#include "gbs/types.hpp"

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace gbs::sim {

// Which of the two imbalance regimes the unlabeled pool follows.
enum class Scenario {
  abundant,  // minority objects are common in the unlabeled images
  scarce,    // unlabeled images share the labeled long-tailed distribution
};

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view name);

struct SyntheticTaskSpec {
  std::size_t n_majority = 15;
  std::size_t n_minority = 5;
  std::size_t labeled_per_majority = 500;
  std::size_t labeled_per_minority = 10;
  std::size_t unlabeled_images = 2000;
  std::size_t proposals_per_image = 8;
  std::size_t objects_per_image = 3;
  std::size_t eval_per_class = 200;
  Scenario scenario = Scenario::abundant;
  std::size_t feature_dim = 16;
  double separation = 6.0;
  double noise = 1.0;
  double background_noise = 1.0;
  std::uint64_t seed = 1;

  std::size_t num_foreground() const { return n_majority + n_minority; }
  bool is_minority(ClassIndex c) const { return c >= static_cast<ClassIndex>(n_majority); }
  void validate() const;
};

// Images with a fixed number of proposals each; proposal j of image i is row
// i * proposals_per_image + j. Labels hold the true class (background = n).
struct ImageSet {
  std::size_t proposals_per_image = 0;
  Matrix features;
  std::vector<ClassIndex> labels;
  std::vector<Box> boxes;

  std::size_t num_images() const { return proposals_per_image ? labels.size() / proposals_per_image : 0; }
  Eigen::Index row(std::size_t image, std::size_t proposal) const {
    return static_cast<Eigen::Index>(image * proposals_per_image + proposal);
  }
  // Foreground classes present in an image.
  ImageClasses image_classes(std::size_t image, std::size_t num_foreground) const;
};

struct EvalSet {
  Matrix features;
  std::vector<ClassIndex> labels;  // foreground only, balanced
};

struct SyntheticTask {
  SyntheticTaskSpec spec;
  Matrix centers;  // one row per foreground class
  ImageSet labeled;
  ImageSet unlabeled;  // labels are hidden ground truth
  EvalSet eval;

  std::size_t num_foreground() const { return spec.num_foreground(); }
  std::size_t num_classes() const { return spec.num_foreground() + 1; }
};

SyntheticTask generate_task(const SyntheticTaskSpec& spec);

// Instances of each foreground class among an image set's proposals.
std::vector<std::size_t> instance_counts(const ImageSet& images, std::size_t num_foreground);

}  // namespace gbs::sim
