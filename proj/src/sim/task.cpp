#include "gbs/sim/task.hpp"

#include "gbs/errors.hpp"
#include "gbs/rng.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace gbs::sim {

std::string_view to_string(Scenario s) { return s == Scenario::abundant ? "abundant" : "scarce"; }

Scenario parse_scenario(std::string_view name) {
  if (name == "abundant") return Scenario::abundant;
  if (name == "scarce") return Scenario::scarce;
  throw InputError("unknown scenario '" + std::string(name) + "' (abundant|scarce)");
}

void SyntheticTaskSpec::validate() const {
  if (n_majority == 0 || n_minority == 0) throw InputError("task: need at least one majority and one minority class");
  if (labeled_per_majority == 0 || labeled_per_minority == 0) throw InputError("task: labeled counts must be positive");
  if (unlabeled_images == 0 || eval_per_class == 0) throw InputError("task: image counts must be positive");
  if (proposals_per_image == 0 || objects_per_image == 0 || objects_per_image > proposals_per_image) {
    throw InputError("task: need 1 <= objects_per_image <= proposals_per_image");
  }
  if (feature_dim == 0) throw InputError("task: feature_dim must be positive");
  if (!(noise >= 0.0) || !(background_noise >= 0.0) || !(separation > 0.0)) {
    throw InputError("task: separation must be positive and noise nonnegative");
  }
}

ImageClasses ImageSet::image_classes(std::size_t image, std::size_t num_foreground) const {
  ImageClasses out;
  for (std::size_t j = 0; j < proposals_per_image; ++j) {
    const ClassIndex c = labels[image * proposals_per_image + j];
    if (static_cast<std::size_t>(c) < num_foreground) out.push_back(c);
  }
  return out;
}

std::vector<std::size_t> instance_counts(const ImageSet& images, std::size_t num_foreground) {
  std::vector<std::size_t> counts(num_foreground, 0);
  for (ClassIndex c : images.labels) {
    if (static_cast<std::size_t>(c) < num_foreground) ++counts[static_cast<std::size_t>(c)];
  }
  return counts;
}

namespace {

class Sampler {
public:
  Sampler(const SyntheticTaskSpec& spec, const Matrix& centers, std::mt19937_64& rng)
      : spec_(spec), centers_(centers), rng_(rng) {}

  Vector feature(ClassIndex c) {
    const auto d = static_cast<Eigen::Index>(spec_.feature_dim);
    Vector x(d);
    const bool bg = static_cast<std::size_t>(c) == spec_.num_foreground();
    const double sigma = bg ? spec_.background_noise : spec_.noise;
    for (Eigen::Index k = 0; k < d; ++k) x[k] = sigma * normal_(rng_);
    if (!bg) x += centers_.row(c).transpose();
    return x;
  }

  Box box() {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng_), y = u(rng_);
    return {x, y, 0.05 + 0.3 * u(rng_), 0.05 + 0.3 * u(rng_)};
  }

  // Lays out images from a flat object list, objects_per_image at a time,
  // padded with background proposals and shuffled within the image.
  ImageSet images(const std::vector<ClassIndex>& objects) {
    const std::size_t per = spec_.objects_per_image;
    const std::size_t n_images = (objects.size() + per - 1) / per;
    ImageSet set;
    set.proposals_per_image = spec_.proposals_per_image;
    const std::size_t rows = n_images * spec_.proposals_per_image;
    set.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(spec_.feature_dim));
    set.labels.reserve(rows);
    set.boxes.reserve(rows);
    const auto bg = static_cast<ClassIndex>(spec_.num_foreground());
    std::vector<ClassIndex> slot(spec_.proposals_per_image);
    for (std::size_t i = 0; i < n_images; ++i) {
      std::fill(slot.begin(), slot.end(), bg);
      for (std::size_t k = 0; k < per && i * per + k < objects.size(); ++k) slot[k] = objects[i * per + k];
      std::shuffle(slot.begin(), slot.end(), rng_);
      for (ClassIndex c : slot) {
        set.features.row(static_cast<Eigen::Index>(set.labels.size())) = feature(c).transpose();
        set.labels.push_back(c);
        set.boxes.push_back(box());
      }
    }
    return set;
  }

private:
  const SyntheticTaskSpec& spec_;
  const Matrix& centers_;
  std::mt19937_64& rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace

SyntheticTask generate_task(const SyntheticTaskSpec& spec) {
  spec.validate();
  auto rng = substream(spec.seed, "data");
  const std::size_t n = spec.num_foreground();

  SyntheticTask task;
  task.spec = spec;
  task.centers.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.feature_dim));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index c = 0; c < task.centers.rows(); ++c) {
    for (Eigen::Index k = 0; k < task.centers.cols(); ++k) task.centers(c, k) = normal(rng);
    task.centers.row(c) *= spec.separation / task.centers.row(c).norm();
  }

  Sampler sampler(spec, task.centers, rng);

  std::vector<ClassIndex> labeled_objects;
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t count = spec.is_minority(static_cast<ClassIndex>(c)) ? spec.labeled_per_minority
                                                                           : spec.labeled_per_majority;
    labeled_objects.insert(labeled_objects.end(), count, static_cast<ClassIndex>(c));
  }
  std::shuffle(labeled_objects.begin(), labeled_objects.end(), rng);
  task.labeled = sampler.images(labeled_objects);

  // Unlabeled object classes: uniform when minority objects are abundant,
  // otherwise proportional to the labeled long tail.
  std::vector<double> mix(n);
  for (std::size_t c = 0; c < n; ++c) {
    if (spec.scenario == Scenario::abundant) {
      mix[c] = 1.0;
    } else {
      mix[c] = static_cast<double>(spec.is_minority(static_cast<ClassIndex>(c)) ? spec.labeled_per_minority
                                                                                : spec.labeled_per_majority);
    }
  }
  std::discrete_distribution<int> pick(mix.begin(), mix.end());
  std::vector<ClassIndex> unlabeled_objects(spec.unlabeled_images * spec.objects_per_image);
  for (auto& c : unlabeled_objects) c = pick(rng);
  task.unlabeled = sampler.images(unlabeled_objects);

  const auto eval_rows = static_cast<Eigen::Index>(n * spec.eval_per_class);
  task.eval.features.resize(eval_rows, static_cast<Eigen::Index>(spec.feature_dim));
  task.eval.labels.reserve(static_cast<std::size_t>(eval_rows));
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t k = 0; k < spec.eval_per_class; ++k) {
      task.eval.features.row(static_cast<Eigen::Index>(task.eval.labels.size())) =
          sampler.feature(static_cast<ClassIndex>(c)).transpose();
      task.eval.labels.push_back(static_cast<ClassIndex>(c));
    }
  }
  return task;
}

}  // namespace gbs::sim
