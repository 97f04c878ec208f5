#pragma once

#include "gbs/loss.hpp"
#include "gbs/rebalance.hpp"
#include "gbs/sim/metrics.hpp"
#include "gbs/sim/model.hpp"
#include "gbs/sim/task.hpp"
#include "gbs/thresholds.hpp"
#include "gbs/weight_solver.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gbs::sim {

// How unlabeled images are repeated within a generation.
enum class Resampling {
  crs,    // S_c (p - theta_c), confidence weighted
  naive,  // S_c only, ignoring scores and thresholds
};

enum class PseudoRefresh { generation, step };

// Target for unlabeled proposals that received no pseudo label.
enum class UnlabeledBackground {
  all,        // every one is background
  confident,  // background only where the teacher ranks background first, others are ignored
};

std::string_view to_string(Resampling r);
Resampling parse_resampling(std::string_view name);
std::string_view to_string(PseudoRefresh r);
PseudoRefresh parse_pseudo_refresh(std::string_view name);
std::string_view to_string(UnlabeledBackground b);
UnlabeledBackground parse_unlabeled_background(std::string_view name);

// Training target of every proposal of one unlabeled image: the pseudo-label
// class, background, or -1 for ignored proposals.
std::vector<ClassIndex> unlabeled_targets(std::span<const Prediction> predictions, std::span<const PseudoLabel> kept,
                                          std::size_t num_foreground, UnlabeledBackground policy);

struct ModuleToggles {
  bool crs = true;  // class-rebalancing sampling (and RFS on the labeled set)
  bool gbr = true;  // apply learned class weights to the loss
  ThresholdMode thresholds = ThresholdMode::combined;

  // The weight solver runs whenever its weights are consumed.
  bool solver_active() const {
    return gbr || thresholds == ThresholdMode::gbt || thresholds == ThresholdMode::combined;
  }
};

struct HarnessConfig {
  SyntheticTaskSpec task;
  ModuleToggles modules;
  LossSpec loss;
  SgdOptions sgd;
  SolverOptions solver;
  ThresholdOptions thresholds;
  RebalanceOptions rebalance;
  Resampling resampling = Resampling::crs;
  PseudoRefresh pseudo_refresh = PseudoRefresh::generation;
  UnlabeledBackground unlabeled_background = UnlabeledBackground::confident;

  double eta_p = 0.9995;
  double eta_g = 0.9995;
  std::size_t generations = 10;
  std::size_t steps_per_generation = 500;
  std::size_t burn_in_steps = 500;
  std::size_t labeled_per_batch = 4;
  std::size_t unlabeled_per_batch = 16;
  std::size_t threshold_refresh = 100;
  double init_scale = 0.01;
  std::uint64_t seed = 1;

  void validate() const;
};

struct GenerationRecord {
  std::size_t generation = 0;
  std::size_t step = 0;  // optimizer steps completed so far
  AccuracyReport eval;
  std::optional<PseudoLabelQuality> pseudo;  // absent for the burn-in generation
  Vector weights;
  Vector weights_labeled;
  ThresholdTable table;
  double epsilon = 0.0;
  std::vector<std::size_t> image_counts;
  std::vector<double> class_rates;
  std::size_t epoch_unlabeled = 0;  // realized unlabeled epoch length
  double mean_labeled_loss = 0.0;
  double mean_unlabeled_loss = 0.0;
  double mean_align_loss = 0.0;
};

struct RunResult {
  std::vector<GenerationRecord> records;
  std::vector<SamplingReport> sampling;
};

// Endless shuffled stream of image indices. With per-image rates each image
// appears realize_repeats(rate) times per pass; without, exactly once.
class ImageStream {
public:
  ImageStream(std::size_t num_images, std::optional<std::vector<double>> rates = std::nullopt);

  std::size_t next(std::mt19937_64& rng);
  // Length of the most recently realized pass.
  std::size_t pass_length() const { return order_.size(); }
  // Realizes the first pass now so pass_length() is meaningful.
  void prime(std::mt19937_64& rng);

private:
  void refill(std::mt19937_64& rng);

  std::size_t num_images_;
  std::optional<std::vector<double>> rates_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  bool primed_ = false;
};

// Failure inside run_generations, tagged with where it happened.
class RunError : public std::runtime_error {
public:
  RunError(std::size_t generation, std::size_t step, const std::string& what);
  std::size_t generation;
  std::size_t step;
};

// Teacher predictions for every proposal of the pool, with boxes attached.
std::vector<std::vector<Prediction>> predict_images(const LinearClassifier& teacher, const ImageSet& pool);

PseudoLabelSet generate_pseudo_labels(const LinearClassifier& teacher, const ImageSet& pool,
                                      const ThresholdTable& table);

// Burn-in on labeled data, then `generations` rounds of pseudo labelling,
// resampling and teacher-student training. Errors are rethrown with the
// generation and step where they occurred.
RunResult run_generations(const HarnessConfig& cfg);
RunResult run_generations(const HarnessConfig& cfg, const SyntheticTask& task);

}  // namespace gbs::sim
