#include "gbs/sim/harness.hpp"

#include "gbs/errors.hpp"
#include "gbs/grad_ledger.hpp"
#include "gbs/rng.hpp"

#include <algorithm>
#include <string>

namespace gbs::sim {

std::string_view to_string(Resampling r) { return r == Resampling::crs ? "crs" : "naive"; }

Resampling parse_resampling(std::string_view name) {
  if (name == "crs") return Resampling::crs;
  if (name == "naive") return Resampling::naive;
  throw InputError("unknown resampling '" + std::string(name) + "' (crs|naive)");
}

std::string_view to_string(PseudoRefresh r) { return r == PseudoRefresh::generation ? "generation" : "step"; }

PseudoRefresh parse_pseudo_refresh(std::string_view name) {
  if (name == "generation") return PseudoRefresh::generation;
  if (name == "step") return PseudoRefresh::step;
  throw InputError("unknown pseudo-label refresh '" + std::string(name) + "' (generation|step)");
}

std::string_view to_string(UnlabeledBackground b) { return b == UnlabeledBackground::all ? "all" : "confident"; }

UnlabeledBackground parse_unlabeled_background(std::string_view name) {
  if (name == "all") return UnlabeledBackground::all;
  if (name == "confident") return UnlabeledBackground::confident;
  throw InputError("unknown unlabeled background policy '" + std::string(name) + "' (all|confident)");
}

std::vector<ClassIndex> unlabeled_targets(std::span<const Prediction> predictions, std::span<const PseudoLabel> kept,
                                          std::size_t num_foreground, UnlabeledBackground policy) {
  const auto bg = static_cast<ClassIndex>(num_foreground);
  std::vector<ClassIndex> targets(predictions.size(), bg);
  if (policy == UnlabeledBackground::confident) {
    for (std::size_t j = 0; j < predictions.size(); ++j) {
      const auto& p = predictions[j];
      if (p.cls != bg && p.score > p.background_score) targets[j] = -1;
    }
  }
  for (const auto& pl : kept) targets.at(pl.proposal) = pl.cls;
  return targets;
}

void HarnessConfig::validate() const {
  task.validate();
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(eta_p) || !unit(eta_g)) throw InputError("config: eta_p and eta_g must lie in [0, 1]");
  if (generations == 0 || steps_per_generation == 0) throw InputError("config: generations and steps must be positive");
  if (labeled_per_batch == 0 || unlabeled_per_batch == 0) throw InputError("config: batch sizes must be positive");
  if (threshold_refresh == 0) throw InputError("config: threshold_refresh must be positive");
  if (!(thresholds.theta_base > 0.0 && thresholds.theta_base < 1.0)) throw InputError("config: theta_base in (0,1)");
  if (!(solver.beta > 0.0 && solver.beta <= 1.0)) throw InputError("config: beta must lie in (0, 1]");
  if (!(sgd.lr > 0.0) || !(solver.lr_align > 0.0)) throw InputError("config: learning rates must be positive");
  if (!(rebalance.gamma > 0.0)) throw InputError("config: gamma must be positive");
  if (!(loss.gamma_focal >= 0.0)) throw InputError("config: gamma_focal must be nonnegative");
}

ImageStream::ImageStream(std::size_t num_images, std::optional<std::vector<double>> rates)
    : num_images_(num_images), rates_(std::move(rates)) {
  if (num_images == 0) throw InputError("ImageStream: no images");
  if (rates_ && rates_->size() != num_images) throw InputError("ImageStream: one rate per image required");
}

void ImageStream::refill(std::mt19937_64& rng) {
  order_.clear();
  for (std::size_t i = 0; i < num_images_; ++i) {
    const std::size_t k = rates_ ? realize_repeats((*rates_)[i], rng) : 1;
    order_.insert(order_.end(), k, i);
  }
  std::shuffle(order_.begin(), order_.end(), rng);
  pos_ = 0;
}

void ImageStream::prime(std::mt19937_64& rng) {
  if (!primed_) {
    refill(rng);
    primed_ = true;
  }
}

std::size_t ImageStream::next(std::mt19937_64& rng) {
  prime(rng);
  if (pos_ == order_.size()) refill(rng);
  return order_[pos_++];
}

RunError::RunError(std::size_t gen, std::size_t st, const std::string& what)
    : std::runtime_error("generation " + std::to_string(gen) + ", step " + std::to_string(st) + ": " + what),
      generation(gen),
      step(st) {}

std::vector<std::vector<Prediction>> predict_images(const LinearClassifier& teacher, const ImageSet& pool) {
  const auto flat = predict(teacher, pool.features);
  std::vector<std::vector<Prediction>> out(pool.num_images());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].reserve(pool.proposals_per_image);
    for (std::size_t j = 0; j < pool.proposals_per_image; ++j) {
      const auto row = static_cast<std::size_t>(pool.row(i, j));
      Prediction p = flat[row];
      if (row < pool.boxes.size()) p.box = pool.boxes[row];
      out[i].push_back(p);
    }
  }
  return out;
}

PseudoLabelSet generate_pseudo_labels(const LinearClassifier& teacher, const ImageSet& pool,
                                      const ThresholdTable& table) {
  return filter_pseudo_labels(predict_images(teacher, pool), table);
}

namespace {

class Trainer {
public:
  Trainer(const HarnessConfig& cfg, const SyntheticTask& task)
      : cfg_(cfg),
        task_(task),
        n_(task.num_foreground()),
        init_rng_(substream(cfg.seed, "init")),
        sampler_rng_(substream(cfg.seed, "sampler")),
        student_(task.num_classes(), task.spec.feature_dim),
        ledger_(task.num_classes(), cfg.eta_g),
        weights_(ClassWeights::uniform(task.num_classes(), cfg.solver.beta)),
        history_(n_, cfg.thresholds.window),
        table_(ThresholdTable::fixed(n_, cfg.thresholds.theta_base)),
        ones_(Vector::Ones(static_cast<Eigen::Index>(task.num_classes()))) {
    student_.init_random(init_rng_, cfg.init_scale);
    teacher_.model = student_;
    teacher_.eta_p = cfg.eta_p;
    for (std::size_t i = 0; i < task.labeled.num_images(); ++i) {
      labeled_classes_.push_back(task.labeled.image_classes(i, n_));
    }
    std::optional<std::vector<double>> rfs;
    if (cfg.modules.crs) {
      const auto freq = class_image_frequencies(labeled_classes_, n_);
      rfs = labeled_rfs(labeled_classes_, freq, cfg.rebalance.rfs_tau);
    }
    labeled_stream_.emplace(task.labeled.num_images(), std::move(rfs));
  }

  RunResult run() {
    RunResult result;
    burn_in();
    result.records.push_back(snapshot(0, std::nullopt, SamplingReport{}));
    for (std::size_t t = 1; t <= cfg_.generations; ++t) {
      generation_ = t;
      SamplingReport report;
      auto quality = generation(t, report);
      result.records.push_back(snapshot(t, std::move(quality), report));
      result.sampling.push_back(std::move(report));
    }
    return result;
  }

  std::size_t generation_index() const { return generation_; }
  std::size_t step_index() const { return step_; }

private:
  Vector foreground_weights() const { return weights_.w.head(static_cast<Eigen::Index>(n_)); }

  void refresh_table() {
    table_ = make_threshold_table(cfg_.modules.thresholds, foreground_weights(), history_, cfg_.thresholds);
  }

  void add_image(TrainingBatch& b, const ImageSet& set, std::size_t image, ProposalSource src,
                 const std::vector<ClassIndex>* targets) {
    for (std::size_t j = 0; j < set.proposals_per_image; ++j) {
      const auto row = set.row(image, j);
      const ClassIndex c = targets ? (*targets)[j] : set.labels[static_cast<std::size_t>(row)];
      if (c < 0) continue;
      b.features.row(static_cast<Eigen::Index>(b.labels.size())) = set.features.row(row);
      b.labels.push_back(c);
      b.source.push_back(src);
    }
  }

  TrainingBatch make_batch(std::size_t n_labeled, std::size_t n_unlabeled) {
    const std::size_t ppi = task_.spec.proposals_per_image;
    TrainingBatch b;
    b.features.resize(static_cast<Eigen::Index>((n_labeled + n_unlabeled) * ppi),
                      static_cast<Eigen::Index>(task_.spec.feature_dim));
    b.labels.reserve((n_labeled + n_unlabeled) * ppi);
    b.num_images = n_labeled + n_unlabeled;
    for (std::size_t k = 0; k < n_labeled; ++k) {
      add_image(b, task_.labeled, labeled_stream_->next(sampler_rng_), ProposalSource::labeled, nullptr);
    }
    for (std::size_t k = 0; k < n_unlabeled; ++k) {
      const std::size_t img = unlabeled_stream_->next(sampler_rng_);
      std::vector<ClassIndex> targets;
      if (cfg_.pseudo_refresh == PseudoRefresh::step) {
        const Matrix feats = task_.unlabeled.features.middleRows(task_.unlabeled.row(img, 0),
                                                                 static_cast<Eigen::Index>(ppi));
        const auto preds = predict(teacher_.model, feats);
        const auto kept = filter_pseudo_labels(std::span<const Prediction>(preds), table_);
        targets = unlabeled_targets(preds, kept, n_, cfg_.unlabeled_background);
      } else {
        targets = unlabeled_targets(predictions_[img], pseudo_[img], n_, cfg_.unlabeled_background);
      }
      add_image(b, task_.unlabeled, img, ProposalSource::unlabeled, &targets);
    }
    b.features.conservativeResize(static_cast<Eigen::Index>(b.labels.size()), Eigen::NoChange);
    return b;
  }

  void train_step(const TrainingBatch& batch) {
    StepWeights sw{ones_, ones_};
    if (cfg_.modules.gbr) sw = {weights_.w_labeled, weights_.w};
    const StepResult r = student_step(student_, batch, sw, cfg_.loss, cfg_.sgd);
    labeled_loss_ += r.labeled_loss;
    unlabeled_loss_ += r.unlabeled_loss;
    if (cfg_.modules.solver_active()) {
      ledger_.accumulate(batch.labels, r.raw.grads);
      ledger_.ema_update();
      const JacobiTarget target = jacobi_target(ledger_.ema(), weights_.w, cfg_.solver);
      align_loss_ += align_loss(weights_.a, target);
      weights_ = align_step(weights_, target, cfg_.solver.lr_align);
    }
    teacher_ema_update(teacher_, student_);
    ++step_;
    ++steps_in_generation_;
    if (step_ % cfg_.threshold_refresh == 0) refresh_table();
  }

  void reset_loss_means() {
    labeled_loss_ = unlabeled_loss_ = align_loss_ = 0.0;
    steps_in_generation_ = 0;
  }

  void burn_in() {
    generation_ = 0;
    reset_loss_means();
    const std::size_t per_batch = cfg_.labeled_per_batch + cfg_.unlabeled_per_batch;
    for (std::size_t s = 0; s < cfg_.burn_in_steps; ++s) train_step(make_batch(per_batch, 0));
    // The first pseudo labels come from the burned-in student.
    teacher_.model = student_;
  }

  std::optional<PseudoLabelQuality> generation(std::size_t t, SamplingReport& report) {
    predictions_ = predict_images(teacher_.model, task_.unlabeled);
    for (const auto& img : predictions_) {
      for (const auto& p : img) {
        if (static_cast<std::size_t>(p.cls) < n_) history_.push(p.cls, p.score);
      }
    }
    refresh_table();
    pseudo_ = filter_pseudo_labels(predictions_, table_);
    const PseudoLabelSet& pseudo = pseudo_;
    auto quality = pseudo_label_pr(pseudo, task_.unlabeled, n_);

    const std::size_t n_total = task_.labeled.num_images() + task_.unlabeled.num_images();
    report.generation = t;
    report.epsilon = cfg_.modules.crs ? epsilon_schedule(cfg_.rebalance.gamma, t, cfg_.generations) : 0.0;
    report.image_counts = count_class_images(labeled_classes_, pseudo, n_);
    report.class_rates = class_repeat_rates(report.image_counts, report.epsilon, n_total, cfg_.rebalance.s_cap);

    std::optional<std::vector<double>> rates;
    if (cfg_.modules.crs) {
      rates.emplace(pseudo.size());
      for (std::size_t i = 0; i < pseudo.size(); ++i) {
        (*rates)[i] = cfg_.resampling == Resampling::crs
                          ? image_repeat_rate(pseudo[i], report.class_rates, table_)
                          : naive_image_repeat_rate(pseudo[i], report.class_rates);
      }
    }
    unlabeled_stream_.emplace(task_.unlabeled.num_images(), std::move(rates));
    unlabeled_stream_->prime(sampler_rng_);
    epoch_unlabeled_ = unlabeled_stream_->pass_length();

    reset_loss_means();
    for (std::size_t s = 0; s < cfg_.steps_per_generation; ++s) {
      train_step(make_batch(cfg_.labeled_per_batch, cfg_.unlabeled_per_batch));
    }
    return quality;
  }

  GenerationRecord snapshot(std::size_t t, std::optional<PseudoLabelQuality> quality, const SamplingReport& report) {
    GenerationRecord r;
    r.generation = t;
    r.step = step_;
    r.eval = eval_balanced_accuracy(teacher_.model, task_.eval, n_, task_.spec.n_majority);
    r.pseudo = std::move(quality);
    r.weights = weights_.w;
    r.weights_labeled = weights_.w_labeled;
    r.table = table_;
    r.epsilon = report.epsilon;
    r.image_counts = report.image_counts;
    r.class_rates = report.class_rates;
    r.epoch_unlabeled = t == 0 ? 0 : epoch_unlabeled_;
    if (steps_in_generation_) {
      const double k = static_cast<double>(steps_in_generation_);
      r.mean_labeled_loss = labeled_loss_ / k;
      r.mean_unlabeled_loss = unlabeled_loss_ / k;
      r.mean_align_loss = align_loss_ / k;
    }
    return r;
  }

  const HarnessConfig& cfg_;
  const SyntheticTask& task_;
  std::size_t n_;
  std::mt19937_64 init_rng_;
  std::mt19937_64 sampler_rng_;
  LinearClassifier student_;
  TeacherState teacher_;
  GradientLedger ledger_;
  ClassWeights weights_;
  ScoreHistory history_;
  ThresholdTable table_;
  Vector ones_;
  std::vector<ImageClasses> labeled_classes_;
  std::optional<ImageStream> labeled_stream_;
  std::optional<ImageStream> unlabeled_stream_;
  std::vector<std::vector<Prediction>> predictions_;
  PseudoLabelSet pseudo_;
  std::size_t generation_ = 0;
  std::size_t step_ = 0;
  std::size_t steps_in_generation_ = 0;
  std::size_t epoch_unlabeled_ = 0;
  double labeled_loss_ = 0.0;
  double unlabeled_loss_ = 0.0;
  double align_loss_ = 0.0;
};

}  // namespace

RunResult run_generations(const HarnessConfig& cfg, const SyntheticTask& task) {
  cfg.validate();
  Trainer trainer(cfg, task);
  try {
    return trainer.run();
  } catch (const RunError&) {
    throw;
  } catch (const std::exception& e) {
    throw RunError(trainer.generation_index(), trainer.step_index(), e.what());
  }
}

RunResult run_generations(const HarnessConfig& cfg) {
  cfg.validate();
  SyntheticTaskSpec spec = cfg.task;
  spec.seed = cfg.seed;
  const SyntheticTask task = generate_task(spec);
  return run_generations(cfg, task);
}

}  // namespace gbs::sim
