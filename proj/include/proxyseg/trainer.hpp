#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "proxyseg/curriculum.hpp"
#include "proxyseg/label_map.hpp"
#include "proxyseg/metrics.hpp"
#include "proxyseg/model.hpp"
#include "proxyseg/rng.hpp"
#include "proxyseg/segpack.hpp"
#include "proxyseg/synth_data.hpp"

namespace proxyseg {

/// Training recipes, from the supervised lower bound through the full
/// curriculum, plus the supervised-on-target upper bound.
enum class TrainMode { source_only, self_train, weighted, easy_mining, full, target_oracle };

std::string_view mode_name(TrainMode mode);
std::optional<TrainMode> parse_mode(std::string_view name);
std::vector<std::string> mode_names();

struct ModeFeatures {
  bool uses_target = false;      // proxy-labeled target batches
  bool class_weights = false;    // loss weighting vector
  bool target_easy_mining = false;
  bool source_hard_mining = false;
};

ModeFeatures mode_features(TrainMode mode);

struct TrainConfig {
  CurriculumConfig curriculum;
  ModelConfig model;
  std::size_t batch_size = 8;
  std::size_t iterations_per_epoch = 200;
  TrainMode mode = TrainMode::full;
  std::uint64_t seed = 0;
  std::string source_pack = "data/source.segpack";
  std::string target_pack = "data/target.segpack";
  std::string val_pack = "data/val_target.segpack";
  std::string output_dir = "runs/default";
  AugmentOptions augment;

  void validate() const;
};

enum class Domain { source, target };

struct SegBatch {
  Tensor images;    // (N,C,crop,crop)
  LabelMap labels;  // ground truth for source; all ignore for target
  Domain domain = Domain::source;
};

/// Everything besides the model that determines the rest of a run.
struct RunState {
  int epoch = 0;
  std::uint64_t iteration = 0;
  RngStream batch_domain;
  RngStream batch_sample;
  RngStream augment;
  RngStream hard_mine;
  RngStream init;

  static RunState fresh(std::uint64_t seed);

  static std::vector<std::string> stream_names();
  std::vector<RngStream*> streams();
  std::vector<const RngStream*> streams() const;

  bool operator==(const RunState&) const = default;
};

struct OptimizerSettings {
  double lr_encoder = 0.0;
  double lr_decoder = 0.0;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

struct StepResult {
  double loss = 0.0;
  double agreement_fraction = 0.0;
  std::size_t retained_pixels = 0;
  bool updated = false;
  LabelMap predictions;  // argmax of the averaged logits
};

/// Draws the batch domain from Bernoulli(gamma), then `batch_size` images
/// uniformly with replacement from that domain's pack, each augmented.
SegBatch sample_batch(RunState& state, const SegPack& source, const SegPack& target, double gamma,
                      std::size_t batch_size, const AugmentOptions& augment);

/// Supervised step with source hard mining: agreed pixels are dropped with
/// probability rho, identically for both branches.
StepResult train_step_source(SegNet& model, const SegBatch& batch, const Tensor& class_weights,
                             const PenaltyOptions& penalty, double rho, RunState& state,
                             const OptimizerSettings& opt);

/// Self-training step on proxy labels from the averaged prediction. Easy
/// mining modes train only on agreed pixels; self_train and weighted use
/// every pixel. Class weights apply only in modes that enable them.
StepResult train_step_target(SegNet& model, const SegBatch& batch, const Tensor& class_weights,
                             const PenaltyOptions& penalty, TrainMode mode, RunState& state,
                             const OptimizerSettings& opt);

struct TrainingData {
  SegPack source;
  SegPack target;
  SegPack validation;  // labeled target-domain images
};

struct EpochSummary {
  int epoch = 0;
  double gamma = 0.0;
  double rho = 0.0;
  double lr_encoder = 0.0;
  double lr_decoder = 0.0;
  double loss = 0.0;
  double agreement_fraction = 0.0;
  std::size_t source_batches = 0;
  std::size_t target_batches = 0;
  ConfusionMatrix train_confusion{1};  // labeled batches only
};

/// One epoch at the schedule values of `state.epoch`; increments the epoch.
EpochSummary train_epoch(SegNet& model, const TrainingData& data, const TrainConfig& config, RunState& state);

struct EvalResult {
  ConfusionMatrix confusion{1};
  double agreement_fraction = 0.0;
  double loss = 0.0;
};

/// Full-image evaluation of the averaged prediction, no augmentation.
EvalResult evaluate(const SegNet& model, const SegPack& pack, std::size_t batch_size = 10);

/// Per-image argmax of the averaged logits and the branch agreement map.
struct Prediction {
  LabelMap labels;
  PixelMask agreement;
};
Prediction predict(const SegNet& model, const SegPack& pack, std::size_t first, std::size_t count);

// Metrics CSV: header and one row per epoch per phase.
std::string metrics_csv_header(std::size_t num_classes);
std::string metrics_csv_row(int epoch, std::string_view phase, TrainMode mode, const EpochSummary& schedule,
                            double loss, const ConfusionMatrix& confusion, double agreement_fraction);

struct EpochRecord {
  EpochSummary train;
  EvalResult validation;
};

/// A training run: model, run state and data, advanced one epoch at a time.
class Trainer {
 public:
  Trainer(TrainConfig config, TrainingData data);
  Trainer(TrainConfig config, TrainingData data, SegNet model, RunState state);

  bool finished() const { return state_.epoch >= config_.curriculum.e_max; }
  EpochRecord run_epoch();

  const TrainConfig& config() const { return config_; }
  const SegNet& model() const { return model_; }
  const RunState& state() const { return state_; }
  const TrainingData& data() const { return data_; }

 private:
  TrainConfig config_;
  TrainingData data_;
  SegNet model_;
  RunState state_;
};

}  // namespace proxyseg
