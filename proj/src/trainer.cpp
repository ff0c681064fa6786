#include "proxyseg/trainer.hpp"

#include <cmath>
#include <cstdio>

#include "proxyseg/mining.hpp"
#include "proxyseg/ops.hpp"
#include "proxyseg/optim.hpp"

namespace proxyseg {
namespace {

constexpr std::uint64_t kStreamTags[] = {0xd0, 0x5a, 0xa0, 0x4a, 0x1e};

struct ModeEntry {
  TrainMode mode;
  std::string_view name;
};

constexpr ModeEntry kModes[] = {
    {TrainMode::source_only, "source_only"}, {TrainMode::self_train, "self_train"},
    {TrainMode::weighted, "weighted"},       {TrainMode::easy_mining, "easy_mining"},
    {TrainMode::full, "full"},               {TrainMode::target_oracle, "target_oracle"},
};

std::size_t retained_count(const PixelMask& mask, const LabelMap& labels) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) n += mask[i] && labels.values[i] != kIgnoreLabel;
  return n;
}

PixelMask valid_pixels(const LabelMap& labels) {
  PixelMask m(labels.batch, labels.height, labels.width);
  for (std::size_t i = 0; i < labels.size(); ++i) m.set(i, labels.values[i] != kIgnoreLabel);
  return m;
}

void apply_update(SegNet& model, const OptimizerSettings& opt) {
  auto params = model.parameters();
  auto& velocity = model.velocity();
  const std::size_t enc = model.encoder_tensor_count();
  std::span<Tensor> p(params);
  std::span<Tensor> v(velocity);
  sgd_step(p.first(enc), v.first(enc), static_cast<float>(opt.lr_encoder), static_cast<float>(opt.momentum),
           static_cast<float>(opt.weight_decay));
  sgd_step(p.subspan(enc), v.subspan(enc), static_cast<float>(opt.lr_decoder), static_cast<float>(opt.momentum),
           static_cast<float>(opt.weight_decay));
}

// Shared tail of both step kinds: loss on the given targets, then one
// optimizer update unless the filtered set is empty and there is no penalty.
StepResult finish_step(SegNet& model, Tape<float>& tape, const BranchLogits<float>& logits, const LabelMap& targets,
                       const PixelMask& mask, const PixelMask& agreement, const PixelMask& valid,
                       const Tensor& class_weights, const PenaltyOptions& penalty, const OptimizerSettings& opt) {
  StepResult result;
  result.agreement_fraction = agreement_fraction(agreement, valid);
  result.retained_pixels = retained_count(mask, targets);
  result.predictions = argmax_labels(logits.logits_avg);
  auto loss = joint_loss(tape, model, logits, targets, mask, mask, class_weights, penalty);
  result.loss = loss.item();
  if (result.retained_pixels == 0 && penalty.beta == 0.0) return result;
  backward(loss, tape);
  apply_update(model, opt);
  result.updated = true;
  return result;
}

Tensor images_tensor(const std::vector<Sample>& samples) {
  const auto& s0 = samples.front();
  const std::size_t img = s0.channels * s0.height * s0.width;
  std::vector<float> values(samples.size() * img);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::copy(samples[i].image.begin(), samples[i].image.end(), values.begin() + static_cast<std::ptrdiff_t>(i * img));
  }
  return Tensor::from_data({samples.size(), s0.channels, s0.height, s0.width}, std::move(values));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string_view mode_name(TrainMode mode) {
  for (const auto& e : kModes) {
    if (e.mode == mode) return e.name;
  }
  return "unknown";
}

std::optional<TrainMode> parse_mode(std::string_view name) {
  for (const auto& e : kModes) {
    if (e.name == name) return e.mode;
  }
  return std::nullopt;
}

std::vector<std::string> mode_names() {
  std::vector<std::string> out;
  for (const auto& e : kModes) out.emplace_back(e.name);
  return out;
}

ModeFeatures mode_features(TrainMode mode) {
  switch (mode) {
    case TrainMode::source_only:
    case TrainMode::target_oracle:
      return {};
    case TrainMode::self_train:
      return {true, false, false, false};
    case TrainMode::weighted:
      return {true, true, false, false};
    case TrainMode::easy_mining:
      return {true, true, true, false};
    case TrainMode::full:
      return {true, true, true, true};
  }
  return {};
}

void TrainConfig::validate() const {
  curriculum.validate();
  model.validate();
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (iterations_per_epoch == 0) throw ConfigError("train: iterations_per_epoch must be positive");
  if (augment.crop == 0 || augment.crop % 4 != 0) throw ConfigError("train: crop size must be a multiple of 4");
  class_weight_vector(curriculum, model.num_classes);
}

RunState RunState::fresh(std::uint64_t seed) {
  RunState s;
  auto streams = s.streams();
  for (std::size_t i = 0; i < streams.size(); ++i) *streams[i] = RngStream(mix_seed(seed, kStreamTags[i]));
  return s;
}

std::vector<std::string> RunState::stream_names() {
  return {"batch_domain", "batch_sample", "augment", "hard_mine", "init"};
}

std::vector<RngStream*> RunState::streams() {
  return {&batch_domain, &batch_sample, &augment, &hard_mine, &init};
}

std::vector<const RngStream*> RunState::streams() const {
  return {&batch_domain, &batch_sample, &augment, &hard_mine, &init};
}

SegBatch sample_batch(RunState& state, const SegPack& source, const SegPack& target, double gamma,
                      std::size_t batch_size, const AugmentOptions& augment_options) {
  if (source.size() == 0 || target.size() == 0) throw ConfigError("sample_batch: empty pack");
  if (batch_size == 0) throw ConfigError("sample_batch: batch_size must be positive");
  SegBatch batch;
  batch.domain = state.batch_domain.bernoulli(gamma) ? Domain::source : Domain::target;
  const SegPack& pack = batch.domain == Domain::source ? source : target;
  std::vector<Sample> samples;
  samples.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto index = state.batch_sample.below(pack.size());
    samples.push_back(augment(pack.sample(index), augment_options, state.augment));
  }
  const std::size_t crop = augment_options.crop;
  batch.images = images_tensor(samples);
  batch.labels = LabelMap(batch_size, crop, crop, kIgnoreLabel);
  if (batch.domain == Domain::source) {
    for (std::size_t i = 0; i < batch_size; ++i) {
      std::copy(samples[i].labels.begin(), samples[i].labels.end(), batch.labels.plane(i).begin());
    }
  }
  return batch;
}

StepResult train_step_source(SegNet& model, const SegBatch& batch, const Tensor& class_weights,
                             const PenaltyOptions& penalty, double rho, RunState& state,
                             const OptimizerSettings& opt) {
  if (batch.domain != Domain::source) throw ConfigError("train_step_source: batch is not from the source domain");
  Tape<float> tape;
  const auto logits = forward(tape, model, batch.images);
  const auto agreement = agreement_map(logits.logits1, logits.logits2);
  const auto mask = source_hard_mask(agreement, rho, state.hard_mine);
  return finish_step(model, tape, logits, batch.labels, mask, agreement, valid_pixels(batch.labels), class_weights,
                     penalty, opt);
}

StepResult train_step_target(SegNet& model, const SegBatch& batch, const Tensor& class_weights,
                             const PenaltyOptions& penalty, TrainMode mode, RunState& state,
                             const OptimizerSettings& opt) {
  (void)state;
  const auto features = mode_features(mode);
  if (!features.uses_target) {
    throw ConfigError("train_step_target: mode " + std::string(mode_name(mode)) + " does not self-train");
  }
  if (batch.domain != Domain::target) throw ConfigError("train_step_target: batch is not from the target domain");
  Tape<float> tape;
  const auto logits = forward(tape, model, batch.images);
  const auto agreement = agreement_map(logits.logits1, logits.logits2);
  const PixelMask all(agreement.batch, agreement.height, agreement.width, true);

  ProxyLabels targets;
  PixelMask mask;
  if (features.target_easy_mining) {
    targets = proxy_labels(logits.logits_avg, agreement);
    mask = target_easy_mask(agreement);
  } else {
    targets = argmax_labels(logits.logits_avg);
    mask = all;
  }
  const Tensor weights =
      features.class_weights ? class_weights : Tensor::full({class_weights.numel()}, 1.0f);
  return finish_step(model, tape, logits, targets, mask, agreement, all, weights, penalty, opt);
}

EpochSummary train_epoch(SegNet& model, const TrainingData& data, const TrainConfig& config, RunState& state) {
  const auto& cur = config.curriculum;
  const auto features = mode_features(config.mode);
  const int e = state.epoch;

  EpochSummary summary;
  summary.epoch = e;
  summary.gamma = features.uses_target ? gamma_at(cur, e) : 1.0;
  summary.rho = features.source_hard_mining ? rho_at(cur, e) : 0.0;
  summary.lr_encoder = lr_at(cur, e, ParamGroup::encoder);
  summary.lr_decoder = lr_at(cur, e, ParamGroup::decoder);
  summary.train_confusion = ConfusionMatrix(config.model.num_classes);

  const OptimizerSettings opt{summary.lr_encoder, summary.lr_decoder, cur.momentum, cur.weight_decay};
  const auto penalty = cur.penalty();
  const Tensor configured_weights = class_weight_vector(cur, config.model.num_classes);
  const Tensor weights =
      features.class_weights ? configured_weights : Tensor::full({config.model.num_classes}, 1.0f);
  const SegPack& labeled = config.mode == TrainMode::target_oracle ? data.target : data.source;

  double loss_sum = 0.0;
  double agreement_sum = 0.0;
  for (std::size_t it = 0; it < config.iterations_per_epoch; ++it) {
    const auto batch = sample_batch(state, labeled, data.target, summary.gamma, config.batch_size, config.augment);
    StepResult step;
    if (batch.domain == Domain::source) {
      step = train_step_source(model, batch, weights, penalty, summary.rho, state, opt);
      summary.train_confusion.update(step.predictions, batch.labels);
      ++summary.source_batches;
    } else {
      step = train_step_target(model, batch, configured_weights, penalty, config.mode, state, opt);
      ++summary.target_batches;
    }
    loss_sum += step.loss;
    agreement_sum += step.agreement_fraction;
    ++state.iteration;
  }
  summary.loss = loss_sum / static_cast<double>(config.iterations_per_epoch);
  summary.agreement_fraction = agreement_sum / static_cast<double>(config.iterations_per_epoch);
  ++state.epoch;
  return summary;
}

Prediction predict(const SegNet& model, const SegPack& pack, std::size_t first, std::size_t count) {
  if (first + count > pack.size()) throw ConfigError("predict: image range outside pack");
  std::vector<Sample> samples;
  for (std::size_t i = first; i < first + count; ++i) samples.push_back(pack.sample(i));
  Tape<float> tape(Tape<float>::Mode::inference);
  const auto logits = forward(tape, model, images_tensor(samples));
  return {argmax_labels(logits.logits_avg), agreement_map(logits.logits1, logits.logits2)};
}

EvalResult evaluate(const SegNet& model, const SegPack& pack, std::size_t batch_size) {
  if (pack.size() == 0) throw ConfigError("evaluate: empty pack");
  if (pack.num_classes != model.config().num_classes) throw ConfigError("evaluate: pack and model disagree on K");
  EvalResult result;
  result.confusion = ConfusionMatrix(model.config().num_classes);
  const Tensor ones = Tensor::full({model.config().num_classes}, 1.0f);
  std::size_t agreed = 0;
  std::size_t pixels = 0;
  double loss_sum = 0.0;
  std::size_t loss_pixels = 0;
  for (std::size_t first = 0; first < pack.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, pack.size() - first);
    std::vector<Sample> samples;
    for (std::size_t i = first; i < first + count; ++i) samples.push_back(pack.sample(i));
    LabelMap truth(count, pack.height, pack.width);
    for (std::size_t i = 0; i < count; ++i) {
      std::copy(samples[i].labels.begin(), samples[i].labels.end(), truth.plane(i).begin());
    }
    Tape<float> tape(Tape<float>::Mode::inference);
    const auto logits = forward(tape, model, images_tensor(samples));
    const auto agreement = agreement_map(logits.logits1, logits.logits2);
    result.confusion.update(argmax_labels(logits.logits_avg), truth);
    agreed += agreement.count();
    pixels += agreement.size();
    const auto valid = valid_pixels(truth);
    const std::size_t n_valid = valid.count();
    if (n_valid > 0) {
      const auto loss = masked_weighted_cross_entropy(tape, logits.logits_avg, truth, valid, ones);
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(n_valid);
      loss_pixels += n_valid;
    }
  }
  result.agreement_fraction = static_cast<double>(agreed) / static_cast<double>(pixels);
  result.loss = loss_pixels ? loss_sum / static_cast<double>(loss_pixels) : 0.0;
  return result;
}

std::string metrics_csv_header(std::size_t num_classes) {
  std::string h = "epoch,phase,mode,gamma,rho,lr_encoder,lr_decoder,loss,pixel_acc,miou";
  for (std::size_t k = 0; k < num_classes; ++k) h += ",iou_" + std::to_string(k);
  h += ",agreement_fraction\n";
  return h;
}

std::string metrics_csv_row(int epoch, std::string_view phase, TrainMode mode, const EpochSummary& schedule,
                            double loss, const ConfusionMatrix& confusion, double agreement_fraction) {
  const bool empty = confusion.total() == 0;
  std::string row = std::to_string(epoch) + "," + std::string(phase) + "," + std::string(mode_name(mode)) + ",";
  row += format_number(schedule.gamma) + "," + format_number(schedule.rho) + "," +
         format_number(schedule.lr_encoder) + "," + format_number(schedule.lr_decoder) + "," + format_number(loss) +
         ",";
  row += format_number(empty ? NAN : confusion.pixel_accuracy()) + ",";
  row += format_number(empty ? NAN : confusion.mean_iou());
  for (std::size_t k = 0; k < confusion.num_classes(); ++k) {
    const auto v = confusion.iou(k);
    row += "," + format_number(v ? *v : NAN);
  }
  row += "," + format_number(agreement_fraction) + "\n";
  return row;
}

Trainer::Trainer(TrainConfig config, TrainingData data)
    : config_(std::move(config)), data_(std::move(data)), model_(config_.model), state_(RunState::fresh(config_.seed)) {
  config_.validate();
}

Trainer::Trainer(TrainConfig config, TrainingData data, SegNet model, RunState state)
    : config_(std::move(config)), data_(std::move(data)), model_(std::move(model)), state_(std::move(state)) {
  config_.validate();
  if (!(model_.config() == config_.model)) throw ConfigError("resume: checkpoint model config differs from run config");
}

EpochRecord Trainer::run_epoch() {
  if (finished()) throw ConfigError("run already completed all epochs");
  EpochRecord record;
  record.train = train_epoch(model_, data_, config_, state_);
  record.validation = evaluate(model_, data_.validation);
  return record;
}

}  // namespace proxyseg
