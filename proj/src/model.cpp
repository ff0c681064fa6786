#include "proxyseg/model.hpp"

#include <cmath>

#include "proxyseg/errors.hpp"
#include "proxyseg/ops.hpp"
#include "proxyseg/rng.hpp"

namespace proxyseg {
namespace {

constexpr std::uint64_t kInitStreamTag = 0x1a17;
constexpr double kCosineEps = 1e-8;

template <typename T>
ConvLayer<T> he_conv(RngStream& rng, std::size_t out_ch, std::size_t in_ch, std::size_t k) {
  const std::size_t fan_in = in_ch * k * k;
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<T> w(out_ch * fan_in);
  for (auto& v : w) v = static_cast<T>(stddev * rng.normal());
  return {BasicTensor<T>::from_data({out_ch, in_ch, k, k}, std::move(w), true),
          BasicTensor<T>::zeros({out_ch}, true)};
}

template <typename T>
ConvLayer<T> clone_layer(const ConvLayer<T>& layer) {
  return {layer.weight.clone(), layer.bias.clone()};
}

template <typename T>
DecoderBranch<T> clone_branch(const DecoderBranch<T>& b) {
  return {clone_layer(b.reduce_pool2), clone_layer(b.reduce_pool1), clone_layer(b.classifier)};
}

template <typename T>
void append_layer(std::vector<BasicTensor<T>>& out, const ConvLayer<T>& layer) {
  out.push_back(layer.weight);
  out.push_back(layer.bias);
}

template <typename T>
BasicTensor<T> conv_relu(Tape<T>& tape, const BasicTensor<T>& x, const ConvLayer<T>& layer, std::size_t stride,
                         std::size_t padding) {
  return relu(tape, conv2d(tape, x, layer.weight, layer.bias, stride, padding));
}

template <typename T>
BasicTensor<T> branch_forward(Tape<T>& tape, const DecoderBranch<T>& branch, const BasicTensor<T>& features) {
  const std::size_t fh = features.dim(2);
  const std::size_t fw = features.dim(3);
  auto pooled2 = conv_relu(tape, adaptive_avg_pool(tape, features, 2, 2), branch.reduce_pool2, 1, 0);
  auto pooled1 = conv_relu(tape, adaptive_avg_pool(tape, features, 1, 1), branch.reduce_pool1, 1, 0);
  const std::array<BasicTensor<T>, 3> parts{
      features,
      upsample(tape, pooled2, fh / 2, fw / 2, UpsampleMode::nearest),
      upsample(tape, pooled1, fh, fw, UpsampleMode::nearest),
  };
  auto context = concat_channels(tape, std::span<const BasicTensor<T>>(parts));
  auto logits = conv2d(tape, context, branch.classifier.weight, branch.classifier.bias, 1, 0);
  return upsample(tape, logits, 2, UpsampleMode::bilinear);
}

}  // namespace

void ModelConfig::validate() const {
  if (in_channels == 0) throw ConfigError("model: in_channels must be positive");
  if (base_width == 0 || base_width % 4 != 0) throw ConfigError("model: base_width must be a positive multiple of 4");
  if (num_classes < 2) throw ConfigError("model: num_classes must be at least 2");
  if (num_classes > 254) throw ConfigError("model: num_classes must fit below the ignore label");
}

template <typename T>
BasicSegNet<T>::BasicSegNet(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t c = config_.in_channels;
  const std::size_t fw = config_.base_width;
  const std::size_t k = config_.num_classes;

  RngStream enc_rng(mix_seed(config_.seed, kInitStreamTag));
  encoder_[0] = he_conv<T>(enc_rng, fw, c, 3);
  encoder_[1] = he_conv<T>(enc_rng, fw, fw, 3);
  encoder_[2] = he_conv<T>(enc_rng, 2 * fw, fw, 3);
  encoder_[3] = he_conv<T>(enc_rng, 2 * fw, 2 * fw, 3);
  for (std::size_t b = 0; b < kBranches; ++b) {
    RngStream rng(mix_seed(config_.seed ^ (b + 1), kInitStreamTag));
    branches_[b].reduce_pool2 = he_conv<T>(rng, fw / 2, 2 * fw, 1);
    branches_[b].reduce_pool1 = he_conv<T>(rng, fw / 2, 2 * fw, 1);
    branches_[b].classifier = he_conv<T>(rng, k, 3 * fw, 1);
  }
  for (const auto& p : parameters()) velocity_.push_back(BasicTensor<T>::zeros(p.shape()));
}

template <typename T>
BasicSegNet<T>::BasicSegNet(const BasicSegNet& other) {
  deep_copy_from(other);
}

template <typename T>
BasicSegNet<T>& BasicSegNet<T>::operator=(const BasicSegNet& other) {
  if (this != &other) deep_copy_from(other);
  return *this;
}

template <typename T>
void BasicSegNet<T>::deep_copy_from(const BasicSegNet& other) {
  config_ = other.config_;
  for (std::size_t i = 0; i < kEncoderLayers; ++i) encoder_[i] = clone_layer(other.encoder_[i]);
  for (std::size_t b = 0; b < kBranches; ++b) branches_[b] = clone_branch(other.branches_[b]);
  velocity_.clear();
  for (const auto& v : other.velocity_) velocity_.push_back(v.clone());
}

template <typename T>
std::vector<BasicTensor<T>> BasicSegNet<T>::parameters() const {
  std::vector<BasicTensor<T>> out;
  for (const auto& layer : encoder_) append_layer(out, layer);
  for (const auto& b : branches_) {
    append_layer(out, b.reduce_pool2);
    append_layer(out, b.reduce_pool1);
    append_layer(out, b.classifier);
  }
  return out;
}

template <typename T>
std::vector<std::string> BasicSegNet<T>::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < kEncoderLayers; ++i) {
    names.push_back("encoder." + std::to_string(i) + ".weight");
    names.push_back("encoder." + std::to_string(i) + ".bias");
  }
  for (std::size_t b = 0; b < kBranches; ++b) {
    const std::string prefix = "branch" + std::to_string(b + 1) + ".";
    for (const char* layer : {"reduce_pool2", "reduce_pool1", "classifier"}) {
      names.push_back(prefix + layer + ".weight");
      names.push_back(prefix + layer + ".bias");
    }
  }
  return names;
}

template <typename T>
std::size_t BasicSegNet<T>::encoder_parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : encoder_) n += layer.weight.numel() + layer.bias.numel();
  return n;
}

template <typename T>
std::size_t BasicSegNet<T>::branch_parameter_count(std::size_t b) const {
  std::size_t n = 0;
  for (const auto& t : decoder_weight_tensors(branches_.at(b), true)) n += t.numel();
  return n;
}

template <typename T>
void BasicSegNet<T>::copy_branch(std::size_t from, std::size_t to) {
  const auto src = decoder_weight_tensors(branches_.at(from), true);
  auto dst = decoder_weight_tensors(branches_.at(to), true);
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto s = src[i].data();
    std::copy(s.begin(), s.end(), dst[i].data().begin());
  }
}

template <typename T>
BranchLogits<T> forward(Tape<T>& tape, const BasicSegNet<T>& model, const BasicTensor<T>& images) {
  if (images.rank() != 4) throw ShapeError("forward: images must be (N,C,H,W), got " + shape_to_string(images.shape()));
  if (images.dim(1) != model.config().in_channels) {
    throw ShapeError("forward: expected " + std::to_string(model.config().in_channels) + " channels, got " +
                     shape_to_string(images.shape()));
  }
  if (images.dim(2) % 4 != 0 || images.dim(3) % 4 != 0 || images.dim(2) == 0 || images.dim(3) == 0) {
    throw ShapeError("forward: spatial dims must be positive multiples of 4, got " + shape_to_string(images.shape()));
  }
  const auto& enc = model.encoder();
  auto x = conv_relu(tape, images, enc[0], 1, 1);
  x = conv_relu(tape, x, enc[1], 1, 1);
  x = conv_relu(tape, x, enc[2], 2, 1);
  auto features = conv_relu(tape, x, enc[3], 1, 1);

  BranchLogits<T> out;
  out.logits1 = branch_forward(tape, model.branch(0), features);
  out.logits2 = branch_forward(tape, model.branch(1), features);
  out.logits_avg = scale(tape, add(tape, out.logits1, out.logits2), T(0.5));
  return out;
}

template <typename T>
std::vector<BasicTensor<T>> decoder_weight_tensors(const DecoderBranch<T>& branch, bool include_biases) {
  std::vector<BasicTensor<T>> out;
  for (const auto* layer : {&branch.reduce_pool2, &branch.reduce_pool1, &branch.classifier}) {
    out.push_back(layer->weight);
    if (include_biases) out.push_back(layer->bias);
  }
  return out;
}

template <typename T>
std::pair<std::vector<T>, std::vector<T>> flatten_decoder_weights(const BasicSegNet<T>& model, bool include_biases) {
  std::pair<std::vector<T>, std::vector<T>> out;
  for (const auto& t : decoder_weight_tensors(model.branch(0), include_biases)) {
    out.first.insert(out.first.end(), t.data().begin(), t.data().end());
  }
  for (const auto& t : decoder_weight_tensors(model.branch(1), include_biases)) {
    out.second.insert(out.second.end(), t.data().begin(), t.data().end());
  }
  return out;
}

template <typename T>
BasicTensor<T> similarity_penalty(Tape<T>& tape, const BasicTensor<T>& w1, const BasicTensor<T>& w2, T beta,
                                  SimilarityMode mode) {
  if (w1.numel() != w2.numel()) {
    throw ShapeError("similarity_penalty: lengths " + std::to_string(w1.numel()) + " and " +
                     std::to_string(w2.numel()) + " differ");
  }
  auto a = w1.data();
  auto b = w2.data();
  double d = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    s1 += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    s2 += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  const double n1 = std::sqrt(s1);
  const double n2 = std::sqrt(s2);
  const double denom = n1 * n2 + kCosineEps;
  const double value = mode == SimilarityMode::dot ? static_cast<double>(beta) * d : static_cast<double>(beta) * d / denom;

  const bool needs_grad = tape.recording() && (w1.requires_grad() || w2.requires_grad());
  auto out = BasicTensor<T>::zeros({1}, needs_grad);
  out.data()[0] = static_cast<T>(value);
  if (!std::isfinite(value)) throw NumericError("non-finite value produced by similarity_penalty");

  if (needs_grad) {
    tape.record([w1, w2, out, beta, mode, d, n1, n2, denom]() mutable {
      const double g = static_cast<double>(out.grad()[0]) * static_cast<double>(beta);
      auto accumulate = [&](const BasicTensor<T>& self, const BasicTensor<T>& other, double self_norm, double other_norm) {
        if (!self.requires_grad()) return;
        auto gs = self.grad();
        auto xs = self.data();
        auto xo = other.data();
        for (std::size_t i = 0; i < gs.size(); ++i) {
          double v;
          if (mode == SimilarityMode::dot) {
            v = static_cast<double>(xo[i]);
          } else {
            v = static_cast<double>(xo[i]) / denom;
            if (self_norm > 0.0) v -= d / (denom * denom) * other_norm * static_cast<double>(xs[i]) / self_norm;
          }
          gs[i] += static_cast<T>(g * v);
        }
      };
      accumulate(w1, w2, n1, n2);
      accumulate(w2, w1, n2, n1);
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> similarity_penalty(Tape<T>& tape, const BasicSegNet<T>& model, const PenaltyOptions& options) {
  auto t1 = decoder_weight_tensors(model.branch(0), options.include_biases);
  auto t2 = decoder_weight_tensors(model.branch(1), options.include_biases);
  auto w1 = flatten_concat(tape, std::span<const BasicTensor<T>>(t1));
  auto w2 = flatten_concat(tape, std::span<const BasicTensor<T>>(t2));
  return similarity_penalty(tape, w1, w2, static_cast<T>(options.beta), options.mode);
}

template <typename T>
double decoder_cosine(const BasicSegNet<T>& model, bool include_biases) {
  const auto [w1, w2] = flatten_decoder_weights(model, include_biases);
  double d = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t i = 0; i < w1.size(); ++i) {
    d += static_cast<double>(w1[i]) * w2[i];
    s1 += static_cast<double>(w1[i]) * w1[i];
    s2 += static_cast<double>(w2[i]) * w2[i];
  }
  return d / (std::sqrt(s1) * std::sqrt(s2) + kCosineEps);
}

template <typename T>
LabelMap argmax_labels(const BasicTensor<T>& logits) {
  if (logits.rank() != 4) throw ShapeError("argmax_labels: expected (N,K,H,W), got " + shape_to_string(logits.shape()));
  const std::size_t n = logits.dim(0);
  const std::size_t k = logits.dim(1);
  const std::size_t plane = logits.dim(2) * logits.dim(3);
  LabelMap out(n, logits.dim(2), logits.dim(3));
  auto z = logits.data();
  for (std::size_t b = 0; b < n; ++b) {
    const T* base = z.data() + b * k * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c) {
        if (base[c * plane + p] > base[best * plane + p]) best = c;
      }
      out.values[b * plane + p] = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

template <typename T>
PixelMask agreement_map(const BasicTensor<T>& logits1, const BasicTensor<T>& logits2) {
  if (logits1.shape() != logits2.shape()) {
    throw ShapeError("agreement_map: shapes " + shape_to_string(logits1.shape()) + " and " +
                     shape_to_string(logits2.shape()) + " differ");
  }
  const auto a = argmax_labels(logits1);
  const auto b = argmax_labels(logits2);
  PixelMask out(a.batch, a.height, a.width);
  for (std::size_t i = 0; i < a.size(); ++i) out.set(i, a.values[i] == b.values[i]);
  return out;
}

template <typename T>
BasicTensor<T> joint_loss(Tape<T>& tape, const BasicSegNet<T>& model, const BranchLogits<T>& logits,
                          const LabelMap& labels, const PixelMask& mask_b1, const PixelMask& mask_b2,
                          const BasicTensor<T>& class_weights, const PenaltyOptions& penalty) {
  auto l1 = masked_weighted_cross_entropy(tape, logits.logits1, labels, mask_b1, class_weights);
  auto l2 = masked_weighted_cross_entropy(tape, logits.logits2, labels, mask_b2, class_weights);
  return add(tape, add(tape, l1, l2), similarity_penalty(tape, model, penalty));
}

template <typename T>
BasicTensor<T> joint_loss(Tape<T>& tape, const BasicSegNet<T>& model, const BasicTensor<T>& images,
                          const LabelMap& labels, const PixelMask& mask_b1, const PixelMask& mask_b2,
                          const BasicTensor<T>& class_weights, const PenaltyOptions& penalty) {
  const auto logits = forward(tape, model, images);
  return joint_loss(tape, model, logits, labels, mask_b1, mask_b2, class_weights, penalty);
}

#define PROXYSEG_INSTANTIATE_MODEL(T)                                                                               \
  template class BasicSegNet<T>;                                                                                    \
  template BranchLogits<T> forward(Tape<T>&, const BasicSegNet<T>&, const BasicTensor<T>&);                         \
  template std::vector<BasicTensor<T>> decoder_weight_tensors(const DecoderBranch<T>&, bool);                       \
  template std::pair<std::vector<T>, std::vector<T>> flatten_decoder_weights(const BasicSegNet<T>&, bool);          \
  template BasicTensor<T> similarity_penalty(Tape<T>&, const BasicTensor<T>&, const BasicTensor<T>&, T,             \
                                             SimilarityMode);                                                       \
  template BasicTensor<T> similarity_penalty(Tape<T>&, const BasicSegNet<T>&, const PenaltyOptions&);               \
  template double decoder_cosine(const BasicSegNet<T>&, bool);                                                      \
  template LabelMap argmax_labels(const BasicTensor<T>&);                                                           \
  template PixelMask agreement_map(const BasicTensor<T>&, const BasicTensor<T>&);                                   \
  template BasicTensor<T> joint_loss(Tape<T>&, const BasicSegNet<T>&, const BranchLogits<T>&, const LabelMap&,      \
                                     const PixelMask&, const PixelMask&, const BasicTensor<T>&,                     \
                                     const PenaltyOptions&);                                                        \
  template BasicTensor<T> joint_loss(Tape<T>&, const BasicSegNet<T>&, const BasicTensor<T>&, const LabelMap&,       \
                                     const PixelMask&, const PixelMask&, const BasicTensor<T>&,                     \
                                     const PenaltyOptions&);

PROXYSEG_INSTANTIATE_MODEL(float)
PROXYSEG_INSTANTIATE_MODEL(double)

#undef PROXYSEG_INSTANTIATE_MODEL

}  // namespace proxyseg
