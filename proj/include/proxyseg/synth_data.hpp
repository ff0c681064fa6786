#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "proxyseg/label_map.hpp"
#include "proxyseg/rng.hpp"

namespace proxyseg {

// Scene classes, in drawing order (later classes occlude earlier ones).
enum SceneClass : std::uint8_t {
  kBackground = 0,
  kRoadBand = 1,
  kLargeBlob = 2,
  kSmallBlob = 3,
  kStripe = 4,
  kRareDot = 5,
};

inline constexpr std::size_t kSceneClasses = 6;

struct IntRange {
  int lo = 0;
  int hi = 0;
  bool operator==(const IntRange&) const = default;
};

/// Geometry of the procedural scenes shared by both domains.
struct SceneSpec {
  std::size_t height = 48;
  std::size_t width = 48;
  std::size_t num_classes = kSceneClasses;
  // Probability that each class appears in a scene; entry 0 (background) is
  // ignored because background always fills the canvas.
  std::array<double, kSceneClasses> occurrence{1.0, 1.0, 0.9, 0.35, 0.6, 0.15};
  IntRange road_height{8, 16};
  IntRange large_blob_radius{6, 12};
  IntRange small_blob_radius{3, 6};
  IntRange stripe_width{2, 4};
  IntRange rare_dot_radius{2, 3};

  void validate() const;
  bool operator==(const SceneSpec&) const = default;
};

using Color = std::array<double, 3>;

/// Appearance of one domain. A pixel of class c at (x, y) renders as
/// gain * (palette[c] + texture_amplitude * texture(x, y)) + N(0, noise_sigma),
/// clipped to [0, 1], with texture(x, y) = sin(2 pi f x / W) * sin(2 pi f y / H).
struct DomainParams {
  std::vector<Color> palette;
  double gain = 1.0;
  double noise_sigma = 0.03;
  double texture_frequency = 2.0;
  double texture_amplitude = 0.05;

  static DomainParams source_default();
  // Source palette blended toward its channel rotation (r,g,b)->(g,b,r) by
  // `hue_shift`, darker, noisier and with a finer texture.
  static DomainParams target_default();
  static std::vector<Color> rotate_palette(const std::vector<Color>& palette, double hue_shift);

  void validate(std::size_t num_classes) const;
  bool operator==(const DomainParams&) const = default;
};

inline constexpr double kDefaultHueShift = 0.15;

/// One image with its per-pixel labels; image is (C,H,W), labels (H,W).
struct Sample {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> image;
  std::vector<std::uint8_t> labels;

  bool operator==(const Sample&) const = default;
};

/// Label map (batch 1) drawn from the scene stream.
LabelMap generate_scene(const SceneSpec& spec, RngStream& rng);

/// Renders (C=3,H,W) pixels for a label map; geometry is untouched.
std::vector<float> render(const LabelMap& labels, const DomainParams& params, RngStream& rng);

struct AugmentOptions {
  std::size_t crop = 32;
  bool scale_jitter = true;
  double scale_min = 0.75;
  double scale_max = 1.25;
  double flip_probability = 0.5;
};

// A concrete geometric transform; crop offsets may be negative when the
// scaled image is smaller than the crop.
struct AugmentParams {
  double scale = 1.0;
  bool flip = false;
  long crop_y = 0;
  long crop_x = 0;
};

AugmentParams sample_augment(const AugmentOptions& options, std::size_t height, std::size_t width, RngStream& rng);

/// Nearest-neighbour rescale, optional horizontal flip, then a crop of
/// `crop` x `crop` pixels; out-of-image pixels are zero / ignore.
Sample apply_augment(const Sample& sample, const AugmentParams& params, std::size_t crop);

Sample augment(const Sample& sample, const AugmentOptions& options, RngStream& rng);

Sample hflip(const Sample& sample);

}  // namespace proxyseg
