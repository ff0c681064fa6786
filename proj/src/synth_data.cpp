#include "proxyseg/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "proxyseg/errors.hpp"

namespace proxyseg {
namespace {

void check_range(const IntRange& r, int min_lo, const char* name) {
  if (r.lo < min_lo || r.hi < r.lo) throw ConfigError(std::string("scene: invalid range for ") + name);
}

void fill_ellipse(LabelMap& m, long cy, long cx, long ry, long rx, std::uint8_t cls) {
  const double ry2 = static_cast<double>(ry) * static_cast<double>(ry);
  const double rx2 = static_cast<double>(rx) * static_cast<double>(rx);
  for (long y = std::max(0L, cy - ry); y <= std::min(static_cast<long>(m.height) - 1, cy + ry); ++y) {
    for (long x = std::max(0L, cx - rx); x <= std::min(static_cast<long>(m.width) - 1, cx + rx); ++x) {
      const double dy = static_cast<double>(y - cy);
      const double dx = static_cast<double>(x - cx);
      if (dy * dy / ry2 + dx * dx / rx2 <= 1.0) m.at(0, y, x) = cls;
    }
  }
}

void fill_rect(LabelMap& m, long y0, long x0, long y1, long x1, std::uint8_t cls) {
  for (long y = std::max(0L, y0); y < std::min(static_cast<long>(m.height), y1); ++y) {
    for (long x = std::max(0L, x0); x < std::min(static_cast<long>(m.width), x1); ++x) m.at(0, y, x) = cls;
  }
}

}  // namespace

void SceneSpec::validate() const {
  if (num_classes != kSceneClasses) throw ConfigError("scene: the generator draws exactly 6 classes");
  if (height < 16 || width < 16) throw ConfigError("scene: canvas must be at least 16x16");
  for (double p : occurrence) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("scene: occurrence probabilities must lie in [0, 1]");
  }
  check_range(road_height, 1, "road_height");
  check_range(large_blob_radius, 1, "large_blob_radius");
  check_range(small_blob_radius, 1, "small_blob_radius");
  check_range(stripe_width, 1, "stripe_width");
  check_range(rare_dot_radius, 0, "rare_dot_radius");
  if (static_cast<std::size_t>(road_height.hi) > height) throw ConfigError("scene: road band taller than canvas");
  if (static_cast<std::size_t>(stripe_width.hi) > width) throw ConfigError("scene: stripe wider than canvas");
}

DomainParams DomainParams::source_default() {
  DomainParams p;
  p.palette = {
      {0.45, 0.50, 0.40},  // background
      {0.30, 0.30, 0.35},  // road band
      {0.75, 0.35, 0.30},  // large blob
      {0.30, 0.65, 0.40},  // small blob
      {0.85, 0.80, 0.30},  // stripe
      {0.35, 0.40, 0.85},  // rare dot
  };
  p.gain = 1.0;
  p.noise_sigma = 0.03;
  p.texture_frequency = 2.0;
  p.texture_amplitude = 0.2;
  return p;
}

DomainParams DomainParams::target_default() {
  DomainParams p = source_default();
  p.palette = rotate_palette(p.palette, kDefaultHueShift);
  p.gain = 0.8;
  p.noise_sigma = 0.08;
  p.texture_frequency = 5.0;
  p.texture_amplitude = 0.3;
  return p;
}

std::vector<Color> DomainParams::rotate_palette(const std::vector<Color>& palette, double hue_shift) {
  std::vector<Color> out;
  out.reserve(palette.size());
  for (const auto& c : palette) {
    const Color rotated{c[1], c[2], c[0]};
    Color blended;
    for (std::size_t i = 0; i < 3; ++i) blended[i] = (1.0 - hue_shift) * c[i] + hue_shift * rotated[i];
    out.push_back(blended);
  }
  return out;
}

void DomainParams::validate(std::size_t num_classes) const {
  if (palette.size() != num_classes) {
    throw ConfigError("domain: palette has " + std::to_string(palette.size()) + " colors for " +
                      std::to_string(num_classes) + " classes");
  }
  for (const auto& c : palette) {
    for (double v : c) {
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("domain: palette values must lie in [0, 1]");
    }
  }
  if (!(gain > 0.0)) throw ConfigError("domain: gain must be positive");
  if (!(noise_sigma >= 0.0)) throw ConfigError("domain: noise_sigma must be non-negative");
  if (!(texture_amplitude >= 0.0)) throw ConfigError("domain: texture_amplitude must be non-negative");
}

LabelMap generate_scene(const SceneSpec& spec, RngStream& rng) {
  const long h = static_cast<long>(spec.height);
  const long w = static_cast<long>(spec.width);
  LabelMap m(1, spec.height, spec.width, kBackground);

  if (rng.bernoulli(spec.occurrence[kRoadBand])) {
    const long band = rng.between(spec.road_height.lo, spec.road_height.hi);
    const long top = rng.between(h / 3, h - band);
    fill_rect(m, top, 0, top + band, w, kRoadBand);
  }
  if (rng.bernoulli(spec.occurrence[kLargeBlob])) {
    const long ry = rng.between(spec.large_blob_radius.lo, spec.large_blob_radius.hi);
    const long rx = rng.between(spec.large_blob_radius.lo, spec.large_blob_radius.hi);
    fill_ellipse(m, rng.between(0, h - 1), rng.between(0, w - 1), ry, rx, kLargeBlob);
  }
  if (rng.bernoulli(spec.occurrence[kSmallBlob])) {
    const long ry = rng.between(spec.small_blob_radius.lo, spec.small_blob_radius.hi);
    const long rx = rng.between(spec.small_blob_radius.lo, spec.small_blob_radius.hi);
    fill_ellipse(m, rng.between(ry, h - 1 - ry), rng.between(rx, w - 1 - rx), ry, rx, kSmallBlob);
  }
  if (rng.bernoulli(spec.occurrence[kStripe])) {
    const long sw = rng.between(spec.stripe_width.lo, spec.stripe_width.hi);
    const long x0 = rng.between(0, w - sw);
    const long top = rng.between(0, h / 2);
    const long len = rng.between(h / 2, h - top);
    fill_rect(m, top, x0, top + len, x0 + sw, kStripe);
  }
  if (rng.bernoulli(spec.occurrence[kRareDot])) {
    const long r = rng.between(spec.rare_dot_radius.lo, spec.rare_dot_radius.hi);
    const long cy = rng.between(r, h - 1 - r);
    const long cx = rng.between(r, w - 1 - r);
    if (r == 0) {
      m.at(0, cy, cx) = kRareDot;
    } else {
      fill_ellipse(m, cy, cx, r, r, kRareDot);
    }
  }
  return m;
}

std::vector<float> render(const LabelMap& labels, const DomainParams& params, RngStream& rng) {
  const std::size_t h = labels.height;
  const std::size_t w = labels.width;
  const std::size_t plane = h * w;
  std::vector<double> texture(plane);
  const double two_pi_f = 2.0 * std::numbers::pi * params.texture_frequency;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      texture[y * w + x] = std::sin(two_pi_f * static_cast<double>(x) / static_cast<double>(w)) *
                           std::sin(two_pi_f * static_cast<double>(y) / static_cast<double>(h));
    }
  }
  std::vector<float> out(labels.batch * 3 * plane);
  for (std::size_t n = 0; n < labels.batch; ++n) {
    const auto lbl = labels.plane(n);
    for (std::size_t c = 0; c < 3; ++c) {
      float* dst = out.data() + (n * 3 + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        if (lbl[p] >= params.palette.size()) throw ConfigError("render: label without a palette entry");
        double v = params.gain * (params.palette[lbl[p]][c] + params.texture_amplitude * texture[p]);
        if (params.noise_sigma > 0.0) v += params.noise_sigma * rng.normal();
        dst[p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

AugmentParams sample_augment(const AugmentOptions& options, std::size_t height, std::size_t width, RngStream& rng) {
  AugmentParams p;
  if (options.scale_jitter) p.scale = rng.uniform(options.scale_min, options.scale_max);
  p.flip = rng.bernoulli(options.flip_probability);
  const long sh = std::lround(static_cast<double>(height) * p.scale);
  const long sw = std::lround(static_cast<double>(width) * p.scale);
  const long crop = static_cast<long>(options.crop);
  p.crop_y = rng.between(std::min(0L, sh - crop), std::max(0L, sh - crop));
  p.crop_x = rng.between(std::min(0L, sw - crop), std::max(0L, sw - crop));
  return p;
}

Sample hflip(const Sample& s) {
  Sample out = s;
  for (std::size_t y = 0; y < s.height; ++y) {
    for (std::size_t x = 0; x < s.width; ++x) {
      const std::size_t src = y * s.width + (s.width - 1 - x);
      out.labels[y * s.width + x] = s.labels[src];
      for (std::size_t c = 0; c < s.channels; ++c) {
        out.image[(c * s.height + y) * s.width + x] = s.image[c * s.height * s.width + src];
      }
    }
  }
  return out;
}

Sample apply_augment(const Sample& s, const AugmentParams& params, std::size_t crop) {
  const long sh = std::max(1L, std::lround(static_cast<double>(s.height) * params.scale));
  const long sw = std::max(1L, std::lround(static_cast<double>(s.width) * params.scale));
  Sample out;
  out.channels = s.channels;
  out.height = crop;
  out.width = crop;
  out.image.assign(s.channels * crop * crop, 0.0f);
  out.labels.assign(crop * crop, kIgnoreLabel);
  for (std::size_t i = 0; i < crop; ++i) {
    const long yy = params.crop_y + static_cast<long>(i);
    if (yy < 0 || yy >= sh) continue;
    const std::size_t src_y = std::min(s.height - 1, static_cast<std::size_t>(yy) * s.height / static_cast<std::size_t>(sh));
    for (std::size_t j = 0; j < crop; ++j) {
      long xx = params.crop_x + static_cast<long>(j);
      if (xx < 0 || xx >= sw) continue;
      if (params.flip) xx = sw - 1 - xx;
      const std::size_t src_x = std::min(s.width - 1, static_cast<std::size_t>(xx) * s.width / static_cast<std::size_t>(sw));
      out.labels[i * crop + j] = s.labels[src_y * s.width + src_x];
      for (std::size_t c = 0; c < s.channels; ++c) {
        out.image[(c * crop + i) * crop + j] = s.image[(c * s.height + src_y) * s.width + src_x];
      }
    }
  }
  return out;
}

Sample augment(const Sample& sample, const AugmentOptions& options, RngStream& rng) {
  return apply_augment(sample, sample_augment(options, sample.height, sample.width, rng), options.crop);
}

}  // namespace proxyseg
