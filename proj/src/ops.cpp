#include "proxyseg/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "proxyseg/errors.hpp"

namespace proxyseg {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
void check_finite(const BasicTensor<T>& t, const char* op) {
  for (T v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
}

template <typename T>
void require_rank(const BasicTensor<T>& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_to_string(t.shape()));
  }
}

template <typename T>
BasicTensor<T> make_output(const Tape<T>& tape, Shape shape, bool any_input_requires_grad) {
  return BasicTensor<T>::zeros(std::move(shape), tape.recording() && any_input_requires_grad);
}

struct ConvGeometry {
  std::size_t n, c, h, w, f, k, stride, pad, oh, ow;

  std::size_t patch() const { return c * k * k; }
  std::size_t positions() const { return oh * ow; }
  bool direct() const { return k == 1 && stride == 1 && pad == 0; }
};

template <typename T>
void im2col(const T* img, const ConvGeometry& g, T* col) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = col + ((c * g.k + ky) * g.k + kx) * positions;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          T* dst = row + oy * g.ow;
          if (iy < 0 || iy >= static_cast<long>(g.h)) {
            std::fill(dst, dst + g.ow, T(0));
            continue;
          }
          const T* src = img + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_accumulate(const T* col, const ConvGeometry& g, T* img) {
  const std::size_t positions = g.positions();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((c * g.k + ky) * g.k + kx) * positions;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          T* dst = img + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          const T* src = row + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix >= 0 && ix < static_cast<long>(g.w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

struct PoolRange {
  std::size_t begin, end;
};

PoolRange pool_range(std::size_t index, std::size_t in, std::size_t out) {
  const std::size_t begin = (index * in) / out;
  const std::size_t end = ((index + 1) * in + out - 1) / out;
  return {begin, end};
}

struct LerpTap {
  std::size_t lo, hi;
  double frac;
};

std::vector<LerpTap> bilinear_taps(std::size_t in, std::size_t factor) {
  std::vector<LerpTap> taps(in * factor);
  const double max_coord = static_cast<double>(in - 1);
  for (std::size_t d = 0; d < taps.size(); ++d) {
    double s = (static_cast<double>(d) + 0.5) / static_cast<double>(factor) - 0.5;
    s = std::clamp(s, 0.0, max_coord);
    const auto lo = static_cast<std::size_t>(std::floor(s));
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[d] = {lo, hi, s - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(Tape<T>& tape, const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, std::size_t stride, std::size_t padding) {
  require_rank(input, 4, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  require_rank(bias, 1, "conv2d bias");
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  const std::size_t k = weight.dim(2);
  if (weight.dim(3) != k || (k != 1 && k != 3)) {
    throw ShapeError("conv2d: kernel must be 1x1 or 3x3, got " + shape_to_string(weight.shape()));
  }
  if (weight.dim(1) != input.dim(1)) {
    throw ShapeError("conv2d: weight " + shape_to_string(weight.shape()) + " does not match input " +
                     shape_to_string(input.shape()));
  }
  if (bias.dim(0) != weight.dim(0)) throw ShapeError("conv2d: bias length does not match filter count");
  const std::size_t h = input.dim(2);
  const std::size_t w = input.dim(3);
  if (h + 2 * padding < k || w + 2 * padding < k) throw ShapeError("conv2d: non-positive output size");
  ConvGeometry g{input.dim(0), input.dim(1), h, w, weight.dim(0), k, stride, padding,
                 (h + 2 * padding - k) / stride + 1, (w + 2 * padding - k) / stride + 1};

  auto out = make_output(tape, {g.n, g.f, g.oh, g.ow},
                         input.requires_grad() || weight.requires_grad() || bias.requires_grad());
  const std::size_t in_stride = g.c * g.h * g.w;
  const std::size_t out_stride = g.f * g.positions();
  std::vector<T> col(g.direct() ? 0 : g.patch() * g.positions());
  ConstMatMap<T> wmat(weight.data().data(), g.f, g.patch());
  ConstVecMap<T> bvec(bias.data().data(), g.f);
  const T* in_ptr = input.data().data();
  T* out_ptr = out.data().data();
  for (std::size_t n = 0; n < g.n; ++n) {
    const T* cols = in_ptr + n * in_stride;
    if (!g.direct()) {
      im2col(cols, g, col.data());
      cols = col.data();
    }
    MatMap<T> omat(out_ptr + n * out_stride, g.f, g.positions());
    omat.noalias() = wmat * ConstMatMap<T>(cols, g.patch(), g.positions());
    omat.colwise() += bvec;
  }
  check_finite(out, "conv2d");

  if (out.requires_grad()) {
    tape.record([input, weight, bias, out, g]() mutable {
      const std::size_t in_stride = g.c * g.h * g.w;
      const std::size_t out_stride = g.f * g.positions();
      const T* gout_ptr = out.grad().data();
      const T* in_ptr = input.data().data();
      std::vector<T> col(g.direct() ? 0 : g.patch() * g.positions());
      std::vector<T> dcol(g.patch() * g.positions());
      ConstMatMap<T> wmat(weight.data().data(), g.f, g.patch());
      for (std::size_t n = 0; n < g.n; ++n) {
        ConstMatMap<T> gout(gout_ptr + n * out_stride, g.f, g.positions());
        if (bias.requires_grad()) {
          auto gb = bias.grad();
          for (std::size_t f = 0; f < g.f; ++f) {
            double acc = 0.0;
            const T* row = gout_ptr + n * out_stride + f * g.positions();
            for (std::size_t p = 0; p < g.positions(); ++p) acc += row[p];
            gb[f] += static_cast<T>(acc);
          }
        }
        if (weight.requires_grad()) {
          const T* cols = in_ptr + n * in_stride;
          if (!g.direct()) {
            im2col(cols, g, col.data());
            cols = col.data();
          }
          MatMap<T> gw(weight.grad().data(), g.f, g.patch());
          gw.noalias() += gout * ConstMatMap<T>(cols, g.patch(), g.positions()).transpose();
        }
        if (input.requires_grad()) {
          T* gin = input.grad().data() + n * in_stride;
          if (g.direct()) {
            MatMap<T> gmat(gin, g.c, g.positions());
            gmat.noalias() += wmat.transpose() * gout;
          } else {
            MatMap<T> dmat(dcol.data(), g.patch(), g.positions());
            dmat.noalias() = wmat.transpose() * gout;
            col2im_accumulate(dcol.data(), g, gin);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> relu(Tape<T>& tape, const BasicTensor<T>& input) {
  auto out = make_output(tape, input.shape(), input.requires_grad());
  auto src = input.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] < T(0) ? T(0) : src[i];
  check_finite(out, "relu");
  if (out.requires_grad()) {
    tape.record([input, out]() mutable {
      auto x = input.data();
      auto gout = out.grad();
      auto gin = input.grad();
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > T(0)) gin[i] += gout[i];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> adaptive_avg_pool(Tape<T>& tape, const BasicTensor<T>& input, std::size_t out_h, std::size_t out_w) {
  require_rank(input, 4, "adaptive_avg_pool");
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t h = input.dim(2);
  const std::size_t w = input.dim(3);
  if (out_h == 0 || out_w == 0) throw ShapeError("adaptive_avg_pool: zero-sized output");
  if (out_h > h || out_w > w) throw ShapeError("adaptive_avg_pool: output larger than input");
  auto out = make_output(tape, {input.dim(0), input.dim(1), out_h, out_w}, input.requires_grad());
  auto src = input.data();
  auto dst = out.data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < out_h; ++i) {
      const auto rows = pool_range(i, h, out_h);
      for (std::size_t j = 0; j < out_w; ++j) {
        const auto cols = pool_range(j, w, out_w);
        double acc = 0.0;
        for (std::size_t y = rows.begin; y < rows.end; ++y) {
          for (std::size_t x = cols.begin; x < cols.end; ++x) acc += src[(p * h + y) * w + x];
        }
        const double count = static_cast<double>((rows.end - rows.begin) * (cols.end - cols.begin));
        dst[(p * out_h + i) * out_w + j] = static_cast<T>(acc / count);
      }
    }
  }
  check_finite(out, "adaptive_avg_pool");
  if (out.requires_grad()) {
    tape.record([input, out, planes, h, w, out_h, out_w]() mutable {
      auto gout = out.grad();
      auto gin = input.grad();
      for (std::size_t p = 0; p < planes; ++p) {
        for (std::size_t i = 0; i < out_h; ++i) {
          const auto rows = pool_range(i, h, out_h);
          for (std::size_t j = 0; j < out_w; ++j) {
            const auto cols = pool_range(j, w, out_w);
            const double count = static_cast<double>((rows.end - rows.begin) * (cols.end - cols.begin));
            const T share = static_cast<T>(gout[(p * out_h + i) * out_w + j] / count);
            for (std::size_t y = rows.begin; y < rows.end; ++y) {
              for (std::size_t x = cols.begin; x < cols.end; ++x) gin[(p * h + y) * w + x] += share;
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> upsample(Tape<T>& tape, const BasicTensor<T>& input, std::size_t factor_h, std::size_t factor_w,
                        UpsampleMode mode) {
  require_rank(input, 4, "upsample");
  if (factor_h == 0 || factor_w == 0) throw ShapeError("upsample: factor must be positive");
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t h = input.dim(2);
  const std::size_t w = input.dim(3);
  const std::size_t oh = h * factor_h;
  const std::size_t ow = w * factor_w;
  auto out = make_output(tape, {input.dim(0), input.dim(1), oh, ow}, input.requires_grad());
  auto src = input.data();
  auto dst = out.data();

  if (mode == UpsampleMode::nearest) {
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t y = 0; y < oh; ++y) {
        const T* row = src.data() + (p * h + y / factor_h) * w;
        T* o = dst.data() + (p * oh + y) * ow;
        for (std::size_t x = 0; x < ow; ++x) o[x] = row[x / factor_w];
      }
    }
    check_finite(out, "upsample");
    if (out.requires_grad()) {
      tape.record([input, out, planes, h, w, oh, ow, factor_h, factor_w]() mutable {
        auto gout = out.grad();
        auto gin = input.grad();
        for (std::size_t p = 0; p < planes; ++p) {
          for (std::size_t y = 0; y < oh; ++y) {
            T* row = gin.data() + (p * h + y / factor_h) * w;
            const T* g = gout.data() + (p * oh + y) * ow;
            for (std::size_t x = 0; x < ow; ++x) row[x / factor_w] += g[x];
          }
        }
      });
    }
    return out;
  }

  const auto ty = bilinear_taps(h, factor_h);
  const auto tx = bilinear_taps(w, factor_w);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* plane = src.data() + p * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      const T fy = static_cast<T>(ty[y].frac);
      const T* r0 = plane + ty[y].lo * w;
      const T* r1 = plane + ty[y].hi * w;
      T* o = dst.data() + (p * oh + y) * ow;
      for (std::size_t x = 0; x < ow; ++x) {
        const T fx = static_cast<T>(tx[x].frac);
        const T top = (T(1) - fx) * r0[tx[x].lo] + fx * r0[tx[x].hi];
        const T bottom = (T(1) - fx) * r1[tx[x].lo] + fx * r1[tx[x].hi];
        o[x] = (T(1) - fy) * top + fy * bottom;
      }
    }
  }
  check_finite(out, "upsample");
  if (out.requires_grad()) {
    tape.record([input, out, planes, h, w, oh, ow, ty, tx]() mutable {
      auto gout = out.grad();
      auto gin = input.grad();
      for (std::size_t p = 0; p < planes; ++p) {
        T* plane = gin.data() + p * h * w;
        for (std::size_t y = 0; y < oh; ++y) {
          const T fy = static_cast<T>(ty[y].frac);
          T* r0 = plane + ty[y].lo * w;
          T* r1 = plane + ty[y].hi * w;
          const T* g = gout.data() + (p * oh + y) * ow;
          for (std::size_t x = 0; x < ow; ++x) {
            const T fx = static_cast<T>(tx[x].frac);
            const T top = (T(1) - fy) * g[x];
            const T bottom = fy * g[x];
            r0[tx[x].lo] += (T(1) - fx) * top;
            r0[tx[x].hi] += fx * top;
            r1[tx[x].lo] += (T(1) - fx) * bottom;
            r1[tx[x].hi] += fx * bottom;
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> concat_channels(Tape<T>& tape, std::span<const BasicTensor<T>> inputs) {
  if (inputs.empty()) throw ShapeError("concat_channels: no inputs");
  for (const auto& t : inputs) require_rank(t, 4, "concat_channels");
  const std::size_t n = inputs[0].dim(0);
  const std::size_t h = inputs[0].dim(2);
  const std::size_t w = inputs[0].dim(3);
  std::size_t channels = 0;
  bool any_grad = false;
  for (const auto& t : inputs) {
    if (t.dim(0) != n || t.dim(2) != h || t.dim(3) != w) {
      throw ShapeError("concat_channels: mismatched dims " + shape_to_string(t.shape()) + " vs " +
                       shape_to_string(inputs[0].shape()));
    }
    channels += t.dim(1);
    any_grad = any_grad || t.requires_grad();
  }
  auto out = make_output(tape, {n, channels, h, w}, any_grad);
  const std::size_t plane = h * w;
  auto dst = out.data();
  for (std::size_t b = 0; b < n; ++b) {
    std::size_t offset = b * channels * plane;
    for (const auto& t : inputs) {
      const std::size_t block = t.dim(1) * plane;
      auto src = t.data().subspan(b * block, block);
      std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(offset));
      offset += block;
    }
  }
  if (out.requires_grad()) {
    std::vector<BasicTensor<T>> parts(inputs.begin(), inputs.end());
    tape.record([parts, out, n, channels, plane]() mutable {
      auto gout = out.grad();
      for (std::size_t b = 0; b < n; ++b) {
        std::size_t offset = b * channels * plane;
        for (auto& t : parts) {
          const std::size_t block = t.dim(1) * plane;
          if (t.requires_grad()) {
            auto gin = t.grad().subspan(b * block, block);
            for (std::size_t i = 0; i < block; ++i) gin[i] += gout[offset + i];
          }
          offset += block;
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> add(Tape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  }
  auto out = make_output(tape, a.shape(), a.requires_grad() || b.requires_grad());
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + y[i];
  check_finite(out, "add");
  if (out.requires_grad()) {
    tape.record([a, b, out]() mutable {
      auto g = out.grad();
      for (const BasicTensor<T>* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto gt = t->grad();
        for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> scale(Tape<T>& tape, const BasicTensor<T>& input, T factor) {
  auto out = make_output(tape, input.shape(), input.requires_grad());
  auto x = input.data();
  auto z = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * factor;
  check_finite(out, "scale");
  if (out.requires_grad()) {
    tape.record([input, out, factor]() mutable {
      auto g = out.grad();
      auto gi = input.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * factor;
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> flatten_concat(Tape<T>& tape, std::span<const BasicTensor<T>> inputs) {
  std::size_t total = 0;
  bool any_grad = false;
  for (const auto& t : inputs) {
    total += t.numel();
    any_grad = any_grad || t.requires_grad();
  }
  auto out = make_output(tape, {total}, any_grad);
  auto dst = out.data();
  std::size_t offset = 0;
  for (const auto& t : inputs) {
    auto src = t.data();
    std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += src.size();
  }
  if (out.requires_grad()) {
    std::vector<BasicTensor<T>> parts(inputs.begin(), inputs.end());
    tape.record([parts, out]() mutable {
      auto g = out.grad();
      std::size_t offset = 0;
      for (auto& t : parts) {
        const std::size_t len = t.numel();
        if (t.requires_grad()) {
          auto gt = t.grad();
          for (std::size_t i = 0; i < len; ++i) gt[i] += g[offset + i];
        }
        offset += len;
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> dot(Tape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.numel() != b.numel()) {
    throw ShapeError("dot: length " + std::to_string(a.numel()) + " vs " + std::to_string(b.numel()));
  }
  auto out = make_output(tape, {1}, a.requires_grad() || b.requires_grad());
  auto x = a.data();
  auto y = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  out.data()[0] = static_cast<T>(acc);
  check_finite(out, "dot");
  if (out.requires_grad()) {
    tape.record([a, b, out]() mutable {
      const T g = out.grad()[0];
      if (a.requires_grad()) {
        auto ga = a.grad();
        auto y = b.data();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * y[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        auto x = a.data();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * x[i];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> masked_weighted_cross_entropy(Tape<T>& tape, const BasicTensor<T>& logits, const LabelMap& labels,
                                             const PixelMask& mask, const BasicTensor<T>& class_weights) {
  require_rank(logits, 4, "masked_weighted_cross_entropy logits");
  const std::size_t n = logits.dim(0);
  const std::size_t k = logits.dim(1);
  const std::size_t plane = logits.dim(2) * logits.dim(3);
  if (labels.batch != n || labels.height != logits.dim(2) || labels.width != logits.dim(3)) {
    throw ShapeError("masked_weighted_cross_entropy: labels do not match logits " + shape_to_string(logits.shape()));
  }
  if (!mask.same_geometry(labels)) throw ShapeError("masked_weighted_cross_entropy: mask does not match labels");
  if (class_weights.numel() != k) throw ShapeError("masked_weighted_cross_entropy: class weight length != K");
  for (auto y : labels.values) {
    if (y != kIgnoreLabel && y >= k) {
      throw Error("masked_weighted_cross_entropy: label " + std::to_string(y) + " out of range for " +
                  std::to_string(k) + " classes");
    }
  }

  const T* z = logits.data().data();
  const T* lambda = class_weights.data().data();
  double weighted_sum = 0.0;
  double weight_total = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t p = 0; p < plane; ++p) {
      const std::size_t pix = b * plane + p;
      const auto y = labels.values[pix];
      if (!mask[pix] || y == kIgnoreLabel) continue;
      const T* base = z + b * k * plane + p;
      double zmax = base[0];
      for (std::size_t c = 1; c < k; ++c) zmax = std::max(zmax, static_cast<double>(base[c * plane]));
      double sum = 0.0;
      for (std::size_t c = 0; c < k; ++c) sum += std::exp(static_cast<double>(base[c * plane]) - zmax);
      const double nll = zmax + std::log(sum) - static_cast<double>(base[y * plane]);
      weighted_sum += static_cast<double>(lambda[y]) * nll;
      weight_total += static_cast<double>(lambda[y]);
    }
  }

  auto out = make_output(tape, {1}, logits.requires_grad());
  out.data()[0] = weight_total > 0.0 ? static_cast<T>(weighted_sum / weight_total) : T(0);
  check_finite(out, "masked_weighted_cross_entropy");

  if (out.requires_grad() && weight_total > 0.0) {
    tape.record([logits, labels, mask, class_weights, out, n, k, plane, weight_total]() mutable {
      const double g = out.grad()[0];
      const T* z = logits.data().data();
      T* gz = logits.grad().data();
      const T* lambda = class_weights.data().data();
      std::vector<double> prob(k);
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t p = 0; p < plane; ++p) {
          const std::size_t pix = b * plane + p;
          const auto y = labels.values[pix];
          if (!mask[pix] || y == kIgnoreLabel) continue;
          const T* base = z + b * k * plane + p;
          double zmax = base[0];
          for (std::size_t c = 1; c < k; ++c) zmax = std::max(zmax, static_cast<double>(base[c * plane]));
          double sum = 0.0;
          for (std::size_t c = 0; c < k; ++c) {
            prob[c] = std::exp(static_cast<double>(base[c * plane]) - zmax);
            sum += prob[c];
          }
          const double coef = g * static_cast<double>(lambda[y]) / weight_total;
          T* gbase = gz + b * k * plane + p;
          for (std::size_t c = 0; c < k; ++c) {
            const double target = c == y ? 1.0 : 0.0;
            gbase[c * plane] += static_cast<T>(coef * (prob[c] / sum - target));
          }
        }
      }
    });
  }
  return out;
}

#define PROXYSEG_INSTANTIATE_OPS(T)                                                                              \
  template BasicTensor<T> conv2d(Tape<T>&, const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,  \
                                 std::size_t, std::size_t);                                                      \
  template BasicTensor<T> relu(Tape<T>&, const BasicTensor<T>&);                                                 \
  template BasicTensor<T> adaptive_avg_pool(Tape<T>&, const BasicTensor<T>&, std::size_t, std::size_t);          \
  template BasicTensor<T> upsample(Tape<T>&, const BasicTensor<T>&, std::size_t, std::size_t, UpsampleMode);     \
  template BasicTensor<T> concat_channels(Tape<T>&, std::span<const BasicTensor<T>>);                            \
  template BasicTensor<T> add(Tape<T>&, const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template BasicTensor<T> scale(Tape<T>&, const BasicTensor<T>&, T);                                             \
  template BasicTensor<T> flatten_concat(Tape<T>&, std::span<const BasicTensor<T>>);                             \
  template BasicTensor<T> dot(Tape<T>&, const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template BasicTensor<T> masked_weighted_cross_entropy(Tape<T>&, const BasicTensor<T>&, const LabelMap&,        \
                                                        const PixelMask&, const BasicTensor<T>&);

PROXYSEG_INSTANTIATE_OPS(float)
PROXYSEG_INSTANTIATE_OPS(double)

#undef PROXYSEG_INSTANTIATE_OPS

}  // namespace proxyseg
