#include "segmicro/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace segmicro {

namespace {

void check_pair(const Tensor4<float>& image, const LabelMap& mask,
                const char* op) {
  const Shape4& s = image.shape();
  if (s.batch != 1) {
    throw ShapeError(std::string(op) + ": image must be single-batch, got " +
                     s.to_string());
  }
  if (s.height != mask.height || s.width != mask.width) {
    throw ShapeError(std::string(op) + ": image " + s.to_string() +
                     " and mask " + std::to_string(mask.height) + "x" +
                     std::to_string(mask.width) + " disagree");
  }
}

// Source coordinate of an output pixel under center-aligned rescaling.
inline double src_coord(int out_index, int out_size, int in_size) {
  const double scale = static_cast<double>(in_size) / out_size;
  return (out_index + 0.5) * scale - 0.5;
}

float sample_bilinear(const Tensor4<float>& image, double sy, double sx,
                      int c) {
  const Shape4& s = image.shape();
  const int y0 = static_cast<int>(std::floor(sy));
  const int x0 = static_cast<int>(std::floor(sx));
  const double wy = sy - y0;
  const double wx = sx - x0;
  double acc = 0.0;
  for (int dy = 0; dy < 2; ++dy) {
    const int y = y0 + dy;
    if (y < 0 || y >= s.height) continue;
    const double fy = dy == 0 ? 1.0 - wy : wy;
    for (int dx = 0; dx < 2; ++dx) {
      const int x = x0 + dx;
      if (x < 0 || x >= s.width) continue;
      const double fx = dx == 0 ? 1.0 - wx : wx;
      acc += fy * fx * image.at(0, y, x, c);
    }
  }
  return static_cast<float>(acc);
}

std::uint8_t sample_nearest(const LabelMap& mask, double sy, double sx) {
  const int y = static_cast<int>(std::floor(sy + 0.5));
  const int x = static_cast<int>(std::floor(sx + 0.5));
  if (y < 0 || y >= mask.height || x < 0 || x >= mask.width) return 0;
  return mask.at(y, x);
}

}  // namespace

void AugmentPolicy::validate() const {
  auto prob = [](double p, const char* field) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError(std::string("policy.") + field +
                        " must lie in [0, 1], got " + std::to_string(p));
    }
  };
  prob(flip_prob, "flip_prob");
  prob(warp_prob, "warp_prob");
  if (!(warp_amplitude.first > 0.0 &&
        warp_amplitude.second >= warp_amplitude.first)) {
    throw ConfigError("policy.warp_amplitude range must be positive and "
                      "ordered");
  }
  if (!(warp_frequency.first > 0.0 &&
        warp_frequency.second >= warp_frequency.first)) {
    throw ConfigError("policy.warp_frequency range must be positive and "
                      "ordered");
  }
  if (max_rotation_deg < 0.0) {
    throw ConfigError("policy.max_rotation_deg must be >= 0");
  }
  if (!(zoom_range.first > 0.0 && zoom_range.second >= zoom_range.first)) {
    throw ConfigError("policy.zoom_range must be positive and ordered");
  }
  if (target_height < 0 || target_width < 0) {
    throw ConfigError("policy.target_size must be >= 0");
  }
}

float normalize_u8(std::uint8_t v) { return static_cast<float>(v) / 255.0f; }

float normalize_u16(std::uint16_t v) {
  return static_cast<float>(v) / 65535.0f;
}

Tensor4<float> normalize_minmax(const Tensor4<float>& image) {
  const float* in = image.data();
  float lo = in[0], hi = in[0];
  for (std::size_t i = 1; i < image.size(); ++i) {
    lo = std::min(lo, in[i]);
    hi = std::max(hi, in[i]);
  }
  Tensor4<float> out(image.shape());
  if (hi > lo) {
    const float inv = 1.0f / (hi - lo);
    float* o = out.data();
    for (std::size_t i = 0; i < image.size(); ++i) o[i] = (in[i] - lo) * inv;
  }
  return out;  // constant image stays all zeros
}

Tensor4<float> equalize(const Tensor4<float>& image, int bins) {
  if (image.shape().channels != 1) {
    throw ShapeError("equalize expects a single-channel image, got " +
                     image.shape().to_string());
  }
  const float* in = image.data();
  const std::size_t n = image.size();

  std::vector<std::int64_t> hist(bins, 0);
  auto bin_of = [&](float v) {
    int b = static_cast<int>(v * static_cast<float>(bins));
    return std::clamp(b, 0, bins - 1);
  };
  for (std::size_t i = 0; i < n; ++i) hist[bin_of(in[i])] += 1;

  std::vector<double> cdf(bins, 0.0);
  std::int64_t running = 0;
  double cdf_min = 0.0;
  bool seen = false;
  for (int b = 0; b < bins; ++b) {
    running += hist[b];
    cdf[b] = static_cast<double>(running) / static_cast<double>(n);
    if (!seen && hist[b] > 0) {
      cdf_min = cdf[b];
      seen = true;
    }
  }
  if (cdf_min >= 1.0) return image;  // single occupied bin

  Tensor4<float> out(image.shape());
  float* o = out.data();
  const double denom = 1.0 - cdf_min;
  for (std::size_t i = 0; i < n; ++i) {
    o[i] = static_cast<float>((cdf[bin_of(in[i])] - cdf_min) / denom);
  }
  return out;
}

Tensor4<float> resize_bilinear(const Tensor4<float>& image, int out_height,
                               int out_width) {
  const Shape4& s = image.shape();
  if (out_height == s.height && out_width == s.width) return image;
  Tensor4<float> out({s.batch, out_height, out_width, s.channels});
  for (int b = 0; b < s.batch; ++b) {
    for (int y = 0; y < out_height; ++y) {
      const double sy = src_coord(y, out_height, s.height);
      for (int x = 0; x < out_width; ++x) {
        const double sx = src_coord(x, out_width, s.width);
        for (int c = 0; c < s.channels; ++c) {
          out.at(b, y, x, c) = sample_bilinear(image, sy, sx, c);
        }
      }
    }
  }
  return out;
}

LabelMap resize_nearest(const LabelMap& mask, int out_height, int out_width) {
  if (out_height == mask.height && out_width == mask.width) return mask;
  LabelMap out(out_height, out_width, mask.num_classes);
  for (int y = 0; y < out_height; ++y) {
    const double sy = src_coord(y, out_height, mask.height);
    const int iy = std::clamp(static_cast<int>(std::floor(sy + 0.5)), 0,
                              mask.height - 1);
    for (int x = 0; x < out_width; ++x) {
      const double sx = src_coord(x, out_width, mask.width);
      const int ix = std::clamp(static_cast<int>(std::floor(sx + 0.5)), 0,
                                mask.width - 1);
      out.at(y, x) = mask.at(iy, ix);
    }
  }
  return out;
}

std::pair<Tensor4<float>, LabelMap> flip(const Tensor4<float>& image,
                                         const LabelMap& mask, Rng& rng,
                                         double prob) {
  check_pair(image, mask, "flip");
  const bool horizontal = rng.bernoulli(prob);
  const bool vertical = rng.bernoulli(prob);
  if (!horizontal && !vertical) return {image, mask};

  const Shape4& s = image.shape();
  Tensor4<float> img(s);
  LabelMap msk(s.height, s.width, mask.num_classes);
  for (int y = 0; y < s.height; ++y) {
    const int sy = vertical ? s.height - 1 - y : y;
    for (int x = 0; x < s.width; ++x) {
      const int sx = horizontal ? s.width - 1 - x : x;
      for (int c = 0; c < s.channels; ++c) {
        img.at(0, y, x, c) = image.at(0, sy, sx, c);
      }
      msk.at(y, x) = mask.at(sy, sx);
    }
  }
  return {std::move(img), std::move(msk)};
}

int warp_offset(double amplitude, double frequency, int index) {
  const double phase = frequency * std::numbers::pi * index / 180.0;
  return static_cast<int>(amplitude * (std::sin(phase) + 1.0) / 2.0);
}

std::pair<Tensor4<float>, LabelMap> warp(const Tensor4<float>& image,
                                         const LabelMap& mask, Rng& rng,
                                         const AugmentPolicy& policy) {
  check_pair(image, mask, "warp");
  const bool horizontal = rng.bernoulli(policy.warp_prob);
  const bool vertical = rng.bernoulli(policy.warp_prob);
  const double amplitude =
      rng.uniform(policy.warp_amplitude.first, policy.warp_amplitude.second);
  const double frequency =
      rng.uniform(policy.warp_frequency.first, policy.warp_frequency.second);

  Tensor4<float> img = image;
  LabelMap msk = mask;
  const Shape4& s = image.shape();

  if (horizontal) {
    Tensor4<float> shifted(s);
    LabelMap smask(s.height, s.width, mask.num_classes);
    for (int y = 0; y < s.height; ++y) {
      const int off = warp_offset(amplitude, frequency, y);
      for (int x = 0; x + off < s.width; ++x) {
        for (int c = 0; c < s.channels; ++c) {
          shifted.at(0, y, x + off, c) = img.at(0, y, x, c);
        }
        smask.at(y, x + off) = msk.at(y, x);
      }
    }
    img = std::move(shifted);
    msk = std::move(smask);
  }
  if (vertical) {
    Tensor4<float> shifted(s);
    LabelMap smask(s.height, s.width, mask.num_classes);
    for (int x = 0; x < s.width; ++x) {
      const int off = warp_offset(amplitude, frequency, x);
      for (int y = 0; y + off < s.height; ++y) {
        for (int c = 0; c < s.channels; ++c) {
          shifted.at(0, y + off, x, c) = img.at(0, y, x, c);
        }
        smask.at(y + off, x) = msk.at(y, x);
      }
    }
    img = std::move(shifted);
    msk = std::move(smask);
  }
  return {std::move(img), std::move(msk)};
}

std::pair<Tensor4<float>, LabelMap> rotate_by(const Tensor4<float>& image,
                                              const LabelMap& mask,
                                              double angle_deg) {
  check_pair(image, mask, "rotate");
  if (angle_deg == 0.0) return {image, mask};

  const Shape4& s = image.shape();
  const double rad = angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  const double cy = (s.height - 1) / 2.0;
  const double cx = (s.width - 1) / 2.0;

  Tensor4<float> img(s);
  LabelMap msk(s.height, s.width, mask.num_classes);
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      // Inverse mapping: rotate the output pixel back into the source frame.
      const double dy = y - cy;
      const double dx = x - cx;
      const double sy = cy + cs * dy + sn * dx;
      const double sx = cx - sn * dy + cs * dx;
      if (sy > -1.0 && sy < s.height && sx > -1.0 && sx < s.width) {
        for (int c = 0; c < s.channels; ++c) {
          img.at(0, y, x, c) = sample_bilinear(image, sy, sx, c);
        }
      }
      msk.at(y, x) = sample_nearest(mask, sy, sx);
    }
  }
  return {std::move(img), std::move(msk)};
}

std::pair<Tensor4<float>, LabelMap> rotate(const Tensor4<float>& image,
                                           const LabelMap& mask, Rng& rng,
                                           double max_deg) {
  const double angle = rng.uniform(-max_deg, max_deg);
  return rotate_by(image, mask, angle);
}

namespace {

// Center-crop or center-pad (fill 0 / background) to the requested size.
std::pair<Tensor4<float>, LabelMap> fit_to(const Tensor4<float>& image,
                                           const LabelMap& mask, int th,
                                           int tw) {
  const Shape4& s = image.shape();
  if (s.height == th && s.width == tw) return {image, mask};

  Tensor4<float> img({1, th, tw, s.channels});
  LabelMap msk(th, tw, mask.num_classes);
  // Offset of the output origin inside the source frame (negative = padding).
  const int oy = (s.height - th) / 2;
  const int ox = (s.width - tw) / 2;
  for (int y = 0; y < th; ++y) {
    const int sy = y + oy;
    if (sy < 0 || sy >= s.height) continue;
    for (int x = 0; x < tw; ++x) {
      const int sx = x + ox;
      if (sx < 0 || sx >= s.width) continue;
      for (int c = 0; c < s.channels; ++c) {
        img.at(0, y, x, c) = image.at(0, sy, sx, c);
      }
      msk.at(y, x) = mask.at(sy, sx);
    }
  }
  return {std::move(img), std::move(msk)};
}

}  // namespace

std::pair<Tensor4<float>, LabelMap> zoom_crop(
    const Tensor4<float>& image, const LabelMap& mask, Rng& rng,
    std::pair<double, double> zoom_range, int target_height,
    int target_width) {
  check_pair(image, mask, "zoom_crop");
  const double z = rng.uniform(zoom_range.first, zoom_range.second);
  const Shape4& s = image.shape();
  const int zh = std::max(1, static_cast<int>(std::lround(z * s.height)));
  const int zw = std::max(1, static_cast<int>(std::lround(z * s.width)));

  Tensor4<float> img = resize_bilinear(image, zh, zw);
  LabelMap msk = resize_nearest(mask, zh, zw);
  return fit_to(img, msk, target_height, target_width);
}

std::pair<Tensor4<float>, LabelMap> transform(const Tensor4<float>& image,
                                              const LabelMap& mask,
                                              const AugmentPolicy& policy,
                                              std::uint64_t seed) {
  check_pair(image, mask, "transform");
  policy.validate();
  const int th = policy.target_height > 0 ? policy.target_height
                                          : image.shape().height;
  const int tw = policy.target_width > 0 ? policy.target_width
                                         : image.shape().width;

  Tensor4<float> img = resize_bilinear(image, th, tw);
  LabelMap msk = resize_nearest(mask, th, tw);

  Rng rng(seed);
  auto [fimg, fmsk] = flip(img, msk, rng, policy.flip_prob);
  auto [wimg, wmsk] = warp(fimg, fmsk, rng, policy);
  auto [rimg, rmsk] = rotate(wimg, wmsk, rng, policy.max_rotation_deg);
  return zoom_crop(rimg, rmsk, rng, policy.zoom_range, th, tw);
}

}  // namespace segmicro
