#include "drunet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace drunet {

namespace {

// Stream ids: one per transform so toggling one leaves the others' draws alone.
enum : std::uint64_t { kStreamFlip = 1, kStreamRotate, kStreamElastic, kStreamIntensity, kStreamNoise, kStreamOcclude };

/// Resamples image bilinearly and labels by nearest neighbour through the
/// same source-coordinate map. A source outside the frame yields 0 / class 0.
template <typename Map>
Sample resample(const Sample& s, Map&& source) {
  const int H = s.height(), W = s.width();
  Sample out = s;
  const float* src = s.image.data();
  float* dst = out.image.data();
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const auto [sx, sy] = source(x, y);
      const std::size_t o = static_cast<std::size_t>(y) * W + x;
      if (!(sx >= -0.5 && sx < W - 0.5 && sy >= -0.5 && sy < H - 0.5)) {
        dst[o] = 0.0f;
        out.labels.data[o] = 0;
        continue;
      }
      const int nx = static_cast<int>(std::lround(sx)), ny = static_cast<int>(std::lround(sy));
      out.labels.data[o] = s.labels.data[static_cast<std::size_t>(std::clamp(ny, 0, H - 1)) * W + std::clamp(nx, 0, W - 1)];

      const double cx = std::clamp(sx, 0.0, W - 1.0), cy = std::clamp(sy, 0.0, H - 1.0);
      const int x0 = static_cast<int>(std::floor(cx)), y0 = static_cast<int>(std::floor(cy));
      const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
      const double fx = cx - x0, fy = cy - y0;
      const double v = (1 - fy) * ((1 - fx) * src[y0 * W + x0] + fx * src[y0 * W + x1]) +
                       fy * ((1 - fx) * src[y1 * W + x0] + fx * src[y1 * W + x1]);
      dst[o] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

/// Separable Gaussian blur with mirrored borders, in place.
void gaussian_blur(std::vector<double>& f, int H, int W, double sigma) {
  if (sigma <= 0.0) return;
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * r + 1);
  double total = 0.0;
  for (int i = -r; i <= r; ++i) total += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= total;
  auto mirror = [](int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
  };
  std::vector<double> tmp(f.size());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * f[static_cast<std::size_t>(y) * W + mirror(x + i, W)];
      tmp[static_cast<std::size_t>(y) * W + x] = acc;
    }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp[static_cast<std::size_t>(mirror(y + i, H)) * W + x];
      f[static_cast<std::size_t>(y) * W + x] = acc;
    }
}

}  // namespace

AugmentConfig AugmentConfig::none() {
  AugmentConfig c;
  c.hflip = c.rotate = c.elastic = c.intensity = c.noise = c.occlude = false;
  return c;
}

void AugmentConfig::validate() const {
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0)) throw std::invalid_argument(std::string("augment ") + name + " must be non-negative");
  };
  nonneg(elastic_alpha, "elastic_alpha");
  nonneg(elastic_sigma, "elastic_sigma");
  nonneg(noise_sigma, "noise_sigma");
  nonneg(speckle_sigma, "speckle_sigma");
  if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) throw std::invalid_argument("augment hflip_prob must be in [0, 1]");
  if (!(rotation_max_deg >= 0.0 && rotation_max_deg <= kMaxRotationDeg)) {
    throw std::invalid_argument("augment rotation_max_deg must be in [0, 8]");
  }
  if (!(gamma_min > 0.0 && gamma_max >= gamma_min)) throw std::invalid_argument("augment gamma range is invalid");
  if (occlusion_count < 0 || occlusion_width < 0 || occlusion_height < 0) {
    throw std::invalid_argument("augment occlusion count and size must be non-negative");
  }
  if (!(occlusion_factor_min > 0.0 && occlusion_factor_max >= occlusion_factor_min && occlusion_factor_max <= 1.0)) {
    throw std::invalid_argument("augment occlusion factor range must lie in (0, 1]");
  }
}

Sample hflip(const Sample& s) {
  const int H = s.height(), W = s.width();
  Sample out = s;
  for (int y = 0; y < H; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * W;
    for (int x = 0; x < W; ++x) {
      out.image[row + x] = s.image[row + (W - 1 - x)];
      out.labels.data[row + x] = s.labels.data[row + (W - 1 - x)];
    }
  }
  return out;
}

Sample rotate(const Sample& s, double angle_deg) {
  if (!(std::abs(angle_deg) <= kMaxRotationDeg)) {
    throw std::invalid_argument("rotate: |angle| must be at most 8 degrees, got " + std::to_string(angle_deg));
  }
  const double t = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(t), sn = std::sin(t);
  const double cx = (s.width() - 1) / 2.0, cy = (s.height() - 1) / 2.0;
  return resample(s, [&](int x, int y) {
    const double rx = x - cx, ry = y - cy;
    return std::pair{cx + c * rx + sn * ry, cy - sn * rx + c * ry};
  });
}

double DisplacementField::max_magnitude() const {
  double m = 0.0;
  for (std::size_t i = 0; i < dx.size(); ++i) m = std::max(m, std::hypot(dx[i], dy[i]));
  return m;
}

DisplacementField elastic_field(int height, int width, double alpha, double sigma, CounterRng& rng) {
  DisplacementField f{height, width, std::vector<double>(static_cast<std::size_t>(height) * width),
                      std::vector<double>(static_cast<std::size_t>(height) * width)};
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : f.dx) v = u(rng);
  for (auto& v : f.dy) v = u(rng);
  gaussian_blur(f.dx, height, width, sigma);
  gaussian_blur(f.dy, height, width, sigma);
  for (std::size_t i = 0; i < f.dx.size(); ++i) {
    f.dx[i] *= alpha;
    f.dy[i] *= alpha;
    const double m = std::hypot(f.dx[i], f.dy[i]);
    if (m > alpha) {
      f.dx[i] *= alpha / m;
      f.dy[i] *= alpha / m;
    }
  }
  return f;
}

Sample warp(const Sample& s, const DisplacementField& f) {
  if (f.height != s.height() || f.width != s.width()) throw std::invalid_argument("warp: field size differs from sample");
  const int W = s.width();
  return resample(s, [&](int x, int y) {
    const std::size_t i = static_cast<std::size_t>(y) * W + x;
    return std::pair{x + f.dx[i], y + f.dy[i]};
  });
}

Sample elastic_deform(const Sample& s, double alpha, double sigma, CounterRng& rng) {
  return warp(s, elastic_field(s.height(), s.width(), alpha, sigma, rng));
}

double IntensityMap::operator()(double v) const {
  const double g = std::pow(std::clamp(v, 0.0, 1.0), gamma);
  const std::array<double, 4> xs{0.0, knots[0][0], knots[1][0], 1.0};
  const std::array<double, 4> ys{0.0, knots[0][1], knots[1][1], 1.0};
  for (int k = 0; k < 3; ++k) {
    if (g <= xs[k + 1] || k == 2) {
      const double span = xs[k + 1] - xs[k];
      const double t = span > 0.0 ? (g - xs[k]) / span : 1.0;
      return std::clamp(ys[k] + t * (ys[k + 1] - ys[k]), 0.0, 1.0);
    }
  }
  return 1.0;
}

IntensityMap random_intensity_map(double gamma_min, double gamma_max, CounterRng& rng) {
  IntensityMap m;
  std::uniform_real_distribution<double> lg(std::log(gamma_min), std::log(gamma_max));
  m.gamma = std::exp(lg(rng));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::array<double, 2> xs{u(rng), u(rng)}, ys{u(rng), u(rng)};
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  m.knots = {{{xs[0], ys[0]}, {xs[1], ys[1]}}};
  return m;
}

Tensor<float> intensity_shift(const Tensor<float>& image, const IntensityMap& phi) {
  Tensor<float> out = image;
  for (auto& v : out.values()) v = static_cast<float>(phi(v));
  return out;
}

Tensor<float> add_noise(const Tensor<float>& image, double noise_sigma, double speckle_sigma, CounterRng& rng) {
  Tensor<float> out = image;
  std::normal_distribution<double> n01(0.0, 1.0);
  for (auto& v : out.values()) {
    const double s = speckle_sigma * n01(rng);
    const double n = noise_sigma * n01(rng);
    v = static_cast<float>(std::clamp(v * (1.0 + s) + n, 0.0, 1.0));
  }
  return out;
}

std::vector<OcclusionPatch> random_patches(int height, int width, const AugmentConfig& c, CounterRng& rng) {
  std::vector<OcclusionPatch> out;
  std::uniform_real_distribution<double> factor(c.occlusion_factor_min, c.occlusion_factor_max);
  for (int i = 0; i < c.occlusion_count; ++i) {
    OcclusionPatch p;
    p.width = c.occlusion_width;
    p.height = c.occlusion_height;
    p.x = std::uniform_int_distribution<int>(0, std::max(0, width - p.width))(rng);
    p.y = std::uniform_int_distribution<int>(0, std::max(0, height - p.height))(rng);
    p.factor = factor(rng);
    out.push_back(p);
  }
  return out;
}

Sample occlude(const Sample& s, const std::vector<OcclusionPatch>& patches) {
  const int H = s.height(), W = s.width();
  std::vector<double> f(static_cast<std::size_t>(H) * W, 1.0);
  for (const auto& p : patches) {
    for (int y = std::max(0, p.y); y < std::min(H, p.y + p.height); ++y)
      for (int x = std::max(0, p.x); x < std::min(W, p.x + p.width); ++x) {
        auto& v = f[static_cast<std::size_t>(y) * W + x];
        v = std::min(v, p.factor);
      }
  }
  Sample out = s;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] < 1.0) out.image[i] = static_cast<float>(s.image[i] * f[i]);
  }
  return out;
}

Sample augment_sample(const Sample& s, const AugmentConfig& c, const RngKey& key, AugmentTrace* trace) {
  c.validate();
  AugmentTrace t;
  Sample out = s;
  if (c.hflip) {
    CounterRng rng(key, kStreamFlip);
    t.flipped = std::bernoulli_distribution(c.hflip_prob)(rng);
    if (t.flipped) out = hflip(out);
  }
  if (c.rotate && c.rotation_max_deg > 0.0) {
    CounterRng rng(key, kStreamRotate);
    t.angle_deg = std::uniform_real_distribution<double>(-c.rotation_max_deg, c.rotation_max_deg)(rng);
    out = rotate(out, t.angle_deg);
  }
  if (c.elastic && c.elastic_alpha > 0.0) {
    CounterRng rng(key, kStreamElastic);
    const auto field = elastic_field(out.height(), out.width(), c.elastic_alpha, c.elastic_sigma, rng);
    t.max_displacement = field.max_magnitude();
    out = warp(out, field);
  }
  if (c.intensity) {
    CounterRng rng(key, kStreamIntensity);
    t.phi = random_intensity_map(c.gamma_min, c.gamma_max, rng);
    out.image = intensity_shift(out.image, t.phi);
  }
  if (c.noise && (c.noise_sigma > 0.0 || c.speckle_sigma > 0.0)) {
    CounterRng rng(key, kStreamNoise);
    out.image = add_noise(out.image, c.noise_sigma, c.speckle_sigma, rng);
  }
  if (c.occlude) {
    CounterRng rng(key, kStreamOcclude);
    t.patches = random_patches(out.height(), out.width(), c, rng);
    out = occlude(out, t.patches);
  }
  if (trace) *trace = std::move(t);
  return out;
}

}  // namespace drunet
