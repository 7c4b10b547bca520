#include "drunet/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "drunet/rng.hpp"

namespace drunet {

namespace {

enum : int {
  kVitreous = 0,
  kRnfl = 1,
  kRetina = 2,
  kRpe = 3,
  kChoroid = 4,
  kSclera = 5,
  kLc = 6,
  kNoise = 7,
};

class Draw {
 public:
  Draw(std::uint64_t seed, double scale) : rng_(seed, 0xF4A7), scale_(scale) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double length(const Range& r) { return uniform(r.lo, r.hi) * scale_; }
  int integer(const Range& r) {
    return std::uniform_int_distribution<int>(static_cast<int>(r.lo), static_cast<int>(r.hi))(rng_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }

  /// Sum of three low-frequency sinusoids with total amplitude `amp`.
  std::vector<double> wave(int width, double amp) {
    std::vector<double> w(width, 0.0);
    for (int k = 0; k < 3; ++k) {
      const double a = amp * uniform(0.15, 0.5);
      const double cycles = uniform(0.3, 2.0) * (k + 1);
      const double phase = uniform(0.0, 2.0 * std::numbers::pi);
      for (int x = 0; x < width; ++x) w[x] += a * std::sin(2.0 * std::numbers::pi * cycles * x / width + phase);
    }
    return w;
  }

  CounterRng& engine() { return rng_; }

 private:
  CounterRng rng_;
  double scale_;
};

int iround(double v) { return static_cast<int>(std::lround(v)); }

}  // namespace

void PhantomConfig::validate() const {
  if (height <= 0 || width <= 0 || height % 8 != 0 || width % 8 != 0) {
    throw std::invalid_argument("phantom size must be positive multiples of 8, got " + std::to_string(height) + "x" +
                                std::to_string(width));
  }
  auto check = [](const Range& r, const char* name) {
    if (!(r.lo >= 0.0 && r.hi >= r.lo)) throw std::invalid_argument(std::string("phantom range ") + name + " is invalid");
  };
  check(surface_depth, "surface_depth");
  check(rnfl_healthy, "rnfl_healthy");
  check(rnfl_glaucoma, "rnfl_glaucoma");
  check(retina, "retina");
  check(rpe, "rpe");
  check(choroid, "choroid");
  check(sclera, "sclera");
  check(canal_width, "canal_width");
  check(cup_margin, "cup_margin");
  check(cup_depth_healthy, "cup_depth_healthy");
  check(cup_depth_glaucoma, "cup_depth_glaucoma");
  check(lc_offset, "lc_offset");
  check(lc_thickness, "lc_thickness");
  check(vessel_count, "vessel_count");
  check(vessel_width, "vessel_width");
  check(vessel_shadow, "vessel_shadow");
  check(brightness, "brightness");
  const double s = height / 248.0;
  const double stack = (surface_depth.hi + std::max(rnfl_healthy.hi, rnfl_glaucoma.hi) + retina.hi + rpe.hi +
                        choroid.hi + sclera.hi) * s + 6.0 * boundary_amplitude * s + min_noise_band;
  if (stack > height) {
    throw std::invalid_argument("phantom layer thickness ranges (up to " + std::to_string(iround(stack)) +
                                " px) exceed image height " + std::to_string(height));
  }
  const double canal_stack = (surface_depth.hi + retina.hi + rpe.hi + lc_offset.hi + lc_thickness.hi) * s +
                             std::max(rnfl_healthy.hi, rnfl_glaucoma.hi) * s + min_noise_band;
  if (canal_stack > height) throw std::invalid_argument("phantom lamina cribrosa does not fit below the cup");
  if ((canal_width.hi + 2 * cup_margin.hi) * s >= width) {
    throw std::invalid_argument("phantom cup is wider than the image");
  }
  if (lc_thickness.lo * s < 1.0 || rpe.lo * s < 1.0) throw std::invalid_argument("phantom layers thinner than a pixel");
}

Phantom generate_phantom(const PhantomConfig& cfg, std::uint64_t seed, std::string id) {
  cfg.validate();
  const int H = cfg.height, W = cfg.width;
  const double s = H / 248.0;
  const bool glaucoma = cfg.group == Group::glaucoma;
  Draw d(seed, s);

  const double surface0 = d.length(cfg.surface_depth);
  const double t_rnfl = d.length(glaucoma ? cfg.rnfl_glaucoma : cfg.rnfl_healthy);
  const double t_retina = d.length(cfg.retina);
  const double t_rpe = d.length(cfg.rpe);
  const double t_choroid = d.length(cfg.choroid);
  const double t_sclera = d.length(cfg.sclera);
  const double canal_w = d.length(cfg.canal_width);
  const double cup_half = canal_w / 2 + d.length(cfg.cup_margin);
  const double cup_depth = d.length(glaucoma ? cfg.cup_depth_glaucoma : cfg.cup_depth_healthy);
  const double lc_off = d.length(cfg.lc_offset);
  const double lc_t = d.length(cfg.lc_thickness);
  const double center = W / 2.0 + d.uniform(-0.08, 0.08) * W;
  const double amp = cfg.boundary_amplitude * s;

  // Shared tilt/curvature plus a small independent wiggle per boundary.
  const auto common = d.wave(W, amp);
  std::array<std::vector<double>, 6> wig;
  for (auto& w : wig) w = d.wave(W, amp * 0.25);

  const int canal_left = iround(center - canal_w / 2);
  const int canal_right = iround(center + canal_w / 2);

  // Per-column boundaries. Outside the canal the column is
  //   [0, b0) vitreous, [b0, b1) rnfl, [b1, b2) retina, [b2, b3) rpe,
  //   [b3, b4) choroid, [b4, b5) sclera, [b5, H) noise.
  // Inside: [0, b0) vitreous, [b0, lc0) prelamina, [lc0, lc1) lc, [lc1, H) noise.
  std::vector<std::array<int, 6>> col(W);
  std::vector<std::array<int, 2>> lc(W);
  std::array<std::size_t, kNumClasses> counts{};
  double rnfl_sum = 0.0;
  int rnfl_cols = 0;
  const int floor_row = H - cfg.min_noise_band;
  for (int x = 0; x < W; ++x) {
    const double u = (x - center) / cup_half;
    const double bump = std::abs(u) < 1.0 ? 0.5 * (1.0 + std::cos(std::numbers::pi * u)) : 0.0;
    const double base = surface0 + common[x];
    const double surf = base + wig[0][x] + cup_depth * bump;
    const bool in_canal = x >= canal_left && x < canal_right;
    const double bm = base + t_rnfl + t_retina + t_rpe + wig[3][x];  // RPE bottom
    if (in_canal) {
      const double v = (x - center) / (canal_w / 2);
      const double bow = 0.25 * lc_t * (1.0 - v * v);  // LC bows posteriorly at the centre
      int lc0 = iround(bm + lc_off + bow);
      int lc1 = iround(bm + lc_off + bow + lc_t);
      lc1 = std::min(lc1, floor_row);
      lc0 = std::min(lc0, lc1 - 1);
      int b0 = std::clamp(iround(surf), 1, lc0 - 2);
      col[x] = {b0, b0, b0, b0, b0, b0};
      lc[x] = {lc0, lc1};
      counts[kVitreous] += b0;
      counts[kRnfl] += lc0 - b0;
      counts[kLc] += lc1 - lc0;
      counts[kNoise] += H - lc1;
    } else {
      std::array<double, 6> b{};
      b[0] = surf;
      b[1] = std::max(base + t_rnfl + wig[1][x], surf + 3.0 * s);
      b[2] = std::max(base + t_rnfl + t_retina + wig[2][x], b[1] + 4.0 * s);
      b[3] = std::max(bm, b[2] + t_rpe * 0.75);
      b[4] = std::max(bm + t_choroid + wig[4][x], b[3] + 3.0 * s);
      b[5] = std::max(bm + t_choroid + t_sclera + wig[5][x], b[4] + 3.0 * s);
      std::array<int, 6> bi{};
      for (int k = 0; k < 6; ++k) bi[k] = iround(b[k]);
      bi[0] = std::max(bi[0], 1);
      for (int k = 1; k < 6; ++k) bi[k] = std::max(bi[k], bi[k - 1] + 1);
      if (bi[5] > floor_row) throw std::invalid_argument("phantom layer stack overflows the image at column " + std::to_string(x));
      col[x] = bi;
      counts[kVitreous] += bi[0];
      for (int k = 1; k <= 5; ++k) counts[k] += bi[k] - bi[k - 1];
      counts[kNoise] += H - bi[5];
      rnfl_sum += bi[1] - bi[0];
      ++rnfl_cols;
    }
  }

  Phantom ph;
  Sample& smp = ph.sample;
  smp.id = std::move(id);
  smp.group = cfg.group;
  smp.labels = LabelMap(1, H, W);
  Tensor<float> base_img({1, H, W});
  const double gain = d.uniform(cfg.brightness.lo, cfg.brightness.hi);
  const auto& I = cfg.intensity;
  for (int x = 0; x < W; ++x) {
    const bool in_canal = x >= canal_left && x < canal_right;
    for (int y = 0; y < H; ++y) {
      int cls;
      double v;
      if (in_canal) {
        cls = y < col[x][0] ? kVitreous : y < lc[x][0] ? kRnfl : y < lc[x][1] ? kLc : kNoise;
        v = cls == kRnfl ? cfg.prelamina_intensity : I[cls];
        if (cls == kLc) v *= 1.0 - 0.4 * (y - lc[x][0]) / std::max(1, lc[x][1] - lc[x][0]);
      } else {
        const auto& b = col[x];
        cls = y < b[0] ? kVitreous : y < b[1] ? kRnfl : y < b[2] ? kRetina : y < b[3] ? kRpe
            : y < b[4] ? kChoroid : y < b[5] ? kSclera : kNoise;
        v = I[cls];
        if (cls == kSclera) v *= std::exp(-(y - b[4]) / (1.5 * std::max(1, b[5] - b[4])));
      }
      smp.labels.at(0, y, x) = static_cast<std::uint8_t>(cls);
      base_img[static_cast<std::size_t>(y) * W + x] = static_cast<float>(std::clamp(v * gain, 0.0, 1.0));
    }
  }

  // Vessel shadows: dark vertical bands below the RNFL, outside the canal.
  std::vector<double> shadow(W, 1.0);
  const int vessels = d.integer(cfg.vessel_count);
  for (int k = 0; k < vessels; ++k) {
    const int w = std::max(1, iround(d.length(cfg.vessel_width)));
    int x0 = 0;
    for (int tries = 0; tries < 32; ++tries) {
      x0 = static_cast<int>(d.uniform(0.0, W - w));
      if (x0 + w <= canal_left - 2 || x0 >= canal_right + 2) break;
    }
    const double f = d.uniform(cfg.vessel_shadow.lo, cfg.vessel_shadow.hi);
    for (int x = x0; x < x0 + w && x < W; ++x) shadow[x] = std::min(shadow[x], f);
  }

  smp.image = Tensor<float>({1, H, W});
  std::normal_distribution<double> n01(0.0, 1.0);
  auto& eng = d.engine();
  std::vector<double> speck(static_cast<std::size_t>(H) * W);
  for (auto& v : speck) v = n01(eng);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      // Speckle grains are elongated along the fast axis: average 3 columns.
      const double sp = (speck[y * W + std::max(0, x - 1)] + speck[y * W + x] + speck[y * W + std::min(W - 1, x + 1)]) /
                        std::sqrt(3.0);
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      const int cls = smp.labels.at(0, y, x);
      const double sh = (cls != kVitreous && y >= col[x][1]) ? shadow[x] : 1.0;
      const double v = base_img[i] * sh * (1.0 + cfg.speckle * sp) + cfg.additive_noise * n01(eng);
      smp.image[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }

  validate_sample(smp);
  ph.geometry.class_counts = counts;
  ph.geometry.mean_rnfl_thickness = rnfl_cols > 0 ? rnfl_sum / rnfl_cols : 0.0;
  ph.geometry.cup_depth = cup_depth;
  ph.geometry.canal_left = canal_left;
  ph.geometry.canal_right = canal_right;
  ph.geometry.base_image = std::move(base_img);
  return ph;
}

Group phantom_group(int index, double glaucoma_fraction) {
  const double f = std::clamp(glaucoma_fraction, 0.0, 1.0);
  const auto before = static_cast<long>(std::floor(index * f + 1e-9));
  const auto after = static_cast<long>(std::floor((index + 1) * f + 1e-9));
  return after > before ? Group::glaucoma : Group::healthy;
}

std::uint64_t phantom_seed(std::uint64_t seed, int index) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index) + 0xA5A5));
}

std::string phantom_id(int index) {
  std::string n = std::to_string(index);
  return "phantom_" + std::string(n.size() < 4 ? 4 - n.size() : 0, '0') + n;
}

}  // namespace drunet
