#pragma once

#include <array>
#include <vector>

#include "drunet/dataset.hpp"
#include "drunet/rng.hpp"

namespace drunet {

struct AugmentConfig {
  bool hflip = true;
  bool rotate = true;
  bool elastic = true;
  bool intensity = true;
  bool noise = true;
  bool occlude = true;

  double hflip_prob = 0.5;
  double rotation_max_deg = 8.0;
  double elastic_alpha = 15.0;  // px
  double elastic_sigma = 10.0;  // px
  double gamma_min = 0.5;
  double gamma_max = 2.0;
  double noise_sigma = 0.03;
  double speckle_sigma = 0.05;
  int occlusion_count = 20;
  int occlusion_width = 60;
  int occlusion_height = 20;
  double occlusion_factor_min = 0.2;
  double occlusion_factor_max = 0.8;

  static AugmentConfig none();

  /// Throws std::invalid_argument on negative magnitudes, a rotation bound
  /// above 8 degrees, or an occlusion factor range outside (0, 1].
  void validate() const;
};

inline constexpr double kMaxRotationDeg = 8.0;

/// Mirror image and labels about the vertical axis.
Sample hflip(const Sample& s);

/// Rotation about the image centre; positive angles turn the picture
/// clockwise as displayed. Image samples bilinearly, labels take the nearest
/// source pixel; pixels whose source lies outside the frame become
/// intensity 0 / class 0. Throws std::invalid_argument if |angle| > 8.
Sample rotate(const Sample& s, double angle_deg);

/// Per-pixel displacement (dx, dy), each H x W row-major. Output pixel p
/// reads the source at p + d(p).
struct DisplacementField {
  int height = 0;
  int width = 0;
  std::vector<double> dx, dy;

  double max_magnitude() const;
};

/// Uniform[-1, 1] noise per component, Gaussian-smoothed with `sigma`,
/// scaled by `alpha`, then limited to a magnitude of at most `alpha`.
DisplacementField elastic_field(int height, int width, double alpha, double sigma, CounterRng& rng);

/// Applies one field to both image (bilinear) and labels (nearest).
Sample warp(const Sample& s, const DisplacementField& field);
Sample elastic_deform(const Sample& s, double alpha, double sigma, CounterRng& rng);

/// phi(I) = PL(I^gamma), PL the piecewise-linear map through
/// (0,0), knots[0], knots[1], (1,1) with both knot coordinates sorted.
struct IntensityMap {
  double gamma = 1.0;
  std::array<std::array<double, 2>, 2> knots{{{1.0 / 3.0, 1.0 / 3.0}, {2.0 / 3.0, 2.0 / 3.0}}};

  double operator()(double v) const;
};

IntensityMap random_intensity_map(double gamma_min, double gamma_max, CounterRng& rng);
Tensor<float> intensity_shift(const Tensor<float>& image, const IntensityMap& phi);

/// I' = clamp(I (1 + s) + n, 0, 1), n ~ N(0, noise_sigma), s ~ N(0, speckle_sigma).
Tensor<float> add_noise(const Tensor<float>& image, double noise_sigma, double speckle_sigma, CounterRng& rng);

struct OcclusionPatch {
  int x = 0, y = 0, width = 0, height = 0;
  double factor = 1.0;
};

std::vector<OcclusionPatch> random_patches(int height, int width, const AugmentConfig& config, CounterRng& rng);
/// Scales intensities inside each (frame-clipped) patch by its factor.
/// Where patches overlap the smallest factor applies. Labels are untouched.
Sample occlude(const Sample& s, const std::vector<OcclusionPatch>& patches);

/// What augment_sample drew; filled when requested.
struct AugmentTrace {
  bool flipped = false;
  double angle_deg = 0.0;
  double max_displacement = 0.0;
  IntensityMap phi;
  std::vector<OcclusionPatch> patches;
};

/// hflip -> rotate -> elastic -> intensity -> noise -> occlude, each enabled
/// step drawing from its own stream of `key`. Pure in (s, config, key).
Sample augment_sample(const Sample& s, const AugmentConfig& config, const RngKey& key, AugmentTrace* trace = nullptr);

}  // namespace drunet
