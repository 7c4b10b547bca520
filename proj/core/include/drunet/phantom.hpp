#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "drunet/dataset.hpp"

namespace drunet {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Range&, const Range&) = default;
};

/// Geometry and appearance of a synthetic optic-nerve-head B-scan. Lengths
/// are in pixels at the reference height of 248 rows and scale linearly with
/// `height`.
struct PhantomConfig {
  int height = 248;
  int width = 384;
  Group group = Group::healthy;

  Range surface_depth{40, 58};  // vitreous / RNFL boundary away from the cup
  Range rnfl_healthy{16, 24};
  Range rnfl_glaucoma{9, 14};
  Range retina{36, 46};
  Range rpe{6, 9};
  Range choroid{18, 28};
  Range sclera{20, 30};
  Range canal_width{70, 100};   // opening in retina/RPE/choroid/sclera
  Range cup_margin{12, 24};     // extra cup half-width beyond the canal
  Range cup_depth_healthy{14, 28};
  Range cup_depth_glaucoma{38, 56};
  Range lc_offset{8, 20};       // LC top below the RPE bottom
  Range lc_thickness{14, 22};
  double boundary_amplitude = 5.0;  // summed sinusoid amplitude per boundary
  int min_noise_band = 8;

  // Appearance. Intensities are pre-speckle means in [0, 1].
  std::array<double, kNumClasses> intensity{0.04, 0.78, 0.38, 0.95, 0.55, 0.68, 0.62, 0.12};
  double prelamina_intensity = 0.50;
  double speckle = 0.22;
  double additive_noise = 0.02;
  Range brightness{0.85, 1.10};
  Range vessel_count{2, 5};  // inclusive integer range
  Range vessel_width{3, 7};
  Range vessel_shadow{0.35, 0.65};  // intensity factor beneath a vessel

  /// Throws std::invalid_argument when the layer stack cannot fit the image.
  void validate() const;
};

struct PhantomGeometry {
  /// Pixel count per class as implied by the column boundary lists.
  std::array<std::size_t, kNumClasses> class_counts{};
  double mean_rnfl_thickness = 0.0;  // outside the canal
  double cup_depth = 0.0;
  int canal_left = 0;
  int canal_right = 0;  // exclusive
  /// Noise-free, shadow-free intensity, [1, H, W].
  Tensor<float> base_image;
};

struct Phantom {
  Sample sample;
  PhantomGeometry geometry;
};

Phantom generate_phantom(const PhantomConfig& config, std::uint64_t seed, std::string id = "phantom");

/// i-th sample of a generated set: group chosen so that glaucoma-like
/// samples make up `glaucoma_fraction` of every prefix as closely as
/// possible, seed derived from (seed, i).
Group phantom_group(int index, double glaucoma_fraction);
std::uint64_t phantom_seed(std::uint64_t seed, int index);
std::string phantom_id(int index);

}  // namespace drunet
