#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "drunet/tensor.hpp"

namespace drunet {

inline constexpr int kNumClasses = 8;

/// Tissue classes in index order. The index is what label files store.
enum class Tissue : std::uint8_t {
  vitreous = 0,
  rnfl_prelamina = 1,
  other_retina = 2,
  rpe = 3,
  choroid = 4,
  sclera = 5,
  lamina_cribrosa = 6,
  noise = 7,
};

std::string_view tissue_name(int cls);

/// Classes scored with Dice / specificity / sensitivity.
inline constexpr std::array<int, 4> kQuantifiedClasses = {1, 2, 3, 4};
/// Classes only assessed visually (their true thickness is not labelled).
inline constexpr std::array<int, 2> kQualitativeClasses = {5, 6};

/// Integer class map of shape [n, h, w], row-major.
struct LabelMap {
  int n = 1;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  LabelMap() = default;
  LabelMap(int n_, int h, int w, std::uint8_t fill = 0)
      : n(n_), height(h), width(w), data(static_cast<std::size_t>(n_) * h * w, fill) {}

  std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
  std::uint8_t& at(int b, int y, int x) noexcept { return data[b * plane() + static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int b, int y, int x) const noexcept { return data[b * plane() + static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// Throws std::invalid_argument if any label is >= kNumClasses.
void validate_labels(const LabelMap& labels);

/// [n, kNumClasses, h, w] indicator tensor; every pixel has exactly one 1.
template <typename T>
Tensor<T> one_hot(const LabelMap& labels);

/// Per-pixel argmax over channels of an [n, C, h, w] tensor. Ties go to the
/// lowest class index.
template <typename T>
LabelMap predict_classes(const Tensor<T>& probs);

/// Stacks the given per-image maps into one [n, h, w] map.
LabelMap stack_labels(const std::vector<const LabelMap*>& maps);

}  // namespace drunet
