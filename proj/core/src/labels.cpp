#include "drunet/labels.hpp"

#include <stdexcept>
#include <string>

namespace drunet {

std::string_view tissue_name(int cls) {
  static constexpr std::array<std::string_view, kNumClasses> names = {
      "vitreous", "rnfl_prelamina", "other_retina", "rpe",
      "choroid",  "sclera",         "lamina_cribrosa", "noise"};
  if (cls < 0 || cls >= kNumClasses) throw std::out_of_range("tissue class " + std::to_string(cls));
  return names[static_cast<std::size_t>(cls)];
}

void validate_labels(const LabelMap& labels) {
  if (labels.data.size() != static_cast<std::size_t>(labels.n) * labels.plane()) {
    throw std::invalid_argument("label map size does not match its dimensions");
  }
  for (std::size_t i = 0; i < labels.data.size(); ++i) {
    if (labels.data[i] >= kNumClasses) {
      throw std::invalid_argument("label value " + std::to_string(labels.data[i]) + " at index " +
                                  std::to_string(i) + " exceeds " + std::to_string(kNumClasses - 1));
    }
  }
}

template <typename T>
Tensor<T> one_hot(const LabelMap& labels) {
  validate_labels(labels);
  Tensor<T> out(Shape{labels.n, kNumClasses, labels.height, labels.width});
  const std::size_t plane = labels.plane();
  for (int b = 0; b < labels.n; ++b) {
    for (std::size_t i = 0; i < plane; ++i) {
      const int c = labels.data[b * plane + i];
      out[(static_cast<std::size_t>(b) * kNumClasses + c) * plane + i] = T(1);
    }
  }
  return out;
}

template <typename T>
LabelMap predict_classes(const Tensor<T>& probs) {
  const auto [n, c, h, w] = nchw(probs, "predict_classes");
  LabelMap out(n, h, w);
  const std::size_t plane = out.plane();
  for (int b = 0; b < n; ++b) {
    const T* base = probs.data() + static_cast<std::size_t>(b) * c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      int best = 0;
      for (int ch = 1; ch < c; ++ch) {
        if (base[ch * plane + i] > base[best * plane + i]) best = ch;
      }
      out.data[b * plane + i] = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

LabelMap stack_labels(const std::vector<const LabelMap*>& maps) {
  if (maps.empty()) throw std::invalid_argument("stack_labels: no maps");
  LabelMap out(0, maps.front()->height, maps.front()->width);
  for (const LabelMap* m : maps) {
    if (m->height != out.height || m->width != out.width) {
      throw ShapeError("stack_labels: label maps differ in size");
    }
    out.data.insert(out.data.end(), m->data.begin(), m->data.end());
    out.n += m->n;
  }
  return out;
}

template Tensor<float> one_hot<float>(const LabelMap&);
template Tensor<double> one_hot<double>(const LabelMap&);
template LabelMap predict_classes<float>(const Tensor<float>&);
template LabelMap predict_classes<double>(const Tensor<double>&);

}  // namespace drunet
