#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "drunet/tensor.hpp"

namespace testing {

template <typename T = double>
drunet::Tensor<T> random_tensor(drunet::Shape shape, std::mt19937_64& rng, double sd = 1.0) {
  drunet::Tensor<T> t(std::move(shape));
  std::normal_distribution<double> d(0.0, sd);
  for (auto& v : t.values()) v = static_cast<T>(d(rng));
  return t;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("drunet_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
