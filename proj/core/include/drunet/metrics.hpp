#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drunet/labels.hpp"

namespace drunet {

struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // 0 or 1
};

/// Pixels of image `image` in `labels` that carry class `cls`.
BinaryMask class_mask(const LabelMap& labels, int cls, int image = 0);

// Each metric returns std::nullopt when its denominator is empty; such
// values are excluded from aggregates rather than counted as zero.

/// 2 |DS n MS| / (|DS| + |MS|); undefined when both masks are empty.
std::optional<double> dice(const BinaryMask& pred, const BinaryMask& truth);
/// |~DS n ~MS| / |~MS|; undefined when the truth covers the whole image.
std::optional<double> specificity(const BinaryMask& pred, const BinaryMask& truth);
/// |DS n MS| / |MS|; undefined when the truth is empty.
std::optional<double> sensitivity(const BinaryMask& pred, const BinaryMask& truth);

struct ClassMetrics {
  std::optional<double> dice;
  std::optional<double> specificity;
  std::optional<double> sensitivity;
};

struct ImageMetrics {
  std::string id;
  std::string group;
  std::optional<double> loss;
  std::vector<ClassMetrics> per_class;  // parallel to MetricsReport::classes
};

struct Aggregate {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single value
  int count = 0;    // number of defined values
};

/// Mean and sample sd of the defined values; count == 0 when none are.
Aggregate aggregate(std::span<const std::optional<double>> values);

struct ClassSummary {
  Aggregate dice;
  Aggregate specificity;
  Aggregate sensitivity;
};

struct GroupSummary {
  std::string group;  // "all" or a group tag
  int images = 0;
  std::vector<ClassSummary> per_class;  // parallel to MetricsReport::classes
  std::optional<double> mean_loss;
  /// Mean over classes of the per-class mean Dice (classes with no defined
  /// value are skipped).
  std::optional<double> mean_dice() const;
};

struct MetricsReport {
  std::vector<int> classes;
  std::vector<ImageMetrics> images;
  std::vector<GroupSummary> groups;  // "all" first, then tags in first-seen order

  const GroupSummary* group(std::string_view name) const;
};

ImageMetrics evaluate_image(const LabelMap& pred, const LabelMap& truth, std::span<const int> classes,
                            std::string id, std::string group);

/// Builds group summaries from per-image metrics.
MetricsReport build_report(std::vector<int> classes, std::vector<ImageMetrics> images);

/// Human-readable table, values as "mean ± sd (n)".
std::string format_report_table(const MetricsReport& report);

/// Structured form; see docs/file_formats.md for the schema.
std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);

}  // namespace drunet
