#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "drunet/image_io.hpp"
#include "drunet/labels.hpp"
#include "drunet/tensor.hpp"

namespace drunet {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Group { healthy, glaucoma };

std::string_view group_name(Group g);  // "healthy-like" / "glaucoma-like"
Group parse_group(std::string_view name);

struct Sample {
  std::string id;
  Group group = Group::healthy;
  Tensor<float> image;  // [1, H, W], values in [0, 1]
  LabelMap labels;      // n == 1

  int height() const { return labels.height; }
  int width() const { return labels.width; }
};

/// Throws DataError unless image and labels agree in size, H and W are
/// multiples of 8, pixels lie in [0, 1] and labels in 0..7.
void validate_sample(const Sample& s);

/// Grayscale image / label rasters -> Sample. Intensities are scaled by 1/255.
Sample sample_from_rasters(const Raster& image, const Raster& labels, std::string id, Group group);
Sample load_sample(const std::filesystem::path& image_path, const std::filesystem::path& label_path,
                   std::string id = {}, Group group = Group::healthy);

/// Image quantized to 8 bits (round to nearest).
Raster image_raster(const Tensor<float>& image);
Raster label_raster(const LabelMap& labels, int image = 0);

/// Stacks samples into model input [N, 1, H, W] and an [N, H, W] label map.
Tensor<float> batch_images(std::span<const Sample* const> samples);
LabelMap batch_labels(std::span<const Sample* const> samples);

// ---------------------------------------------------------------------------
// Manifest: one tab-separated line per sample,
//   id <TAB> group <TAB> image_path <TAB> label_path <TAB> seed
// Relative paths resolve against the manifest's directory.

struct ManifestEntry {
  std::string id;
  Group group = Group::healthy;
  std::filesystem::path image_path;
  std::filesystem::path label_path;
  std::uint64_t seed = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);
/// Paths in the result are resolved (absolute or relative to the cwd).
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
std::vector<Sample> load_manifest_samples(const std::vector<ManifestEntry>& entries);

// ---------------------------------------------------------------------------

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

/// Disjoint seeded split. Every split takes half its size from each group;
/// an odd count gives the extra sample to a seeded choice of group. Throws
/// DataError when a group cannot cover its share.
SplitIndices split_dataset(std::span<const Group> groups, int n_train, int n_val, int n_test,
                           std::uint64_t seed);

// ---------------------------------------------------------------------------

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Display colour of each class, indexed by class.
const std::array<Rgb, kNumClasses>& class_palette();

Raster render_stain(const LabelMap& labels, int image = 0);
/// Inverse of render_stain; throws DataError on a colour outside the palette.
LabelMap parse_stain(const Raster& render);

}  // namespace drunet
