#include "drunet/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "drunet/rng.hpp"

namespace drunet {

std::string_view group_name(Group g) { return g == Group::healthy ? "healthy-like" : "glaucoma-like"; }

Group parse_group(std::string_view name) {
  if (name == "healthy-like" || name == "healthy") return Group::healthy;
  if (name == "glaucoma-like" || name == "glaucoma") return Group::glaucoma;
  throw DataError("unknown group '" + std::string(name) + "'");
}

void validate_sample(const Sample& s) {
  const auto& L = s.labels;
  if (s.image.rank() != 3 || s.image.dim(0) != 1) {
    throw DataError(s.id + ": image must be 1 x H x W, got " + shape_str(s.image.shape()));
  }
  if (L.n != 1 || s.image.dim(1) != L.height || s.image.dim(2) != L.width) {
    throw DataError(s.id + ": image " + shape_str(s.image.shape()) + " and labels " + std::to_string(L.height) +
                    "x" + std::to_string(L.width) + " differ in size");
  }
  if (L.height % 8 != 0 || L.width % 8 != 0) {
    throw DataError(s.id + ": size " + std::to_string(L.height) + "x" + std::to_string(L.width) +
                    " not divisible by 8");
  }
  for (float v : s.image.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw DataError(s.id + ": image value outside [0, 1]");
  }
  for (auto v : L.data) {
    if (v >= kNumClasses) throw DataError(s.id + ": label value " + std::to_string(v) + " outside 0..7");
  }
}

Sample sample_from_rasters(const Raster& image, const Raster& labels, std::string id, Group group) {
  if (image.channels != 1) throw DataError(id + ": image must be 8-bit grayscale");
  if (labels.channels != 1) throw DataError(id + ": label map must be 8-bit grayscale");
  if (image.width != labels.width || image.height != labels.height) {
    throw DataError(id + ": image is " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                    " but labels are " + std::to_string(labels.height) + "x" + std::to_string(labels.width));
  }
  Sample s;
  s.id = std::move(id);
  s.group = group;
  s.image = Tensor<float>({1, image.height, image.width});
  for (std::size_t i = 0; i < image.data.size(); ++i) s.image[i] = static_cast<float>(image.data[i]) / 255.0f;
  s.labels = LabelMap(1, labels.height, labels.width);
  s.labels.data = labels.data;
  validate_sample(s);
  return s;
}

Sample load_sample(const std::filesystem::path& image_path, const std::filesystem::path& label_path, std::string id,
                   Group group) {
  if (id.empty()) id = image_path.stem().string();
  return sample_from_rasters(read_pnm(image_path), read_pnm(label_path), std::move(id), group);
}

Raster image_raster(const Tensor<float>& image) {
  if (image.rank() < 2) throw ShapeError("image_raster: need at least H x W");
  const int h = image.dim(image.rank() - 2);
  const int w = image.dim(image.rank() - 1);
  Raster r(w, h, 1);
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    const float v = std::clamp(image[i], 0.0f, 1.0f);
    r.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return r;
}

Raster label_raster(const LabelMap& labels, int image) {
  Raster r(labels.width, labels.height, 1);
  std::copy_n(labels.data.begin() + static_cast<std::ptrdiff_t>(image * labels.plane()), labels.plane(),
              r.data.begin());
  return r;
}

Tensor<float> batch_images(std::span<const Sample* const> samples) {
  if (samples.empty()) throw DataError("batch_images: empty batch");
  const int h = samples[0]->height(), w = samples[0]->width();
  Tensor<float> out({static_cast<int>(samples.size()), 1, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i]->height() != h || samples[i]->width() != w) throw DataError("batch_images: mixed image sizes");
    std::copy_n(samples[i]->image.data(), plane, out.data() + i * plane);
  }
  return out;
}

LabelMap batch_labels(std::span<const Sample* const> samples) {
  std::vector<const LabelMap*> maps;
  for (const auto* s : samples) maps.push_back(&s->labels);
  return stack_labels(maps);
}

// ---------------------------------------------------------------------------

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open manifest " + path.string() + " for writing");
  for (const auto& e : entries) {
    out << e.id << '\t' << group_name(e.group) << '\t' << e.image_path.generic_string() << '\t'
        << e.label_path.generic_string() << '\t' << e.seed << '\n';
  }
  if (!out) throw DataError("failed writing manifest " + path.string());
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  const std::filesystem::path base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, '\t');) f.push_back(tok);
    // operator/ keeps absolute paths as they are.
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 5) throw DataError(where + ": expected 5 tab-separated fields, got " + std::to_string(f.size()));
    ManifestEntry e;
    e.id = f[0];
    try {
      e.group = parse_group(f[1]);
    } catch (const DataError& err) {
      throw DataError(where + ": " + err.what());
    }
    e.image_path = base / f[2];
    e.label_path = base / f[3];
    auto [ptr, ec] = std::from_chars(f[4].data(), f[4].data() + f[4].size(), e.seed);
    if (ec != std::errc{} || ptr != f[4].data() + f[4].size()) throw DataError(where + ": bad seed '" + f[4] + "'");
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<Sample> load_manifest_samples(const std::vector<ManifestEntry>& entries) {
  std::vector<Sample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(load_sample(e.image_path, e.label_path, e.id, e.group));
  return out;
}

// ---------------------------------------------------------------------------

SplitIndices split_dataset(std::span<const Group> groups, int n_train, int n_val, int n_test, std::uint64_t seed) {
  if (n_train < 0 || n_val < 0 || n_test < 0) throw DataError("split_dataset: negative split size");
  CounterRng rng(seed, 0x5B1D);
  std::array<std::vector<std::size_t>, 2> pool;
  for (std::size_t i = 0; i < groups.size(); ++i) pool[groups[i] == Group::healthy ? 0 : 1].push_back(i);
  for (auto& p : pool) std::shuffle(p.begin(), p.end(), rng);

  std::array<std::size_t, 2> next{0, 0};
  auto take = [&](int n, const char* name) {
    std::array<int, 2> want{n / 2, n / 2};
    if (n % 2 == 1) {
      // Prefer the group with more samples left; break ties with the rng.
      const std::size_t left0 = pool[0].size() - next[0], left1 = pool[1].size() - next[1];
      int g = left0 > left1 ? 0 : left1 > left0 ? 1 : static_cast<int>(rng() & 1);
      ++want[g];
    }
    std::vector<std::size_t> out;
    for (int g = 0; g < 2; ++g) {
      if (next[g] + want[g] > pool[g].size()) {
        throw DataError(std::string("split_dataset: not enough ") + std::string(group_name(g == 0 ? Group::healthy : Group::glaucoma)) +
                        " samples for the " + name + " split (need " + std::to_string(want[g]) + ", " +
                        std::to_string(pool[g].size() - next[g]) + " left)");
      }
      for (int k = 0; k < want[g]; ++k) out.push_back(pool[g][next[g]++]);
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  SplitIndices s;
  s.train = take(n_train, "train");
  s.val = take(n_val, "val");
  s.test = take(n_test, "test");
  return s;
}

// ---------------------------------------------------------------------------

const std::array<Rgb, kNumClasses>& class_palette() {
  static const std::array<Rgb, kNumClasses> palette = {{
      {0, 0, 0},        // vitreous: black
      {255, 0, 0},      // RNFL + prelamina: red
      {0, 255, 255},    // other retina: cyan
      {255, 105, 180},  // RPE: pink
      {0, 255, 0},      // choroid: green
      {255, 255, 0},    // sclera: yellow
      {0, 0, 255},      // lamina cribrosa: blue
      {128, 128, 128},  // noise: gray
  }};
  return palette;
}

Raster render_stain(const LabelMap& labels, int image) {
  const auto& pal = class_palette();
  Raster r(labels.width, labels.height, 3);
  const std::size_t off = image * labels.plane();
  for (std::size_t i = 0; i < labels.plane(); ++i) {
    const std::uint8_t c = labels.data[off + i];
    if (c >= kNumClasses) throw DataError("render_stain: label " + std::to_string(c) + " outside 0..7");
    r.data[3 * i] = pal[c].r;
    r.data[3 * i + 1] = pal[c].g;
    r.data[3 * i + 2] = pal[c].b;
  }
  return r;
}

LabelMap parse_stain(const Raster& render) {
  if (render.channels != 3) throw DataError("parse_stain: expected an RGB image");
  const auto& pal = class_palette();
  LabelMap out(1, render.height, render.width);
  for (std::size_t i = 0; i < out.plane(); ++i) {
    const Rgb px{render.data[3 * i], render.data[3 * i + 1], render.data[3 * i + 2]};
    auto it = std::find(pal.begin(), pal.end(), px);
    if (it == pal.end()) {
      throw DataError("parse_stain: pixel " + std::to_string(i) + " has a colour outside the class palette");
    }
    out.data[i] = static_cast<std::uint8_t>(it - pal.begin());
  }
  return out;
}

}  // namespace drunet
