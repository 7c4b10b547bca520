#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "drunet/dataset.hpp"
#include "drunet/image_io.hpp"
#include "drunet/phantom.hpp"
#include "helpers.hpp"

using namespace drunet;
namespace fs = std::filesystem;

namespace {

Raster gray(int w, int h, std::uint8_t fill) { return Raster(w, h, 1, fill); }

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

}  // namespace

TEST_CASE("pnm round trip, grayscale and rgb") {
  std::mt19937_64 rng(1);
  for (int c : {1, 3}) {
    Raster r(7, 5, c);
    for (auto& v : r.data) v = static_cast<std::uint8_t>(rng());
    const auto bytes = encode_pnm(r);
    CHECK(bytes.substr(0, 2) == (c == 1 ? "P5" : "P6"));
    CHECK(decode_pnm(bytes) == r);
  }
}

TEST_CASE("pnm header comments and whitespace") {
  const std::string body(6, '\x07');
  const auto r = decode_pnm("P5\n# made by hand\n3 # width\n2\n255\n" + body);
  CHECK(r.width == 3);
  CHECK(r.height == 2);
  CHECK(r.data == std::vector<std::uint8_t>(6, 7));
}

TEST_CASE("pnm rejects malformed files") {
  const std::string body(6, '\0');
  CHECK_THROWS_AS(decode_pnm("P2\n3 2\n255\n" + body), ImageIoError);
  CHECK_THROWS_AS(decode_pnm("P5\n3 2\n65535\n" + body + body), ImageIoError);
  CHECK_THROWS_AS(decode_pnm("P5\n3 2\n255\n" + body.substr(1)), ImageIoError);
  CHECK_THROWS_AS(decode_pnm("P5\n3 2\n255\n" + body + "x"), ImageIoError);
  CHECK_THROWS_AS(decode_pnm("P5\n0 2\n255\n"), ImageIoError);
  CHECK_THROWS_AS(decode_pnm("P5\n99999999 2\n255\n"), ImageIoError);
  CHECK_THROWS_AS(decode_pnm("P5 3 2"), ImageIoError);
  CHECK_THROWS_AS(decode_pnm(""), ImageIoError);
  CHECK_THROWS_AS(read_pnm("/nonexistent/file.pgm"), ImageIoError);
}

TEST_CASE("fuzzed image and label files fail cleanly") {
  const auto dir = testing::scratch_dir("fuzz");
  Raster img = gray(16, 8, 100), lbl = gray(16, 8, 3);
  const auto good_img = encode_pnm(img), good_lbl = encode_pnm(lbl);
  std::mt19937_64 rng(2);
  int loaded = 0, rejected = 0;
  for (int k = 0; k < 1500; ++k) {
    std::string a = good_img, b = good_lbl;
    std::string& t = k % 2 ? a : b;
    switch (k % 4) {
      case 0:
        t = t.substr(0, rng() % (t.size() + 1));
        break;
      case 1:
        for (int m = 0; m < 1 + static_cast<int>(rng() % 4); ++m) t[rng() % t.size()] = static_cast<char>(rng());
        break;
      case 2:
        t.insert(rng() % t.size(), std::string(1 + rng() % 3, static_cast<char>(rng())));
        break;
      default:
        t.resize(rng() % 64);
        for (auto& ch : t) ch = static_cast<char>(rng());
    }
    write_bytes(dir / "i.pgm", a);
    write_bytes(dir / "l.pgm", b);
    try {
      const auto s = load_sample(dir / "i.pgm", dir / "l.pgm");
      validate_sample(s);
      ++loaded;
    } catch (const ImageIoError&) {
      ++rejected;
    } catch (const DataError&) {
      ++rejected;
    }
  }
  CHECK(loaded + rejected == 1500);
  CHECK(rejected > 500);
}

TEST_CASE("sample conversion") {
  auto s = sample_from_rasters(gray(8, 8, 0), gray(8, 8, 0), "z", Group::healthy);
  for (float v : s.image.values()) CHECK(v == 0.0f);
  s = sample_from_rasters(gray(8, 8, 255), gray(8, 8, 7), "w", Group::glaucoma);
  for (float v : s.image.values()) CHECK(v == 1.0f);
  CHECK(s.image.shape() == Shape{1, 8, 8});

  CHECK_THROWS_AS(sample_from_rasters(gray(8, 8, 0), gray(8, 8, 9), "x", Group::healthy), DataError);
  CHECK_THROWS_AS(sample_from_rasters(gray(8, 8, 0), gray(16, 8, 0), "x", Group::healthy), DataError);
  CHECK_THROWS_AS(sample_from_rasters(gray(12, 8, 0), gray(12, 8, 0), "x", Group::healthy), DataError);
  CHECK_THROWS_AS(sample_from_rasters(Raster(8, 8, 3), gray(8, 8, 0), "x", Group::healthy), DataError);

  Raster r = gray(16, 8, 0);
  for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] = static_cast<std::uint8_t>(i * 2);
  s = sample_from_rasters(r, gray(16, 8, 1), "r", Group::healthy);
  CHECK(image_raster(s.image) == r);
  CHECK(label_raster(s.labels) == gray(16, 8, 1));
}

TEST_CASE("groups") {
  CHECK(group_name(Group::healthy) == "healthy-like");
  CHECK(group_name(Group::glaucoma) == "glaucoma-like");
  CHECK(parse_group("glaucoma-like") == Group::glaucoma);
  CHECK(parse_group("healthy") == Group::healthy);
  CHECK_THROWS_AS(parse_group("other"), DataError);
}

TEST_CASE("manifest round trip and relative paths") {
  const auto dir = testing::scratch_dir("manifest");
  std::vector<ManifestEntry> entries{{"a", Group::healthy, "images/a.pgm", "labels/a.pgm", 11},
                                     {"b", Group::glaucoma, "/abs/b.pgm", "/abs/lb.pgm", 18446744073709551615ull}};
  write_manifest(entries, dir / "m.tsv");
  const auto back = read_manifest(dir / "m.tsv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].image_path == dir / "images/a.pgm");
  CHECK(back[0].seed == 11);
  CHECK(back[1].image_path == fs::path("/abs/b.pgm"));
  CHECK(back[1].seed == entries[1].seed);
  CHECK(back[1].group == Group::glaucoma);

  write_bytes(dir / "c.tsv", "# comment\n\nx\thealthy-like\ti.pgm\tl.pgm\t3\n");
  CHECK(read_manifest(dir / "c.tsv").size() == 1);
  write_bytes(dir / "bad1.tsv", "x\thealthy-like\ti.pgm\tl.pgm\n");
  CHECK_THROWS_AS(read_manifest(dir / "bad1.tsv"), DataError);
  write_bytes(dir / "bad2.tsv", "x\tmystery\ti.pgm\tl.pgm\t1\n");
  CHECK_THROWS_AS(read_manifest(dir / "bad2.tsv"), DataError);
  write_bytes(dir / "bad3.tsv", "x\thealthy-like\ti.pgm\tl.pgm\t1x\n");
  CHECK_THROWS_AS(read_manifest(dir / "bad3.tsv"), DataError);
  CHECK_THROWS_AS(read_manifest(dir / "missing.tsv"), DataError);
}

TEST_CASE("manifest samples load from disk") {
  const auto dir = testing::scratch_dir("manifest_load");
  const auto ph = generate_phantom(PhantomConfig{}, 5, "p5");
  write_pnm(image_raster(ph.sample.image), dir / "p5.pgm");
  write_pnm(label_raster(ph.sample.labels), dir / "p5_l.pgm");
  write_manifest({{"p5", Group::healthy, "p5.pgm", "p5_l.pgm", 5}}, dir / "m.tsv");
  const auto samples = load_manifest_samples(read_manifest(dir / "m.tsv"));
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].id == "p5");
  CHECK(samples[0].labels == ph.sample.labels);
  for (std::size_t i = 0; i < ph.sample.image.numel(); ++i)
    CHECK(std::abs(samples[0].image[i] - ph.sample.image[i]) <= 0.5f / 255.0f + 1e-6f);
}

TEST_CASE("batching") {
  auto a = sample_from_rasters(gray(8, 8, 0), gray(8, 8, 1), "a", Group::healthy);
  auto b = sample_from_rasters(gray(8, 8, 255), gray(8, 8, 2), "b", Group::healthy);
  const Sample* both[] = {&a, &b};
  const auto x = batch_images(both);
  CHECK(x.shape() == Shape{2, 1, 8, 8});
  CHECK(x.at(1, 0, 3, 3) == 1.0f);
  const auto l = batch_labels(both);
  CHECK(l.n == 2);
  CHECK(l.at(1, 0, 0) == 2);
  auto c = sample_from_rasters(gray(16, 8, 0), gray(16, 8, 1), "c", Group::healthy);
  const Sample* mixed[] = {&a, &c};
  CHECK_THROWS_AS(batch_images(mixed), DataError);
}

TEST_CASE("split sizes, disjointness, group balance and determinism") {
  std::vector<Group> groups;
  for (int i = 0; i < 100; ++i) groups.push_back(phantom_group(i, 0.5));
  const auto s = split_dataset(groups, 40, 10, 50, 7);
  CHECK(s.train.size() == 40);
  CHECK(s.val.size() == 10);
  CHECK(s.test.size() == 50);
  std::set<std::size_t> all;
  for (const auto* part : {&s.train, &s.val, &s.test}) all.insert(part->begin(), part->end());
  CHECK(all.size() == 100);
  auto count = [&](const std::vector<std::size_t>& idx) {
    return std::count_if(idx.begin(), idx.end(), [&](std::size_t i) { return groups[i] == Group::glaucoma; });
  };
  CHECK(count(s.train) == 20);
  CHECK(count(s.val) == 5);
  CHECK(count(s.test) == 25);

  const auto again = split_dataset(groups, 40, 10, 50, 7);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  CHECK(split_dataset(groups, 40, 10, 50, 8).train != s.train);

  const auto odd = split_dataset(groups, 7, 3, 0, 1);
  CHECK(std::abs(2 * count(odd.train) - 7) == 1);
  CHECK_THROWS_AS(split_dataset(groups, 90, 20, 0, 1), DataError);
  std::vector<Group> skewed(10, Group::healthy);
  skewed[0] = Group::glaucoma;
  CHECK_THROWS_AS(split_dataset(skewed, 4, 0, 0, 1), DataError);
}

TEST_CASE("stain palette render and parse") {
  std::set<std::tuple<int, int, int>> colours;
  for (const auto& c : class_palette()) colours.insert({c.r, c.g, c.b});
  CHECK(colours.size() == kNumClasses);
  CHECK(class_palette()[0] == Rgb{0, 0, 0});

  const auto black = render_stain(LabelMap(1, 4, 6, 0));
  CHECK(black == Raster(6, 4, 3, 0));

  std::mt19937_64 rng(3);
  LabelMap lm(1, 9, 11);
  for (auto& v : lm.data) v = static_cast<std::uint8_t>(rng() % 8);
  CHECK(parse_stain(render_stain(lm)) == lm);
  auto off = render_stain(lm);
  off.data[4] = 17;
  off.data[5] = 3;
  CHECK_THROWS_AS(parse_stain(off), DataError);
}

TEST_CASE("every phantom contains all eight classes") {
  for (int k = 0; k < 100; ++k) {
    PhantomConfig cfg;
    cfg.group = k % 2 ? Group::glaucoma : Group::healthy;
    const auto ph = generate_phantom(cfg, 1000 + static_cast<std::uint64_t>(k));
    std::array<int, kNumClasses> hist{};
    for (auto v : ph.sample.labels.data) ++hist[v];
    for (int c = 0; c < kNumClasses; ++c) CHECK_MESSAGE(hist[static_cast<std::size_t>(c)] > 0, "seed " << k << " class " << c);
    validate_sample(ph.sample);
  }
}

TEST_CASE("phantoms are deterministic per seed") {
  const auto a = generate_phantom(PhantomConfig{}, 77), b = generate_phantom(PhantomConfig{}, 77);
  CHECK(a.sample.image == b.sample.image);
  CHECK(a.sample.labels == b.sample.labels);
  CHECK_FALSE(generate_phantom(PhantomConfig{}, 78).sample.image == a.sample.image);
}

TEST_CASE("glaucoma-like phantoms have thinner class-1 layer") {
  double healthy = 0, glaucoma = 0;
  for (int k = 0; k < 50; ++k) {
    PhantomConfig cfg;
    healthy += generate_phantom(cfg, 2000 + static_cast<std::uint64_t>(k)).geometry.mean_rnfl_thickness;
    cfg.group = Group::glaucoma;
    glaucoma += generate_phantom(cfg, 3000 + static_cast<std::uint64_t>(k)).geometry.mean_rnfl_thickness;
  }
  CHECK(glaucoma / 50 < healthy / 50);
}

TEST_CASE("class counts of the render equal the generator geometry") {
  for (int k = 0; k < 10; ++k) {
    PhantomConfig cfg;
    cfg.group = k % 2 ? Group::glaucoma : Group::healthy;
    const auto ph = generate_phantom(cfg, 40 + static_cast<std::uint64_t>(k));
    const auto parsed = parse_stain(decode_pnm(encode_pnm(render_stain(ph.sample.labels))));
    std::array<std::size_t, kNumClasses> hist{};
    for (auto v : parsed.data) ++hist[v];
    CHECK(hist == ph.geometry.class_counts);
  }
}

TEST_CASE("noise-free intensity is constant within each flat tissue") {
  const auto ph = generate_phantom(PhantomConfig{}, 9);
  std::array<std::set<float>, kNumClasses> levels;
  const auto& L = ph.sample.labels;
  for (int y = 0; y < L.height; ++y)
    for (int x = 0; x < L.width; ++x) {
      if (x >= ph.geometry.canal_left && x < ph.geometry.canal_right) continue;
      levels[L.at(0, y, x)].insert(ph.geometry.base_image[static_cast<std::size_t>(y) * L.width + x]);
    }
  for (int c : {0, 1, 2, 3, 4, 7}) CHECK(levels[static_cast<std::size_t>(c)].size() == 1);
  CHECK(levels[5].size() > 1);
}

TEST_CASE("phantom config validation and set helpers") {
  PhantomConfig cfg;
  cfg.height = 250;
  CHECK_THROWS(generate_phantom(cfg, 1));
  cfg = {};
  cfg.rnfl_healthy = {30, 10};
  CHECK_THROWS(generate_phantom(cfg, 1));
  int glaucoma = 0;
  for (int i = 0; i < 10; ++i) glaucoma += phantom_group(i, 0.5) == Group::glaucoma;
  CHECK(glaucoma == 5);
  CHECK(phantom_id(3) == "phantom_0003");
  CHECK(phantom_seed(7, 1) != phantom_seed(7, 2));
}
