#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "run_config.hpp"

using namespace drunet;
using namespace drunet::cli;

namespace {

std::string sample_value(const ConfigKey& k) {
  if (k.type == "bool") return "false";
  if (k.type == "float,float") return "1,2";
  if (k.type == "path") return "/tmp/x";
  return "3";
}

}  // namespace

TEST_CASE("every documented key is accepted") {
  REQUIRE(config_keys().size() > 40);
  for (const auto& k : config_keys()) {
    RunConfig c;
    CHECK_NOTHROW(apply_setting(c, k.name, sample_value(k), "test"));
    CHECK_FALSE(k.help.empty());
  }
}

TEST_CASE("settings land in the right fields") {
  RunConfig c;
  apply_config_text(c,
                    "# comment\n"
                    "lr0 = 0.02\n"
                    "\n"
                    "   momentum=0.5  \n"
                    "aug.occlude = no\n"
                    "aug.rotation_max_deg = 4\n"
                    "phantom.rnfl_glaucoma = 8, 12\n"
                    "seed = 18446744073709551615\n"
                    "checkpoint_dir = out/run\n",
                    "cfg");
  CHECK(c.train.lr0 == 0.02);
  CHECK(c.train.momentum == 0.5);
  CHECK_FALSE(c.train.augmentation.occlude);
  CHECK(c.train.augmentation.rotation_max_deg == 4.0);
  CHECK(c.phantom.rnfl_glaucoma == Range{8, 12});
  CHECK(c.train.seed == 18446744073709551615ull);
  CHECK(c.train.checkpoint_dir == "out/run");
  apply_assignment(c, "epochs=7");
  CHECK(c.train.epochs == 7);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("unknown keys and bad values name the offender") {
  RunConfig c;
  CHECK_THROWS_WITH_AS(apply_setting(c, "learning_rate", "1", "f:3"), doctest::Contains("learning_rate"), ConfigError);
  CHECK_THROWS_WITH_AS(apply_setting(c, "epochs", "ten", "f"), doctest::Contains("epochs"), ConfigError);
  CHECK_THROWS_WITH_AS(apply_setting(c, "epochs", "3.5", "f"), doctest::Contains("epochs"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "aug.hflip", "maybe", "f"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "phantom.rpe", "6", "f"), ConfigError);
  CHECK_THROWS_AS(apply_config_text(c, "lr0 0.1\n", "f"), ConfigError);
  CHECK_THROWS_AS(apply_assignment(c, "lr0"), ConfigError);
  CHECK_THROWS_WITH_AS(apply_config_text(c, "lr0 = 0.1\nbogus = 1\n", "my.cfg"), doctest::Contains("my.cfg:2"), ConfigError);
}

TEST_CASE("cross-field validation") {
  RunConfig c;
  c.train.augmentation.rotation_max_deg = 12;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.train.lr0 = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.phantom.height = 100;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.n_val = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("config files") {
  const auto dir = testing::scratch_dir("run_config");
  {
    std::ofstream out(dir / "a.cfg");
    out << "batch_size = 2\n";
  }
  RunConfig c;
  apply_config_file(c, dir / "a.cfg");
  CHECK(c.train.batch_size == 2);
  CHECK_THROWS_AS(apply_config_file(c, dir / "missing.cfg"), ConfigError);
}
