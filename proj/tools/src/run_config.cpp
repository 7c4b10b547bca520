#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace drunet::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(std::string_view v, const std::string& key) {
  N out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("invalid value '" + std::string(v) + "' for " + key);
  }
  return out;
}

bool parse_bool(std::string_view v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("invalid boolean '" + std::string(v) + "' for " + key);
}

struct Entry {
  ConfigKey key;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <typename N>
Entry num(std::string name, std::string type, std::string help, std::function<N&(RunConfig&)> field) {
  auto k = name;
  return {{std::move(name), std::move(type), std::move(help)},
          [k, field](RunConfig& c, std::string_view v) { field(c) = parse_number<N>(v, k); }};
}

Entry flag(std::string name, std::string help, std::function<bool&(RunConfig&)> field) {
  auto k = name;
  return {{std::move(name), "bool", std::move(help)},
          [k, field](RunConfig& c, std::string_view v) { field(c) = parse_bool(v, k); }};
}

Entry range(std::string name, std::string help, std::function<Range&(RunConfig&)> field) {
  auto k = name;
  return {{std::move(name), "float,float", std::move(help)}, [k, field](RunConfig& c, std::string_view v) {
            const auto comma = v.find(',');
            if (comma == std::string_view::npos) throw ConfigError("expected 'lo,hi' for " + k);
            field(c) = Range{parse_number<double>(trim(v.substr(0, comma)), k),
                             parse_number<double>(trim(v.substr(comma + 1)), k)};
          }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> e = [] {
    std::vector<Entry> v;
    v.push_back(num<double>("lr0", "float", "initial learning rate", [](RunConfig& c) -> double& { return c.train.lr0; }));
    v.push_back(num<double>("momentum", "float", "Nesterov momentum", [](RunConfig& c) -> double& { return c.train.momentum; }));
    v.push_back(num<int>("plateau_patience", "int", "non-improving epochs before the lr is cut",
                         [](RunConfig& c) -> int& { return c.train.plateau_patience; }));
    v.push_back(num<double>("lr_halving_factor", "float", "lr multiplier applied on a plateau",
                            [](RunConfig& c) -> double& { return c.train.lr_halving_factor; }));
    v.push_back(num<double>("improvement_delta", "float", "val loss must drop by more than this to count",
                            [](RunConfig& c) -> double& { return c.train.improvement_delta; }));
    v.push_back(num<double>("lr_floor", "float", "stop once lr falls below this",
                            [](RunConfig& c) -> double& { return c.train.lr_floor; }));
    v.push_back(num<int>("epochs", "int", "epoch cap", [](RunConfig& c) -> int& { return c.train.epochs; }));
    v.push_back(num<int>("batch_size", "int", "images per optimizer step", [](RunConfig& c) -> int& { return c.train.batch_size; }));
    v.push_back(num<int>("max_steps", "int", "optimizer step cap, 0 = none", [](RunConfig& c) -> int& { return c.train.max_steps; }));
    v.push_back(num<std::uint64_t>("seed", "uint", "seed for init, shuffling and augmentation",
                                   [](RunConfig& c) -> std::uint64_t& { return c.train.seed; }));
    v.push_back(flag("augment", "online augmentation during training", [](RunConfig& c) -> bool& { return c.train.augment; }));
    v.push_back({{"checkpoint_dir", "path", "output directory for best.ckpt and history.tsv"},
                 [](RunConfig& c, std::string_view s) { c.train.checkpoint_dir = std::string(s); }});
    v.push_back(num<int>("n_train", "int", "training split size (0 = the rest)", [](RunConfig& c) -> int& { return c.n_train; }));
    v.push_back(num<int>("n_val", "int", "validation split size", [](RunConfig& c) -> int& { return c.n_val; }));
    v.push_back(num<int>("n_test", "int", "held-out test split size", [](RunConfig& c) -> int& { return c.n_test; }));
    v.push_back(num<std::uint64_t>("split_seed", "uint", "seed of the train/val/test split",
                                   [](RunConfig& c) -> std::uint64_t& { return c.split_seed; }));

    auto A = [](RunConfig& c) -> AugmentConfig& { return c.train.augmentation; };
    v.push_back(flag("aug.hflip", "enable horizontal flips", [A](RunConfig& c) -> bool& { return A(c).hflip; }));
    v.push_back(flag("aug.rotate", "enable rotation", [A](RunConfig& c) -> bool& { return A(c).rotate; }));
    v.push_back(flag("aug.elastic", "enable elastic deformation", [A](RunConfig& c) -> bool& { return A(c).elastic; }));
    v.push_back(flag("aug.intensity", "enable nonlinear intensity shift", [A](RunConfig& c) -> bool& { return A(c).intensity; }));
    v.push_back(flag("aug.noise", "enable white + speckle noise", [A](RunConfig& c) -> bool& { return A(c).noise; }));
    v.push_back(flag("aug.occlude", "enable occluding patches", [A](RunConfig& c) -> bool& { return A(c).occlude; }));
    v.push_back(num<double>("aug.hflip_prob", "float", "flip probability", [A](RunConfig& c) -> double& { return A(c).hflip_prob; }));
    v.push_back(num<double>("aug.rotation_max_deg", "float", "rotation drawn from [-x, x] degrees, x <= 8",
                            [A](RunConfig& c) -> double& { return A(c).rotation_max_deg; }));
    v.push_back(num<double>("aug.elastic_alpha", "float", "elastic field scale (px)", [A](RunConfig& c) -> double& { return A(c).elastic_alpha; }));
    v.push_back(num<double>("aug.elastic_sigma", "float", "elastic smoothing sigma (px)", [A](RunConfig& c) -> double& { return A(c).elastic_sigma; }));
    v.push_back(num<double>("aug.gamma_min", "float", "lower gamma bound", [A](RunConfig& c) -> double& { return A(c).gamma_min; }));
    v.push_back(num<double>("aug.gamma_max", "float", "upper gamma bound", [A](RunConfig& c) -> double& { return A(c).gamma_max; }));
    v.push_back(num<double>("aug.noise_sigma", "float", "additive noise sd", [A](RunConfig& c) -> double& { return A(c).noise_sigma; }));
    v.push_back(num<double>("aug.speckle_sigma", "float", "multiplicative noise sd", [A](RunConfig& c) -> double& { return A(c).speckle_sigma; }));
    v.push_back(num<int>("aug.occlusion_count", "int", "patches per image", [A](RunConfig& c) -> int& { return A(c).occlusion_count; }));
    v.push_back(num<int>("aug.occlusion_width", "int", "patch width (px)", [A](RunConfig& c) -> int& { return A(c).occlusion_width; }));
    v.push_back(num<int>("aug.occlusion_height", "int", "patch height (px)", [A](RunConfig& c) -> int& { return A(c).occlusion_height; }));
    v.push_back(num<double>("aug.occlusion_factor_min", "float", "smallest intensity factor",
                            [A](RunConfig& c) -> double& { return A(c).occlusion_factor_min; }));
    v.push_back(num<double>("aug.occlusion_factor_max", "float", "largest intensity factor",
                            [A](RunConfig& c) -> double& { return A(c).occlusion_factor_max; }));

    auto P = [](RunConfig& c) -> PhantomConfig& { return c.phantom; };
    v.push_back(num<int>("phantom.height", "int", "rows (multiple of 8)", [P](RunConfig& c) -> int& { return P(c).height; }));
    v.push_back(num<int>("phantom.width", "int", "columns (multiple of 8)", [P](RunConfig& c) -> int& { return P(c).width; }));
    v.push_back(range("phantom.surface_depth", "vitreous depth at the periphery", [P](RunConfig& c) -> Range& { return P(c).surface_depth; }));
    v.push_back(range("phantom.rnfl_healthy", "RNFL thickness, healthy-like", [P](RunConfig& c) -> Range& { return P(c).rnfl_healthy; }));
    v.push_back(range("phantom.rnfl_glaucoma", "RNFL thickness, glaucoma-like", [P](RunConfig& c) -> Range& { return P(c).rnfl_glaucoma; }));
    v.push_back(range("phantom.retina", "other-retina thickness", [P](RunConfig& c) -> Range& { return P(c).retina; }));
    v.push_back(range("phantom.rpe", "RPE thickness", [P](RunConfig& c) -> Range& { return P(c).rpe; }));
    v.push_back(range("phantom.choroid", "choroid thickness", [P](RunConfig& c) -> Range& { return P(c).choroid; }));
    v.push_back(range("phantom.sclera", "visible sclera thickness", [P](RunConfig& c) -> Range& { return P(c).sclera; }));
    v.push_back(range("phantom.canal_width", "canal opening width", [P](RunConfig& c) -> Range& { return P(c).canal_width; }));
    v.push_back(range("phantom.cup_depth_healthy", "cup depth, healthy-like", [P](RunConfig& c) -> Range& { return P(c).cup_depth_healthy; }));
    v.push_back(range("phantom.cup_depth_glaucoma", "cup depth, glaucoma-like", [P](RunConfig& c) -> Range& { return P(c).cup_depth_glaucoma; }));
    v.push_back(range("phantom.lc_thickness", "lamina cribrosa thickness", [P](RunConfig& c) -> Range& { return P(c).lc_thickness; }));
    v.push_back(num<double>("phantom.boundary_amplitude", "float", "boundary undulation amplitude (px)",
                            [P](RunConfig& c) -> double& { return P(c).boundary_amplitude; }));
    v.push_back(num<double>("phantom.speckle", "float", "speckle strength", [P](RunConfig& c) -> double& { return P(c).speckle; }));
    v.push_back(num<double>("phantom.additive_noise", "float", "additive noise sd", [P](RunConfig& c) -> double& { return P(c).additive_noise; }));
    v.push_back(range("phantom.vessel_count", "vessel shadows per image (integers)", [P](RunConfig& c) -> Range& { return P(c).vessel_count; }));
    return v;
  }();
  return e;
}

}  // namespace

void RunConfig::validate() const {
  try {
    train.validate();
    phantom.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (n_train < 0 || n_val < 0 || n_test < 0) throw ConfigError("split sizes must be non-negative");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value, const std::string& where) {
  for (const auto& e : entries()) {
    if (e.key.name == key) {
      try {
        e.set(cfg, value);
      } catch (const ConfigError& err) {
        throw ConfigError(where + ": " + err.what());
      }
      return;
    }
  }
  throw ConfigError(where + ": unknown config key '" + std::string(key) + "'");
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    apply_setting(cfg, trim(body.substr(0, eq)), trim(body.substr(eq + 1)), where);
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path.string());
}

void apply_assignment(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("--set expects key=value, got '" + std::string(assignment) + "'");
  apply_setting(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), "--set");
}

}  // namespace drunet::cli
