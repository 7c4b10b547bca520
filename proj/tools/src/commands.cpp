#include "commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "drunet/augment.hpp"
#include "drunet/checkpoint.hpp"
#include "drunet/gradient_suite.hpp"
#include "drunet/phantom.hpp"
#include "drunet/trainer.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;

namespace drunet::cli {

namespace {

/// Options shared by commands that read a RunConfig.
struct ConfigOpts {
  std::string file;
  std::vector<std::string> sets;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", file, "key=value configuration file");
    cmd->add_option("--set", sets, "override one key, e.g. --set aug.noise_sigma=0.02")->take_all();
  }
  RunConfig load() const {
    RunConfig cfg;
    if (!file.empty()) apply_config_file(cfg, file);
    for (const auto& s : sets) apply_assignment(cfg, s);
    return cfg;
  }
};

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

std::pair<int, int> parse_size(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    const int h = std::stoi(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    const int w = std::stoi(s.substr(x + 1), &used);
    if (used != s.size() - x - 1) throw std::invalid_argument(s);
    return {h, w};
  } catch (const std::logic_error&) {
    throw UsageError("--size expects HEIGHTxWIDTH, got '" + s + "'");
  }
}

// --- phantom-gen ------------------------------------------------------------

struct PhantomGenArgs {
  int count = -1;
  std::string size;
  double group_mix = 0.5;
  std::uint64_t seed = 0;
  std::string out_dir;
  ConfigOpts cfg;
};

int cmd_phantom_gen(const PhantomGenArgs& a) {
  if (a.count < 1) throw UsageError("--count must be at least 1");
  if (!(a.group_mix >= 0.0 && a.group_mix <= 1.0)) throw UsageError("--group-mix must be in [0, 1]");
  RunConfig rc = a.cfg.load();
  if (!a.size.empty()) std::tie(rc.phantom.height, rc.phantom.width) = parse_size(a.size);
  rc.validate();

  const fs::path out = a.out_dir;
  fs::create_directories(out / "images");
  fs::create_directories(out / "labels");
  fs::create_directories(out / "stains");
  std::vector<ManifestEntry> manifest;
  std::array<int, 2> per_group{0, 0};
  for (int i = 0; i < a.count; ++i) {
    PhantomConfig pc = rc.phantom;
    pc.group = phantom_group(i, a.group_mix);
    const std::uint64_t seed = phantom_seed(a.seed, i);
    const std::string id = phantom_id(i);
    const Phantom ph = generate_phantom(pc, seed, id);
    ManifestEntry e{id, pc.group, fs::path("images") / (id + ".pgm"), fs::path("labels") / (id + ".pgm"), seed};
    write_pnm(image_raster(ph.sample.image), out / e.image_path);
    write_pnm(label_raster(ph.sample.labels), out / e.label_path);
    write_pnm(render_stain(ph.sample.labels), out / "stains" / (id + ".ppm"));
    manifest.push_back(e);
    ++per_group[pc.group == Group::healthy ? 0 : 1];
  }
  write_manifest(manifest, out / "manifest.tsv");
  std::printf("wrote %d phantoms (%d healthy-like, %d glaucoma-like) of %dx%d to %s\n", a.count, per_group[0],
              per_group[1], rc.phantom.height, rc.phantom.width, (out / "manifest.tsv").string().c_str());
  return kExitOk;
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
  std::string manifest, val_manifest, out_dir;
  ConfigOpts cfg;
  std::optional<int> epochs, batch_size, max_steps, n_val, n_test;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr0;
  bool no_augment = false;
};

std::vector<ManifestEntry> absolute_entries(std::vector<ManifestEntry> v) {
  for (auto& e : v) {
    e.image_path = fs::absolute(e.image_path);
    e.label_path = fs::absolute(e.label_path);
  }
  return v;
}

int cmd_train(const TrainArgs& a) {
  require_file(a.manifest, "manifest");
  if (!a.val_manifest.empty()) require_file(a.val_manifest, "validation manifest");
  RunConfig rc = a.cfg.load();
  if (!a.out_dir.empty()) rc.train.checkpoint_dir = a.out_dir;
  if (a.epochs) rc.train.epochs = *a.epochs;
  if (a.batch_size) rc.train.batch_size = *a.batch_size;
  if (a.max_steps) rc.train.max_steps = *a.max_steps;
  if (a.seed) rc.train.seed = *a.seed;
  if (a.lr0) rc.train.lr0 = *a.lr0;
  if (a.n_val) rc.n_val = *a.n_val;
  if (a.n_test) rc.n_test = *a.n_test;
  if (a.no_augment) rc.train.augment = false;
  rc.validate();
  if (rc.train.checkpoint_dir.empty()) throw UsageError("an output directory is required (--out-dir or checkpoint_dir)");

  auto entries = absolute_entries(read_manifest(a.manifest));
  std::vector<ManifestEntry> tr, va, te;
  if (!a.val_manifest.empty()) {
    tr = entries;
    va = absolute_entries(read_manifest(a.val_manifest));
  } else {
    if (rc.n_val < 1) throw ConfigError("n_val must be at least 1 when no validation manifest is given");
    const int n = static_cast<int>(entries.size());
    const int n_train = rc.n_train > 0 ? rc.n_train : n - rc.n_val - rc.n_test;
    if (n_train < 1 || n_train + rc.n_val + rc.n_test > n) {
      throw ConfigError("manifest has " + std::to_string(n) + " samples, too few for the requested split");
    }
    std::vector<Group> groups;
    for (const auto& e : entries) groups.push_back(e.group);
    const auto split = split_dataset(groups, n_train, rc.n_val, rc.n_test, rc.split_seed);
    for (auto i : split.train) tr.push_back(entries[i]);
    for (auto i : split.val) va.push_back(entries[i]);
    for (auto i : split.test) te.push_back(entries[i]);
  }
  if (tr.empty() || va.empty()) throw UsageError("training and validation sets must be non-empty");
  const fs::path dir = rc.train.checkpoint_dir;
  fs::create_directories(dir);
  write_manifest(tr, dir / "train.tsv");
  write_manifest(va, dir / "val.tsv");
  if (!te.empty()) write_manifest(te, dir / "test.tsv");

  const auto train_set = load_manifest_samples(tr);
  const auto val_set = load_manifest_samples(va);
  Drunet<float> model(ModelConfig{}, rc.train.seed);
  std::printf("training on %zu images, validating on %zu; %zu trainable parameters\n", train_set.size(),
              val_set.size(), model.trainable_parameter_count());
  std::fflush(stdout);
  const auto result = train(model, train_set, val_set, rc.train, [](const EpochRecord& r) {
    std::printf("%s\n", format_history_line(r).c_str());
    std::fflush(stdout);
  });
  std::printf("best_epoch=%d best_val_loss=%.9g checkpoint=%s history=%s\n", result.best_epoch, result.best_val_loss,
              result.best_checkpoint.string().c_str(), result.history_path.string().c_str());
  return kExitOk;
}

// --- infer --------------------------------------------------------------------

struct InferArgs {
  std::string checkpoint, image, out, labels;
};

int cmd_infer(const InferArgs& a) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.image, "image");
  const Raster raw = read_pnm(a.image);
  if (raw.channels != 1) throw UsageError("image must be 8-bit grayscale (P5)");
  if (raw.height % 8 != 0 || raw.width % 8 != 0) {
    throw UsageError("image size " + std::to_string(raw.height) + "x" + std::to_string(raw.width) +
                     " is not divisible by 8");
  }
  Drunet<float> model = load_checkpoint(a.checkpoint);
  Tensor<float> x({1, 1, raw.height, raw.width});
  for (std::size_t i = 0; i < raw.data.size(); ++i) x[i] = raw.data[i] / 255.0f;

  const auto t0 = std::chrono::steady_clock::now();
  const LabelMap pred = predict_classes(model.infer(x));
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  const std::string prefix = a.out;
  if (const fs::path parent = fs::path(prefix).parent_path(); !parent.empty()) fs::create_directories(parent);
  write_pnm(label_raster(pred), prefix + ".labels.pgm");
  write_pnm(render_stain(pred), prefix + ".stain.ppm");
  std::printf("labels=%s.labels.pgm\nstain=%s.stain.ppm\ninference_ms=%.3f\n", prefix.c_str(), prefix.c_str(), ms);
  if (!a.labels.empty()) {
    const Sample truth = load_sample(a.image, a.labels);
    std::size_t same = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) same += pred.data[i] == truth.labels.data[i];
    std::printf("pixel_accuracy=%.6f\n", static_cast<double>(same) / static_cast<double>(pred.data.size()));
  }
  return kExitOk;
}

// --- eval ---------------------------------------------------------------------

struct EvalArgs {
  std::string manifest, checkpoint, pred_dir, out_json;
  std::vector<std::string> groups;
};

int cmd_eval(const EvalArgs& a) {
  require_file(a.manifest, "manifest");
  if (a.checkpoint.empty() == a.pred_dir.empty()) throw UsageError("give exactly one of --checkpoint or --pred-dir");
  auto entries = read_manifest(a.manifest);
  if (!a.groups.empty()) {
    std::vector<Group> keep;
    for (const auto& g : a.groups) {
      try {
        keep.push_back(parse_group(g));
      } catch (const DataError& e) {
        throw UsageError(e.what());
      }
    }
    std::erase_if(entries, [&](const ManifestEntry& e) { return std::find(keep.begin(), keep.end(), e.group) == keep.end(); });
  }
  if (entries.empty()) throw UsageError("no samples to evaluate");
  const auto samples = load_manifest_samples(entries);

  MetricsReport report;
  if (!a.checkpoint.empty()) {
    require_file(a.checkpoint, "checkpoint");
    Drunet<float> model = load_checkpoint(a.checkpoint);
    report = evaluate_model(model, samples);
  } else {
    std::vector<LabelMap> preds;
    for (const auto& s : samples) {
      fs::path p = fs::path(a.pred_dir) / (s.id + ".labels.pgm");
      if (!fs::exists(p)) p = fs::path(a.pred_dir) / (s.id + ".pgm");
      require_file(p, "prediction");
      const Raster r = read_pnm(p);
      if (r.channels != 1 || r.width != s.width() || r.height != s.height()) {
        throw DataError("prediction " + p.string() + " does not match its sample's size");
      }
      LabelMap m(1, r.height, r.width);
      m.data = r.data;
      validate_labels(m);
      preds.push_back(std::move(m));
    }
    report = evaluate_predictions(preds, samples);
  }
  std::fputs(format_report_table(report).c_str(), stdout);
  if (!a.out_json.empty()) {
    std::ofstream out(a.out_json, std::ios::trunc);
    out << report_to_json(report);
    if (!out) throw std::runtime_error("failed writing " + a.out_json);
  }
  return kExitOk;
}

// --- gradcheck ----------------------------------------------------------------

struct GradArgs {
  GradSuiteOptions opt;
  std::string fault;
  bool list = false;
};

int cmd_gradcheck(GradArgs a) {
  if (a.list) {
    for (const auto& n : gradient_suite_entries()) std::printf("%s\n", n.c_str());
    return kExitOk;
  }
  if (!a.fault.empty()) a.opt.inject_fault = a.fault;
  std::vector<GradSuiteResult> results;
  try {
    results = run_gradient_suite(a.opt);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::printf("%-18s %14s %8s %6s  %s\n", "op", "max_rel_error", "checks", "seeds", "status");
  std::vector<std::string> failed;
  for (const auto& r : results) {
    std::printf("%-18s %14.3e %8zu %6d  %s\n", r.name.c_str(), r.max_rel_error, r.checked, r.seeds,
                r.passed ? "PASS" : "FAIL");
    if (!r.passed) failed.push_back(r.name);
  }
  std::printf("tolerance=%.3g step=%.3g floor=%.3g\n", a.opt.tolerance, a.opt.step, a.opt.floor);
  if (failed.empty()) {
    std::printf("all %zu entries passed\n", results.size());
    return kExitOk;
  }
  std::string list;
  for (const auto& f : failed) list += (list.empty() ? "" : ", ") + f;
  std::fprintf(stderr, "gradient check failed for: %s\n", list.c_str());
  return kExitFailure;
}

// --- augment-preview ----------------------------------------------------------

struct PreviewArgs {
  std::string image, labels, out_dir;
  std::uint64_t seed = 0;
  std::uint64_t phantom_seed = 0;
  int count = 3;
  ConfigOpts cfg;
};

bool invariants_hold(const Sample& s, std::string& why) {
  for (float v : s.image.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      why = "intensity outside [0, 1]";
      return false;
    }
  }
  for (auto l : s.labels.data) {
    if (l >= kNumClasses) {
      why = "label outside 0..7";
      return false;
    }
  }
  return true;
}

int cmd_augment_preview(const PreviewArgs& a) {
  if (a.count < 0) throw UsageError("--count must be non-negative");
  if (a.image.empty() != a.labels.empty()) throw UsageError("--image and --labels go together");
  RunConfig rc = a.cfg.load();
  rc.validate();
  Sample src;
  if (!a.image.empty()) {
    require_file(a.image, "image");
    require_file(a.labels, "label map");
    src = load_sample(a.image, a.labels);
  } else {
    src = generate_phantom(rc.phantom, a.phantom_seed, "preview").sample;
  }
  const fs::path out = a.out_dir;
  fs::create_directories(out);
  const AugmentConfig& ac = rc.train.augmentation;
  CounterRng rng(RngKey::of(a.seed, src.id, 0), 99);

  std::vector<std::pair<std::string, Sample>> views;
  views.emplace_back("original", src);
  views.emplace_back("hflip", hflip(src));
  views.emplace_back("rotate_cw8", rotate(src, 8.0));
  views.emplace_back("rotate_ccw8", rotate(src, -8.0));
  views.emplace_back("elastic", elastic_deform(src, ac.elastic_alpha, ac.elastic_sigma, rng));
  {
    Sample s = src;
    s.image = intensity_shift(src.image, random_intensity_map(ac.gamma_min, ac.gamma_max, rng));
    views.emplace_back("intensity", std::move(s));
  }
  {
    Sample s = src;
    s.image = add_noise(src.image, ac.noise_sigma, ac.speckle_sigma, rng);
    views.emplace_back("noise", std::move(s));
  }
  views.emplace_back("occlude", occlude(src, random_patches(src.height(), src.width(), ac, rng)));
  for (int k = 0; k < a.count; ++k) {
    AugmentTrace t;
    Sample s = augment_sample(src, ac, RngKey::of(a.seed, src.id, static_cast<std::uint64_t>(k)), &t);
    std::printf("pipeline_%d: flipped=%d angle_deg=%.3f max_displacement=%.3f gamma=%.3f patches=%zu\n", k,
                t.flipped ? 1 : 0, t.angle_deg, t.max_displacement, t.phi.gamma, t.patches.size());
    views.emplace_back("pipeline_" + std::to_string(k), std::move(s));
  }

  bool ok = true;
  for (const auto& [name, s] : views) {
    write_pnm(image_raster(s.image), out / (name + ".pgm"));
    write_pnm(render_stain(s.labels), out / (name + ".stain.ppm"));
    std::string why;
    if (!invariants_hold(s, why)) {
      std::fprintf(stderr, "%s: %s\n", name.c_str(), why.c_str());
      ok = false;
    }
  }
  std::printf("wrote %zu image/stain pairs to %s\ninvariants: %s\n", views.size(), out.string().c_str(),
              ok ? "ok" : "VIOLATED");
  return ok ? kExitOk : kExitFailure;
}

// --- inspect --------------------------------------------------------------------

int cmd_inspect(const std::string& checkpoint) {
  std::optional<Drunet<float>> loaded;
  if (!checkpoint.empty()) {
    require_file(checkpoint, "checkpoint");
    loaded.emplace(load_checkpoint(checkpoint));
  } else {
    loaded.emplace(ModelConfig{});
  }
  const Drunet<float>& m = *loaded;
  std::printf("%-8s %-16s %8s %4s %4s %10s\n", "layer", "kind", "dilation", "in", "out", "params");
  for (const auto& row : m.layer_table()) {
    std::printf("%-8s %-16s %8d %4d %4d %10zu\n", row.name.c_str(), row.kind.c_str(), row.dilation, row.in_channels,
                row.out_channels, row.parameters);
  }
  std::printf("parameter_tensors: %zu\nbatch_norm_layers: %zu\n", m.parameters().size(), m.parameters().norm_count());
  std::printf("trainable_parameters: %zu\n", m.trainable_parameter_count());
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"drunet: dilated-residual U-Net tissue segmentation for OCT-like B-scans"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every command");

  PhantomGenArgs pg;
  auto* c_pg = app.add_subcommand("phantom-gen", "generate synthetic phantoms and a manifest");
  c_pg->add_option("--count", pg.count, "number of phantoms")->required();
  c_pg->add_option("--size", pg.size, "HEIGHTxWIDTH, multiples of 8 (default 248x384)");
  c_pg->add_option("--group-mix", pg.group_mix, "fraction of glaucoma-like phantoms")->capture_default_str();
  c_pg->add_option("--seed", pg.seed, "dataset seed")->capture_default_str();
  c_pg->add_option("--out-dir", pg.out_dir, "output directory")->required();
  pg.cfg.add_to(c_pg);

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "train a model from a manifest");
  c_tr->add_option("--manifest", tr.manifest, "manifest of training samples (split when --val-manifest is absent)")->required();
  c_tr->add_option("--val-manifest", tr.val_manifest, "manifest of validation samples");
  c_tr->add_option("--out-dir", tr.out_dir, "directory for best.ckpt, history.tsv and split manifests");
  c_tr->add_option("--epochs", tr.epochs, "epoch cap");
  c_tr->add_option("--batch-size", tr.batch_size, "images per step");
  c_tr->add_option("--max-steps", tr.max_steps, "optimizer step cap");
  c_tr->add_option("--seed", tr.seed, "seed for init, shuffling and augmentation");
  c_tr->add_option("--lr0", tr.lr0, "initial learning rate");
  c_tr->add_option("--n-val", tr.n_val, "validation split size");
  c_tr->add_option("--n-test", tr.n_test, "test split size");
  c_tr->add_flag("--no-augment", tr.no_augment, "disable online augmentation");
  tr.cfg.add_to(c_tr);

  InferArgs in;
  auto* c_in = app.add_subcommand("infer", "segment one image");
  c_in->add_option("--checkpoint", in.checkpoint, "model checkpoint")->required();
  c_in->add_option("--image", in.image, "8-bit grayscale PGM")->required();
  c_in->add_option("--out", in.out, "output prefix; writes PREFIX.labels.pgm and PREFIX.stain.ppm")->required();
  c_in->add_option("--labels", in.labels, "ground-truth label PGM; reports pixel accuracy");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Dice / specificity / sensitivity per group");
  c_ev->add_option("--manifest", ev.manifest, "samples to score")->required();
  c_ev->add_option("--checkpoint", ev.checkpoint, "model to run");
  c_ev->add_option("--pred-dir", ev.pred_dir, "directory of ID.labels.pgm (or ID.pgm) predictions");
  c_ev->add_option("--groups", ev.groups, "restrict to these groups")->delimiter(',');
  c_ev->add_option("--out-json", ev.out_json, "write the full report as JSON");

  GradArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  c_gc->add_option("--tol", gc.opt.tolerance, "relative error tolerance")->capture_default_str();
  c_gc->add_option("--step", gc.opt.step, "central difference step")->capture_default_str();
  c_gc->add_option("--seeds", gc.opt.seeds, "random seeds per entry")->capture_default_str();
  c_gc->add_option("--seed", gc.opt.base_seed, "first seed")->capture_default_str();
  c_gc->add_option("--only", gc.opt.only, "run only these entries")->delimiter(',');
  c_gc->add_option("--inject-fault", gc.fault, "corrupt the backward pass of this entry (negative control)");
  c_gc->add_flag("--list", gc.list, "list entries and exit");

  PreviewArgs pv;
  auto* c_pv = app.add_subcommand("augment-preview", "write augmented image/stain pairs for visual audit");
  c_pv->add_option("--image", pv.image, "grayscale PGM (default: a generated phantom)");
  c_pv->add_option("--labels", pv.labels, "label PGM matching --image");
  c_pv->add_option("--phantom-seed", pv.phantom_seed, "seed of the generated phantom")->capture_default_str();
  c_pv->add_option("--seed", pv.seed, "augmentation seed")->capture_default_str();
  c_pv->add_option("--count", pv.count, "full-pipeline samples to write")->capture_default_str();
  c_pv->add_option("--out-dir", pv.out_dir, "output directory")->required();
  pv.cfg.add_to(c_pv);

  std::string inspect_ckpt;
  auto* c_is = app.add_subcommand("inspect", "print the layer table and trainable parameter count");
  c_is->add_option("--checkpoint", inspect_ckpt, "inspect a saved model instead of a fresh one");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Name unknown flags even when a required option is also missing.
    std::vector<std::string> extra;
    for (auto* cmd : app.get_subcommands()) {
      for (auto& r : cmd->remaining()) extra.push_back(r);
    }
    for (auto& r : app.remaining()) extra.push_back(r);
    if (!extra.empty() && dynamic_cast<const CLI::RequiredError*>(&e)) {
      std::string list;
      for (const auto& x : extra) list += (list.empty() ? "" : " ") + x;
      std::fprintf(stderr, "unrecognized arguments: %s\n", list.c_str());
      return kExitUsage;
    }
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_pg->parsed()) return cmd_phantom_gen(pg);
    if (c_tr->parsed()) return cmd_train(tr);
    if (c_in->parsed()) return cmd_infer(in);
    if (c_ev->parsed()) return cmd_eval(ev);
    if (c_gc->parsed()) return cmd_gradcheck(gc);
    if (c_pv->parsed()) return cmd_augment_preview(pv);
    if (c_is->parsed()) return cmd_inspect(inspect_ckpt);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failed: %s\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace drunet::cli
