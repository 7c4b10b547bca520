#include "drunet/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace drunet {

namespace {

struct Counts {
  std::size_t pred = 0, truth = 0, both = 0, neither = 0, total = 0;
};

Counts count(const BinaryMask& pred, const BinaryMask& truth) {
  if (pred.height != truth.height || pred.width != truth.width || pred.data.size() != truth.data.size()) {
    throw std::invalid_argument("mask dimensions differ: " + std::to_string(pred.height) + "x" +
                                std::to_string(pred.width) + " vs " + std::to_string(truth.height) +
                                "x" + std::to_string(truth.width));
  }
  Counts c;
  c.total = pred.data.size();
  for (std::size_t i = 0; i < c.total; ++i) {
    const bool p = pred.data[i] != 0, t = truth.data[i] != 0;
    c.pred += p;
    c.truth += t;
    c.both += p && t;
    c.neither += !p && !t;
  }
  return c;
}

}  // namespace

BinaryMask class_mask(const LabelMap& labels, int cls, int image) {
  BinaryMask m{labels.height, labels.width, std::vector<std::uint8_t>(labels.plane())};
  const std::size_t off = static_cast<std::size_t>(image) * labels.plane();
  for (std::size_t i = 0; i < labels.plane(); ++i) m.data[i] = labels.data[off + i] == cls;
  return m;
}

std::optional<double> dice(const BinaryMask& pred, const BinaryMask& truth) {
  const Counts c = count(pred, truth);
  if (c.pred + c.truth == 0) return std::nullopt;
  return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.pred + c.truth);
}

std::optional<double> specificity(const BinaryMask& pred, const BinaryMask& truth) {
  const Counts c = count(pred, truth);
  const std::size_t negatives = c.total - c.truth;
  if (negatives == 0) return std::nullopt;
  return static_cast<double>(c.neither) / static_cast<double>(negatives);
}

std::optional<double> sensitivity(const BinaryMask& pred, const BinaryMask& truth) {
  const Counts c = count(pred, truth);
  if (c.truth == 0) return std::nullopt;
  return static_cast<double>(c.both) / static_cast<double>(c.truth);
}

Aggregate aggregate(std::span<const std::optional<double>> values) {
  Aggregate a;
  double s = 0;
  for (const auto& v : values) {
    if (v) {
      s += *v;
      ++a.count;
    }
  }
  if (a.count == 0) return a;
  a.mean = s / a.count;
  if (a.count > 1) {
    double ss = 0;
    for (const auto& v : values) {
      if (v) ss += (*v - a.mean) * (*v - a.mean);
    }
    a.sd = std::sqrt(ss / (a.count - 1));
  }
  return a;
}

std::optional<double> GroupSummary::mean_dice() const {
  double s = 0;
  int k = 0;
  for (const auto& c : per_class) {
    if (c.dice.count > 0) {
      s += c.dice.mean;
      ++k;
    }
  }
  if (k == 0) return std::nullopt;
  return s / k;
}

const GroupSummary* MetricsReport::group(std::string_view name) const {
  for (const auto& g : groups) {
    if (g.group == name) return &g;
  }
  return nullptr;
}

ImageMetrics evaluate_image(const LabelMap& pred, const LabelMap& truth, std::span<const int> classes,
                            std::string id, std::string group) {
  if (pred.height != truth.height || pred.width != truth.width) {
    throw std::invalid_argument("prediction and truth label maps differ in size");
  }
  ImageMetrics m{std::move(id), std::move(group), std::nullopt, {}};
  for (int cls : classes) {
    const BinaryMask p = class_mask(pred, cls), t = class_mask(truth, cls);
    m.per_class.push_back(ClassMetrics{dice(p, t), specificity(p, t), sensitivity(p, t)});
  }
  return m;
}

namespace {

GroupSummary summarize(const std::string& name, const std::vector<const ImageMetrics*>& images,
                       std::size_t n_classes) {
  GroupSummary g;
  g.group = name;
  g.images = static_cast<int>(images.size());
  std::vector<std::optional<double>> losses;
  for (const auto* im : images) losses.push_back(im->loss);
  const Aggregate loss = aggregate(losses);
  if (loss.count > 0) g.mean_loss = loss.mean;
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::vector<std::optional<double>> d, sp, sn;
    for (const auto* im : images) {
      d.push_back(im->per_class.at(c).dice);
      sp.push_back(im->per_class.at(c).specificity);
      sn.push_back(im->per_class.at(c).sensitivity);
    }
    g.per_class.push_back(ClassSummary{aggregate(d), aggregate(sp), aggregate(sn)});
  }
  return g;
}

}  // namespace

MetricsReport build_report(std::vector<int> classes, std::vector<ImageMetrics> images) {
  MetricsReport r{std::move(classes), std::move(images), {}};
  std::vector<std::string> tags;
  std::vector<const ImageMetrics*> all;
  for (const auto& im : r.images) {
    if (im.per_class.size() != r.classes.size()) {
      throw std::invalid_argument("image " + im.id + " has metrics for the wrong number of classes");
    }
    all.push_back(&im);
    bool seen = false;
    for (const auto& t : tags) seen = seen || t == im.group;
    if (!seen) tags.push_back(im.group);
  }
  r.groups.push_back(summarize("all", all, r.classes.size()));
  for (const auto& t : tags) {
    std::vector<const ImageMetrics*> members;
    for (const auto& im : r.images) {
      if (im.group == t) members.push_back(&im);
    }
    r.groups.push_back(summarize(t, members, r.classes.size()));
  }
  return r;
}

namespace {

std::string cell(const Aggregate& a) {
  if (a.count == 0) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f ± %.3f (%d)", a.mean, a.sd, a.count);
  return buf;
}

}  // namespace

std::string format_report_table(const MetricsReport& report) {
  std::ostringstream os;
  for (const auto& g : report.groups) {
    os << "group " << g.group << " (" << g.images << " images)";
    if (g.mean_loss) os << "  mean loss " << *g.mean_loss;
    os << "\n";
    char head[160];
    std::snprintf(head, sizeof head, "  %-18s %-26s %-26s %-26s\n", "class", "dice", "specificity",
                  "sensitivity");
    os << head;
    for (std::size_t c = 0; c < report.classes.size(); ++c) {
      const auto& s = g.per_class[c];
      char line[200];
      std::snprintf(line, sizeof line, "  %-18s %-26s %-26s %-26s\n",
                    std::string(tissue_name(report.classes[c])).c_str(), cell(s.dice).c_str(),
                    cell(s.specificity).c_str(), cell(s.sensitivity).c_str());
      os << line;
    }
    if (auto md = g.mean_dice()) {
      char line[80];
      std::snprintf(line, sizeof line, "  mean dice %.4f\n", *md);
      os << line;
    }
  }
  bool any_qualitative = false;
  for (int q : kQualitativeClasses) {
    for (int c : report.classes) any_qualitative = any_qualitative || c == q;
  }
  if (!any_qualitative) {
    os << "qualitative only (not scored): ";
    for (std::size_t i = 0; i < kQualitativeClasses.size(); ++i) {
      os << (i ? ", " : "") << tissue_name(kQualitativeClasses[i]);
    }
    os << "\n";
  }
  return os.str();
}

namespace {

using nlohmann::json;

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}
json agg(const Aggregate& a) { return json{{"mean", a.mean}, {"sd", a.sd}, {"count", a.count}}; }

}  // namespace

std::string report_to_json(const MetricsReport& report) {
  json j;
  j["classes"] = report.classes;
  json names = json::array();
  for (int c : report.classes) names.push_back(std::string(tissue_name(c)));
  j["class_names"] = names;
  json qual = json::array();
  for (int c : kQualitativeClasses) qual.push_back(std::string(tissue_name(c)));
  j["qualitative_only"] = qual;
  json images = json::array();
  for (const auto& im : report.images) {
    json m = json::array();
    for (const auto& c : im.per_class) {
      m.push_back(json{{"dice", opt(c.dice)}, {"specificity", opt(c.specificity)},
                       {"sensitivity", opt(c.sensitivity)}});
    }
    images.push_back(json{{"id", im.id}, {"group", im.group}, {"loss", opt(im.loss)}, {"metrics", m}});
  }
  j["images"] = images;
  json groups = json::array();
  for (const auto& g : report.groups) {
    json m = json::array();
    for (const auto& c : g.per_class) {
      m.push_back(json{{"dice", agg(c.dice)}, {"specificity", agg(c.specificity)},
                       {"sensitivity", agg(c.sensitivity)}});
    }
    groups.push_back(json{{"group", g.group}, {"images", g.images}, {"mean_loss", opt(g.mean_loss)},
                          {"mean_dice", opt(g.mean_dice())}, {"metrics", m}});
  }
  j["groups"] = groups;
  return j.dump(2) + "\n";
}

namespace {

Aggregate agg_from(const json& j) {
  return Aggregate{j.at("mean").get<double>(), j.at("sd").get<double>(), j.at("count").get<int>()};
}

}  // namespace

MetricsReport report_from_json(const std::string& text) {
  const json j = json::parse(text);
  MetricsReport r;
  r.classes = j.at("classes").get<std::vector<int>>();
  for (const auto& im : j.at("images")) {
    ImageMetrics m{im.at("id").get<std::string>(), im.at("group").get<std::string>(),
                   opt_from(im.at("loss")), {}};
    for (const auto& c : im.at("metrics")) {
      m.per_class.push_back(ClassMetrics{opt_from(c.at("dice")), opt_from(c.at("specificity")),
                                         opt_from(c.at("sensitivity"))});
    }
    r.images.push_back(std::move(m));
  }
  for (const auto& g : j.at("groups")) {
    GroupSummary s;
    s.group = g.at("group").get<std::string>();
    s.images = g.at("images").get<int>();
    s.mean_loss = opt_from(g.at("mean_loss"));
    for (const auto& c : g.at("metrics")) {
      s.per_class.push_back(
          ClassSummary{agg_from(c.at("dice")), agg_from(c.at("specificity")), agg_from(c.at("sensitivity"))});
    }
    r.groups.push_back(std::move(s));
  }
  return r;
}

}  // namespace drunet
