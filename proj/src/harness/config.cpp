#include "cliplab/harness/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace cliplab::harness {

const char* to_string(Schedule s) {
  switch (s) {
    case Schedule::explicit_: return "explicit";
    case Schedule::auto_theorem31: return "auto-theorem31";
    case Schedule::auto_theorem32: return "auto-theorem32";
    case Schedule::auto_snm: return "auto-snm";
  }
  return "unknown";
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorKind::format, path + ": " + msg);
}

// Strict reader over one YAML map: typed getters record the keys they touch
// and `finish` rejects anything left over.
class Section {
 public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) fail(path_, "expected a mapping");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_ && node_.IsMap() && node_[key] && !node_[key].IsNull();
  }

  YAML::Node raw(const std::string& key) {
    seen_.insert(key);
    if (!node_ || !node_.IsMap()) return YAML::Node();
    return node_[key];
  }

  std::string child_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return as<T>(node_[key], child_path(key));
  }

  template <typename T>
  std::optional<T> opt(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return as<T>(node_[key], child_path(key));
  }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) fail(child_path(key), "unknown field");
    }
  }

  template <typename T>
  static T as(const YAML::Node& n, const std::string& path) {
    if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!n.IsSequence()) fail(path, "expected a list of numbers");
      std::vector<double> out;
      for (std::size_t i = 0; i < n.size(); ++i) {
        out.push_back(as<double>(n[i], path + "[" + std::to_string(i) + "]"));
      }
      return out;
    } else {
      if (!n.IsScalar()) fail(path, "expected a scalar");
      try {
        return n.as<T>();
      } catch (const YAML::Exception&) {
        if constexpr (std::is_same_v<T, double>) fail(path, "expected a number");
        if constexpr (std::is_same_v<T, bool>) fail(path, "expected true or false");
        fail(path, "expected an integer");
      }
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

std::size_t known_dim(const ObjectiveSpec& o) {
  if (o.kind == "quartic" || o.kind == "noisy_quadratic") return 1;
  if (o.kind == "poly2d") return 2;
  if (o.kind == "exp_loss" && o.dataset.source == "synthetic") {
    return static_cast<std::size_t>(o.dataset.d);
  }
  return 0;  // depends on the data file
}

void require_dim(const std::vector<double>& v, std::size_t dim, const std::string& path) {
  if (dim != 0 && v.size() != dim) {
    fail(path, "expected " + std::to_string(dim) + " entries, got " + std::to_string(v.size()));
  }
  for (double a : v) {
    if (!std::isfinite(a)) fail(path, "entries must be finite");
  }
}

void validate(const ExperimentConfig& c) {
  const auto& o = c.objective;
  static const std::set<std::string> kinds{"quartic", "poly2d", "noisy_quadratic", "exp_loss"};
  if (!kinds.count(o.kind)) fail("objective.kind", "unknown objective '" + o.kind + "'");
  if (o.kind == "exp_loss") {
    if (!(o.lambda > 0.0)) fail("objective.lambda", "must be > 0");
    if (o.batch_size < 0) fail("objective.batch_size", "must be >= 0");
    const auto& d = o.dataset;
    if (d.source == "synthetic") {
      if (d.n < 2) fail("objective.dataset.n", "must be >= 2");
      if (d.d < 1) fail("objective.dataset.d", "must be >= 1");
    } else if (d.source == "idx") {
      if (d.images.empty()) fail("objective.dataset.images", "required for idx data");
      if (d.labels.empty()) fail("objective.dataset.labels", "required for idx data");
      if (d.digit_a == d.digit_b) fail("objective.dataset.digit_b", "must differ from digit_a");
    } else {
      fail("objective.dataset.source", "expected synthetic or idx");
    }
    if (!(d.radius > 0.0)) fail("objective.dataset.radius", "must be > 0");
  }
  const bool has_noise =
      o.kind == "noisy_quadratic" || (o.kind == "exp_loss" && o.batch_size > 0);
  if (c.run.stochastic && !has_noise) {
    fail("run.stochastic", "objective '" + o.kind + "' has no stochastic gradient");
  }

  const auto& p = c.optimizer;
  if (!(p.beta >= 0.0 && p.beta < 1.0)) fail("optimizer.beta", "must be in [0, 1)");
  if (!(p.nu >= 0.0 && p.nu <= 1.0)) fail("optimizer.nu", "must be in [0, 1]");
  if (p.mode == ClipMode::normalized && p.nu != 1.0) fail("optimizer.nu", "normalized mode requires nu = 1");
  if (p.schedule == Schedule::explicit_) {
    if (!p.eta) fail("optimizer.eta", "required by the explicit schedule");
    if (!p.gamma && p.mode != ClipMode::normalized) {
      fail("optimizer.gamma", "required by the explicit schedule");
    }
    if (!(*p.eta > 0.0) || !std::isfinite(*p.eta)) fail("optimizer.eta", "must be finite and > 0");
    if (p.gamma && !(*p.gamma > 0.0)) fail("optimizer.gamma", "must be > 0");
    if (!c.run.steps) fail("run.steps", "auto needs an auto-* optimizer schedule");
  } else {
    const std::string s = to_string(p.schedule);
    if (p.eta) fail("optimizer.eta", "conflicts with schedule " + s);
    if (p.gamma) fail("optimizer.gamma", "conflicts with schedule " + s);
    if (!p.epsilon) fail("optimizer.epsilon", "required by schedule " + s);
    if (!(*p.epsilon > 0.0)) fail("optimizer.epsilon", "must be > 0");
    if (p.schedule == Schedule::auto_snm) {
      if (p.mode != ClipMode::normalized) fail("optimizer.mode", "auto-snm requires normalized");
    } else if (p.mode != ClipMode::hard) {
      fail("optimizer.mode", s + " requires hard clipping");
    }
    if (p.schedule == Schedule::auto_theorem31 && c.run.stochastic) {
      fail("run.stochastic", "auto-theorem31 is a deterministic schedule");
    }
    if (p.schedule != Schedule::auto_theorem31) {
      if (!c.run.stochastic) fail("run.stochastic", s + " is a stochastic schedule");
      if (!p.sigma && o.kind != "noisy_quadratic") fail("optimizer.sigma", "required by " + s);
    }
    const auto& k = c.smoothness;
    if (k.source == "explicit") {
      if (!k.l0) fail("smoothness.l0", "required for explicit constants");
      if (!k.l1) fail("smoothness.l1", "required for explicit constants");
    } else if (k.source == "fit") {
      if (k.low.empty()) fail("smoothness.low", "required to fit constants");
      require_dim(k.low, known_dim(o), "smoothness.low");
      require_dim(k.high, k.low.size(), "smoothness.high");
      if (k.per_dim < 2) fail("smoothness.per_dim", "must be >= 2");
      if (k.bins < 2) fail("smoothness.bins", "must be >= 2");
    } else if (k.source != "certified") {
      fail("smoothness.source", "expected certified, fit or explicit");
    }
  }
  if (p.sigma && !(*p.sigma >= 0.0)) fail("optimizer.sigma", "must be >= 0");

  const auto& i = c.init;
  if (i.kind == "explicit") {
    if (i.x0.empty()) fail("init.x0", "required for explicit init");
    require_dim(i.x0, known_dim(o), "init.x0");
  } else if (i.kind == "random") {
    if (i.low.empty()) fail("init.low", "required for random init");
    require_dim(i.low, known_dim(o), "init.low");
    require_dim(i.high, i.low.size(), "init.high");
    for (std::size_t k = 0; k < i.low.size(); ++k) {
      if (!(i.low[k] <= i.high[k])) fail("init.high", "must be >= init.low");
    }
  } else if (i.kind != "zero") {
    fail("init.kind", "expected explicit, random or zero");
  }
  if (i.m0) require_dim(*i.m0, known_dim(o), "init.m0");

  if (c.run.steps && *c.run.steps < 1) fail("run.steps", "must be >= 1");
  if (c.run.burn_in < 0) fail("run.burn_in", "must be >= 0");
  if (c.run.steps && c.run.burn_in >= *c.run.steps) fail("run.burn_in", "must be < run.steps");
  if (c.seeds.empty()) fail("seeds", "at least one seed is required");
  if (c.output.record != "none" && c.output.record != "norms" && c.output.record != "full") {
    fail("output.record", "expected none, norms or full");
  }
  if (c.output.dir.empty()) fail("output.dir", "must not be empty");
}

Schedule parse_schedule(const std::string& s) {
  if (s == "explicit") return Schedule::explicit_;
  if (s == "auto-theorem31") return Schedule::auto_theorem31;
  if (s == "auto-theorem32") return Schedule::auto_theorem32;
  if (s == "auto-snm") return Schedule::auto_snm;
  fail("optimizer.schedule", "unknown schedule '" + s + "'");
}

ExperimentConfig from_node(const YAML::Node& root) {
  if (!root.IsMap()) fail("(root)", "expected a mapping");
  ExperimentConfig c;
  Section top(root, "");
  c.name = top.get<std::string>("name", c.name);

  {
    Section s(top.raw("objective"), "objective");
    auto& o = c.objective;
    o.kind = s.get<std::string>("kind", o.kind);
    o.lambda = s.get<double>("lambda", o.lambda);
    o.batch_size = s.get<std::int64_t>("batch_size", o.batch_size);
    Section d(s.raw("dataset"), "objective.dataset");
    auto& ds = o.dataset;
    ds.source = d.get<std::string>("source", ds.source);
    ds.n = d.get<std::int64_t>("n", ds.n);
    ds.d = d.get<std::int64_t>("d", ds.d);
    ds.radius = d.get<double>("radius", ds.radius);
    ds.margin = d.get<double>("margin", ds.margin);
    ds.seed = d.get<std::uint64_t>("seed", ds.seed);
    ds.images = d.get<std::string>("images", ds.images);
    ds.labels = d.get<std::string>("labels", ds.labels);
    ds.digit_a = d.get<int>("digit_a", ds.digit_a);
    ds.digit_b = d.get<int>("digit_b", ds.digit_b);
    d.finish();
    s.finish();
  }
  {
    Section s(top.raw("optimizer"), "optimizer");
    auto& p = c.optimizer;
    p.schedule = parse_schedule(s.get<std::string>("schedule", "explicit"));
    p.eta = s.opt<double>("eta");
    p.gamma = s.opt<double>("gamma");
    p.beta = s.get<double>("beta", p.beta);
    p.nu = s.get<double>("nu", p.nu);
    try {
      p.mode = parse_clip_mode(s.get<std::string>("mode", "hard"));
    } catch (const Error& e) {
      fail("optimizer.mode", e.what());
    }
    p.epsilon = s.opt<double>("epsilon");
    p.sigma = s.opt<double>("sigma");
    const auto constants = s.get<std::string>("constants", "theorem");
    if (constants == "theorem") {
      p.constants = StochasticConstants::theorem;
    } else if (constants == "appendix") {
      p.constants = StochasticConstants::appendix;
    } else {
      fail("optimizer.constants", "expected theorem or appendix");
    }
    s.finish();
  }
  {
    Section s(top.raw("smoothness"), "smoothness");
    auto& k = c.smoothness;
    k.source = s.get<std::string>("source", k.source);
    k.l0 = s.opt<double>("l0");
    k.l1 = s.opt<double>("l1");
    k.low = s.get<std::vector<double>>("low", {});
    k.high = s.get<std::vector<double>>("high", {});
    k.per_dim = s.get<std::int64_t>("per_dim", k.per_dim);
    k.bins = s.get<std::int64_t>("bins", k.bins);
    k.rho1 = s.get<double>("rho1", k.rho1);
    k.rho2 = s.get<double>("rho2", k.rho2);
    s.finish();
  }
  {
    Section s(top.raw("init"), "init");
    auto& i = c.init;
    i.kind = s.get<std::string>("kind", i.kind);
    i.x0 = s.get<std::vector<double>>("x0", {});
    i.low = s.get<std::vector<double>>("low", {});
    i.high = s.get<std::vector<double>>("high", {});
    i.m0 = s.opt<std::vector<double>>("m0");
    s.finish();
  }
  {
    Section s(top.raw("run"), "run");
    if (s.has("steps")) {
      const YAML::Node n = s.raw("steps");
      if (n.IsScalar() && n.Scalar() == "auto") {
        c.run.steps.reset();
      } else {
        c.run.steps = Section::as<std::int64_t>(n, "run.steps");
      }
    } else {
      fail("run.steps", "required (an integer or auto)");
    }
    c.run.stochastic = s.get<bool>("stochastic", c.run.stochastic);
    c.run.burn_in = s.get<std::int64_t>("burn_in", c.run.burn_in);
    s.finish();
  }
  if (top.has("seeds")) {
    const YAML::Node n = top.raw("seeds");
    c.seeds.clear();
    if (n.IsSequence()) {
      for (std::size_t i = 0; i < n.size(); ++i) {
        c.seeds.push_back(Section::as<std::uint64_t>(n[i], "seeds[" + std::to_string(i) + "]"));
      }
    } else {
      // Shorthand: {start: s, count: k} expands to s, s+1, ..., s+k-1.
      Section r(n, "seeds");
      const auto start = r.get<std::uint64_t>("start", 0);
      const auto count = r.get<std::int64_t>("count", 0);
      r.finish();
      if (count < 1) fail("seeds.count", "must be >= 1");
      for (std::int64_t k = 0; k < count; ++k) c.seeds.push_back(start + static_cast<std::uint64_t>(k));
    }
  }
  {
    Section s(top.raw("output"), "output");
    c.output.dir = s.get<std::string>("dir", c.output.dir);
    c.output.record = s.get<std::string>("record", c.output.record);
    s.finish();
  }
  top.finish();
  validate(c);
  return c;
}

YAML::Node to_node(const ExperimentConfig& c) {
  YAML::Node root;
  root["name"] = c.name;
  YAML::Node o;
  o["kind"] = c.objective.kind;
  o["lambda"] = c.objective.lambda;
  o["batch_size"] = c.objective.batch_size;
  const auto& ds = c.objective.dataset;
  YAML::Node d;
  d["source"] = ds.source;
  d["n"] = ds.n;
  d["d"] = ds.d;
  d["radius"] = ds.radius;
  d["margin"] = ds.margin;
  d["seed"] = ds.seed;
  d["images"] = ds.images;
  d["labels"] = ds.labels;
  d["digit_a"] = ds.digit_a;
  d["digit_b"] = ds.digit_b;
  o["dataset"] = d;
  root["objective"] = o;

  const auto& p = c.optimizer;
  YAML::Node opt;
  opt["schedule"] = to_string(p.schedule);
  if (p.eta) opt["eta"] = *p.eta;
  if (p.gamma) opt["gamma"] = *p.gamma;
  opt["beta"] = p.beta;
  opt["nu"] = p.nu;
  opt["mode"] = to_string(p.mode);
  if (p.epsilon) opt["epsilon"] = *p.epsilon;
  if (p.sigma) opt["sigma"] = *p.sigma;
  opt["constants"] = p.constants == StochasticConstants::theorem ? "theorem" : "appendix";
  root["optimizer"] = opt;

  const auto& k = c.smoothness;
  YAML::Node sm;
  sm["source"] = k.source;
  if (k.l0) sm["l0"] = *k.l0;
  if (k.l1) sm["l1"] = *k.l1;
  sm["low"] = k.low;
  sm["high"] = k.high;
  sm["per_dim"] = k.per_dim;
  sm["bins"] = k.bins;
  sm["rho1"] = k.rho1;
  sm["rho2"] = k.rho2;
  root["smoothness"] = sm;

  YAML::Node init;
  init["kind"] = c.init.kind;
  init["x0"] = c.init.x0;
  init["low"] = c.init.low;
  init["high"] = c.init.high;
  if (c.init.m0) init["m0"] = *c.init.m0;
  root["init"] = init;

  YAML::Node run;
  if (c.run.steps) {
    run["steps"] = *c.run.steps;
  } else {
    run["steps"] = "auto";
  }
  run["stochastic"] = c.run.stochastic;
  run["burn_in"] = c.run.burn_in;
  root["run"] = run;

  root["seeds"] = c.seeds;
  YAML::Node out;
  out["dir"] = c.output.dir;
  out["record"] = c.output.record;
  root["output"] = out;
  return root;
}

std::string emit(const YAML::Node& node) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e.SetSeqFormat(YAML::Flow);
  e << node;
  return std::string(e.c_str()) + "\n";
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::format, std::string("config: ") + e.what());
  }
  return from_node(root);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) { return emit(to_node(cfg)); }

ExperimentConfig with_override(const ExperimentConfig& cfg, const std::string& path,
                               const std::string& value) {
  YAML::Node root = to_node(cfg);
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
  if (parts.empty()) fail(path, "empty override path");
  YAML::Node cur = root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!cur[parts[i]] || !cur[parts[i]].IsMap()) fail(path, "no such section");
    cur.reset(cur[parts[i]]);
  }
  YAML::Node parsed;
  try {
    parsed = YAML::Load(value);
  } catch (const YAML::Exception& e) {
    fail(path, std::string("bad value: ") + e.what());
  }
  if (parsed.IsNull()) {
    cur.remove(parts.back());
  } else {
    cur[parts.back()] = parsed;
  }
  // Round-trip through text so the copy shares nothing with `root`.
  return parse_config(emit(root));
}

std::string resolve_preset(const std::string& name_or_path) {
  namespace fs = std::filesystem;
  if (fs::exists(name_or_path)) return name_or_path;
  std::vector<fs::path> dirs;
  if (const char* env = std::getenv("CLIP_LAB_PRESET_DIR")) dirs.emplace_back(env);
#ifdef CLIPLAB_PRESET_DIR
  dirs.emplace_back(CLIPLAB_PRESET_DIR);
#endif
  for (const auto& dir : dirs) {
    const fs::path p = dir / (name_or_path + ".yaml");
    if (fs::exists(p)) return p.string();
  }
  throw Error(ErrorKind::invalid_input,
              "'" + name_or_path + "' is neither a file nor a known preset");
}

}  // namespace cliplab::harness
