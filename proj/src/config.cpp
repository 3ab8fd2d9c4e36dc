// SPDX-License-Identifier: Apache-2.0
#include "daquant/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "daquant/errors.hpp"

namespace daquant {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

class ConfigReader {
 public:
  explicit ConfigReader(const ConfigMap& map) : map_(map) {}

  bool has(const std::string& key) {
    seen_.insert(key);
    return map_.count(key) > 0;
  }

  std::string str(const std::string& key, const std::string& dflt) {
    seen_.insert(key);
    auto it = map_.find(key);
    return it == map_.end() ? dflt : it->second;
  }

  double num(const std::string& key, double dflt) {
    seen_.insert(key);
    auto it = map_.find(key);
    if (it == map_.end()) return dflt;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(key + ": not a number: " + it->second);
    }
  }

  std::int64_t integer(const std::string& key, std::int64_t dflt) {
    seen_.insert(key);
    auto it = map_.find(key);
    if (it == map_.end()) return dflt;
    try {
      std::size_t pos = 0;
      const std::int64_t v = std::stoll(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(key + ": not an integer: " + it->second);
    }
  }

  bool boolean(const std::string& key, bool dflt) {
    seen_.insert(key);
    auto it = map_.find(key);
    if (it == map_.end()) return dflt;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError(key + ": expected true/false: " + it->second);
  }

  void reject_unknown() const {
    for (const auto& [k, v] : map_)
      if (!seen_.count(k)) throw ConfigError("unknown config key: " + k);
  }

 private:
  const ConfigMap& map_;
  std::set<std::string> seen_;
};

TaskKind task_kind_from(const std::string& s) {
  if (s == "least_squares") return TaskKind::LeastSquares;
  if (s == "logistic") return TaskKind::Logistic;
  if (s == "poly_logistic") return TaskKind::PolyLogistic;
  if (s == "mlp2") return TaskKind::Mlp2;
  throw ConfigError("task.kind: unknown kind: " + s);
}

QuantMode quant_mode_from(const std::string& s) {
  if (s == "absolute") return QuantMode::AbsoluteBound;
  if (s == "per_sample_norm") return QuantMode::PerSampleNormScaled;
  if (s == "batch_max") return QuantMode::BatchMaxScaled;
  throw ConfigError("quant.mode: unknown mode: " + s);
}

SelectionKind selection_kind_from(const std::string& s) {
  if (s == "disabled") return SelectionKind::Disabled;
  if (s == "theory") return SelectionKind::TheorySchedule;
  if (s == "adaptive_epoch") return SelectionKind::AdaptiveEpoch;
  throw ConfigError("selection.kind: unknown kind: " + s);
}

SampleOrder order_from(const std::string& s) {
  if (s == "uniform") return SampleOrder::Uniform;
  if (s == "shuffle") return SampleOrder::Shuffle;
  throw ConfigError("run.order: unknown order: " + s);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    map[key] = value;
  }
  return map;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_overrides(ConfigMap& map,
                     const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override must be key=value: " + ov);
    map[trim(ov.substr(0, eq))] = trim(ov.substr(eq + 1));
  }
}

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::DaQuFull:
      return "daqu_full";
    case Scheme::DataQOnly:
      return "dataq_only";
    case Scheme::GradQBaseline:
      return "gradq_baseline";
    case Scheme::Unquantized:
      return "unquantized";
  }
  return "unknown";
}

Scheme scheme_from_name(const std::string& name) {
  if (name == "daqu_full") return Scheme::DaQuFull;
  if (name == "dataq_only") return Scheme::DataQOnly;
  if (name == "gradq_baseline") return Scheme::GradQBaseline;
  if (name == "unquantized") return Scheme::Unquantized;
  throw ConfigError("scheme: unknown scheme: " + name);
}

ExperimentConfig config_from_map(const ConfigMap& map,
                                 std::vector<Scheme>* schemes_out,
                                 double* target_loss_out) {
  ConfigReader r(map);
  ExperimentConfig cfg;

  cfg.task.kind = task_kind_from(r.str("task.kind", "least_squares"));
  cfg.task.dx = static_cast<int>(r.integer("task.dx", 2));
  cfg.task.degree = static_cast<int>(r.integer("task.degree", 3));
  cfg.task.hidden = static_cast<int>(r.integer("task.hidden", 8));
  cfg.task.n_samples = static_cast<std::size_t>(r.integer("task.n", 100));
  cfg.task.bound = r.num("task.bound", 1.0);
  cfg.task.noise = r.num("task.noise", 0.1);
  cfg.task.flip_rate = r.num("task.flip_rate", 0.0);
  cfg.task.margin = r.num("task.margin", 0.0);
  cfg.task.w_radius = r.num("task.w_radius", 0.0);
  cfg.task.seed = static_cast<std::uint64_t>(r.integer("task.seed", 1));
  cfg.task.dataset_path = r.str("task.dataset", "");

  cfg.scheme = scheme_from_name(r.str("scheme", "unquantized"));
  if (schemes_out) {
    const std::string list = r.str("schemes", "");
    if (!list.empty())
      for (const auto& name : split(list, ','))
        schemes_out->push_back(scheme_from_name(name));
  }
  if (target_loss_out)
    *target_loss_out = r.num("compare.target_loss", 0.0);

  cfg.m = static_cast<int>(r.integer("quant.m", 0));
  cfg.quant_mode = quant_mode_from(r.str("quant.mode", "per_sample_norm"));

  cfg.selection_kind = selection_kind_from(r.str("selection.kind", "disabled"));
  cfg.selection_alpha = r.num("selection.alpha", 0.2);
  cfg.selection_c = r.num("selection.c", 0.25);
  cfg.selection_horizon = r.integer("selection.horizon", 0);

  cfg.seed = static_cast<std::uint64_t>(r.integer("run.seed", 1));
  cfg.iterations = r.integer("run.iterations", 0);
  cfg.nodes = static_cast<int>(r.integer("run.nodes", 1));
  cfg.batch_size = static_cast<int>(r.integer("run.batch_size", 1));
  cfg.shared_randomness = r.boolean("run.shared_randomness", false);
  cfg.order = order_from(r.str("run.order", "uniform"));
  cfg.record_every = r.integer("run.record_every", 1);

  cfg.lr = r.num("opt.lr", 0.1);
  cfg.momentum = r.num("opt.momentum", 0.9);
  cfg.lr_decay = r.num("opt.lr_decay", 0.1);
  const std::string bounds = r.str("opt.lr_boundaries", "");
  if (!bounds.empty())
    for (const auto& b : split(bounds, ','))
      cfg.lr_boundaries.push_back(std::stoll(b));
  if (r.has("opt.d_radius")) cfg.d_radius = r.num("opt.d_radius", 0.0);
  cfg.init_scale = r.num("opt.init_scale", 0.0);

  if (r.has("gradcorr.cz_override"))
    cfg.cz_override = r.num("gradcorr.cz_override", 0.0);
  cfg.cz_probe_trials = static_cast<int>(r.integer("gradcorr.probe_trials", 2000));

  r.reject_unknown();
  cfg.validate();
  return cfg;
}

std::string config_echo(const ConfigMap& map) {
  std::string out;
  for (const auto& [k, v] : map) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string metrics_csv(const std::vector<MetricsRecord>& records) {
  std::string out = "# daquant_metrics_schema=1\n";
  out +=
      "iteration,cumulative_bits,train_loss,grad_norm,transmitted_fraction,"
      "cap_exceeded_count,transmitted,skipped,threshold\n";
  for (const auto& r : records) {
    out += std::to_string(r.iteration);
    out += ',';
    out += std::to_string(r.cumulative_bits);
    out += ',';
    out += format_double(r.train_loss);
    out += ',';
    out += format_double(r.grad_norm);
    out += ',';
    out += format_double(r.transmitted_fraction);
    out += ',';
    out += std::to_string(r.cap_exceeded_count);
    out += ',';
    out += std::to_string(r.transmitted);
    out += ',';
    out += std::to_string(r.skipped);
    out += ',';
    out += format_double(r.threshold);
    out += '\n';
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << content;
}

}  // namespace daquant
