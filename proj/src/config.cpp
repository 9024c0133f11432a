#include "voxgan/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace voxgan {
namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out = "invalid configuration:";
  for (const auto& l : lines) out += "\n  " + l;
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  while (true) {
    const auto p = s.find(sep);
    parts.push_back(trim(s.substr(0, p)));
    if (p == std::string_view::npos) break;
    s.remove_prefix(p + 1);
  }
  return parts;
}

template <class T>
T parse_integer(std::string_view key, std::string_view v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError({std::string(key) + ": '" + std::string(v) +
                       "' is not an integer"});
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  const std::string s(v);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) {
    throw ConfigError({std::string(key) + ": '" + s + "' is not a number"});
  }
  return out;
}

std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += f(xs[i]);
  }
  return out;
}

Dims3 parse_dims(std::string_view key, std::string_view v) {
  const auto parts = split(v, ',');
  if (parts.size() == 1) {
    const auto n = parse_integer<std::int64_t>(key, parts[0]);
    return {n, n, n};
  }
  if (parts.size() != 3) {
    throw ConfigError({std::string(key) + ": expected N or D,H,W"});
  }
  return {parse_integer<std::int64_t>(key, parts[0]),
          parse_integer<std::int64_t>(key, parts[1]),
          parse_integer<std::int64_t>(key, parts[2])};
}

std::string render_dims(const Dims3& d) {
  return std::to_string(d[0]) + "," + std::to_string(d[1]) + "," +
         std::to_string(d[2]);
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Key int_key(const char* name, T RunConfig::*field) {
  return {name,
          [name, field](RunConfig& c, std::string_view v) {
            c.*field = parse_integer<T>(name, v);
          },
          [field](const RunConfig& c) { return std::to_string(c.*field); }};
}

Key real_key(const char* name, double RunConfig::*field) {
  return {name,
          [name, field](RunConfig& c, std::string_view v) {
            c.*field = parse_real(name, v);
          },
          [field](const RunConfig& c) { return format_real(c.*field); }};
}

Key string_key(const char* name, std::string RunConfig::*field) {
  return {name,
          [field](RunConfig& c, std::string_view v) { c.*field = v; },
          [field](const RunConfig& c) { return c.*field; }};
}

Key dims_key(const char* name, Dims3 RunConfig::*field) {
  return {name,
          [name, field](RunConfig& c, std::string_view v) {
            c.*field = parse_dims(name, v);
          },
          [field](const RunConfig& c) { return render_dims(c.*field); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      string_key("data_dir", &RunConfig::data_dir),
      string_key("out_dir", &RunConfig::out_dir),
      {"seed",
       [](RunConfig& c, std::string_view v) {
         c.seed = parse_integer<std::uint64_t>("seed", v);
       },
       [](const RunConfig& c) {
         return c.seed ? std::to_string(*c.seed) : std::string();
       }},
      int_key("target_stage", &RunConfig::target_stage),
      int_key("reals_per_phase", &RunConfig::reals_per_phase),
      {"batch_sizes",
       [](RunConfig& c, std::string_view v) {
         c.batch_sizes.clear();
         for (auto p : split(v, ',')) {
           c.batch_sizes.push_back(parse_integer<int>("batch_sizes", p));
         }
       },
       [](const RunConfig& c) {
         return join(c.batch_sizes, [](int b) { return std::to_string(b); });
       }},
      {"lr_table",
       [](RunConfig& c, std::string_view v) {
         c.lr_table.clear();
         for (auto p : split(v, ',')) {
           c.lr_table.push_back(parse_real("lr_table", p));
         }
       },
       [](const RunConfig& c) { return join(c.lr_table, format_real); }},
      {"late_lr",
       [](RunConfig& c, std::string_view v) {
         if (v == "none") {
           c.late_lr.reset();
           return;
         }
         const double fraction =
             c.late_lr ? c.late_lr->fraction : LateLearningRate{}.fraction;
         c.late_lr = LateLearningRate{parse_real("late_lr", v), fraction};
       },
       [](const RunConfig& c) {
         return c.late_lr ? format_real(c.late_lr->rate) : std::string("none");
       }},
      {"late_lr_fraction",
       [](RunConfig& c, std::string_view v) {
         const double f = parse_real("late_lr_fraction", v);
         if (c.late_lr) c.late_lr->fraction = f;
       },
       [](const RunConfig& c) {
         return format_real(c.late_lr ? c.late_lr->fraction
                                      : LateLearningRate{}.fraction);
       }},
      int_key("latent_dim", &RunConfig::latent_dim),
      int_key("n_filters", &RunConfig::n_filters),
      int_key("checkpoint_every", &RunConfig::checkpoint_every),
      real_key("gp_lambda", &RunConfig::gp_lambda),
      real_key("drift", &RunConfig::drift),
      real_key("adam_beta1", &RunConfig::adam_beta1),
      real_key("adam_beta2", &RunConfig::adam_beta2),
      real_key("adam_epsilon", &RunConfig::adam_epsilon),
      int_key("augment_k", &RunConfig::augment_k),
      real_key("augment_sigma", &RunConfig::augment_sigma),
      dims_key("crop", &RunConfig::crop),
      int_key("eval_count", &RunConfig::eval_count),
      int_key("synth_count", &RunConfig::synth_count),
      dims_key("synth_dims", &RunConfig::synth_dims),
      int_key("generate_count", &RunConfig::generate_count),
      int_key("upsample", &RunConfig::upsample),
  };
  return table;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : Error(join_lines(problems)), problems_(std::move(problems)) {}

void set_config_value(RunConfig& cfg, std::string_view key,
                      std::string_view value) {
  for (const auto& k : keys()) {
    if (key == k.name) {
      k.set(cfg, trim(value));
      return;
    }
  }
  throw ConfigError({"unknown key '" + std::string(key) + "'"});
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::vector<std::string> problems;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) {
      problems.push_back(where + "expected key = value");
      continue;
    }
    try {
      set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      for (const auto& p : e.problems()) problems.push_back(where + p);
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string render_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) {
    const std::string v = k.get(cfg);
    if (v.empty() && std::string_view(k.name) == "seed") {
      out += "# seed is unset\n";
      continue;
    }
    out += std::string(k.name) + " = " + v + "\n";
  }
  return out;
}

std::vector<std::string> config_problems(const RunConfig& cfg) {
  std::vector<std::string> p = to_train_config(cfg).schedule.problems();
  if (!cfg.seed) p.push_back("seed is mandatory");
  if (cfg.latent_dim < 1) p.push_back("latent_dim must be >= 1");
  if (cfg.n_filters < 1 || cfg.n_filters > kMaxFilters) {
    p.push_back("n_filters must be in [1, " + std::to_string(kMaxFilters) +
                "]");
  }
  if (cfg.checkpoint_every < 0) p.push_back("checkpoint_every must be >= 0");
  if (!(cfg.gp_lambda >= 0.0)) p.push_back("gp_lambda must be >= 0");
  if (!(cfg.drift >= 0.0)) p.push_back("drift must be >= 0");
  if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0)) {
    p.push_back("adam_beta1 must be in [0, 1)");
  }
  if (!(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0)) {
    p.push_back("adam_beta2 must be in [0, 1)");
  }
  if (!(cfg.adam_epsilon > 0.0)) p.push_back("adam_epsilon must be > 0");
  if (cfg.augment_k < 1) p.push_back("augment_k must be >= 1");
  if (!(cfg.augment_sigma >= 0.0)) p.push_back("augment_sigma must be >= 0");
  for (auto d : cfg.crop) {
    if (d < 1) p.push_back("crop extents must be >= 1");
  }
  if (cfg.eval_count < 0) p.push_back("eval_count must be >= 0");
  if (cfg.synth_count < 1) p.push_back("synth_count must be >= 1");
  for (auto d : cfg.synth_dims) {
    if (d < 2) p.push_back("synth_dims extents must be >= 2");
  }
  if (cfg.generate_count < 1) p.push_back("generate_count must be >= 1");
  if (cfg.upsample < 0) p.push_back("upsample must be >= 0");
  return p;
}

void validate_config(const RunConfig& cfg) {
  auto p = config_problems(cfg);
  if (!p.empty()) throw ConfigError(std::move(p));
}

TrainConfig to_train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.n_filters = cfg.n_filters;
  t.latent_dim = cfg.latent_dim;
  t.loss = {cfg.gp_lambda, cfg.drift};
  t.adam = {cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon};
  t.schedule.target_stage = cfg.target_stage;
  t.schedule.reals_per_phase = cfg.reals_per_phase;
  t.schedule.lr_table = cfg.lr_table;
  t.schedule.late_lr = cfg.late_lr;
  t.schedule.batch_sizes = cfg.batch_sizes;
  t.seed = cfg.seed.value_or(0);
  t.checkpoint_every = cfg.checkpoint_every;
  return t;
}

}  // namespace voxgan
