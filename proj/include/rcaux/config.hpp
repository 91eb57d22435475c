#pragma once

// Run configuration: one flat key=value file with [section] headers drives
// every pipeline command. Resolution order is defaults (per-environment
// profiles) < file < flags < RCAUX_SEED, and the resolved config renders
// back to the same format bit-exactly.

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "rcaux/csv.hpp"
#include "rcaux/planner.hpp"
#include "rcaux/train.hpp"

namespace rcaux {

// Error taxonomy for the CLI's distinct exit codes.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};
class MissingFileError : public std::runtime_error {
 public:
  explicit MissingFileError(const std::string& what)
      : std::runtime_error(what) {}
};
class VersionError : public std::runtime_error {
 public:
  explicit VersionError(const std::string& what) : std::runtime_error(what) {}
};

struct RunConfig {
  // [run]
  std::string env = "tworoom";
  std::uint64_t seed = 0;
  std::string out_dir = "run_out";
  // [data]
  std::string policy = "mixed";
  int n_traj = 200;
  int traj_len = 60;
  bool include_wall_mask = false;
  // [model] — obs_dim and n_actions are filled from the dataset/environment.
  ModelConfig model;
  // [train] — seed is derived from the global seed, not a config field.
  TrainConfig train;
  // [planner]
  PlannerConfig planner;
  // [eval]
  int n_groups = 5;
  int per_group = 50;
  // [bench]
  int bench_warmup = 5;
  int bench_measured = 20;
};

// Single enumeration of every configurable field; parsing, flag lookup, and
// echoing all walk it so the three can never drift apart.
template <typename V>
void visit_config_fields(RunConfig& c, V&& v) {
  v("run", "env", c.env);
  v("run", "seed", c.seed);
  v("run", "out_dir", c.out_dir);
  v("data", "policy", c.policy);
  v("data", "n_traj", c.n_traj);
  v("data", "traj_len", c.traj_len);
  v("data", "include_wall_mask", c.include_wall_mask);
  v("model", "d_z", c.model.d_z);
  v("model", "enc_hidden", c.model.enc_hidden);
  v("model", "dyn_hidden", c.model.dyn_hidden);
  v("model", "head_hidden", c.model.head_hidden);
  v("model", "budget_onehot", c.model.budget_onehot);
  v("train", "mode", c.train.mode);
  v("train", "K", c.train.K);
  v("train", "L", c.train.L);
  v("train", "H_max", c.train.H_max);
  v("train", "batch_size", c.train.batch_size);
  v("train", "lr", c.train.lr);
  v("train", "optimizer", c.train.optimizer);
  v("train", "epochs", c.train.epochs);
  v("train", "steps_per_epoch", c.train.steps_per_epoch);
  v("train", "alpha", c.train.alpha);
  v("train", "beta", c.train.beta);
  v("train", "omega0", c.train.omega0);
  v("train", "omega1", c.train.omega1);
  v("train", "rho_pred", c.train.rho_pred);
  v("train", "pairs_pos_or_hard", c.train.pair_counts.pos_or_hard);
  v("train", "pairs_forced_hard", c.train.pair_counts.forced_hard);
  v("train", "pairs_batch_neg", c.train.pair_counts.batch_neg);
  v("train", "pairs_pred_per_segment", c.train.pair_counts.pred_per_segment);
  v("train", "hard_negatives", c.train.hard_negatives);
  v("planner", "H", c.planner.H);
  v("planner", "n_samples", c.planner.n_samples);
  v("planner", "n_iters", c.planner.n_iters);
  v("planner", "top_k", c.planner.top_k);
  v("planner", "lambda_plan", c.planner.lambda_plan);
  v("planner", "m", c.planner.m);
  v("planner", "budget", c.planner.budget);
  v("planner", "replan_every", c.planner.replan_every);
  v("planner", "base_cost_mode", c.planner.base_cost_mode);
  v("planner", "gated", c.planner.gated);
  v("planner", "smoothing", c.planner.smoothing);
  v("eval", "n_groups", c.n_groups);
  v("eval", "per_group", c.per_group);
  v("bench", "warmup", c.bench_warmup);
  v("bench", "measured", c.bench_measured);
}

namespace detail {

inline const std::vector<std::string>& config_sections() {
  static const std::vector<std::string> s = {"run",     "data", "model",
                                             "train",   "planner", "eval",
                                             "bench"};
  return s;
}

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_bool_value(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(where + ": expected bool, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& v, const std::string& where) {
  T out{};
  const char* first = v.data();
  const char* last = v.data() + v.size();
  std::from_chars_result r;
  if constexpr (std::is_floating_point_v<T>)
    r = std::from_chars(first, last, out);
  else
    r = std::from_chars(first, last, out, 10);
  if (r.ec != std::errc{} || r.ptr != last)
    throw ConfigError(where + ": cannot parse '" + v + "'");
  return out;
}

template <typename T>
void assign_value(T& field, const std::string& value,
                  const std::string& where) {
  if constexpr (std::is_same_v<T, std::string>)
    field = value;
  else if constexpr (std::is_same_v<T, bool>)
    field = parse_bool_value(value, where);
  else
    field = parse_number<T>(value, where);
}

template <typename T>
std::string render_value(const T& field) {
  if constexpr (std::is_same_v<T, std::string>)
    return field;
  else if constexpr (std::is_same_v<T, bool>)
    return field ? "true" : "false";
  else if constexpr (std::is_floating_point_v<T>)
    return format_double(field);
  else
    return std::to_string(field);
}

}  // namespace detail

inline void apply_config_value(RunConfig& c, const std::string& section,
                               const std::string& key,
                               const std::string& value) {
  bool found = false;
  visit_config_fields(c, [&](const char* s, const char* k, auto& field) {
    if (found || section != s || key != k) return;
    found = true;
    detail::assign_value(field, value, section + "." + key);
  });
  if (!found)
    throw ConfigError("unknown config key " + section + "." + key);
}

struct ConfigKv {
  std::string section, key, value;
};

// Parses the flat key=value format: '#' comments, [section] headers,
// whitespace-insensitive. Throws ConfigError with a line number on any
// structural problem; key validity is checked on application.
inline std::vector<ConfigKv> parse_config_text(const std::string& text) {
  std::vector<ConfigKv> out;
  std::istringstream is(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = "config line " + std::to_string(line_no);
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3)
        throw ConfigError(where + ": malformed section header '" + t + "'");
      section = detail::trim(t.substr(1, t.size() - 2));
      bool known = false;
      for (const std::string& s : detail::config_sections())
        known = known || s == section;
      if (!known)
        throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected key = value, got '" + t + "'");
    const std::string key = detail::trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (section.empty())
      throw ConfigError(where + ": key '" + key + "' outside any [section]");
    out.push_back({section, key, detail::trim(t.substr(eq + 1))});
  }
  return out;
}

inline std::vector<ConfigKv> read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MissingFileError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

// Environment profile defaults: paper-scale planner/training profiles keyed
// by the environment name; everything else at struct defaults.
inline RunConfig defaults_for_env(const std::string& env) {
  RunConfig c;
  try {
    c.env = env;
    c.train = train_profile(env);
    c.planner = planner_profile(env);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

// CLI flag override: key is either "section.key" or a bare field name
// (kebab-case accepted); bare names must be unique across sections.
struct FlagOverride {
  std::string key, value;
};

inline void apply_flag_override(RunConfig& c, const FlagOverride& flag) {
  std::string key = flag.key;
  for (char& ch : key)
    if (ch == '-') ch = '_';
  const std::size_t dot = key.find('.');
  if (dot != std::string::npos) {
    apply_config_value(c, key.substr(0, dot), key.substr(dot + 1), flag.value);
    return;
  }
  std::string section;
  int matches = 0;
  visit_config_fields(c, [&](const char* s, const char* k, auto&) {
    if (key == k) {
      section = s;
      ++matches;
    }
  });
  if (matches == 0) throw ConfigError("unknown config flag '" + flag.key + "'");
  if (matches > 1)
    throw ConfigError("ambiguous config flag '" + flag.key +
                      "': qualify as section.key");
  apply_config_value(c, section, key, flag.value);
}

inline void apply_env_seed_override(RunConfig& c) {
  if (const char* v = std::getenv("RCAUX_SEED"))
    c.seed = detail::parse_number<std::uint64_t>(v, "RCAUX_SEED");
}

inline void validate_run_config(const RunConfig& c) {
  try {
    make_env(c.env);
    policy_from_string(c.policy);
    (void)c.train.resolved();
    c.planner.validate();
    c.model.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (c.n_traj < 1 || c.traj_len < 2)
    throw ConfigError("data: need n_traj >= 1 and traj_len >= 2");
  if (c.n_groups < 1 || c.per_group < 1)
    throw ConfigError("eval: need n_groups >= 1 and per_group >= 1");
  if (c.bench_warmup < 0 || c.bench_measured < 1)
    throw ConfigError("bench: need warmup >= 0 and measured >= 1");
  if (c.planner.H - 1 > c.train.H_max)
    throw ConfigError("planner.H - 1 exceeds train.H_max: the gate would "
                      "query budgets the head was never trained on");
}

// Full resolution chain. `path` may be empty (defaults + flags only). The
// environment is resolved first (flags > file > default) because it selects
// the profile defaults everything else overrides.
inline RunConfig load_run_config(const std::string& path,
                                 const std::vector<FlagOverride>& flags = {}) {
  std::vector<ConfigKv> kvs;
  if (!path.empty()) kvs = read_config_file(path);
  std::string env = "tworoom";
  for (const ConfigKv& kv : kvs)
    if (kv.section == "run" && kv.key == "env") env = kv.value;
  for (const FlagOverride& f : flags) {
    std::string key = f.key;
    for (char& ch : key)
      if (ch == '-') ch = '_';
    if (key == "env" || key == "run.env") env = f.value;
  }
  RunConfig c = defaults_for_env(env);
  for (const ConfigKv& kv : kvs)
    apply_config_value(c, kv.section, kv.key, kv.value);
  for (const FlagOverride& f : flags) apply_flag_override(c, f);
  apply_env_seed_override(c);
  validate_run_config(c);
  return c;
}

inline std::string render_config(const RunConfig& cfg) {
  RunConfig c = cfg;  // visitor takes mutable refs
  std::string out, current;
  visit_config_fields(c, [&](const char* s, const char* k, auto& field) {
    if (current != s) {
      if (!out.empty()) out += "\n";
      out += "[";
      out += s;
      out += "]\n";
      current = s;
    }
    out += k;
    out += " = ";
    out += detail::render_value(field);
    out += "\n";
  });
  return out;
}

inline void write_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << render_config(cfg);
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace rcaux
