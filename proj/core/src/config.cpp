#include "cmbrl/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "cmbrl/errors.hpp"

#ifndef CMBRL_VERSION
#define CMBRL_VERSION "unknown"
#endif

namespace cmbrl::config {
namespace {

using envsim::Scenario;

// Value problems are reported through this and re-thrown with the line number.
struct BadValue {
  std::string message;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw BadValue{"empty list element in '" + v + "'"};
    out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_integer(const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw BadValue{"expected an integer, got '" + v + "'"};
  return out;
}

double parse_real(const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || !std::isfinite(out)) {
    throw BadValue{"expected a finite number, got '" + v + "'"};
  }
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw BadValue{"expected true or false, got '" + v + "'"};
}

Scenario parse_scenario(const std::string& v) {
  try {
    return envsim::scenario_from_string(v);
  } catch (const ContractViolation& e) {
    throw BadValue{e.what()};
  }
}

std::string real(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <typename T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& f) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) s += ", ";
    s += f(items[i]);
  }
  return s;
}

std::string ints(const std::vector<int>& v) {
  return join<int>(v, [](const int& x) { return std::to_string(x); });
}

std::string reals(const std::vector<double>& v) {
  return join<double>(v, [](const double& x) { return real(x); });
}

std::vector<int> parse_ints(const std::string& v) {
  std::vector<int> out;
  for (const auto& s : split_list(v)) out.push_back(parse_integer<int>(s));
  return out;
}

std::vector<int> parse_hidden(const std::string& v) {
  auto out = parse_ints(v);
  if (out.empty()) throw BadValue{"need at least one hidden layer"};
  for (int h : out) {
    if (h < 1) throw BadValue{"hidden layer widths must be >= 1"};
  }
  return out;
}

std::vector<double> parse_reals(const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(parse_real(s));
  return out;
}

double positive(double v, const char* what) {
  if (!(v > 0.0)) throw BadValue{std::string(what) + " must be > 0"};
  return v;
}

double non_negative(double v, const char* what) {
  if (!(v >= 0.0)) throw BadValue{std::string(what) + " must be >= 0"};
  return v;
}

std::size_t count(const std::string& v, const char* what) {
  const auto n = parse_integer<std::int64_t>(v);
  if (n < 1) throw BadValue{std::string(what) + " must be >= 1"};
  return static_cast<std::size_t>(n);
}

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define REAL_FIELD(sec, name, member, check)                                        \
  Field {                                                                           \
    sec, name, [](const ExperimentConfig& c) { return real(c.member); },            \
        [](ExperimentConfig& c, const std::string& v) { c.member = check(parse_real(v), name); } \
  }

double any(double v, const char*) { return v; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      // [experiment]
      {"experiment", "master_seed",
       [](const ExperimentConfig& c) { return std::to_string(c.master_seed); },
       [](ExperimentConfig& c, const std::string& v) {
         c.master_seed = parse_integer<std::uint64_t>(v);
       }},
      {"experiment", "variants",
       [](const ExperimentConfig& c) {
         return join<Variant>(c.variants,
                              [](const Variant& x) { return std::string(to_string(x)); });
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.variants.clear();
         std::set<Variant> seen;
         for (const auto& s : split_list(v)) {
           Variant x;
           try {
             x = variant_from_string(s);
           } catch (const ContractViolation& e) {
             throw BadValue{e.what()};
           }
           if (!seen.insert(x).second) throw BadValue{"variant '" + s + "' listed twice"};
           c.variants.push_back(x);
         }
         if (c.variants.empty()) throw BadValue{"need at least one variant"};
       }},
      {"experiment", "output_dir", [](const ExperimentConfig& c) { return c.output_dir; },
       [](ExperimentConfig& c, const std::string& v) {
         if (v.empty()) throw BadValue{"output_dir must not be empty"};
         c.output_dir = v;
       }},
      {"experiment", "weather_file", [](const ExperimentConfig& c) { return c.weather_file; },
       [](ExperimentConfig& c, const std::string& v) { c.weather_file = v; }},
      {"experiment", "checkpoint_every_steps",
       [](const ExperimentConfig& c) { return std::to_string(c.checkpoint_every_steps); },
       [](ExperimentConfig& c, const std::string& v) {
         c.checkpoint_every_steps = parse_integer<std::int64_t>(v);
         if (c.checkpoint_every_steps < 0) throw BadValue{"checkpoint_every_steps must be >= 0"};
       }},
      {"experiment", "task_sequence",
       [](const ExperimentConfig& c) { return ints(c.dyna.task_sequence); },
       [](ExperimentConfig& c, const std::string& v) {
         c.dyna.task_sequence = parse_ints(v);
         if (c.dyna.task_sequence.empty()) throw BadValue{"task_sequence is empty"};
         for (int t : c.dyna.task_sequence) {
           if (t < 1 || t > 3) throw BadValue{"task ids must be 1, 2 or 3"};
         }
       }},
      {"experiment", "episodes_task1",
       [](const ExperimentConfig& c) { return std::to_string(c.dyna.episodes_per_task[0]); },
       [](ExperimentConfig& c, const std::string& v) {
         c.dyna.episodes_per_task[0] = parse_integer<int>(v);
         if (c.dyna.episodes_per_task[0] < 0) throw BadValue{"episode counts must be >= 0"};
       }},
      {"experiment", "episodes_task2",
       [](const ExperimentConfig& c) { return std::to_string(c.dyna.episodes_per_task[1]); },
       [](ExperimentConfig& c, const std::string& v) {
         c.dyna.episodes_per_task[1] = parse_integer<int>(v);
         if (c.dyna.episodes_per_task[1] < 0) throw BadValue{"episode counts must be >= 0"};
       }},
      {"experiment", "episodes_task3",
       [](const ExperimentConfig& c) { return std::to_string(c.dyna.episodes_per_task[2]); },
       [](ExperimentConfig& c, const std::string& v) {
         c.dyna.episodes_per_task[2] = parse_integer<int>(v);
         if (c.dyna.episodes_per_task[2] < 0) throw BadValue{"episode counts must be >= 0"};
       }},
      {"experiment", "train_scenario",
       [](const ExperimentConfig& c) { return std::string(to_string(c.dyna.train_scenario)); },
       [](ExperimentConfig& c, const std::string& v) {
         c.dyna.train_scenario = parse_scenario(v);
       }},
      {"experiment", "eval_scenarios",
       [](const ExperimentConfig& c) {
         return join<Scenario>(c.dyna.eval_scenarios, [](const Scenario& s) {
           return std::string(to_string(s));
         });
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.dyna.eval_scenarios.clear();
         for (const auto& s : split_list(v)) c.dyna.eval_scenarios.push_back(parse_scenario(s));
         if (c.dyna.eval_scenarios.empty()) throw BadValue{"need at least one eval scenario"};
       }},
      {"experiment", "record_wall_clock",
       [](const ExperimentConfig& c) { return std::string(c.dyna.record_wall_clock ? "true" : "false"); },
       [](ExperimentConfig& c, const std::string& v) { c.dyna.record_wall_clock = parse_bool(v); }},

      // [env]
      REAL_FIELD("env", "dt_s", dyna.env.dt_s, positive),
      {"env", "steps_per_episode",
       [](const ExperimentConfig& c) { return std::to_string(c.dyna.env.steps_per_episode); },
       [](ExperimentConfig& c, const std::string& v) {
         c.dyna.env.steps_per_episode = parse_integer<int>(v);
         if (c.dyna.env.steps_per_episode < 1) throw BadValue{"steps_per_episode must be >= 1"};
       }},
      REAL_FIELD("env", "ua_w_per_k", dyna.env.ua_w_per_k, positive),
      REAL_FIELD("env", "capacitance_j_per_k", dyna.env.capacitance_j_per_k, positive),
      REAL_FIELD("env", "q_max_w", dyna.env.q_max_w, non_negative),
      REAL_FIELD("env", "default_a2", dyna.env.default_a2, any),
      REAL_FIELD("env", "default_a3", dyna.env.default_a3, any),
      REAL_FIELD("env", "initial_temp_c", dyna.env.initial_temp_c, any),
      REAL_FIELD("env", "min_temp_c", dyna.env.min_temp_c, any),
      REAL_FIELD("env", "max_temp_c", dyna.env.max_temp_c, any),
      REAL_FIELD("env", "weather_noise_sigma", dyna.env.weather_noise_sigma, non_negative),

      // [sac]
      {"sac", "actor_hidden", [](const ExperimentConfig& c) { return ints(c.dyna.sac.actor_hidden); },
       [](ExperimentConfig& c, const std::string& v) { c.dyna.sac.actor_hidden = parse_hidden(v); }},
      {"sac", "critic_hidden",
       [](const ExperimentConfig& c) { return ints(c.dyna.sac.critic_hidden); },
       [](ExperimentConfig& c, const std::string& v) { c.dyna.sac.critic_hidden = parse_hidden(v); }},
      REAL_FIELD("sac", "gamma", dyna.sac.gamma, non_negative),
      REAL_FIELD("sac", "tau", dyna.sac.tau, non_negative),
      REAL_FIELD("sac", "lr_actor", dyna.sac.lr_actor, non_negative),
      REAL_FIELD("sac", "lr_critic", dyna.sac.lr_critic, non_negative),
      REAL_FIELD("sac", "lr_entropy", dyna.sac.lr_entropy, non_negative),
      REAL_FIELD("sac", "initial_entropy_coeff", dyna.sac.initial_entropy_coeff, positive),
      REAL_FIELD("sac", "reward_scale", dyna.sac.reward_scale, positive),
      REAL_FIELD("sac", "log_std_min", dyna.sac.log_std_min, any),
      REAL_FIELD("sac", "log_std_max", dyna.sac.log_std_max, any),
      {"sac", "action_grid", [](const ExperimentConfig& c) { return reals(c.dyna.grid.levels); },
       [](ExperimentConfig& c, const std::string& v) {
         c.dyna.grid.levels = parse_reals(v);
         try {
           c.dyna.grid.validate();
         } catch (const ContractViolation& e) {
           throw BadValue{e.what()};
         }
       }},
      {"sac", "policy_update_every",
       [](const ExperimentConfig& c) { return std::to_string(c.dyna.policy_update_every); },
       [](ExperimentConfig& c, const std::string& v) {
         c.dyna.policy_update_every = static_cast<int>(count(v, "policy_update_every"));
       }},
      {"sac", "batch_size", [](const ExperimentConfig& c) { return std::to_string(c.dyna.batch_size); },
       [](ExperimentConfig& c, const std::string& v) { c.dyna.batch_size = count(v, "batch_size"); }},
      {"sac", "real_fraction", [](const ExperimentConfig& c) { return real(c.dyna.real_fraction); },
       [](ExperimentConfig& c, const std::string& v) {
         c.dyna.real_fraction = parse_real(v);
         if (c.dyna.real_fraction < 0.0 || c.dyna.real_fraction > 1.0) {
           throw BadValue{"real_fraction must lie in [0, 1]"};
         }
       }},

      // [buffers]
      {"buffers", "real_capacity",
       [](const ExperimentConfig& c) { return std::to_string(c.dyna.real_capacity); },
       [](ExperimentConfig& c, const std::string& v) { c.dyna.real_capacity = count(v, "real_capacity"); }},
      {"buffers", "synthetic_capacity",
       [](const ExperimentConfig& c) { return std::to_string(c.dyna.synthetic_capacity); },
       [](ExperimentConfig& c, const std::string& v) {
         c.dyna.synthetic_capacity = count(v, "synthetic_capacity");
       }},
      {"buffers", "hypernet_capacity",
       [](const ExperimentConfig& c) { return std::to_string(c.dyna.hypernet_capacity); },
       [](ExperimentConfig& c, const std::string& v) {
         c.dyna.hypernet_capacity = count(v, "hypernet_capacity");
       }},
      {"buffers", "carry_hypernet_buffer",
       [](const ExperimentConfig& c) { return std::string(c.dyna.carry_hypernet_buffer ? "true" : "false"); },
       [](ExperimentConfig& c, const std::string& v) { c.dyna.carry_hypernet_buffer = parse_bool(v); }},

      // [hypernet]
      REAL_FIELD("hypernet", "lr", dyna.hypernet_lr, non_negative),
      REAL_FIELD("hypernet", "beta", dyna.beta, non_negative),
      {"hypernet", "synthetic_per_step",
       [](const ExperimentConfig& c) { return std::to_string(c.dyna.synthetic_per_step); },
       [](ExperimentConfig& c, const std::string& v) {
         c.dyna.synthetic_per_step = parse_integer<int>(v);
         if (c.dyna.synthetic_per_step < 0) throw BadValue{"synthetic_per_step must be >= 0"};
       }},
      {"hypernet", "ensemble_size",
       [](const ExperimentConfig& c) { return std::to_string(c.dyna.ensemble_size); },
       [](ExperimentConfig& c, const std::string& v) {
         c.dyna.ensemble_size = static_cast<int>(count(v, "ensemble_size"));
       }},
      {"hypernet", "warmup_transitions",
       [](const ExperimentConfig& c) { return std::to_string(c.dyna.warmup_transitions); },
       [](ExperimentConfig& c, const std::string& v) {
         c.dyna.warmup_transitions = count(v, "warmup_transitions");
       }},
      {"hypernet", "target_hidden",
       [](const ExperimentConfig& c) { return ints(c.dyna.world.target_hidden); },
       [](ExperimentConfig& c, const std::string& v) { c.dyna.world.target_hidden = parse_hidden(v); }},
      {"hypernet", "hidden",
       [](const ExperimentConfig& c) { return ints(c.dyna.world.hypernet_hidden); },
       [](ExperimentConfig& c, const std::string& v) { c.dyna.world.hypernet_hidden = parse_hidden(v); }},
      {"hypernet", "noise_dim",
       [](const ExperimentConfig& c) { return std::to_string(c.dyna.world.noise_dim); },
       [](ExperimentConfig& c, const std::string& v) {
         c.dyna.world.noise_dim = parse_integer<int>(v);
         if (c.dyna.world.noise_dim < 0) throw BadValue{"noise_dim must be >= 0"};
       }},
      REAL_FIELD("hypernet", "noise_sigma", dyna.world.noise_sigma, non_negative),
      {"hypernet", "forecast_summary",
       [](const ExperimentConfig& c) {
         return std::string(c.dyna.world.norm.forecast == hyperworld::ForecastSummary::kMean
                                ? "mean"
                                : "first");
       },
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "first") {
           c.dyna.world.norm.forecast = hyperworld::ForecastSummary::kFirst;
         } else if (v == "mean") {
           c.dyna.world.norm.forecast = hyperworld::ForecastSummary::kMean;
         } else {
           throw BadValue{"forecast_summary must be 'first' or 'mean'"};
         }
       }},
      REAL_FIELD("hypernet", "temp_center", dyna.world.norm.temp_center, any),
      REAL_FIELD("hypernet", "temp_scale", dyna.world.norm.temp_scale, positive),
      REAL_FIELD("hypernet", "delta_scale", dyna.world.norm.delta_scale, positive),
      REAL_FIELD("hypernet", "reward_scale", dyna.world.norm.reward_scale, positive),
  };
  return table;
}

#undef REAL_FIELD

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (section == f.section && key == f.key) return &f;
  }
  return nullptr;
}

bool known_section(const std::string& s) {
  if (s == "manifest") return true;
  for (const auto& f : fields()) {
    if (s == f.section) return true;
  }
  return false;
}

}  // namespace

std::string code_version() { return CMBRL_VERSION; }

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return to_ini(a) == to_ini(b);
}

ExperimentConfig parse(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::set<std::pair<std::string, std::string>> seen;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!known_section(section)) throw ConfigError("unknown section [" + section + "]", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line_no);
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) throw ConfigError("key '" + key + "' outside any section", line_no);
    if (key.empty()) throw ConfigError("empty key", line_no);
    if (section == "manifest") continue;  // informational, written by write_manifest
    const Field* f = find_field(section, key);
    if (f == nullptr) {
      throw ConfigError("unknown key '" + key + "' in [" + section + "]", line_no);
    }
    if (!seen.emplace(section, key).second) {
      throw ConfigError("duplicate key '" + key + "' in [" + section + "]", line_no);
    }
    try {
      f->set(c, value);
    } catch (const BadValue& e) {
      throw ConfigError(section + "." + key + ": " + e.message, line_no);
    }
  }
  if (c.dyna.sac.log_std_min >= c.dyna.sac.log_std_max) {
    throw ConfigError("sac.log_std_min must be below sac.log_std_max", 0);
  }
  if (c.dyna.env.min_temp_c >= c.dyna.env.max_temp_c) {
    throw ConfigError("env.min_temp_c must be below env.max_temp_c", 0);
  }
  try {
    c.dyna.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what(), 0);
  }
  return c;
}

ExperimentConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'", 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string to_ini(const ExperimentConfig& c) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(c) + "\n";
  }
  return out;
}

std::string manifest_text(const ExperimentConfig& c) {
  return to_ini(c) + "\n[manifest]\ncode_version = " + code_version() + "\n";
}

void write_manifest(const std::string& path, const ExperimentConfig& c) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path);
  out << manifest_text(c);
}

}  // namespace cmbrl::config
