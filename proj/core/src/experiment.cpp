#include "cmbrl/experiment.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "cmbrl/checkpoint.hpp"
#include "cmbrl/errors.hpp"
#include "cmbrl/metrics.hpp"

namespace cmbrl::experiment {
namespace fs = std::filesystem;

namespace {

std::optional<envsim::WeatherTable> weather_for(const config::ExperimentConfig& c) {
  if (c.weather_file.empty()) return std::nullopt;
  return envsim::WeatherTable::load_csv(c.weather_file);
}

// Configuration identity for resume checks; the output directory may legitimately
// differ (environment override), everything else must match.
std::string identity(config::ExperimentConfig c) {
  c.output_dir = "-";
  return config::to_ini(c);
}

void say(const RunOptions& o, const std::string& msg) {
  if (o.log != nullptr) *o.log << msg << '\n' << std::flush;
}

void save(const config::ExperimentConfig& c, const dyna::ContinualRun& run) {
  checkpoint::save_run(checkpoint_path(c, run.state().variant), config::to_ini(c), run.state());
  write_metrics_file((fs::path(variant_dir(c, run.state().variant)) / "metrics.csv").string(),
                     run.metrics());
}

VariantOutcome outcome_of(const dyna::RunState& s, std::string message = {}) {
  VariantOutcome o;
  o.variant = s.variant;
  o.finished = s.finished && !s.failed;
  o.diverged = s.failed;
  o.total_steps = s.total_steps;
  o.message = std::move(message);
  return o;
}

VariantOutcome run_variant(const config::ExperimentConfig& c, Variant v, const RunOptions& opt) {
  fs::create_directories(variant_dir(c, v));
  const std::string ckpt = checkpoint_path(c, v);

  std::optional<dyna::ContinualRun> run;
  if (opt.resume && fs::exists(ckpt)) {
    auto saved = checkpoint::load_run(ckpt);
    if (identity(config::parse(saved.config_text)) != identity(c)) {
      throw ConfigError("checkpoint " + ckpt + " was written with a different configuration", 0);
    }
    if (saved.state.variant != v || saved.state.master_seed != c.master_seed) {
      throw ConfigError("checkpoint " + ckpt + " belongs to another variant or seed", 0);
    }
    say(opt, std::string(to_string(v)) + ": resuming at step " +
                 std::to_string(saved.state.total_steps));
    run.emplace(c.dyna, std::move(saved.state), weather_for(c));
  } else {
    run.emplace(c.dyna, v, c.master_seed, weather_for(c));
  }

  try {
    while (!run->finished()) {
      std::int64_t budget = -1;
      if (opt.halt_after_steps >= 0) {
        budget = opt.halt_after_steps - run->state().total_steps;
        if (budget <= 0) break;
      }
      if (c.checkpoint_every_steps > 0) {
        const std::int64_t to_next =
            c.checkpoint_every_steps - run->state().total_steps % c.checkpoint_every_steps;
        budget = budget < 0 ? to_next : std::min(budget, to_next);
      }
      run->run(budget);
      if (!run->finished() && c.checkpoint_every_steps > 0) save(c, *run);
    }
  } catch (const TrainingDivergence& e) {
    save(c, *run);
    say(opt, std::string(to_string(v)) + ": " + e.what());
    return outcome_of(run->state(), e.what());
  }
  save(c, *run);
  say(opt, std::string(to_string(v)) + (run->finished() ? ": finished" : ": halted") +
               " after " + std::to_string(run->state().total_steps) + " steps");
  return outcome_of(run->state());
}

void merge_metrics(const config::ExperimentConfig& c) {
  std::ofstream out(metrics_path(c), std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + metrics_path(c));
  out << kMetricsHeader << '\n';
  for (Variant v : c.variants) {
    const auto path = (fs::path(variant_dir(c, v)) / "metrics.csv").string();
    std::ifstream in(path, std::ios::binary);
    if (!in) continue;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (header) {
        header = false;
        continue;
      }
      out << line << '\n';
    }
  }
}

}  // namespace

bool RunOutcome::all_finished() const {
  return std::all_of(variants.begin(), variants.end(),
                     [](const VariantOutcome& v) { return v.finished; });
}

bool RunOutcome::any_diverged() const {
  return std::any_of(variants.begin(), variants.end(),
                     [](const VariantOutcome& v) { return v.diverged; });
}

std::string variant_dir(const config::ExperimentConfig& c, Variant v) {
  return (fs::path(c.output_dir) / std::string(to_string(v))).string();
}

std::string checkpoint_path(const config::ExperimentConfig& c, Variant v) {
  return (fs::path(variant_dir(c, v)) / "run.ckpt").string();
}

std::string metrics_path(const config::ExperimentConfig& c) {
  return (fs::path(c.output_dir) / "metrics.csv").string();
}

RunOutcome run_experiment(const config::ExperimentConfig& c, const RunOptions& opt) {
  fs::create_directories(c.output_dir);
  config::write_manifest((fs::path(c.output_dir) / "manifest.ini").string(), c);

  RunOutcome outcome;
  if (!opt.parallel || c.variants.size() < 2) {
    for (Variant v : c.variants) outcome.variants.push_back(run_variant(c, v, opt));
  } else {
    std::vector<pid_t> children;
    for (Variant v : c.variants) {
      const pid_t pid = fork();
      if (pid < 0) throw std::runtime_error("fork failed");
      if (pid == 0) {
        int code = 0;
        try {
          code = run_variant(c, v, opt).diverged ? 3 : 0;
        } catch (const std::exception& e) {
          if (opt.log != nullptr) *opt.log << to_string(v) << ": " << e.what() << std::endl;
          code = 1;
        }
        _exit(code);
      }
      children.push_back(pid);
    }
    bool child_failed = false;
    for (pid_t pid : children) {
      int status = 0;
      waitpid(pid, &status, 0);
      if (!WIFEXITED(status) || (WEXITSTATUS(status) != 0 && WEXITSTATUS(status) != 3)) {
        child_failed = true;
      }
    }
    if (child_failed) throw std::runtime_error("a variant process failed");
    for (Variant v : c.variants) {
      outcome.variants.push_back(outcome_of(checkpoint::load_run(checkpoint_path(c, v)).state));
    }
  }
  merge_metrics(c);
  return outcome;
}

int agent_task_id(const dyna::RunState& s, const dyna::DynaConfig& c) {
  const int n = static_cast<int>(c.task_sequence.size());
  int idx = s.task_index;
  if (!s.task_active && idx > 0) idx -= 1;
  return c.task_sequence[static_cast<std::size_t>(std::clamp(idx, 0, n - 1))];
}

EvalSummary evaluate_checkpoint(const std::string& path, envsim::Scenario scenario, int episodes,
                                std::uint64_t seed, int task_id) {
  if (episodes < 0) throw ContractViolation("episodes must be >= 0");
  const auto saved = checkpoint::load_run(path);
  const auto c = config::parse(saved.config_text);
  EvalSummary out;
  out.task_id = task_id == 0 ? agent_task_id(saved.state, c.dyna) : task_id;
  const auto task = envsim::TaskSpec::make(out.task_id);
  if (task.action_dim() != saved.state.agent.action_dim) {
    throw ContractViolation("task " + std::to_string(out.task_id) + " needs " +
                            std::to_string(task.action_dim()) + " actions but the agent has " +
                            std::to_string(saved.state.agent.action_dim));
  }
  out.episodes = episodes;
  if (episodes == 0) return out;
  const envsim::ThermalZone zone(c.dyna.env, weather_for(c));
  out.returns = dyna::evaluate_policy(zone, saved.state.agent, task, scenario, seed, episodes,
                                      c.dyna.grid, c.dyna.sac);
  double sum = 0.0;
  for (double r : out.returns) sum += r;
  out.mean = sum / episodes;
  double sq = 0.0;
  for (double r : out.returns) sq += (r - out.mean) * (r - out.mean);
  out.stddev = std::sqrt(sq / episodes);
  return out;
}

void describe_checkpoint(const std::string& path, std::ostream& out) {
  const auto container = checkpoint::Container::load(path);
  out << "format version " << checkpoint::kFormatVersion << "\n";
  for (const auto& s : container.sections()) {
    out << "section " << s.name << ": " << s.payload.size() << " bytes\n";
  }
  const auto saved = checkpoint::load_run(path);
  const auto& st = saved.state;
  out << "code version " << saved.code_version << "\n";
  out << "variant " << to_string(st.variant) << ", master seed " << st.master_seed << "\n";
  out << "total steps " << st.total_steps << ", task index " << st.task_index << ", episode "
      << st.episode << (st.finished ? (st.failed ? ", failed" : ", finished") : "") << "\n";
  out << "agent: " << st.agent.actor.size() << " actor and " << st.agent.critic1.size()
      << " critic parameters, " << st.agent.update_count << " updates\n";
  if (st.has_hypernet) {
    out << "hypernet: " << st.hypernet.params.size() << " parameters\n";
  }
  out << "snapshot tasks:";
  for (int t : st.snapshot.task_ids()) out << ' ' << t;
  out << "\nbuffers: alpha " << st.buffers.m_alpha.size() << ", beta " << st.buffers.m_beta.size()
      << ", gamma " << st.buffers.m_gamma.size() << "\n";
  out << "metrics rows " << st.metrics.size() << "\n";
}

}  // namespace cmbrl::experiment
