#pragma once

// Experiment configuration: an INI-style file of [section] headers and
// `key = value` lines. Lines starting with '#' or ';' are comments. Every key is optional and
// falls back to the built-in default; unknown sections or keys are errors.
// Lists are comma separated. to_ini() writes every key, with reals in
// shortest round-trip form, so parse(to_ini(c)) == c.

#include <cstdint>
#include <string>
#include <vector>

#include "cmbrl/dyna.hpp"
#include "cmbrl/metrics.hpp"

namespace cmbrl::config {

struct ExperimentConfig {
  dyna::DynaConfig dyna;
  std::uint64_t master_seed = 1;
  std::vector<Variant> variants{Variant::kMbrl, Variant::kMfrl};
  std::string output_dir = "runs/default";
  // Measured weather (CSV time_s,temp_c); empty selects the synthetic generator.
  std::string weather_file;
  // Write a checkpoint every this many real steps during `run`; 0 disables.
  std::int64_t checkpoint_every_steps = 0;
};

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

// Throws ConfigError naming the offending line.
ExperimentConfig parse(const std::string& text);
// Throws ConfigError; the message names the path when the file is missing.
ExperimentConfig load(const std::string& path);

std::string to_ini(const ExperimentConfig& config);

// Manifest written next to the results: the full configuration plus a
// [manifest] section with the master seed and code version.
std::string manifest_text(const ExperimentConfig& config);
void write_manifest(const std::string& path, const ExperimentConfig& config);

std::string code_version();

}  // namespace cmbrl::config
