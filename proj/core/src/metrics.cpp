#include "cmbrl/metrics.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "cmbrl/errors.hpp"

namespace cmbrl {
namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    parts.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <typename T>
T parse_number(std::string_view field, const char* name) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ContractViolation(std::string("bad ") + name + " '" + std::string(field) + "'");
  }
  return value;
}

std::string fmt_real(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

const char* const kMetricsHeader =
    "variant,task_id,episode,step,scenario,episodic_return,train_return,"
    "hypernet_mse_dynamics,hypernet_mse_reward,hypernet_regularization,wall_clock_s";

std::string_view to_string(Variant v) { return v == Variant::kMbrl ? "mbrl" : "mfrl"; }

Variant variant_from_string(std::string_view name) {
  if (name == "mbrl") return Variant::kMbrl;
  if (name == "mfrl") return Variant::kMfrl;
  throw ContractViolation("unknown variant '" + std::string(name) + "'");
}

std::string format_metrics_row(const MetricsRow& r) {
  std::string s;
  s += to_string(r.variant);
  s += ',' + std::to_string(r.task_id);
  s += ',' + std::to_string(r.episode);
  s += ',' + std::to_string(r.step);
  s += ',';
  s += envsim::to_string(r.scenario);
  for (double v : {r.episodic_return, r.train_return, r.hypernet_mse_dynamics,
                   r.hypernet_mse_reward, r.hypernet_regularization, r.wall_clock_s}) {
    s += ',' + fmt_real(v);
  }
  return s;
}

MetricsRow parse_metrics_row(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto f = split(line, ',');
  if (f.size() != 11) {
    throw ContractViolation("expected 11 fields, found " + std::to_string(f.size()));
  }
  MetricsRow r;
  r.variant = variant_from_string(f[0]);
  r.task_id = parse_number<int>(f[1], "task_id");
  r.episode = parse_number<int>(f[2], "episode");
  r.step = parse_number<std::int64_t>(f[3], "step");
  r.scenario = envsim::scenario_from_string(f[4]);
  r.episodic_return = parse_number<double>(f[5], "episodic_return");
  r.train_return = parse_number<double>(f[6], "train_return");
  r.hypernet_mse_dynamics = parse_number<double>(f[7], "hypernet_mse_dynamics");
  r.hypernet_mse_reward = parse_number<double>(f[8], "hypernet_mse_reward");
  r.hypernet_regularization = parse_number<double>(f[9], "hypernet_regularization");
  r.wall_clock_s = parse_number<double>(f[10], "wall_clock_s");
  if (r.task_id < 1 || r.task_id > 3) throw ContractViolation("task_id out of range");
  return r;
}

void write_metrics(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) out << format_metrics_row(r) << '\n';
}

void write_metrics_file(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write metrics file '" + path + "'");
  write_metrics(out, rows);
}

std::vector<MetricsRow> read_metrics_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractViolation(path + ": cannot open metrics file");
  std::string line;
  int line_no = 0;
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line != kMetricsHeader) throw ContractViolation(path + ":1: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    try {
      rows.push_back(parse_metrics_row(line));
    } catch (const ContractViolation& e) {
      throw ContractViolation(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (line_no == 0) throw ContractViolation(path + ": empty metrics file");
  if (rows.empty()) throw ContractViolation(path + ": metrics file has no data rows");
  return rows;
}

}  // namespace cmbrl
