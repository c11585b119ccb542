#include "cmbrl/checkpoint.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "cmbrl/errors.hpp"

#ifndef CMBRL_VERSION
#define CMBRL_VERSION "unknown"
#endif

namespace cmbrl::checkpoint {
namespace {

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void encode_obs(io::Writer& w, const envsim::Observation& o) {
  w.f64(o.time_sin);
  w.f64(o.time_cos);
  w.f64(o.zone_temp_c);
  for (double f : o.forecast_c) w.f64(f);
}

envsim::Observation decode_obs(io::Reader& r) {
  envsim::Observation o;
  o.time_sin = r.f64();
  o.time_cos = r.f64();
  o.zone_temp_c = r.f64();
  for (double& f : o.forecast_c) f = r.f64();
  return o;
}

void encode_env(io::Writer& w, const envsim::EnvState& s) {
  w.f64(s.sim_time_s);
  w.f64(s.zone_temp_c);
  w.u8(static_cast<std::uint8_t>(s.scenario));
  w.i32(s.task_id);
  w.i32(s.step_index);
  w.reals(s.outdoor_trace_c);
}

envsim::Scenario decode_scenario(io::Reader& r) {
  const std::uint8_t v = r.u8();
  if (v > 1) throw CorruptCheckpoint("unknown scenario tag");
  return static_cast<envsim::Scenario>(v);
}

Variant decode_variant(io::Reader& r) {
  const std::uint8_t v = r.u8();
  if (v > 1) throw CorruptCheckpoint("unknown variant tag");
  return static_cast<Variant>(v);
}

envsim::EnvState decode_env(io::Reader& r) {
  envsim::EnvState s;
  s.sim_time_s = r.f64();
  s.zone_temp_c = r.f64();
  s.scenario = decode_scenario(r);
  s.task_id = r.i32();
  s.step_index = r.i32();
  s.outdoor_trace_c = r.reals();
  return s;
}

void encode_losses(io::Writer& w, const hyperworld::HypernetLosses& l) {
  w.f64(l.mse_dynamics);
  w.f64(l.mse_reward);
  w.f64(l.regularization);
  w.f64(l.total);
}

hyperworld::HypernetLosses decode_losses(io::Reader& r) {
  hyperworld::HypernetLosses l;
  l.mse_dynamics = r.f64();
  l.mse_reward = r.f64();
  l.regularization = r.f64();
  l.total = r.f64();
  return l;
}

void encode_row(io::Writer& w, const MetricsRow& m) {
  w.u8(static_cast<std::uint8_t>(m.variant));
  w.i32(m.task_id);
  w.i32(m.episode);
  w.i64(m.step);
  w.u8(static_cast<std::uint8_t>(m.scenario));
  w.f64(m.episodic_return);
  w.f64(m.train_return);
  w.f64(m.hypernet_mse_dynamics);
  w.f64(m.hypernet_mse_reward);
  w.f64(m.hypernet_regularization);
  w.f64(m.wall_clock_s);
}

MetricsRow decode_row(io::Reader& r) {
  MetricsRow m;
  m.variant = decode_variant(r);
  m.task_id = r.i32();
  m.episode = r.i32();
  m.step = r.i64();
  m.scenario = decode_scenario(r);
  m.episodic_return = r.f64();
  m.train_return = r.f64();
  m.hypernet_mse_dynamics = r.f64();
  m.hypernet_mse_reward = r.f64();
  m.hypernet_regularization = r.f64();
  m.wall_clock_s = r.f64();
  return m;
}

void encode_report(io::Writer& w, const dyna::StageReport& s) {
  w.i32(s.task_id);
  w.u8(static_cast<std::uint8_t>(s.variant));
  w.u64(s.seed);
  w.reals(s.eval_returns);
  w.reals(s.train_returns);
  w.u64(s.hypernet_losses.size());
  for (const auto& l : s.hypernet_losses) encode_losses(w, l);
  w.u64(s.synthetic_per_episode.size());
  for (auto v : s.synthetic_per_episode) w.i64(v);
  w.i64(s.real_transitions);
  w.i64(s.synthetic_transitions);
  w.f64(s.wall_time_s);
  w.boolean(s.diverged);
  w.i64(s.failure_step);
  w.str(s.failure);
}

dyna::StageReport decode_report(io::Reader& r) {
  dyna::StageReport s;
  s.task_id = r.i32();
  s.variant = decode_variant(r);
  s.seed = r.u64();
  s.eval_returns = r.reals();
  s.train_returns = r.reals();
  const std::uint64_t nl = r.u64();
  if (nl > r.remaining() / 32) throw CorruptCheckpoint("loss list longer than its section");
  for (std::uint64_t i = 0; i < nl; ++i) s.hypernet_losses.push_back(decode_losses(r));
  const std::uint64_t ns = r.u64();
  if (ns > r.remaining() / 8) throw CorruptCheckpoint("count list longer than its section");
  for (std::uint64_t i = 0; i < ns; ++i) s.synthetic_per_episode.push_back(r.i64());
  s.real_transitions = r.i64();
  s.synthetic_transitions = r.i64();
  s.wall_time_s = r.f64();
  s.diverged = r.boolean();
  s.failure_step = r.i64();
  s.failure = r.str();
  return s;
}

std::vector<std::uint8_t> finish(io::Writer& w) { return w.take(); }

void expect_done(const io::Reader& r, std::string_view section) {
  if (!r.done()) throw CorruptCheckpoint("trailing bytes in section " + std::string(section));
}

}  // namespace

void Container::put(std::string name, std::vector<std::uint8_t> payload) {
  if (name.empty() || name.size() > 0xffff) throw ContractViolation("bad section name");
  for (auto& s : sections_) {
    if (s.name == name) {
      s.payload = std::move(payload);
      return;
    }
  }
  sections_.push_back({std::move(name), std::move(payload)});
}

const std::vector<std::uint8_t>* Container::find(std::string_view name) const {
  for (const auto& s : sections_) {
    if (s.name == name) return &s.payload;
  }
  return nullptr;
}

const std::vector<std::uint8_t>& Container::get(std::string_view name) const {
  const auto* p = find(name);
  if (p == nullptr) throw CorruptCheckpoint("missing section " + std::string(name));
  return *p;
}

std::vector<std::uint8_t> Container::encode(std::uint32_t version) const {
  io::Writer w;
  w.raw({reinterpret_cast<const std::uint8_t*>(kMagic), sizeof(kMagic)});
  w.u32(version);
  w.u32(static_cast<std::uint32_t>(sections_.size()));
  for (const auto& s : sections_) {
    w.u16(static_cast<std::uint16_t>(s.name.size()));
    w.raw({reinterpret_cast<const std::uint8_t*>(s.name.data()), s.name.size()});
    w.u64(s.payload.size());
    w.raw(s.payload);
  }
  const std::uint32_t crc = crc_of(w.bytes().data(), w.bytes().size());
  w.u32(crc);
  return w.take();
}

Container Container::decode(const std::vector<std::uint8_t>& bytes) {
  constexpr std::size_t kHeader = sizeof(kMagic) + 4 + 4;
  if (bytes.size() < kHeader + 4) throw CorruptCheckpoint("file too short to be a checkpoint");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CorruptCheckpoint("bad magic bytes");
  }
  const std::size_t body = bytes.size() - 4;
  io::Reader tail({bytes.data() + body, 4});
  if (tail.u32() != crc_of(bytes.data(), body)) throw CorruptCheckpoint("checksum mismatch");

  io::Reader r({bytes.data() + sizeof(kMagic), body - sizeof(kMagic)});
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw CheckpointVersionError("unsupported checkpoint format version " +
                                 std::to_string(version) + " (expected " +
                                 std::to_string(kFormatVersion) + ")");
  }
  const std::uint32_t count = r.u32();
  Container c;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = r.u16();
    auto name = r.raw(name_len);
    const std::uint64_t len = r.u64();
    if (len > r.remaining()) throw CorruptCheckpoint("section runs past end of file");
    auto payload = r.raw(len);
    std::string key(name.begin(), name.end());
    if (c.find(key) != nullptr) throw CorruptCheckpoint("duplicate section " + key);
    c.sections_.push_back({std::move(key), {payload.begin(), payload.end()}});
  }
  if (!r.done()) throw CorruptCheckpoint("trailing bytes after last section");
  return c;
}

void Container::save(const std::string& path) const {
  const auto bytes = encode();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Container Container::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode(bytes);
}

void encode(io::Writer& w, const diffnet::NetSpec& spec) {
  w.u64(spec.layer_sizes.size());
  for (int s : spec.layer_sizes) w.i32(s);
  w.u64(spec.activations.size());
  for (auto a : spec.activations) w.u8(static_cast<std::uint8_t>(a));
}

diffnet::NetSpec decode_net_spec(io::Reader& r) {
  diffnet::NetSpec spec;
  const std::uint64_t n = r.u64();
  if (n > r.remaining() / 4) throw CorruptCheckpoint("layer list longer than its section");
  for (std::uint64_t i = 0; i < n; ++i) spec.layer_sizes.push_back(r.i32());
  const std::uint64_t m = r.u64();
  if (m > r.remaining()) throw CorruptCheckpoint("activation list longer than its section");
  for (std::uint64_t i = 0; i < m; ++i) {
    const std::uint8_t a = r.u8();
    if (a > 2) throw CorruptCheckpoint("unknown activation tag");
    spec.activations.push_back(static_cast<diffnet::Activation>(a));
  }
  try {
    spec.validate();
  } catch (const ContractViolation& e) {
    throw CorruptCheckpoint(std::string("invalid network spec: ") + e.what());
  }
  return spec;
}

void encode(io::Writer& w, const diffnet::ParamVector& p) { w.reals(p.values()); }

diffnet::ParamVector decode_params(io::Reader& r) { return diffnet::ParamVector(r.reals()); }

void encode(io::Writer& w, const diffnet::AdamState& s) {
  w.reals(s.first_moment);
  w.reals(s.second_moment);
  w.i64(s.step_count);
  w.f64(s.beta1);
  w.f64(s.beta2);
  w.f64(s.epsilon);
}

diffnet::AdamState decode_adam(io::Reader& r) {
  diffnet::AdamState s;
  s.first_moment = r.reals();
  s.second_moment = r.reals();
  s.step_count = r.i64();
  s.beta1 = r.f64();
  s.beta2 = r.f64();
  s.epsilon = r.f64();
  return s;
}

void encode(io::Writer& w, const sac::AgentState& a) {
  w.i32(a.obs_dim);
  w.i32(a.action_dim);
  encode(w, a.actor_spec);
  encode(w, a.critic_spec);
  encode(w, a.actor);
  encode(w, a.critic1);
  encode(w, a.critic2);
  encode(w, a.target_critic1);
  encode(w, a.target_critic2);
  w.f64(a.log_entropy_coeff);
  w.f64(a.target_entropy);
  encode(w, a.actor_opt);
  encode(w, a.critic1_opt);
  encode(w, a.critic2_opt);
  encode(w, a.entropy_opt);
  w.i64(a.update_count);
}

sac::AgentState decode_agent(io::Reader& r) {
  sac::AgentState a;
  a.obs_dim = r.i32();
  a.action_dim = r.i32();
  a.actor_spec = decode_net_spec(r);
  a.critic_spec = decode_net_spec(r);
  a.actor = decode_params(r);
  a.critic1 = decode_params(r);
  a.critic2 = decode_params(r);
  a.target_critic1 = decode_params(r);
  a.target_critic2 = decode_params(r);
  a.log_entropy_coeff = r.f64();
  a.target_entropy = r.f64();
  a.actor_opt = decode_adam(r);
  a.critic1_opt = decode_adam(r);
  a.critic2_opt = decode_adam(r);
  a.entropy_opt = decode_adam(r);
  a.update_count = r.i64();
  if (a.actor.size() != a.actor_spec.param_count() ||
      a.critic1.size() != a.critic_spec.param_count() ||
      a.critic2.size() != a.critic_spec.param_count() ||
      a.target_critic1.size() != a.critic_spec.param_count() ||
      a.target_critic2.size() != a.critic_spec.param_count()) {
    throw CorruptCheckpoint("agent parameter count does not match its network spec");
  }
  return a;
}

void encode(io::Writer& w, const hyperworld::HypernetState& h) {
  encode(w, h.targets.dynamics);
  encode(w, h.targets.reward);
  encode(w, h.spec);
  encode(w, h.params);
  encode(w, h.opt);
  w.u64(h.chunk_table.size());
  for (const auto& c : h.chunk_table) {
    w.u8(static_cast<std::uint8_t>(c.target));
    w.i32(c.layer);
    w.i32(c.layer_id);
    w.u64(c.size);
    w.u64(c.offset);
  }
  w.i32(h.noise_dim);
  w.f64(h.noise_sigma);
  w.f64(h.norm.temp_center);
  w.f64(h.norm.temp_scale);
  w.f64(h.norm.delta_scale);
  w.f64(h.norm.reward_scale);
  w.u8(static_cast<std::uint8_t>(h.norm.forecast));
}

hyperworld::HypernetState decode_hypernet(io::Reader& r) {
  hyperworld::HypernetState h;
  h.targets.dynamics = decode_net_spec(r);
  h.targets.reward = decode_net_spec(r);
  h.spec = decode_net_spec(r);
  h.params = decode_params(r);
  h.opt = decode_adam(r);
  const std::uint64_t n = r.u64();
  if (n > r.remaining() / 25) throw CorruptCheckpoint("chunk table longer than its section");
  for (std::uint64_t i = 0; i < n; ++i) {
    hyperworld::ChunkEntry c{};
    const std::uint8_t kind = r.u8();
    if (kind > 1) throw CorruptCheckpoint("unknown target tag");
    c.target = static_cast<hyperworld::TargetKind>(kind);
    c.layer = r.i32();
    c.layer_id = r.i32();
    c.size = r.u64();
    c.offset = r.u64();
    h.chunk_table.push_back(c);
  }
  h.noise_dim = r.i32();
  h.noise_sigma = r.f64();
  h.norm.temp_center = r.f64();
  h.norm.temp_scale = r.f64();
  h.norm.delta_scale = r.f64();
  h.norm.reward_scale = r.f64();
  const std::uint8_t fs = r.u8();
  if (fs > 1) throw CorruptCheckpoint("unknown forecast summary tag");
  h.norm.forecast = static_cast<hyperworld::ForecastSummary>(fs);
  if (h.params.size() != h.spec.param_count()) {
    throw CorruptCheckpoint("hypernetwork parameter count does not match its spec");
  }
  return h;
}

void encode(io::Writer& w, const hyperworld::RegularizationSnapshot& s) {
  w.u64(s.entries().size());
  for (const auto& [task, p] : s.entries()) {
    w.i32(task);
    encode(w, p.dynamics);
    encode(w, p.reward);
  }
}

hyperworld::RegularizationSnapshot decode_snapshot(io::Reader& r) {
  std::map<int, hyperworld::TaskParams> entries;
  const std::uint64_t n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    const int task = r.i32();
    hyperworld::TaskParams p;
    p.dynamics = decode_params(r);
    p.reward = decode_params(r);
    if (!entries.emplace(task, std::move(p)).second) {
      throw CorruptCheckpoint("duplicate snapshot task " + std::to_string(task));
    }
  }
  return hyperworld::RegularizationSnapshot(std::move(entries));
}

void encode(io::Writer& w, const envsim::Transition& t) {
  encode_obs(w, t.obs);
  for (double a : t.actions) w.f64(a);
  for (double a : t.policy_action) w.f64(a);
  w.i32(t.policy_dim);
  encode_obs(w, t.next_obs);
  w.f64(t.reward);
  w.f64(t.setpoints.heating_c);
  w.f64(t.setpoints.cooling_c);
  w.i32(t.task_id);
  w.boolean(t.synthetic);
  w.boolean(t.terminal);
}

envsim::Transition decode_transition(io::Reader& r) {
  envsim::Transition t;
  t.obs = decode_obs(r);
  for (double& a : t.actions) a = r.f64();
  for (double& a : t.policy_action) a = r.f64();
  t.policy_dim = r.i32();
  t.next_obs = decode_obs(r);
  t.reward = r.f64();
  t.setpoints.heating_c = r.f64();
  t.setpoints.cooling_c = r.f64();
  t.task_id = r.i32();
  t.synthetic = r.boolean();
  t.terminal = r.boolean();
  return t;
}

void encode(io::Writer& w, const dyna::TransitionBuffer& b) {
  w.u64(b.capacity());
  w.u8(static_cast<std::uint8_t>(b.kind()));
  w.u64(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) encode(w, b.at(i));
}

dyna::TransitionBuffer decode_buffer(io::Reader& r) {
  const std::uint64_t capacity = r.u64();
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw CorruptCheckpoint("unknown buffer kind");
  const std::uint64_t n = r.u64();
  if (n > capacity) throw CorruptCheckpoint("buffer holds more entries than its capacity");
  if (capacity == 0) throw CorruptCheckpoint("zero-capacity buffer");
  dyna::TransitionBuffer b(capacity, static_cast<dyna::BufferKind>(kind));
  for (std::uint64_t i = 0; i < n; ++i) {
    try {
      b.push(decode_transition(r));
    } catch (const ContractViolation& e) {
      throw CorruptCheckpoint(std::string("invalid buffer entry: ") + e.what());
    }
  }
  return b;
}

void encode(io::Writer& w, const Rng& rng) { w.str(rng.serialize()); }

Rng decode_rng(io::Reader& r) {
  try {
    return Rng::deserialize(r.str());
  } catch (const std::exception& e) {
    throw CorruptCheckpoint(std::string("invalid generator state: ") + e.what());
  }
}

void save_run(const std::string& path, const std::string& config_text,
              const dyna::RunState& s) {
  Container c;
  {
    io::Writer w;
    w.str(config_text);
    w.str(CMBRL_VERSION);
    c.put("manifest", finish(w));
  }
  {
    io::Writer w;
    w.u8(static_cast<std::uint8_t>(s.variant));
    w.u64(s.master_seed);
    w.i64(s.total_steps);
    w.i32(s.task_index);
    w.boolean(s.task_active);
    w.i32(s.episode);
    w.boolean(s.episode_active);
    w.i64(s.task_step);
    w.u64(s.completed_tasks.size());
    for (int t : s.completed_tasks) w.i32(t);
    w.f64(s.episode_return);
    encode_losses(w, s.loss_sum);
    w.i64(s.loss_count);
    w.i64(s.episode_synthetic);
    w.boolean(s.finished);
    w.boolean(s.failed);
    c.put("run", finish(w));
  }
  {
    io::Writer w;
    encode_env(w, s.env);
    encode_obs(w, s.obs);
    c.put("env", finish(w));
  }
  {
    io::Writer w;
    encode(w, s.agent);
    c.put("agent", finish(w));
  }
  {
    io::Writer w;
    w.boolean(s.has_hypernet);
    if (s.has_hypernet) encode(w, s.hypernet);
    encode(w, s.snapshot);
    c.put("hypernet", finish(w));
  }
  {
    io::Writer w;
    encode(w, s.buffers.m_alpha);
    encode(w, s.buffers.m_beta);
    encode(w, s.buffers.m_gamma);
    c.put("buffers", finish(w));
  }
  {
    io::Writer w;
    encode(w, s.action_rng);
    encode(w, s.model_rng);
    encode(w, s.sac_rng);
    c.put("rng", finish(w));
  }
  {
    io::Writer w;
    w.u64(s.metrics.size());
    for (const auto& m : s.metrics) encode_row(w, m);
    w.u64(s.reports.size());
    for (const auto& rep : s.reports) encode_report(w, rep);
    c.put("metrics", finish(w));
  }
  c.save(path);
}

RunCheckpoint load_run(const std::string& path) {
  const Container c = Container::load(path);
  RunCheckpoint out;
  dyna::RunState& s = out.state;
  {
    io::Reader r(c.get("manifest"));
    out.config_text = r.str();
    out.code_version = r.str();
    expect_done(r, "manifest");
  }
  {
    io::Reader r(c.get("run"));
    s.variant = decode_variant(r);
    s.master_seed = r.u64();
    s.total_steps = r.i64();
    s.task_index = r.i32();
    s.task_active = r.boolean();
    s.episode = r.i32();
    s.episode_active = r.boolean();
    s.task_step = r.i64();
    const std::uint64_t n = r.u64();
    if (n > r.remaining() / 4) throw CorruptCheckpoint("task list longer than its section");
    for (std::uint64_t i = 0; i < n; ++i) s.completed_tasks.push_back(r.i32());
    s.episode_return = r.f64();
    s.loss_sum = decode_losses(r);
    s.loss_count = r.i64();
    s.episode_synthetic = r.i64();
    s.finished = r.boolean();
    s.failed = r.boolean();
    expect_done(r, "run");
  }
  {
    io::Reader r(c.get("env"));
    s.env = decode_env(r);
    s.obs = decode_obs(r);
    expect_done(r, "env");
  }
  {
    io::Reader r(c.get("agent"));
    s.agent = decode_agent(r);
    expect_done(r, "agent");
  }
  {
    io::Reader r(c.get("hypernet"));
    s.has_hypernet = r.boolean();
    if (s.has_hypernet) s.hypernet = decode_hypernet(r);
    s.snapshot = decode_snapshot(r);
    expect_done(r, "hypernet");
  }
  {
    io::Reader r(c.get("buffers"));
    s.buffers.m_alpha = decode_buffer(r);
    s.buffers.m_beta = decode_buffer(r);
    s.buffers.m_gamma = decode_buffer(r);
    expect_done(r, "buffers");
  }
  {
    io::Reader r(c.get("rng"));
    s.action_rng = decode_rng(r);
    s.model_rng = decode_rng(r);
    s.sac_rng = decode_rng(r);
    expect_done(r, "rng");
  }
  {
    io::Reader r(c.get("metrics"));
    const std::uint64_t n = r.u64();
    if (n > r.remaining() / 66) throw CorruptCheckpoint("metrics list longer than its section");
    for (std::uint64_t i = 0; i < n; ++i) s.metrics.push_back(decode_row(r));
    const std::uint64_t m = r.u64();
    for (std::uint64_t i = 0; i < m; ++i) s.reports.push_back(decode_report(r));
    expect_done(r, "metrics");
  }
  return out;
}

sac::AgentState load_agent(const std::string& path) {
  const Container c = Container::load(path);
  io::Reader r(c.get("agent"));
  auto agent = decode_agent(r);
  expect_done(r, "agent");
  return agent;
}

}  // namespace cmbrl::checkpoint
