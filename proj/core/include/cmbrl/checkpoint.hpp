#pragma once

// Checkpoint container and the encoders for everything a run carries.
//
// File layout (all integers little-endian):
//   magic "CMBRLCKP" (8 bytes)
//   format version u32
//   section count u32
//   per section: name (u16 length + bytes), payload (u64 length + bytes)
//   CRC-32 (zlib) of every preceding byte, u32
// Parameter vectors are a u64 count followed by IEEE-754 doubles.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cmbrl/binary_io.hpp"
#include "cmbrl/dyna.hpp"
#include "cmbrl/hyperworld.hpp"
#include "cmbrl/sac.hpp"

namespace cmbrl::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr char kMagic[8] = {'C', 'M', 'B', 'R', 'L', 'C', 'K', 'P'};

struct Section {
  std::string name;
  std::vector<std::uint8_t> payload;
};

class Container {
 public:
  // Replaces an existing section of the same name.
  void put(std::string name, std::vector<std::uint8_t> payload);
  const std::vector<std::uint8_t>* find(std::string_view name) const;
  // Throws CorruptCheckpoint when the section is missing.
  const std::vector<std::uint8_t>& get(std::string_view name) const;
  const std::vector<Section>& sections() const { return sections_; }

  std::vector<std::uint8_t> encode(std::uint32_t version = kFormatVersion) const;
  // Throws CorruptCheckpoint on bad magic, checksum, or structure, and
  // CheckpointVersionError for a well-formed file of another format version.
  static Container decode(const std::vector<std::uint8_t>& bytes);

  // Writes to a temporary file and renames it over `path`.
  void save(const std::string& path) const;
  static Container load(const std::string& path);

 private:
  std::vector<Section> sections_;
};

void encode(io::Writer& w, const diffnet::NetSpec& spec);
void encode(io::Writer& w, const diffnet::ParamVector& p);
void encode(io::Writer& w, const diffnet::AdamState& s);
void encode(io::Writer& w, const sac::AgentState& a);
void encode(io::Writer& w, const hyperworld::HypernetState& h);
void encode(io::Writer& w, const hyperworld::RegularizationSnapshot& s);
void encode(io::Writer& w, const envsim::Transition& t);
void encode(io::Writer& w, const dyna::TransitionBuffer& b);
void encode(io::Writer& w, const Rng& rng);

diffnet::NetSpec decode_net_spec(io::Reader& r);
diffnet::ParamVector decode_params(io::Reader& r);
diffnet::AdamState decode_adam(io::Reader& r);
sac::AgentState decode_agent(io::Reader& r);
hyperworld::HypernetState decode_hypernet(io::Reader& r);
hyperworld::RegularizationSnapshot decode_snapshot(io::Reader& r);
envsim::Transition decode_transition(io::Reader& r);
dyna::TransitionBuffer decode_buffer(io::Reader& r);
Rng decode_rng(io::Reader& r);

// Whole-run checkpoint. `config_text` is the experiment configuration that
// produced the run, kept so the run can be resumed or inspected standalone.
struct RunCheckpoint {
  std::string config_text;
  std::string code_version;
  dyna::RunState state;
};

void save_run(const std::string& path, const std::string& config_text,
              const dyna::RunState& state);
RunCheckpoint load_run(const std::string& path);

// Agent-only view of a run checkpoint (the "agent" section).
sac::AgentState load_agent(const std::string& path);

}  // namespace cmbrl::checkpoint
