#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "cmbrl/checkpoint.hpp"
#include "cmbrl/errors.hpp"

namespace cmbrl::checkpoint {
namespace {

namespace fs = std::filesystem;

dyna::DynaConfig tiny_config() {
  dyna::DynaConfig c;
  c.env.steps_per_episode = 96;
  c.sac.actor_hidden = {16};
  c.sac.critic_hidden = {16};
  c.world.target_hidden = {8};
  c.world.hypernet_hidden = {16};
  c.batch_size = 32;
  c.warmup_transitions = 32;
  c.ensemble_size = 4;
  c.episodes_per_task = {2, 2, 1};
  return c;
}

class CheckpointFile : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cmbrl_ckpt_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::vector<std::uint8_t> read(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }
  static void write(const std::string& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }

  fs::path dir_;
};

void expect_buffers_equal(const dyna::TransitionBuffer& a, const dyna::TransitionBuffer& b) {
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.capacity(), b.capacity());
  EXPECT_EQ(a.kind(), b.kind());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a.at(i), b.at(i)) << i;
}

TEST(Container, RoundTripAndReplace) {
  Container c;
  c.put("alpha", {1, 2, 3});
  c.put("beta", {});
  c.put("alpha", {9});
  const auto d = Container::decode(c.encode());
  ASSERT_EQ(d.sections().size(), 2u);
  EXPECT_EQ(d.get("alpha"), std::vector<std::uint8_t>{9});
  EXPECT_TRUE(d.get("beta").empty());
  EXPECT_EQ(d.find("gamma"), nullptr);
  EXPECT_THROW(d.get("gamma"), CorruptCheckpoint);
}

TEST(Container, DetectsCorruption) {
  Container c;
  c.put("payload", std::vector<std::uint8_t>(100, 7));
  const auto bytes = c.encode();
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{20}, bytes.size() - 1}) {
    const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + static_cast<long>(cut));
    EXPECT_THROW(Container::decode(truncated), CorruptCheckpoint) << cut;
  }
  auto flipped = bytes;
  flipped[40] ^= 0x10;
  EXPECT_THROW(Container::decode(flipped), CorruptCheckpoint);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(Container::decode(magic), CorruptCheckpoint);
}

TEST(Container, RejectsOtherVersions) {
  Container c;
  c.put("x", {1});
  EXPECT_THROW(Container::decode(c.encode(kFormatVersion + 1)), CheckpointVersionError);
  EXPECT_THROW(Container::decode(c.encode(0)), CheckpointVersionError);
}

TEST(Encoders, AgentAndHypernetBitIdentical) {
  auto agent = sac::sac_init(7, 3, 11);
  agent.actor.values()[0] = -0.0;
  agent.critic1.values()[1] = 1e-310;
  agent.update_count = 77;
  const auto hyper = hyperworld::hypernet_init(hyperworld::HyperworldConfig{}, 5);
  const auto snap = hyperworld::capture_snapshot(hyper, std::vector<int>{1, 3});
  io::Writer w;
  encode(w, agent);
  encode(w, hyper);
  encode(w, snap);
  Rng rng(42);
  rng.normal();
  encode(w, rng);
  const auto bytes = w.take();
  io::Reader r(bytes);
  const auto agent2 = decode_agent(r);
  EXPECT_EQ(agent2, agent);
  EXPECT_TRUE(std::signbit(agent2.actor.values()[0]));
  EXPECT_EQ(decode_hypernet(r), hyper);
  EXPECT_EQ(decode_snapshot(r), snap);
  auto rng2 = decode_rng(r);
  EXPECT_EQ(rng2.normal(), rng.normal());
  EXPECT_TRUE(r.done());
}

TEST(Encoders, BufferKeepsOrderAndCapacity) {
  dyna::TransitionBuffer buf(5, dyna::BufferKind::kSynthetic);
  for (int i = 0; i < 8; ++i) {
    envsim::Transition t;
    t.reward = -i;
    t.synthetic = true;
    t.task_id = 2;
    buf.push(t);
  }
  io::Writer w;
  encode(w, buf);
  const auto bytes = w.take();
  io::Reader r(bytes);
  expect_buffers_equal(decode_buffer(r), buf);
}

TEST_F(CheckpointFile, RunStateRoundTrip) {
  dyna::ContinualRun run(tiny_config(), Variant::kMbrl, 3);
  run.run(300);  // into task 2, mid-episode
  ASSERT_EQ(run.current_task_id(), 2);
  save_run(path("run.ckpt"), "[experiment]\nmaster_seed = 3\n", run.state());
  const auto loaded = load_run(path("run.ckpt"));
  EXPECT_EQ(loaded.config_text, "[experiment]\nmaster_seed = 3\n");
  EXPECT_FALSE(loaded.code_version.empty());
  const auto& a = run.state();
  const auto& b = loaded.state;
  EXPECT_EQ(b.agent, a.agent);
  EXPECT_EQ(b.hypernet, a.hypernet);
  EXPECT_EQ(b.env, a.env);
  EXPECT_EQ(b.obs, a.obs);
  EXPECT_EQ(b.metrics, a.metrics);
  EXPECT_EQ(b.total_steps, a.total_steps);
  EXPECT_EQ(b.task_step, a.task_step);
  EXPECT_EQ(b.completed_tasks, a.completed_tasks);
  expect_buffers_equal(b.buffers.m_alpha, a.buffers.m_alpha);
  expect_buffers_equal(b.buffers.m_beta, a.buffers.m_beta);
  expect_buffers_equal(b.buffers.m_gamma, a.buffers.m_gamma);
  // Task 2 checkpoints carry the frozen task 1 parameters.
  EXPECT_EQ(b.snapshot.task_ids(), std::vector<int>{1});
  EXPECT_EQ(b.snapshot, a.snapshot);
  EXPECT_EQ(load_agent(path("run.ckpt")), a.agent);
}

TEST_F(CheckpointFile, ContinueEqualsUninterrupted) {
  const auto config = tiny_config();
  dyna::ContinualRun whole(config, Variant::kMbrl, 4);
  whole.run();

  for (std::int64_t halt : {1, 95, 96, 200, 384}) {
    dyna::ContinualRun first(config, Variant::kMbrl, 4);
    first.run(halt);
    save_run(path("halt.ckpt"), "", first.state());
    dyna::ContinualRun second(config, load_run(path("halt.ckpt")).state);
    second.run();
    EXPECT_EQ(second.metrics(), whole.metrics()) << "halt " << halt;
    EXPECT_EQ(second.state().hypernet, whole.state().hypernet) << "halt " << halt;
  }
}

TEST_F(CheckpointFile, TruncatedFileIsCorrupt) {
  dyna::ContinualRun run(tiny_config(), Variant::kMfrl, 5);
  run.run(50);
  save_run(path("t.ckpt"), "", run.state());
  auto bytes = read(path("t.ckpt"));
  bytes.resize(bytes.size() / 2);
  write(path("t.ckpt"), bytes);
  EXPECT_THROW(load_run(path("t.ckpt")), CorruptCheckpoint);
  EXPECT_THROW(load_run(path("absent.ckpt")), std::runtime_error);
}

TEST_F(CheckpointFile, SaveLeavesNoTemporaryFiles) {
  Container c;
  c.put("x", {1, 2});
  c.save(path("a.ckpt"));
  c.save(path("a.ckpt"));
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir_)) ++files;
  EXPECT_EQ(files, 1u);
  EXPECT_EQ(Container::load(path("a.ckpt")).get("x"), (std::vector<std::uint8_t>{1, 2}));
}

}  // namespace
}  // namespace cmbrl::checkpoint
