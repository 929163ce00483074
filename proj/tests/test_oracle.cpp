#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracle/random_case.hpp"

using namespace umsim;
using namespace umsim::testing;

namespace {

oracle::Input base_input(std::vector<BufferSpec> bufs) {
  oracle::Input in;
  in.machine = small_machine(8 * MiB);
  in.buffers = std::move(bufs);
  return in;
}

}  // namespace

TEST(Oracle, CpuWriteThenRemoteGpuRead) {
  auto in = base_input({{AllocKind::System, 64 * KiB}});
  in.events = {cpu_write(kBase, 64), gpu_read(kBase, 100)};
  const auto out = oracle::replay(in);
  const auto& m = in.machine;
  EXPECT_EQ(out.stats.cpu_faults, 1u);
  EXPECT_EQ(out.traffic.c2c_remote_read, 128u);
  EXPECT_EQ(out.traffic.cpu_local_write, 64u);
  EXPECT_EQ(out.traffic.requested_bytes, 164u);
  const double want = m.pte_create_cost + m.fault_cost_cpu + 64.0 / m.cpu_bw + m.gpu_context_init_cost +
                      m.c2c_latency + 128.0 / m.c2c_bw_h2d + m.pte_teardown_cost;
  EXPECT_DOUBLE_EQ(out.total_time, want);
  EXPECT_TRUE(out.migrations.empty());
}

TEST(Oracle, ThresholdCrossingMigratesRegion) {
  auto in = base_input({{AllocKind::System, 4 * 64 * KiB}});
  in.policy.migration_threshold = 2;
  in.events = {cpu_write(kBase), cpu_write(kBase + 64 * KiB), gpu_read(kBase), gpu_read(kBase), gpu_read(kBase)};
  const auto out = oracle::replay(in);
  ASSERT_EQ(out.migrations.size(), 1u);
  EXPECT_EQ(out.migrations[0].cause, MigrationEvent::Cause::AccessCounterNotification);
  EXPECT_EQ(out.migrations[0].bytes, 2 * 64 * KiB);
  EXPECT_EQ(out.migrations[0].pages, 4u);
  EXPECT_EQ(out.stats.notifications, 1u);
  EXPECT_EQ(out.traffic.c2c_remote_read, 3 * 128u);
}

TEST(Oracle, PrefetchToCpuThenManagedGpuAccess) {
  auto in = base_input({{AllocKind::Managed, 4 * 64 * KiB}});
  in.policy.prefetch = {{0, Tier::Cpu, PrefetchDirective::When::BeforeCompute}};
  for (int p = 0; p < 4; ++p) in.events.push_back({Agent::Gpu, MemOp::Write, kBase + p * 64 * KiB, 8, PhaseTag::init()});
  in.events.push_back(gpu_read(kBase + 64 * KiB));
  const auto out = oracle::replay(in);
  ASSERT_EQ(out.migrations.size(), 2u);
  EXPECT_EQ(out.migrations[0].cause, MigrationEvent::Cause::ExplicitPrefetch);
  EXPECT_EQ(out.migrations[0].direction, Direction::D2H);
  EXPECT_EQ(out.migrations[0].bytes, 256 * KiB);
  EXPECT_EQ(out.migrations[1].cause, MigrationEvent::Cause::OnDemandFault);
  EXPECT_EQ(out.migrations[1].direction, Direction::H2D);
  EXPECT_EQ(out.migrations[1].bytes, 256 * KiB);
  EXPECT_EQ(out.stats.managed_gpu_faults, 2u);
  EXPECT_EQ(oracle::differential(in), "");
}

TEST(Oracle, ManagedEvictionUnderPressure) {
  auto in = base_input({{AllocKind::Managed, 6 * MiB}});
  in.machine.gpu_capacity = 4 * MiB;
  for (Bytes off = 0; off < 6 * MiB; off += 2 * MiB) in.events.push_back(gpu_read(kBase + off));
  in.events.push_back(gpu_read(kBase));
  in.events.push_back(gpu_read(kBase + 64 * KiB));
  const auto out = oracle::replay(in);
  EXPECT_EQ(out.stats.evictions, 1u);
  // Chunk 0 was evicted and the GPU is full: both reads go over the link.
  EXPECT_EQ(out.stats.pressure_remote_accesses, 2u);
  EXPECT_EQ(oracle::differential(in), "");
}

TEST(Oracle, OversizedPrefetchEvictsEarlierChunks) {
  auto in = base_input({{AllocKind::Managed, 4 * MiB}});
  in.machine.gpu_capacity = 2 * MiB + 64 * KiB;
  in.policy.prefetch = {{0, Tier::Gpu, PrefetchDirective::When::BeforeCompute}};
  in.events = {gpu_read(kBase)};
  const auto out = oracle::replay(in);
  EXPECT_FALSE(out.oom);
  EXPECT_EQ(out.stats.evictions, 1u);
  EXPECT_EQ(oracle::differential(in), "");
}

TEST(Oracle, ChunkLargerThanGpuIsOom) {
  auto in = base_input({{AllocKind::Managed, 4 * MiB}});
  in.machine.gpu_capacity = 1 * MiB;
  in.events = {cpu_write(kBase), gpu_read(kBase)};
  const auto out = oracle::replay(in);
  EXPECT_TRUE(out.oom);
  EXPECT_EQ(out.oom_event, 1u);
  EXPECT_EQ(oracle::differential(in), "");
}

class Differential : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(Differential, EngineMatchesOracle) {
  const auto in = oracle::random_case(GetParam());
  EXPECT_EQ(oracle::differential(in), "") << "seed " << GetParam();
}

INSTANTIATE_TEST_SUITE_P(Seeds, Differential, ::testing::Range<std::uint64_t>(1000, 1040));
