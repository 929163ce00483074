#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "umsim/error.hpp"
#include "umsim/report_io.hpp"

using namespace umsim;
using namespace umsim::testing;

namespace {

void expect_close(double a, double b, double rel = 1e-9) {
  EXPECT_LE(std::abs(a - b), rel * std::max({1e-12, std::abs(a), std::abs(b)})) << a << " vs " << b;
}

RunOptions options(MachineConfig m, std::optional<AllocKind> alloc = std::nullopt) {
  RunOptions o;
  o.machine = m;
  o.policy.allocator = alloc;
  o.sampling_period = 1e-4;
  return o;
}

Seconds policy_time_from_counts(const SimulationReport& r) {
  const auto& m = r.machine;
  Seconds t = 0;
  for (const auto& e : r.migrations) t += cost_of_migration(e.bytes, e.direction, m);
  t += r.stats.cpu_faults * m.fault_cost_cpu + r.stats.gpu_first_touch_faults * m.fault_cost_gpu_first_touch +
       r.stats.managed_gpu_faults * m.gpu_fault_cost + r.stats.notifications * m.notification_cost;
  return t;
}

struct Case {
  const char* name;
  WorkloadSpec spec;
  RunOptions opts;
};

std::vector<Case> property_cases() {
  std::vector<Case> cs;
  MachineConfig small = small_machine(8 * MiB);
  auto o = options(small);
  o.policy.migration_threshold = 8;
  cs.push_back({"system_regular", hotspot_like(6 * MiB, 3), o});
  cs.push_back({"managed_oversub", hotspot_like(12 * MiB, 3), options(small, AllocKind::Managed)});
  auto q = qiskit_like(22, 2);
  cs.push_back({"qiskit_gpu_init", q, options(small)});
  auto n = needle_like(16 * MiB, 3);
  auto on = options(small, AllocKind::Managed);
  on.policy.prefetch = {{0, Tier::Gpu, PrefetchDirective::When::EachIteration}};
  n.reuse = 0.25;
  cs.push_back({"managed_prefetch", n, on});
  auto b = bfs_like(4 * MiB, 4);
  auto ob = options(small);
  ob.policy.prefetch_after_first_touch = true;
  b.init_side = Agent::Gpu;
  cs.push_back({"bfs_first_touch_prefetch", b, ob});
  auto ov = options(MachineConfig{}, AllocKind::Managed);
  ov.oversub_ratio = 1.5;
  cs.push_back({"default_machine_ratio", pathfinder_like(32 * MiB, 2), ov});
  return cs;
}

class Properties : public ::testing::TestWithParam<std::size_t> {};

}  // namespace

TEST_P(Properties, InvariantsHoldAfterEveryStep) {
  auto c = property_cases()[GetParam()];
  std::size_t checked = 0;
  c.opts.observer = [&](const StepView& v) {
    ++checked;
    const auto msg = v.memory.check_invariants();
    ASSERT_TRUE(msg.empty()) << c.name << " step " << v.index << ": " << msg;
  };
  const auto r = run(c.spec, c.opts);
  EXPECT_EQ(checked, r.events);
}

TEST_P(Properties, TimeIsConserved) {
  const auto c = property_cases()[GetParam()];
  const auto r = run(c.spec, c.opts);
  expect_close(r.timings.total(), r.breakdown.sum());
  expect_close(r.breakdown.policy, policy_time_from_counts(r));
  Seconds iters = 0;
  for (Seconds s : r.timings.per_iteration) iters += s;
  EXPECT_EQ(r.timings.t_compute, iters);
  EXPECT_EQ(r.timings.per_iteration.size(), c.spec.iterations);
}

TEST_P(Properties, TrafficIsAttributed) {
  const auto c = property_cases()[GetParam()];
  const auto r = run(c.spec, c.opts);
  IterationTraffic sum;
  for (const auto& it : r.per_iteration_traffic) {
    sum.gpu_local_read += it.gpu_local_read;
    sum.c2c_read += it.c2c_read;
    sum.writeback += it.writeback;
  }
  // Init writes land in gpu_local_write / c2c_writeback; compute reads dominate.
  EXPECT_LE(sum.gpu_local_read, r.traffic.gpu_local_read);
  EXPECT_LE(sum.c2c_read, r.traffic.c2c_remote_read);
  EXPECT_LE(sum.writeback, r.traffic.c2c_writeback);
  Bytes migrated = 0;
  for (const auto& m : r.migrations) migrated += m.bytes;
  EXPECT_EQ(migrated, r.traffic.migrated_h2d + r.traffic.migrated_d2h);
  EXPECT_GE(r.traffic.c2c_h2d + r.traffic.c2c_d2h, r.traffic.migrated_h2d + r.traffic.migrated_d2h);
}

TEST_P(Properties, TimelineConservesMemory) {
  const auto c = property_cases()[GetParam()];
  const auto r = run(c.spec, c.opts);
  ASSERT_FALSE(r.timeline.empty());
  EXPECT_EQ(r.timeline.front().time, 0.0);
  for (std::size_t i = 0; i < r.timeline.size(); ++i) {
    const auto& s = r.timeline[i];
    EXPECT_EQ(s.cpu_rss + s.gpu_used - r.machine.gpu_reserved_baseline, s.mapped) << "sample " << i;
    EXPECT_LE(s.gpu_used, r.machine.gpu_capacity);
    if (i > 0) EXPECT_GT(s.time, r.timeline[i - 1].time);
  }
  EXPECT_LE(r.timeline.back().time, r.timings.total());
}

TEST_P(Properties, DeterministicJson) {
  const auto c = property_cases()[GetParam()];
  EXPECT_EQ(to_json(run(c.spec, c.opts)), to_json(run(c.spec, c.opts)));
}

TEST_P(Properties, JsonRoundTrip) {
  const auto c = property_cases()[GetParam()];
  const auto r = run(c.spec, c.opts);
  const auto back = report_from_json(to_json(r));
  EXPECT_EQ(back, r);
  EXPECT_EQ(to_json(back), to_json(r));
}

INSTANTIATE_TEST_SUITE_P(Workloads, Properties, ::testing::Range<std::size_t>(0, 6));

TEST(Engine, ManagedNeverRemoteWhileGpuHasRoom) {
  auto o = options(small_machine(16 * MiB), AllocKind::Managed);
  o.observer = [&](const StepView& v) {
    if (v.event.agent != Agent::Gpu || v.kind != AllocKind::Managed) return;
    if (v.resolution.serviced_from == ServicedFrom::RemoteOverC2C) {
      ASSERT_LT(v.memory.gpu_free(), v.memory.config().system_page_size) << "step " << v.index;
    }
  };
  run(hotspot_like(8 * MiB, 2), o);
  run(hotspot_like(24 * MiB, 2), o);
}

TEST(Engine, SradSettlesAfterMigration) {
  auto o = options(MachineConfig{});
  o.policy.migration_threshold = 256;
  const auto r = run(srad_like(64 * MiB, 12), o);
  const auto& it = r.per_iteration_traffic;
  ASSERT_EQ(it.size(), 12u);
  // 64 KiB pages swept at 1 KiB: 64 reads per page per iteration.
  for (int i = 0; i < 4; ++i) EXPECT_EQ(it[i].c2c_read, 64 * MiB) << i;
  EXPECT_LT(it[4].c2c_read, 64 * MiB);
  for (int i = 5; i < 12; ++i) {
    EXPECT_EQ(it[i].c2c_read, 0u) << i;
    EXPECT_EQ(it[i].gpu_local_read, 64 * MiB) << i;
  }
  EXPECT_GT(r.timings.per_iteration[1], 10 * r.timings.per_iteration[6]);
  for (const auto& m : r.migrations) EXPECT_EQ(m.cause, MigrationEvent::Cause::AccessCounterNotification);
}

TEST(Engine, ManagedSpikeIsFirstIteration) {
  const auto r = run(srad_like(64 * MiB, 12), options(MachineConfig{}, AllocKind::Managed));
  const auto& t = r.timings.per_iteration;
  double rest = 0;
  for (std::size_t i = 1; i < t.size(); ++i) rest = std::max(rest, t[i]);
  EXPECT_GE(t[0], 2 * rest);
  for (const auto& m : r.migrations) EXPECT_EQ(m.cause, MigrationEvent::Cause::OnDemandFault);
  EXPECT_EQ(r.stats.evictions, 0u);
}

TEST(Engine, SystemTimelineShowsCpuResidency) {
  auto o = options(small_machine(64 * MiB));
  o.policy.counters_enabled = false;
  const auto r = run(hotspot_like(16 * MiB, 2), o);
  const auto& last = r.timeline.back();
  EXPECT_GE(r.timeline.size(), 3u);
  EXPECT_EQ(last.gpu_used, 0u);
  Bytes peak_cpu = 0;
  for (const auto& s : r.timeline) peak_cpu = std::max(peak_cpu, s.cpu_rss);
  EXPECT_GE(peak_cpu, 15 * MiB);
  EXPECT_TRUE(r.migrations.empty());
}

TEST(Engine, ManagedTimelineMovesToGpu) {
  auto o = options(small_machine(64 * MiB), AllocKind::Managed);
  const auto r = run(hotspot_like(16 * MiB, 2), o);
  Bytes peak_gpu = 0;
  for (const auto& s : r.timeline) peak_gpu = std::max(peak_gpu, s.gpu_used);
  EXPECT_EQ(peak_gpu, 16 * MiB);
}

TEST(Engine, DeviceOnlyOverCapacityIsOutOfMemory) {
  WorkloadSpec s;
  s.buffers = {{AllocKind::DeviceOnly, 16 * MiB}};
  EXPECT_THROW(run(s, options(small_machine(8 * MiB))), AllocationFailure);
}

TEST(Engine, TraceOutsideAllocationsIsUsageError) {
  std::vector<AccessEvent> evs{gpu_read(kBase + 4 * MiB)};
  EXPECT_THROW(run_trace(evs, {{AllocKind::System, MiB}}, options(small_machine())), UsageError);
  std::vector<AccessEvent> crossing{gpu_read(kBase + 64 * KiB - 8, 16)};
  EXPECT_THROW(run_trace(crossing, {{AllocKind::System, MiB}}, options(small_machine())), UsageError);
}

TEST(Engine, TraceMatchesGeneratedRun) {
  const auto spec = needle_like(2 * MiB, 3);
  const auto o = options(small_machine());
  const auto evs = gen_workload(spec, predicted_layout(spec, o.machine), o.seed);
  auto a = run(spec, o);
  auto b = run_trace(evs, spec.buffers, o, spec.name);
  EXPECT_EQ(a.timings, b.timings);
  EXPECT_EQ(a.traffic, b.traffic);
  EXPECT_EQ(a.migrations, b.migrations);
}

TEST(Compare, IdenticalAndHalved) {
  const auto r = run(hotspot_like(2 * MiB, 2), options(small_machine()));
  auto rows = compare({r, r});
  for (const auto& row : rows) EXPECT_EQ(row.speedup, 1.0);
  auto half = r;
  half.timings.t_alloc /= 2;
  half.timings.t_init /= 2;
  half.timings.t_compute /= 2;
  half.timings.t_dealloc /= 2;
  for (auto& s : half.timings.per_iteration) s /= 2;
  rows = compare({r, half});
  for (const auto& row : rows) {
    if (row.report == 1 && row.time > 0) EXPECT_DOUBLE_EQ(row.speedup, 2.0) << row.metric;
  }
  EXPECT_EQ(rows.front().metric, "total");
}

TEST(Compare, RejectsMismatch) {
  const auto a = run(hotspot_like(2 * MiB, 2), options(small_machine()));
  const auto b = run(hotspot_like(4 * MiB, 2), options(small_machine()));
  EXPECT_THROW(compare({a}), UsageError);
  EXPECT_THROW(compare({a, b}), UsageError);
  const auto m = run(hotspot_like(2 * MiB, 2), options(small_machine(), AllocKind::Managed));
  EXPECT_NO_THROW(compare({a, m}));
}

TEST(Report, CsvHeaders) {
  const auto r = run(hotspot_like(2 * MiB, 2), options(small_machine()));
  auto first_line = [](const std::string& s) { return s.substr(0, s.find('\n')); };
  EXPECT_EQ(first_line(timeline_csv(r)), "time_s,cpu_rss_bytes,gpu_used_bytes");
  EXPECT_EQ(first_line(iterations_csv(r)), "iter,time_s,gpu_local_read_bytes,c2c_read_bytes,writeback_bytes");
  EXPECT_EQ(first_line(traffic_csv(r)), kTrafficHeader);
  const auto traffic = traffic_csv(r);
  EXPECT_EQ(std::count(traffic.begin(), traffic.end(), '\n'), 12);
  const auto iters = iterations_csv(r);
  EXPECT_EQ(std::count(iters.begin(), iters.end(), '\n'), 3);
}

TEST(Report, NumberFormatting) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(16), "16");
  EXPECT_EQ(std::stod(format_number(1.0 / 3)), 1.0 / 3);
}
