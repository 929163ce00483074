// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "oracle/random_case.hpp"
#include "umsim/report_io.hpp"
#include "umsim/scenario.hpp"

using namespace umsim;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

Scenario preset(const std::string& name) { return load_scenario(std::string(UMSIM_PRESETS_DIR) + "/" + name + ".scenario"); }

MachineConfig small_machine() {
  MachineConfig m;
  m.gpu_reserved_baseline = 0;
  m.gpu_capacity = 64 * MiB;
  m.cpu_capacity = 1 * GiB;
  return m;
}

constexpr Addr kBase = MemorySystem::kVirtualBase;

void c1(Outcome& o) {
  RunOptions opt;
  opt.machine = small_machine();
  opt.policy.migration_threshold = 256;
  auto notifications = [&](int gpu_reads) {
    std::vector<AccessEvent> evs{{Agent::Cpu, MemOp::Write, kBase, 8, PhaseTag::init()}};
    for (int i = 0; i < gpu_reads; ++i) evs.push_back({Agent::Gpu, MemOp::Read, kBase + 128 * (i % 8), 4, PhaseTag::compute(0)});
    return run_trace(evs, {{AllocKind::System, 64 * KiB}}, opt).stats.notifications;
  };
  const auto at = notifications(256), over = notifications(257);
  o.detail << "256 accesses -> " << at << " notifications, 257 -> " << over << ' ';
  o.require(at == 0 && over == 1, "0 then exactly 1");
}

void c2(Outcome& o) {
  const MachineConfig m;
  const AccessEvent g{Agent::Gpu, MemOp::Read, kBase, 4, PhaseTag::compute(0)};
  const AccessEvent c{Agent::Cpu, MemOp::Read, kBase, 4, PhaseTag::compute(0)};
  const double ga = static_cast<double>(resolve_access(g, Residency::Cpu, m).bytes_on_wire) / 4;
  const double ca = static_cast<double>(resolve_access(c, Residency::Gpu, m).bytes_on_wire) / 4;
  o.detail << "GPU " << ga << "x, CPU " << ca << "x ";
  o.require(ga == 32 && ca == 16, "32x and 16x");
}

void c3(Outcome& o) {
  const Scenario base = preset("pagesize-sweep");
  const auto small = execute(with_axis_value(base, SweepAxis::PageSize, "4k"));
  const auto large = execute(with_axis_value(base, SweepAxis::PageSize, "64k"));
  const double ratio = small.timings.t_dealloc / large.timings.t_dealloc;
  o.detail << "dealloc 4k/64k = " << format_number(ratio) << " (reference band [4.6, 38], mean 15.9) ";
  o.require(ratio == 16.0, "ratio exactly 16");
  o.require(ratio >= 4.6 && ratio <= 38, "ratio in band");
}

void c4(Outcome& o) {
  const auto r = execute(preset("srad-iterations"));
  const auto& t = r.timings.per_iteration;
  const auto& it = r.per_iteration_traffic;
  o.require(t.size() == 12, "12 iterations");
  if (t.size() != 12) return;
  bool max_first = true, nonincreasing = true;
  for (std::size_t i = 1; i < t.size(); ++i) {
    max_first = max_first && t[0] >= t[i];
    nonincreasing = nonincreasing && it[i].c2c_read <= it[i - 1].c2c_read;
  }
  const Bytes ws = 64 * MiB, page = r.machine.system_page_size;
  const auto& last = it.back();
  const bool stable = last.gpu_local_read + page >= ws && last.gpu_local_read <= ws + page;
  o.detail << "iter1 " << format_number(t[0]) << " s, c2c reads iter1 " << it[0].c2c_read << " B -> iter12 "
           << last.c2c_read << " B, local reads iter12 " << last.gpu_local_read << " B ";
  o.require(max_first, "iter-1 time maximal");
  o.require(nonincreasing, "c2c reads nonincreasing");
  o.require(last.c2c_read == 0, "no c2c reads at iter 12");
  o.require(stable, "local reads at working set");
}

void c5(Outcome& o) {
  const auto r = execute(with_axis_value(preset("srad-iterations"), SweepAxis::Allocator, "managed"));
  const auto& t = r.timings.per_iteration;
  const Seconds end_of_first = r.timings.t_alloc + r.timings.t_init + t[0];
  std::size_t late = 0;
  for (const auto& m : r.migrations) late += m.time > end_of_first;
  o.detail << "iter1 " << format_number(t[0]) << " s vs iter2 " << format_number(t[1]) << " s ("
           << format_number(t[0] / t[1]) << "x), migrations after iter1: " << late << ' ';
  o.require(t[0] >= 2 * t[1], "spike >= 2x");
  o.require(late == 0, "no later migrations");
}

void c6(Outcome& o) {
  const Scenario base = preset("oversub-sweep");
  double prev = 0;
  bool monotone = true;
  for (const char* ratio : {"1.0", "1.1", "1.3", "1.5"}) {
    const Scenario s = with_axis_value(base, SweepAxis::OversubRatio, ratio);
    const auto sys = execute(with_axis_value(s, SweepAxis::Allocator, "system"));
    const auto man = execute(with_axis_value(s, SweepAxis::Allocator, "managed"));
    const double speedup = man.timings.total() / sys.timings.total();
    o.detail << ratio << ":" << format_number(speedup) << ' ';
    monotone = monotone && speedup >= prev;
    prev = speedup;
  }
  o.require(monotone, "speedup nondecreasing");
}

void c7(Outcome& o) {
  Scenario s;
  s.policy.allocator = AllocKind::System;
  s.workload = qiskit_like(21, 1);
  o.detail << "statevector " << s.workload.buffers[0].length << " B: ";
  const auto small = execute(with_axis_value(s, SweepAxis::PageSize, "4k"));
  const auto large = execute(with_axis_value(s, SweepAxis::PageSize, "64k"));
  const double faults = static_cast<double>(small.stats.gpu_first_touch_faults) /
                        static_cast<double>(large.stats.gpu_first_touch_faults);
  o.detail << "init 4k " << format_number(small.timings.t_init) << " s, 64k " << format_number(large.timings.t_init)
           << " s (" << format_number(small.timings.t_init / large.timings.t_init) << "x; fault count ratio "
           << format_number(faults) << "x, reference end-to-end 5x) ";
  o.require(s.workload.buffers[0].length == (Bytes{1} << 24), "2^24 B statevector");
  o.require(large.timings.t_init <= small.timings.t_init / 2, "64k init at most half");
}

Bytes compute_c2c_reads(const SimulationReport& r) {
  Bytes b = 0;
  for (const auto& it : r.per_iteration_traffic) b += it.c2c_read;
  return b;
}

void c8(Outcome& o) {
  Scenario s;
  s.policy.allocator = AllocKind::Managed;
  s.workload = qiskit_like(24, 6);
  s.workload.reuse = 0.5;
  s.oversub_ratio = 1.3;
  const auto plain = execute(s);
  s.policy.prefetch = {{0, Tier::Gpu, PrefetchDirective::When::EachIteration}};
  const auto fetched = execute(s);
  const Bytes a = compute_c2c_reads(plain), b = compute_c2c_reads(fetched);
  o.detail << "oversubscription " << format_number(plain.oversubscription->r_oversub) << ", compute c2c reads "
           << a << " B without prefetch, " << b << " B with ";
  o.require(a > 0, "baseline reads remotely");
  o.require(b * 10 <= a, ">= 10x fewer");
}

void c9(Outcome& o) {
  std::size_t failures = 0, events = 0, migrations = 0, ooms = 0, managed = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto in = oracle::random_case(seed);
    events += in.events.size();
    const auto want = oracle::replay(in);
    migrations += want.migrations.size();
    ooms += want.oom;
    for (const auto& b : in.buffers) managed += b.kind == AllocKind::Managed;
    const auto diff = oracle::differential(in);
    if (!diff.empty()) {
      if (failures++ < 3) o.detail << "seed " << seed << ": " << diff;
    }
  }
  o.detail << "200 traces, " << events << " events, " << migrations << " oracle migrations, " << managed
           << " managed buffers, " << ooms << " OOM runs, " << failures << " mismatches ";
  o.require(failures == 0, "all traces agree");
}

void c10(Outcome& o) {
  std::size_t runs = 0, mismatches = 0;
  for (const auto& p : list_presets(UMSIM_PRESETS_DIR)) {
    const Scenario s = load_scenario(p.path);
    std::vector<Scenario> points{s};
    if (s.sweep) {
      points.clear();
      for (const auto& v : s.sweep->values) points.push_back(with_axis_value(s, s.sweep->axis, v));
    }
    for (const auto& pt : points) {
      ++runs;
      if (to_json(execute(pt)) != to_json(execute(pt))) {
        ++mismatches;
        o.detail << p.name << " differs; ";
      }
    }
  }
  o.detail << runs << " preset runs repeated, " << mismatches << " mismatches ";
  o.require(runs >= 5 && mismatches == 0, "byte-identical reports");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
      {"threshold boundary", c1},          {"cacheline amplification", c2}, {"dealloc page-size scaling", c3},
      {"srad three-phase dynamics", c4},   {"managed first-iteration spike", c5},
      {"oversubscription trend", c6},      {"gpu-init page-size effect", c7},
      {"prefetch under oversubscription", c8}, {"oracle equivalence", c9}, {"determinism", c10}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("%s %2zu %-32s %6.2fs  %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, secs,
                o.detail.str().c_str());
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
