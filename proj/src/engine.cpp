#include "umsim/engine.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "umsim/error.hpp"

namespace umsim {

double SimulationReport::l2_throughput() const {
  if (timings.t_compute <= 0) return 0;
  const Bytes served = traffic.gpu_local_read + traffic.gpu_local_write + traffic.c2c_total();
  return static_cast<double>(served) / timings.t_compute;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string describe(const AccessEvent& ev) {
  std::ostringstream os;
  os << to_string(ev.agent) << ' ' << to_string(ev.op) << " 0x" << std::hex << ev.addr << std::dec << " size "
     << ev.size << ' ' << to_string(ev.phase);
  return os.str();
}

using WindowFn = std::function<std::vector<ByteRange>(std::size_t, std::uint32_t)>;
using SourceFn = std::function<std::optional<AccessEvent>()>;

class Driver {
 public:
  Driver(const RunOptions& opts, const std::vector<BufferSpec>& buffers)
      : opts_(opts), mem_(opts.machine), policy_(mem_, opts.policy, traffic_, migrations_) {
    if (!(opts.sampling_period > 0)) throw ConfigError("sampling period must be > 0");
    if (buffers.empty()) throw ConfigError("at least one buffer is required");
    for (const auto& d : opts.policy.prefetch) {
      if (d.buffer >= buffers.size())
        throw ConfigError("prefetch directive names buffer " + std::to_string(d.buffer) + " but only " +
                          std::to_string(buffers.size()) + " exist");
    }
    buffers_ = buffers;
    for (auto& b : buffers_) {
      if (opts.policy.allocator && (b.kind == AllocKind::System || b.kind == AllocKind::Managed))
        b.kind = *opts.policy.allocator;
    }
    for (const auto& b : buffers_) footprint_ += round_up(b.length, opts.machine.gpu_page_size);
    report_.machine = opts.machine;
    report_.policy = opts.policy;
    report_.seed = opts.seed;
    report_.sampling_period = opts.sampling_period;
    report_.footprint = footprint_;
    report_.allocator = std::string(to_string(buffers_.front().kind));
  }

  Bytes footprint() const { return footprint_; }

  void set_iterations(std::uint32_t n) {
    report_.timings.per_iteration.assign(n, 0.0);
    report_.per_iteration_traffic.assign(n, IterationTraffic{});
  }

  /// Reservation that emulates oversubscription; happens before the clock.
  void setup() {
    if (!opts_.oversub_ratio) return;
    auto s = setup_oversubscription(*opts_.oversub_ratio, footprint_, opts_.machine);
    if (s.reserved_bytes > 0) {
      auto r = mem_.allocate(AllocKind::DeviceOnly, s.reserved_bytes, MemorySystem::kReservationBase);
      report_.setup_s = r.elapsed + opts_.machine.gpu_context_init_cost;
      context_ready_ = true;
    }
    report_.oversubscription = s;
  }

  std::vector<BufferLayout> allocate_buffers() {
    sample();
    std::vector<BufferLayout> layout;
    for (const auto& b : buffers_) {
      auto r = mem_.allocate(b.kind, b.length);
      ids_.push_back(r.alloc.id);
      layout.push_back({r.alloc.base, r.alloc.length, r.alloc.page_size_in_use});
      charge(r.elapsed, PhaseTag::alloc(), &ElapsedBreakdown::allocation);
      if (b.kind == AllocKind::Managed || b.kind == AllocKind::DeviceOnly) ensure_context(PhaseTag::alloc());
    }
    return layout;
  }

  void run_events(const SourceFn& next, const WindowFn& window) {
    std::size_t index = 0;
    while (auto ev = next()) {
      try {
        step(*ev, index, window);
      } catch (const OutOfMemory& e) {
        throw OutOfMemory(context(*ev, index) + e.what());
      } catch (const CapacityError& e) {
        throw OutOfMemory(context(*ev, index) + e.what());
      } catch (const UsageError& e) {
        throw UsageError(context(*ev, index) + e.what());
      }
      ++index;
    }
    report_.events = index;
  }

  void deallocate_buffers() {
    for (AllocId id : ids_) {
      charge(mem_.deallocate(id), PhaseTag::dealloc(), &ElapsedBreakdown::deallocation);
    }
  }

  SimulationReport finish(std::string name, std::string fp) {
    auto& t = report_.timings;
    t.t_compute = 0;
    for (Seconds s : t.per_iteration) t.t_compute += s;
    report_.workload = std::move(name);
    report_.fingerprint = std::move(fp);
    report_.traffic = traffic_;
    report_.migrations = migrations_;
    report_.stats = policy_.stats();
    return std::move(report_);
  }

 private:
  std::string context(const AccessEvent& ev, std::size_t index) const {
    return "event " + std::to_string(index) + " (" + describe(ev) + ") at t=" + fmt_double(now_) +
           "s, residency census [" + mem_.census().describe() + "]: ";
  }

  void ensure_context(PhaseTag phase) {
    if (context_ready_) return;
    context_ready_ = true;
    charge(opts_.machine.gpu_context_init_cost, phase, &ElapsedBreakdown::context_init);
  }

  void charge(Seconds dt, PhaseTag phase, Seconds ElapsedBreakdown::*category) {
    if (dt == 0) return;
    now_ += dt;
    report_.breakdown.*category += dt;
    auto& t = report_.timings;
    switch (phase.kind) {
      case PhaseTag::Kind::Alloc: t.t_alloc += dt; break;
      case PhaseTag::Kind::Init: t.t_init += dt; break;
      case PhaseTag::Kind::Dealloc: t.t_dealloc += dt; break;
      case PhaseTag::Kind::Compute:
        grow(phase.iteration);
        t.per_iteration[phase.iteration] += dt;
        break;
    }
    sample();
  }

  void grow(std::uint32_t it) {
    if (report_.timings.per_iteration.size() <= it) {
      report_.timings.per_iteration.resize(it + 1, 0.0);
      report_.per_iteration_traffic.resize(it + 1);
    }
  }

  void sample() {
    while (true) {
      const Seconds at = static_cast<double>(samples_) * opts_.sampling_period;
      if (at > now_) break;
      const auto u = mem_.usage();
      report_.timeline.push_back({at, u.cpu_resident_bytes, u.gpu_resident_bytes, mem_.mapped_bytes()});
      ++samples_;
    }
  }

  void prefetch_for(const AccessEvent& ev, const WindowFn& window) {
    if (ev.phase.kind != PhaseTag::Kind::Compute) return;
    const bool first = !compute_started_;
    const bool new_iteration = first || ev.phase.iteration != last_iteration_;
    compute_started_ = true;
    last_iteration_ = ev.phase.iteration;
    if (!new_iteration) return;
    for (const auto& d : opts_.policy.prefetch) {
      if (d.when == PrefetchDirective::When::BeforeCompute && !first) continue;
      const AllocId id = ids_[d.buffer];
      const auto& a = mem_.allocation(id);
      if (d.dest == Tier::Gpu) ensure_context(ev.phase);
      std::vector<ByteRange> ranges;
      if (d.when == PrefetchDirective::When::EachIteration)
        ranges = window(d.buffer, ev.phase.iteration);
      else
        ranges = {{0, a.length}};
      for (const auto& r : ranges) {
        policy_.set_time(now_);
        charge(policy_.prefetch(id, r.offset, r.length, d.dest), ev.phase, &ElapsedBreakdown::policy);
      }
    }
  }

  void step(const AccessEvent& ev, std::size_t index, const WindowFn& window) {
    const TrafficCounters before = traffic_;
    prefetch_for(ev, window);

    const Tick tick = policy_.advance();
    policy_.set_time(now_);
    const auto ref = mem_.locate(ev.addr);
    if (!ref) throw UsageError("address is not inside any allocation");
    const auto& a = mem_.allocation(ref->alloc);
    const Bytes page = a.page_size_in_use;
    if (ev.size == 0 || (ev.addr - a.base) % page + ev.size > page)
      throw UsageError("access crosses a page boundary");
    if (ev.agent == Agent::Gpu) ensure_context(ev.phase);

    const auto& cfg = mem_.config();
    Seconds pol = 0;
    auto& e = mem_.pte(*ref);
    if (e.residency == Residency::Unmapped) {
      pol += policy_.handle_first_touch(*ref, ev.agent);
    } else if (ev.agent == Agent::Gpu && a.kind == AllocKind::Managed && e.residency == Residency::Cpu) {
      pol += policy_.on_gpu_access_managed(*ref);
    }
    const AccessResolution res = resolve_access(ev, e.residency, cfg);
    record_access(traffic_, ev, res);
    e.last_touch = tick;
    if (ev.op != MemOp::Read) e.dirty = true;
    if (ev.agent == Agent::Gpu && a.kind == AllocKind::System && e.residency == Residency::Cpu)
      pol += policy_.on_gpu_access_system(*ref);

    charge(pol, ev.phase, &ElapsedBreakdown::policy);
    charge(res.elapsed, ev.phase, &ElapsedBreakdown::access);

    if (ev.phase.kind == PhaseTag::Kind::Compute) {
      grow(ev.phase.iteration);
      auto& it = report_.per_iteration_traffic[ev.phase.iteration];
      it.gpu_local_read += traffic_.gpu_local_read - before.gpu_local_read;
      it.c2c_read += traffic_.c2c_remote_read - before.c2c_remote_read;
      it.writeback += traffic_.c2c_writeback - before.c2c_writeback;
    }
    if (opts_.observer) opts_.observer(StepView{index, ev, res, a.kind, mem_, now_});
  }

  const RunOptions& opts_;
  MemorySystem mem_;
  TrafficCounters traffic_;
  std::vector<MigrationEvent> migrations_;
  Policy policy_;
  std::vector<BufferSpec> buffers_;
  std::vector<AllocId> ids_;
  Bytes footprint_ = 0;
  SimulationReport report_;
  Seconds now_ = 0;
  std::uint64_t samples_ = 0;
  bool context_ready_ = false;
  bool compute_started_ = false;
  std::uint32_t last_iteration_ = 0;
};

}  // namespace

SimulationReport run(const WorkloadSpec& spec, const RunOptions& opts) {
  spec.validate();
  Driver d(opts, spec.buffers);
  d.set_iterations(spec.iterations);
  d.setup();
  const auto layout = d.allocate_buffers();
  WorkloadStream stream(spec, layout, opts.seed);
  d.run_events([&] { return stream.next(); },
               [&](std::size_t b, std::uint32_t it) { return stream.window(b, it); });
  d.deallocate_buffers();
  return d.finish(spec.name, fingerprint(spec));
}

SimulationReport run_trace(const std::vector<AccessEvent>& events, const std::vector<BufferSpec>& buffers,
                           const RunOptions& opts, const std::string& name) {
  Driver d(opts, buffers);
  d.setup();
  const auto layout = d.allocate_buffers();
  std::size_t i = 0;
  d.run_events(
      [&]() -> std::optional<AccessEvent> {
        if (i == events.size()) return std::nullopt;
        return events[i++];
      },
      [&](std::size_t b, std::uint32_t) { return std::vector<ByteRange>{{0, layout[b].length}}; });
  d.deallocate_buffers();
  return d.finish(name, fingerprint(events, buffers));
}

namespace {

std::string_view buffer_class(AllocKind k) {
  // System and Managed runs of one workload compare against each other.
  return k == AllocKind::System || k == AllocKind::Managed ? "migratable" : to_string(k);
}

}  // namespace

std::string fingerprint(const WorkloadSpec& spec) {
  std::ostringstream os;
  os << "spec:" << spec.name << ";buffers=";
  for (const auto& b : spec.buffers) os << buffer_class(b.kind) << ':' << b.length << ',';
  os << ";init=" << to_string(spec.init_side) << ";pattern=" << to_string(spec.pattern.kind) << ':'
     << spec.pattern.stride << ':' << fmt_double(spec.pattern.density) << ':' << spec.pattern.seed
     << ";iterations=" << spec.iterations << ";reuse=" << fmt_double(spec.reuse) << ";access=" << spec.access_size
     << ";write_every=" << spec.write_every;
  return os.str();
}

std::string fingerprint(const std::vector<AccessEvent>& events, const std::vector<BufferSpec>& buffers) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& ev : events) {
    mix(static_cast<std::uint64_t>(ev.agent));
    mix(static_cast<std::uint64_t>(ev.op));
    mix(ev.addr);
    mix(ev.size);
    mix(static_cast<std::uint64_t>(ev.phase.kind));
    mix(ev.phase.iteration);
  }
  std::ostringstream os;
  os << "trace:" << events.size() << ':' << std::hex << h << std::dec << ";buffers=";
  for (const auto& b : buffers) os << buffer_class(b.kind) << ':' << b.length << ',';
  return os.str();
}

std::vector<ComparisonRow> compare(const std::vector<SimulationReport>& reports) {
  if (reports.size() < 2) throw UsageError("compare: need at least two reports");
  for (std::size_t i = 1; i < reports.size(); ++i) {
    if (reports[i].fingerprint != reports[0].fingerprint)
      throw UsageError("compare: report " + std::to_string(i) + " (" + reports[i].workload +
                       ") was produced by a different workload than report 0 (" + reports[0].workload + ")");
  }
  auto ratio = [](Seconds base, Seconds t) {
    if (t == 0) return base == 0 ? 1.0 : std::numeric_limits<double>::infinity();
    return base / t;
  };
  std::vector<ComparisonRow> rows;
  auto add = [&](const std::string& metric, auto get) {
    const Seconds base = get(reports[0]);
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const Seconds t = get(reports[i]);
      rows.push_back({metric, i, t, ratio(base, t)});
    }
  };
  add("total", [](const SimulationReport& r) { return r.timings.total(); });
  add("alloc", [](const SimulationReport& r) { return r.timings.t_alloc; });
  add("init", [](const SimulationReport& r) { return r.timings.t_init; });
  add("compute", [](const SimulationReport& r) { return r.timings.t_compute; });
  add("dealloc", [](const SimulationReport& r) { return r.timings.t_dealloc; });
  std::size_t iters = reports[0].timings.per_iteration.size();
  for (const auto& r : reports) iters = std::min(iters, r.timings.per_iteration.size());
  for (std::size_t k = 0; k < iters; ++k) {
    add("iter:" + std::to_string(k), [k](const SimulationReport& r) { return r.timings.per_iteration[k]; });
  }
  return rows;
}

}  // namespace umsim
