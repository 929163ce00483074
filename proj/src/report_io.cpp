#include "umsim/report_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "umsim/error.hpp"
#include "umsim/names.hpp"

namespace umsim {

using json = nlohmann::ordered_json;

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

template <class E, class F>
E enum_or_throw(const json& j, F from, const char* what) {
  const auto s = j.get<std::string>();
  auto v = from(s);
  if (!v) throw ParseError("report", 0, std::string("unknown ") + what + " '" + s + "'");
  return *v;
}

json machine_json(const MachineConfig& m) {
  json j = json::object();
  for (const auto& f : machine_fields()) {
    std::visit([&](auto member) { j[f.name] = m.*member; }, f.member);
  }
  return j;
}

MachineConfig machine_from(const json& j) {
  MachineConfig m;
  for (const auto& f : machine_fields()) {
    std::visit([&](auto member) { j.at(f.name).get_to(m.*member); }, f.member);
  }
  return m;
}

json policy_json(const PolicyConfig& p) {
  json j;
  j["allocator"] = p.allocator ? json(std::string(to_string(*p.allocator))) : json(nullptr);
  j["migration_threshold"] = p.migration_threshold;
  j["counters_enabled"] = p.counters_enabled;
  j["eviction"] = "lru";
  j["prefetch_after_first_touch"] = p.prefetch_after_first_touch;
  j["first_touch_prefetch_chunk"] = p.first_touch_prefetch_chunk;
  j["managed_migration_granularity"] = p.managed_migration_granularity;
  j["counter_tracking_granularity"] = p.counter_tracking_granularity;
  json pf = json::array();
  for (const auto& d : p.prefetch) {
    pf.push_back({{"buffer", d.buffer}, {"dest", to_string(d.dest)}, {"when", to_string(d.when)}});
  }
  j["prefetch"] = pf;
  return j;
}

PolicyConfig policy_from(const json& j) {
  PolicyConfig p;
  if (!j.at("allocator").is_null()) p.allocator = enum_or_throw<AllocKind>(j["allocator"], alloc_kind_from, "allocator");
  j.at("migration_threshold").get_to(p.migration_threshold);
  j.at("counters_enabled").get_to(p.counters_enabled);
  j.at("prefetch_after_first_touch").get_to(p.prefetch_after_first_touch);
  j.at("first_touch_prefetch_chunk").get_to(p.first_touch_prefetch_chunk);
  j.at("managed_migration_granularity").get_to(p.managed_migration_granularity);
  j.at("counter_tracking_granularity").get_to(p.counter_tracking_granularity);
  for (const auto& d : j.at("prefetch")) {
    PrefetchDirective pd;
    d.at("buffer").get_to(pd.buffer);
    pd.dest = enum_or_throw<Tier>(d.at("dest"), tier_from, "tier");
    pd.when = enum_or_throw<PrefetchDirective::When>(d.at("when"), when_from, "prefetch timing");
    p.prefetch.push_back(pd);
  }
  return p;
}

}  // namespace

std::string to_json(const SimulationReport& r) {
  json j;
  j["workload"] = r.workload;
  j["fingerprint"] = r.fingerprint;
  j["allocator"] = r.allocator;
  j["seed"] = r.seed;
  j["sampling_period_s"] = r.sampling_period;
  j["events"] = r.events;
  j["footprint_bytes"] = r.footprint;

  const auto& t = r.timings;
  j["timings"] = {{"t_alloc_s", t.t_alloc},     {"t_init_s", t.t_init},         {"t_compute_s", t.t_compute},
                  {"t_dealloc_s", t.t_dealloc}, {"total_s", t.total()},         {"setup_s", r.setup_s},
                  {"per_iteration_s", t.per_iteration}};

  json tr;
  for (const auto& [name, value] : r.traffic.fields()) tr[std::string(name)] = value;
  tr["amplification"] = r.traffic.amplification();
  j["traffic"] = tr;

  json it = json::array();
  for (std::size_t i = 0; i < r.per_iteration_traffic.size(); ++i) {
    const auto& x = r.per_iteration_traffic[i];
    it.push_back({{"iter", i}, {"gpu_local_read", x.gpu_local_read}, {"c2c_read", x.c2c_read}, {"writeback", x.writeback}});
  }
  j["per_iteration_traffic"] = it;

  const auto& s = r.stats;
  j["summary"] = {{"cpu_faults", s.cpu_faults},
                  {"gpu_first_touch_faults", s.gpu_first_touch_faults},
                  {"managed_gpu_faults", s.managed_gpu_faults},
                  {"notifications", s.notifications},
                  {"evictions", s.evictions},
                  {"pressure_remote_accesses", s.pressure_remote_accesses},
                  {"migrations", r.migrations.size()},
                  {"l2_throughput_bytes_per_s_approx", r.l2_throughput()}};

  const auto& b = r.breakdown;
  j["elapsed_breakdown"] = {{"access_s", b.access},
                            {"policy_s", b.policy},
                            {"allocation_s", b.allocation},
                            {"deallocation_s", b.deallocation},
                            {"context_init_s", b.context_init}};

  if (r.oversubscription) {
    const auto& o = *r.oversubscription;
    j["oversubscription"] = {{"reserved_bytes", o.reserved_bytes},
                             {"m_peak", o.m_peak},
                             {"m_gpu", o.m_gpu},
                             {"r_oversub", o.r_oversub}};
  } else {
    j["oversubscription"] = nullptr;
  }

  j["machine"] = machine_json(r.machine);
  j["policy"] = policy_json(r.policy);

  json mig = json::array();
  for (const auto& m : r.migrations) {
    mig.push_back({{"cause", to_string(m.cause)},
                   {"first_vpn", m.first_vpn},
                   {"pages", m.pages},
                   {"direction", to_string(m.direction)},
                   {"bytes", m.bytes},
                   {"tick", m.tick},
                   {"time_s", m.time}});
  }
  j["migrations"] = mig;

  json tl = json::array();
  for (const auto& x : r.timeline) {
    tl.push_back({{"time_s", x.time}, {"cpu_rss", x.cpu_rss}, {"gpu_used", x.gpu_used}, {"mapped", x.mapped}});
  }
  j["timeline"] = tl;
  return j.dump(2) + "\n";
}

SimulationReport report_from_json(const std::string& text) {
  SimulationReport r;
  try {
    const json j = json::parse(text);
    j.at("workload").get_to(r.workload);
    j.at("fingerprint").get_to(r.fingerprint);
    j.at("allocator").get_to(r.allocator);
    j.at("seed").get_to(r.seed);
    j.at("sampling_period_s").get_to(r.sampling_period);
    j.at("events").get_to(r.events);
    j.at("footprint_bytes").get_to(r.footprint);

    const auto& t = j.at("timings");
    t.at("t_alloc_s").get_to(r.timings.t_alloc);
    t.at("t_init_s").get_to(r.timings.t_init);
    t.at("t_compute_s").get_to(r.timings.t_compute);
    t.at("t_dealloc_s").get_to(r.timings.t_dealloc);
    t.at("setup_s").get_to(r.setup_s);
    t.at("per_iteration_s").get_to(r.timings.per_iteration);

    const auto& tr = j.at("traffic");
    auto& c = r.traffic;
    for (auto [name, field] : std::initializer_list<std::pair<const char*, Bytes TrafficCounters::*>>{
             {"gpu_local_read", &TrafficCounters::gpu_local_read},
             {"gpu_local_write", &TrafficCounters::gpu_local_write},
             {"cpu_local_read", &TrafficCounters::cpu_local_read},
             {"cpu_local_write", &TrafficCounters::cpu_local_write},
             {"c2c_h2d", &TrafficCounters::c2c_h2d},
             {"c2c_d2h", &TrafficCounters::c2c_d2h},
             {"c2c_writeback", &TrafficCounters::c2c_writeback},
             {"migrated_h2d", &TrafficCounters::migrated_h2d},
             {"migrated_d2h", &TrafficCounters::migrated_d2h},
             {"requested_bytes", &TrafficCounters::requested_bytes},
             {"c2c_remote_read", &TrafficCounters::c2c_remote_read}}) {
      tr.at(name).get_to(c.*field);
    }

    for (const auto& x : j.at("per_iteration_traffic")) {
      r.per_iteration_traffic.push_back(
          {x.at("gpu_local_read").get<Bytes>(), x.at("c2c_read").get<Bytes>(), x.at("writeback").get<Bytes>()});
    }

    const auto& s = j.at("summary");
    s.at("cpu_faults").get_to(r.stats.cpu_faults);
    s.at("gpu_first_touch_faults").get_to(r.stats.gpu_first_touch_faults);
    s.at("managed_gpu_faults").get_to(r.stats.managed_gpu_faults);
    s.at("notifications").get_to(r.stats.notifications);
    s.at("evictions").get_to(r.stats.evictions);
    s.at("pressure_remote_accesses").get_to(r.stats.pressure_remote_accesses);

    const auto& b = j.at("elapsed_breakdown");
    b.at("access_s").get_to(r.breakdown.access);
    b.at("policy_s").get_to(r.breakdown.policy);
    b.at("allocation_s").get_to(r.breakdown.allocation);
    b.at("deallocation_s").get_to(r.breakdown.deallocation);
    b.at("context_init_s").get_to(r.breakdown.context_init);

    if (const auto& o = j.at("oversubscription"); !o.is_null()) {
      OversubscriptionSetup os;
      o.at("reserved_bytes").get_to(os.reserved_bytes);
      o.at("m_peak").get_to(os.m_peak);
      o.at("m_gpu").get_to(os.m_gpu);
      o.at("r_oversub").get_to(os.r_oversub);
      r.oversubscription = os;
    }

    r.machine = machine_from(j.at("machine"));
    r.policy = policy_from(j.at("policy"));

    for (const auto& m : j.at("migrations")) {
      MigrationEvent ev;
      ev.cause = enum_or_throw<MigrationEvent::Cause>(m.at("cause"), cause_from, "migration cause");
      m.at("first_vpn").get_to(ev.first_vpn);
      m.at("pages").get_to(ev.pages);
      ev.direction = enum_or_throw<Direction>(m.at("direction"), direction_from, "direction");
      m.at("bytes").get_to(ev.bytes);
      m.at("tick").get_to(ev.tick);
      m.at("time_s").get_to(ev.time);
      r.migrations.push_back(ev);
    }
    for (const auto& x : j.at("timeline")) {
      r.timeline.push_back({x.at("time_s").get<double>(), x.at("cpu_rss").get<Bytes>(), x.at("gpu_used").get<Bytes>(),
                            x.at("mapped").get<Bytes>()});
    }
  } catch (const json::exception& e) {
    throw ParseError("report", 0, e.what());
  }
  return r;
}

SimulationReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open report '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return report_from_json(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

std::string timeline_csv(const SimulationReport& r) {
  std::string out = std::string(kTimelineHeader) + "\n";
  for (const auto& s : r.timeline) {
    out += format_number(s.time) + ',' + std::to_string(s.cpu_rss) + ',' + std::to_string(s.gpu_used) + '\n';
  }
  return out;
}

std::string iterations_csv(const SimulationReport& r) {
  std::string out = std::string(kIterationsHeader) + "\n";
  for (std::size_t i = 0; i < r.timings.per_iteration.size(); ++i) {
    const auto& x = r.per_iteration_traffic.at(i);
    out += std::to_string(i) + ',' + format_number(r.timings.per_iteration[i]) + ',' + std::to_string(x.gpu_local_read) +
           ',' + std::to_string(x.c2c_read) + ',' + std::to_string(x.writeback) + '\n';
  }
  return out;
}

std::string traffic_csv(const SimulationReport& r) {
  std::string out = std::string(kTrafficHeader) + "\n";
  for (const auto& [name, value] : r.traffic.fields()) out += std::string(name) + ',' + std::to_string(value) + '\n';
  return out;
}

std::string compare_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = std::string(kCompareHeader) + "\n";
  for (const auto& row : rows) {
    out += row.metric + ',' + std::to_string(row.report) + ',' + format_number(row.time) + ',' +
           format_number(row.speedup) + '\n';
  }
  return out;
}

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw ConfigError("write failed for '" + p.string() + "'");
}

}  // namespace

void write_report(const SimulationReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  write_file(dir / "report.json", to_json(r));
  write_file(dir / "timeline.csv", timeline_csv(r));
  write_file(dir / "iterations.csv", iterations_csv(r));
  write_file(dir / "traffic.csv", traffic_csv(r));
}

std::string summary_line(const SimulationReport& r) {
  return "workload=" + r.workload + " allocator=" + r.allocator + " total_s=" + format_number(r.timings.total()) +
         " amplification=" + format_number(r.traffic.amplification()) +
         " migrations=" + std::to_string(r.migrations.size());
}

}  // namespace umsim
