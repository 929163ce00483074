#include "umsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "umsim/error.hpp"
#include "umsim/names.hpp"
#include "umsim/report_io.hpp"

namespace umsim {

std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::PageSize: return "page_size";
    case SweepAxis::Threshold: return "threshold";
    case SweepAxis::OversubRatio: return "oversub_ratio";
    case SweepAxis::Allocator: return "allocator";
  }
  return "?";
}

std::optional<SweepAxis> sweep_axis_from(std::string_view s) {
  for (SweepAxis a : {SweepAxis::PageSize, SweepAxis::Threshold, SweepAxis::OversubRatio, SweepAxis::Allocator}) {
    if (s == to_string(a)) return a;
  }
  return std::nullopt;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& text) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) throw ConfigError("expected a number, got '" + text + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& text) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos || text.size() > 19)
    throw ConfigError("expected a non-negative integer, got '" + text + "'");
  return std::stoull(text);
}

bool parse_bool(const std::string& text) {
  const auto t = lower(text);
  if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
  if (t == "false" || t == "no" || t == "off" || t == "0") return false;
  throw ConfigError("expected true or false, got '" + text + "'");
}

bool is_off(const std::string& text) {
  const auto t = lower(text);
  return t == "off" || t == "inf" || t == "none" || t == "disabled";
}

void set_threshold(PolicyConfig& p, const std::string& value) {
  if (is_off(value)) {
    p.counters_enabled = false;
    return;
  }
  const auto n = parse_uint(value);
  if (n < 1 || n > 0xFFFFFFFFULL) throw ConfigError("threshold must be in [1, 2^32)");
  p.migration_threshold = static_cast<std::uint32_t>(n);
  p.counters_enabled = true;
}

struct Entry {
  std::string key;
  std::string value;
  std::size_t line;
};

WorkloadSpec preset_spec(const std::string& name, const std::map<std::string, Entry>& kv) {
  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second.value;
  };
  const Bytes ws = get("working_set") ? parse_bytes(*get("working_set")) : 64 * MiB;
  const auto iters = static_cast<std::uint32_t>(get("iterations") ? parse_uint(*get("iterations")) : 4);
  if (name == "srad") return srad_like(ws, get("iterations") ? iters : 12);
  if (name == "hotspot") return hotspot_like(ws, iters);
  if (name == "qiskit") {
    const auto q = get("qubits") ? parse_uint(*get("qubits")) : 24;
    return qiskit_like(static_cast<unsigned>(q), iters);
  }
  if (name == "bfs") return bfs_like(ws, iters);
  if (name == "needle") return needle_like(ws, iters);
  if (name == "pathfinder") return pathfinder_like(ws, iters);
  throw ConfigError("unknown preset '" + name + "' (srad, hotspot, qiskit, bfs, needle, pathfinder)");
}

void apply_machine(MachineConfig& m, const Entry& e) {
  for (const auto& f : machine_fields()) {
    if (e.key != f.name) continue;
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(m.*member)>;
          if constexpr (std::is_same_v<T, Bytes>)
            m.*member = parse_bytes(e.value);
          else
            m.*member = parse_double(e.value);
        },
        f.member);
    return;
  }
  throw ConfigError("unknown key");
}

void apply_policy(PolicyConfig& p, const Entry& e) {
  const auto& k = e.key;
  const auto& v = e.value;
  if (k == "allocator") {
    if (is_off(v) || lower(v) == "default") {
      p.allocator.reset();
    } else {
      auto kind = alloc_kind_from(v);
      if (!kind) throw ConfigError("unknown allocator '" + v + "'");
      p.allocator = *kind;
    }
  } else if (k == "migration_threshold") {
    set_threshold(p, v);
  } else if (k == "counters_enabled") {
    p.counters_enabled = parse_bool(v);
  } else if (k == "eviction") {
    if (lower(v) != "lru") throw ConfigError("eviction must be lru");
  } else if (k == "prefetch_after_first_touch") {
    p.prefetch_after_first_touch = parse_bool(v);
  } else if (k == "first_touch_prefetch_chunk") {
    p.first_touch_prefetch_chunk = parse_bytes(v);
  } else if (k == "managed_migration_granularity") {
    p.managed_migration_granularity = parse_bytes(v);
  } else if (k == "counter_tracking_granularity") {
    p.counter_tracking_granularity = parse_bytes(v);
  } else if (k == "prefetch") {
    p.prefetch.clear();
    if (is_off(v)) return;
    for (const auto& item : split_list(v)) {
      // buffer:dest:when
      const auto a = item.find(':');
      const auto b = a == std::string::npos ? a : item.find(':', a + 1);
      if (b == std::string::npos) throw ConfigError("prefetch entry '" + item + "' is not buffer:dest:when");
      PrefetchDirective d;
      d.buffer = parse_uint(item.substr(0, a));
      auto dest = tier_from(item.substr(a + 1, b - a - 1));
      auto when = when_from(item.substr(b + 1));
      if (!dest || !when) throw ConfigError("prefetch entry '" + item + "' is not buffer:dest:when");
      d.dest = *dest;
      d.when = *when;
      p.prefetch.push_back(d);
    }
  } else {
    throw ConfigError("unknown key");
  }
}

void apply_workload(WorkloadSpec& w, std::optional<std::string>& trace, const Entry& e,
                    const std::filesystem::path& base_dir) {
  const auto& k = e.key;
  const auto& v = e.value;
  if (k == "preset" || k == "working_set" || k == "qubits") return;  // consumed by preset_spec
  if (k == "name") {
    w.name = v;
  } else if (k == "buffers") {
    w.buffers.clear();
    for (const auto& item : split_list(v)) {
      const auto c = item.find(':');
      if (c == std::string::npos) throw ConfigError("buffer '" + item + "' is not kind:length");
      auto kind = alloc_kind_from(trim(item.substr(0, c)));
      if (!kind) throw ConfigError("unknown buffer kind in '" + item + "'");
      w.buffers.push_back({*kind, parse_bytes(trim(item.substr(c + 1)))});
    }
  } else if (k == "init_side") {
    auto a = agent_from(v);
    if (!a) throw ConfigError("init_side must be cpu or gpu");
    w.init_side = *a;
  } else if (k == "pattern") {
    auto p = pattern_from(v);
    if (!p) throw ConfigError("pattern must be regular, irregular or mixed");
    w.pattern.kind = *p;
  } else if (k == "stride") {
    w.pattern.stride = parse_bytes(v);
  } else if (k == "density") {
    w.pattern.density = parse_double(v);
  } else if (k == "pattern_seed") {
    w.pattern.seed = parse_uint(v);
  } else if (k == "iterations") {
    const auto n = parse_uint(v);
    if (n > 0xFFFFFFFFULL) throw ConfigError("iterations out of range");
    w.iterations = static_cast<std::uint32_t>(n);
  } else if (k == "reuse") {
    w.reuse = parse_double(v);
  } else if (k == "access_size") {
    w.access_size = parse_bytes(v);
  } else if (k == "write_every") {
    const auto n = parse_uint(v);
    if (n > 0xFFFFFFFFULL) throw ConfigError("write_every out of range");
    w.write_every = static_cast<std::uint32_t>(n);
  } else if (k == "trace") {
    if (is_off(v)) {
      trace.reset();
      return;
    }
    std::filesystem::path p(v);
    if (p.is_relative()) p = base_dir / p;
    p = std::filesystem::absolute(p).lexically_normal();
    if (!std::filesystem::is_regular_file(p)) throw ConfigError("trace file '" + p.string() + "' does not exist");
    trace = p.string();
  } else {
    throw ConfigError("unknown key");
  }
}

void apply_run(Scenario& s, const Entry& e) {
  const auto& k = e.key;
  const auto& v = e.value;
  if (k == "seed") {
    s.seed = parse_uint(v);
  } else if (k == "sampling_ms") {
    s.sampling_ms = parse_double(v);
    if (!(s.sampling_ms > 0)) throw ConfigError("sampling_ms must be > 0");
  } else if (k == "oversub_ratio") {
    if (is_off(v))
      s.oversub_ratio.reset();
    else
      s.oversub_ratio = parse_double(v);
  } else if (k == "out") {
    s.out = v;
  } else {
    throw ConfigError("unknown key");
  }
}

}  // namespace

Bytes parse_bytes(const std::string& raw) {
  const std::string text = trim(raw);
  std::size_t i = 0;
  while (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.')) ++i;
  const std::string num = text.substr(0, i);
  const std::string unit = lower(trim(text.substr(i)));
  if (num.empty() || std::count(num.begin(), num.end(), '.') > 1) throw ConfigError("bad byte count '" + raw + "'");
  double mult = 1;
  if (unit.empty() || unit == "b") mult = 1;
  else if (unit == "k" || unit == "kib") mult = 1024.0;
  else if (unit == "m" || unit == "mib") mult = 1024.0 * 1024;
  else if (unit == "g" || unit == "gib") mult = 1024.0 * 1024 * 1024;
  else if (unit == "kb") mult = 1e3;
  else if (unit == "mb") mult = 1e6;
  else if (unit == "gb") mult = 1e9;
  else throw ConfigError("bad byte unit in '" + raw + "'");
  if (num.find('.') == std::string::npos && mult == 1) return parse_uint(num);
  const double v = std::stod(num) * mult;
  if (v > 1.8e19 || std::fabs(v - std::round(v)) > 1e-6) throw ConfigError("'" + raw + "' is not a whole number of bytes");
  return static_cast<Bytes>(std::llround(v));
}

Scenario parse_scenario(std::istream& in, const std::string& source, const std::filesystem::path& base_dir) {
  static const std::vector<std::string> kSections = {"machine", "policy", "workload", "run", "sweep"};
  std::map<std::string, std::vector<Entry>> sections;
  std::map<std::string, std::map<std::string, Entry>> seen;
  std::string current;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(source, line_no, "unterminated section header");
      current = lower(trim(line.substr(1, line.size() - 2)));
      if (std::find(kSections.begin(), kSections.end(), current) == kSections.end())
        throw ParseError(source, line_no, "unknown section [" + current + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, line_no, "expected key = value");
    if (current.empty()) throw ParseError(source, line_no, "key outside of any section");
    Entry e{lower(trim(line.substr(0, eq))), trim(line.substr(eq + 1)), line_no};
    if (e.key.empty()) throw ParseError(source, line_no, "empty key");
    if (seen[current].count(e.key)) throw ParseError(source, line_no, "duplicate key '" + e.key + "'");
    seen[current][e.key] = e;
    sections[current].push_back(e);
  }

  Scenario s;
  auto apply = [&](const std::string& sec, auto fn) {
    for (const auto& e : sections[sec]) {
      try {
        fn(e);
      } catch (const ConfigError& err) {
        throw ParseError(source, e.line, "[" + sec + "] " + e.key + ": " + err.what());
      } catch (const UsageError& err) {
        throw ParseError(source, e.line, "[" + sec + "] " + e.key + ": " + err.what());
      }
    }
  };
  apply("machine", [&](const Entry& e) { apply_machine(s.machine, e); });
  apply("policy", [&](const Entry& e) { apply_policy(s.policy, e); });

  const auto& wkv = seen["workload"];
  if (auto it = wkv.find("preset"); it != wkv.end()) {
    try {
      s.workload = preset_spec(lower(it->second.value), wkv);
    } catch (const Error& err) {
      throw ParseError(source, it->second.line, std::string("[workload] preset: ") + err.what());
    }
  } else {
    for (const char* k : {"working_set", "qubits"}) {
      if (auto jt = wkv.find(k); jt != wkv.end())
        throw ParseError(source, jt->second.line, std::string("[workload] ") + k + " requires a preset");
    }
  }
  apply("workload", [&](const Entry& e) { apply_workload(s.workload, s.trace_path, e, base_dir); });
  apply("run", [&](const Entry& e) { apply_run(s, e); });

  if (!sections["sweep"].empty()) {
    SweepSpec sw;
    bool have_axis = false;
    apply("sweep", [&](const Entry& e) {
      if (e.key == "axis") {
        auto a = sweep_axis_from(lower(e.value));
        if (!a) throw ConfigError("axis must be page_size, threshold, oversub_ratio or allocator");
        sw.axis = *a;
        have_axis = true;
      } else if (e.key == "values") {
        sw.values = split_list(e.value);
      } else {
        throw ConfigError("unknown key");
      }
    });
    if (!have_axis || sw.values.empty()) throw ParseError(source, line_no, "[sweep] needs axis and values");
    for (const auto& v : sw.values) {
      try {
        (void)with_axis_value(s, sw.axis, v);
      } catch (const Error& err) {
        throw ParseError(source, seen["sweep"]["values"].line, std::string("[sweep] values: ") + err.what());
      }
    }
    s.sweep = sw;
  }

  try {
    s.machine.validate();
    s.policy.validate(s.machine);
    s.workload.validate();
  } catch (const ConfigError& err) {
    throw ConfigError(source + ": " + err.what());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
  return parse_scenario(in, path.string(), path.parent_path());
}

std::string serialize(const Scenario& s) {
  std::ostringstream os;
  os << "[machine]\n";
  for (const auto& f : machine_fields()) {
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(s.machine.*member)>;
          if constexpr (std::is_same_v<T, Bytes>)
            os << f.name << " = " << s.machine.*member << '\n';
          else
            os << f.name << " = " << format_number(s.machine.*member) << '\n';
        },
        f.member);
  }
  const auto& p = s.policy;
  os << "\n[policy]\n";
  os << "allocator = " << (p.allocator ? std::string(to_string(*p.allocator)) : "default") << '\n';
  os << "migration_threshold = " << p.migration_threshold << '\n';
  os << "counters_enabled = " << (p.counters_enabled ? "true" : "false") << '\n';
  os << "eviction = lru\n";
  os << "prefetch_after_first_touch = " << (p.prefetch_after_first_touch ? "true" : "false") << '\n';
  os << "first_touch_prefetch_chunk = " << p.first_touch_prefetch_chunk << '\n';
  os << "managed_migration_granularity = " << p.managed_migration_granularity << '\n';
  os << "counter_tracking_granularity = " << p.counter_tracking_granularity << '\n';
  os << "prefetch = ";
  if (p.prefetch.empty()) os << "none";
  for (std::size_t i = 0; i < p.prefetch.size(); ++i) {
    const auto& d = p.prefetch[i];
    os << (i ? ", " : "") << d.buffer << ':' << to_string(d.dest) << ':' << to_string(d.when);
  }
  os << '\n';

  const auto& w = s.workload;
  os << "\n[workload]\n";
  os << "name = " << w.name << '\n';
  os << "buffers = ";
  for (std::size_t i = 0; i < w.buffers.size(); ++i)
    os << (i ? ", " : "") << to_string(w.buffers[i].kind) << ':' << w.buffers[i].length;
  os << '\n';
  os << "init_side = " << to_string(w.init_side) << '\n';
  os << "pattern = " << to_string(w.pattern.kind) << '\n';
  os << "stride = " << w.pattern.stride << '\n';
  os << "density = " << format_number(w.pattern.density) << '\n';
  os << "pattern_seed = " << w.pattern.seed << '\n';
  os << "iterations = " << w.iterations << '\n';
  os << "reuse = " << format_number(w.reuse) << '\n';
  os << "access_size = " << w.access_size << '\n';
  os << "write_every = " << w.write_every << '\n';
  os << "trace = " << (s.trace_path ? *s.trace_path : "none") << '\n';

  os << "\n[run]\n";
  os << "seed = " << s.seed << '\n';
  os << "sampling_ms = " << format_number(s.sampling_ms) << '\n';
  os << "oversub_ratio = " << (s.oversub_ratio ? format_number(*s.oversub_ratio) : "none") << '\n';
  os << "out = " << s.out << '\n';

  if (s.sweep) {
    os << "\n[sweep]\n";
    os << "axis = " << to_string(s.sweep->axis) << '\n';
    os << "values = ";
    for (std::size_t i = 0; i < s.sweep->values.size(); ++i) os << (i ? ", " : "") << s.sweep->values[i];
    os << '\n';
  }
  return os.str();
}

Scenario with_axis_value(Scenario s, SweepAxis axis, const std::string& value) {
  switch (axis) {
    case SweepAxis::PageSize:
      s.machine.system_page_size = parse_bytes(value);
      s.machine.validate();
      break;
    case SweepAxis::Threshold:
      set_threshold(s.policy, value);
      break;
    case SweepAxis::OversubRatio:
      if (is_off(value)) {
        s.oversub_ratio.reset();
      } else {
        s.oversub_ratio = parse_double(value);
        if (!(*s.oversub_ratio > 0)) throw ConfigError("oversubscription ratio must be > 0");
      }
      break;
    case SweepAxis::Allocator: {
      auto kind = alloc_kind_from(value);
      if (!kind || (*kind != AllocKind::System && *kind != AllocKind::Managed))
        throw ConfigError("allocator must be system or managed, got '" + value + "'");
      s.policy.allocator = *kind;
      break;
    }
  }
  return s;
}

RunOptions run_options(const Scenario& s) {
  RunOptions o;
  o.machine = s.machine;
  o.policy = s.policy;
  o.oversub_ratio = s.oversub_ratio;
  o.seed = s.seed;
  o.sampling_period = s.sampling_ms / 1000.0;
  return o;
}

SimulationReport execute(const Scenario& s) {
  const RunOptions o = run_options(s);
  if (s.trace_path) {
    const Trace t = load_trace(*s.trace_path);
    return run_trace(t.events, s.workload.buffers, o, s.workload.name);
  }
  return run(s.workload, o);
}

std::vector<PresetInfo> list_presets(const std::filesystem::path& dir) {
  std::vector<PresetInfo> out;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw ConfigError("presets directory '" + dir.string() + "' not found");
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".scenario") continue;
    PresetInfo info{entry.path().stem().string(), "", entry.path()};
    std::ifstream in(entry.path());
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line);
      if (line.rfind('#', 0) == 0) {
        info.description = trim(line.substr(1));
        break;
      }
      if (!line.empty()) break;
    }
    out.push_back(std::move(info));
  }
  std::sort(out.begin(), out.end(), [](const PresetInfo& a, const PresetInfo& b) { return a.name < b.name; });
  return out;
}

}  // namespace umsim
