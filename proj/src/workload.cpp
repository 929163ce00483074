#include "umsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <istream>
#include <ostream>
#include <sstream>

#include "umsim/error.hpp"

namespace umsim {

std::string_view to_string(AccessPattern::Kind k) {
  switch (k) {
    case AccessPattern::Kind::Regular: return "regular";
    case AccessPattern::Kind::Irregular: return "irregular";
    case AccessPattern::Kind::Mixed: return "mixed";
  }
  return "?";
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  // Rejection sampling; std distributions differ between standard libraries.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

void WorkloadSpec::validate() const {
  auto fail = [&](const std::string& what) { throw ConfigError("workload '" + name + "': " + what); };
  if (buffers.empty()) fail("needs at least one buffer");
  for (const auto& b : buffers) {
    if (b.length == 0) fail("buffer length must be > 0");
  }
  if (iterations < 1) fail("iterations must be >= 1");
  if (!(reuse > 0.0 && reuse <= 1.0)) fail("reuse must be in (0, 1]");
  if (!(pattern.density > 0.0 && pattern.density <= 1.0)) fail("density must be in (0, 1]");
  if (pattern.stride < 1) fail("stride must be >= 1");
  if (access_size < 1) fail("access_size must be >= 1");
}

Bytes WorkloadSpec::footprint(const MachineConfig& cfg) const {
  Bytes total = 0;
  for (const auto& b : buffers) total += round_up(b.length, cfg.gpu_page_size);
  return total;
}

namespace {

std::uint64_t window_size(double reuse, std::uint64_t n) {
  const auto w = static_cast<std::uint64_t>(std::ceil(reuse * static_cast<double>(n) - 1e-9));
  return std::clamp<std::uint64_t>(w, 1, n);
}

std::vector<ByteRange> coalesce(std::vector<std::uint64_t> pages, const BufferLayout& l) {
  std::sort(pages.begin(), pages.end());
  std::vector<ByteRange> out;
  for (std::size_t i = 0; i < pages.size();) {
    std::size_t j = i + 1;
    while (j < pages.size() && pages[j] == pages[j - 1] + 1) ++j;
    const Bytes begin = pages[i] * l.page_size;
    const Bytes end = std::min(l.length, (pages[j - 1] + 1) * l.page_size);
    out.push_back({begin, end - begin});
    i = j;
  }
  return out;
}

}  // namespace

WorkloadStream::WorkloadStream(WorkloadSpec spec, std::vector<BufferLayout> layout, std::uint64_t seed)
    : spec_(std::move(spec)), layout_(std::move(layout)), seed_(seed) {
  spec_.validate();
  if (layout_.size() != spec_.buffers.size()) throw UsageError("WorkloadStream: layout does not match buffers");
  hot_.resize(layout_.size());
  const bool needs_hot = spec_.pattern.kind != AccessPattern::Kind::Regular;
  for (std::size_t b = 0; b < layout_.size(); ++b) {
    const std::uint64_t n = (layout_[b].length + layout_[b].page_size - 1) / layout_[b].page_size;
    if (!needs_hot) continue;
    const auto h = std::clamp<std::uint64_t>(
        static_cast<std::uint64_t>(std::llround(spec_.pattern.density * static_cast<double>(n))), 1, n);
    std::vector<std::uint64_t> idx(n);
    for (std::uint64_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 rng(splitmix64(spec_.pattern.seed) ^ splitmix64(b + 1));
    for (std::uint64_t i = 0; i < h; ++i) std::swap(idx[i], idx[i + uniform_below(rng, n - i)]);
    idx.resize(h);
    std::sort(idx.begin(), idx.end());
    hot_[b] = std::move(idx);
  }
}

bool WorkloadStream::irregular_iteration(std::uint32_t it) const {
  switch (spec_.pattern.kind) {
    case AccessPattern::Kind::Regular: return false;
    case AccessPattern::Kind::Irregular: return true;
    case AccessPattern::Kind::Mixed: return it % 2 == 1;
  }
  return false;
}

std::vector<std::uint64_t> WorkloadStream::window_pages(std::size_t b, std::uint32_t it) const {
  const auto& l = layout_[b];
  std::vector<std::uint64_t> pages;
  if (irregular_iteration(it)) {
    const auto& hot = hot_[b];
    const std::uint64_t w = window_size(spec_.reuse, hot.size());
    const std::uint64_t start = (static_cast<std::uint64_t>(it) * w) % hot.size();
    for (std::uint64_t j = 0; j < w; ++j) pages.push_back(hot[(start + j) % hot.size()]);
  } else {
    const std::uint64_t n = (l.length + l.page_size - 1) / l.page_size;
    const std::uint64_t w = window_size(spec_.reuse, n);
    const std::uint64_t start = (static_cast<std::uint64_t>(it) * w) % n;
    for (std::uint64_t j = 0; j < w; ++j) pages.push_back((start + j) % n);
  }
  return pages;
}

std::vector<ByteRange> WorkloadStream::window(std::size_t b, std::uint32_t it) const {
  return coalesce(window_pages(b, it), layout_.at(b));
}

void WorkloadStream::plan_iteration(std::uint32_t it) {
  plan_.clear();
  const bool irregular = irregular_iteration(it);
  for (std::size_t b = 0; b < layout_.size(); ++b) {
    const auto& l = layout_[b];
    const Addr buffer_end = l.base + l.length;
    auto pages = window_pages(b, it);
    if (irregular) {
      std::mt19937_64 rng(splitmix64(seed_) ^ splitmix64((static_cast<std::uint64_t>(it) << 20) + b + 1));
      for (std::size_t i = pages.size(); i > 1; --i) std::swap(pages[i - 1], pages[uniform_below(rng, i)]);
      for (auto p : pages) {
        const Addr begin = l.base + p * l.page_size;
        plan_.push_back({begin, std::min(begin + l.page_size, buffer_end), buffer_end, l.page_size});
      }
    } else {
      // Ascending window, split where it wraps.
      std::size_t i = 0;
      while (i < pages.size()) {
        std::size_t j = i + 1;
        while (j < pages.size() && pages[j] == pages[j - 1] + 1) ++j;
        const Addr begin = l.base + pages[i] * l.page_size;
        const Addr end = std::min(l.base + (pages[j - 1] + 1) * l.page_size, buffer_end);
        plan_.push_back({begin, end, buffer_end, l.page_size});
        i = j;
      }
    }
  }
  seg_ = 0;
  cursor_ = plan_.empty() ? 0 : plan_[0].begin;
}

std::optional<AccessEvent> WorkloadStream::next() {
  if (stage_ == Stage::Init) {
    while (buf_ < layout_.size()) {
      const auto& l = layout_[buf_];
      const Bytes offset = page_ * l.page_size;
      if (offset < l.length) {
        ++page_;
        const Bytes size = std::min({spec_.access_size, l.page_size, l.length - offset});
        return AccessEvent{spec_.init_side, MemOp::Write, l.base + offset, size, PhaseTag::init()};
      }
      ++buf_;
      page_ = 0;
    }
    stage_ = Stage::Compute;
    iter_ = 0;
    plan_iteration(iter_);
  }
  while (stage_ == Stage::Compute) {
    if (seg_ >= plan_.size()) {
      if (++iter_ >= spec_.iterations) {
        stage_ = Stage::Done;
        break;
      }
      plan_iteration(iter_);
      continue;
    }
    const Segment& s = plan_[seg_];
    const Addr addr = cursor_;
    const Addr page_end = align_down(addr, s.page_size) + s.page_size;
    const Bytes size = std::min({spec_.access_size, page_end - addr, s.buffer_end - addr});
    cursor_ += spec_.pattern.stride;
    if (cursor_ >= s.end) {
      ++seg_;
      if (seg_ < plan_.size()) cursor_ = plan_[seg_].begin;
    }
    ++compute_count_;
    const bool write = spec_.write_every != 0 && compute_count_ % spec_.write_every == 0;
    return AccessEvent{Agent::Gpu, write ? MemOp::Write : MemOp::Read, addr, size, PhaseTag::compute(iter_)};
  }
  return std::nullopt;
}

std::vector<AccessEvent> gen_workload(const WorkloadSpec& spec, const std::vector<BufferLayout>& layout,
                                      std::uint64_t seed) {
  WorkloadStream s(spec, layout, seed);
  std::vector<AccessEvent> out;
  while (auto ev = s.next()) out.push_back(*ev);
  return out;
}

std::vector<BufferLayout> predicted_layout(const WorkloadSpec& spec, const MachineConfig& cfg) {
  std::vector<BufferLayout> out;
  Addr next = MemorySystem::kVirtualBase;
  for (const auto& b : spec.buffers) {
    const Bytes page = b.kind == AllocKind::DeviceOnly ? cfg.gpu_page_size : cfg.system_page_size;
    const Bytes len = round_up(b.length, page);
    out.push_back({next, len, page});
    next = round_up(next + len, cfg.gpu_page_size);
  }
  return out;
}

Bytes statevector_bytes(unsigned n_qubits) {
  if (n_qubits < 1 || n_qubits > 40) throw UsageError("statevector_bytes: n_qubits must be in [1, 40]");
  return Bytes{8} << n_qubits;
}

namespace {

WorkloadSpec preset(std::string name, std::vector<BufferSpec> buffers, Agent init, AccessPattern::Kind kind,
                    double density, std::uint32_t iterations, std::uint32_t write_every) {
  WorkloadSpec s;
  s.name = std::move(name);
  s.buffers = std::move(buffers);
  s.init_side = init;
  s.pattern = AccessPattern{kind, kPresetAccess, density, 1};
  s.iterations = iterations;
  s.reuse = 1.0;
  s.access_size = kPresetAccess;
  s.write_every = write_every;
  return s;
}

}  // namespace

WorkloadSpec srad_like(Bytes working_set, std::uint32_t iterations) {
  if (iterations < 2) throw UsageError("srad_like: iterations must be >= 2");
  if (working_set == 0) throw UsageError("srad_like: working_set must be > 0");
  return preset("srad", {{AllocKind::System, working_set}}, Agent::Cpu, AccessPattern::Kind::Regular, 1.0,
                iterations, 0);
}

WorkloadSpec hotspot_like(Bytes working_set, std::uint32_t iterations) {
  if (working_set < 2) throw UsageError("hotspot_like: working_set too small");
  // temperature and power grids
  const Bytes half = working_set / 2;
  return preset("hotspot", {{AllocKind::System, half}, {AllocKind::System, working_set - half}}, Agent::Cpu,
                AccessPattern::Kind::Regular, 1.0, iterations, 0);
}

WorkloadSpec qiskit_like(unsigned n_qubits, std::uint32_t iterations) {
  return preset("qiskit", {{AllocKind::System, statevector_bytes(n_qubits)}}, Agent::Gpu,
                AccessPattern::Kind::Mixed, 0.5, iterations, 2);
}

WorkloadSpec bfs_like(Bytes graph_bytes, std::uint32_t iterations) {
  return preset("bfs", {{AllocKind::System, graph_bytes}}, Agent::Cpu, AccessPattern::Kind::Mixed, 0.25,
                iterations, 0);
}

WorkloadSpec needle_like(Bytes working_set, std::uint32_t iterations) {
  return preset("needle", {{AllocKind::System, working_set}}, Agent::Cpu, AccessPattern::Kind::Irregular, 0.5,
                iterations, 4);
}

WorkloadSpec pathfinder_like(Bytes working_set, std::uint32_t iterations) {
  return preset("pathfinder", {{AllocKind::System, working_set}}, Agent::Cpu, AccessPattern::Kind::Regular, 1.0,
                iterations, 0);
}

OversubscriptionSetup setup_oversubscription(double target_ratio, Bytes m_peak, const MachineConfig& cfg) {
  if (!(target_ratio > 0)) throw ConfigError("oversubscription: target ratio must be > 0");
  if (m_peak == 0) throw ConfigError("oversubscription: m_peak must be > 0");
  const double available = static_cast<double>(cfg.gpu_capacity - cfg.gpu_reserved_baseline);
  const double desired = static_cast<double>(m_peak) / target_ratio;
  const double reserve = available - desired;
  if (reserve < -0.5 * static_cast<double>(cfg.gpu_page_size)) {
    throw ConfigError("oversubscription: ratio " + std::to_string(target_ratio) +
                      " needs more than the available GPU memory (natural ratio " +
                      std::to_string(static_cast<double>(m_peak) / available) + ")");
  }
  const double page = static_cast<double>(cfg.gpu_page_size);
  const auto pages = static_cast<Bytes>(std::max(0.0, std::round(reserve / page)));
  OversubscriptionSetup s;
  s.reserved_bytes = pages * cfg.gpu_page_size;
  const Bytes avail = cfg.gpu_capacity - cfg.gpu_reserved_baseline;
  if (s.reserved_bytes >= avail) {
    throw ConfigError("oversubscription: ratio " + std::to_string(target_ratio) +
                      " leaves no GPU memory for the application");
  }
  s.m_peak = m_peak;
  s.m_gpu = avail - s.reserved_bytes;
  s.r_oversub = static_cast<double>(s.m_peak) / static_cast<double>(s.m_gpu);
  return s;
}

OversubscriptionSetup natural_oversubscription(Bytes m_peak, const MachineConfig& cfg) {
  OversubscriptionSetup s;
  s.m_peak = m_peak;
  s.m_gpu = cfg.gpu_capacity - cfg.gpu_reserved_baseline;
  s.r_oversub = static_cast<double>(s.m_peak) / static_cast<double>(s.m_gpu);
  return s;
}

// ---- trace files ----

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

}  // namespace

PhaseTag parse_phase_tag(const std::string& text) {
  const std::string t = lower(trim(text));
  if (t == "alloc") return PhaseTag::alloc();
  if (t == "init") return PhaseTag::init();
  if (t == "dealloc") return PhaseTag::dealloc();
  if (t.rfind("compute:", 0) == 0) {
    const std::string n = t.substr(8);
    if (n.empty() || n.find_first_not_of("0123456789") != std::string::npos || n.size() > 9)
      throw UsageError("bad compute iteration '" + n + "'");
    return PhaseTag::compute(static_cast<std::uint32_t>(std::stoul(n)));
  }
  throw UsageError("unknown phase tag '" + text + "'");
}

Trace parse_trace(std::istream& in, const std::string& source) {
  Trace t;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(trim(item));
    if (f.size() != 5) throw ParseError(source, line_no, "expected 5 comma-separated fields, got " + std::to_string(f.size()));

    AccessEvent ev;
    const std::string agent = lower(f[0]);
    if (agent == "cpu") ev.agent = Agent::Cpu;
    else if (agent == "gpu") ev.agent = Agent::Gpu;
    else throw ParseError(source, line_no, "bad agent '" + f[0] + "' (expected CPU or GPU)");

    const std::string op = lower(f[1]);
    if (op == "r" || op == "read") ev.op = MemOp::Read;
    else if (op == "w" || op == "write") ev.op = MemOp::Write;
    else if (op == "a" || op == "atomic") ev.op = MemOp::Atomic;
    else throw ParseError(source, line_no, "bad op '" + f[1] + "' (expected R, W or A)");

    const std::string addr = lower(f[2]);
    if (addr.size() < 3 || addr.rfind("0x", 0) != 0 || addr.find_first_not_of("0123456789abcdef", 2) != std::string::npos ||
        addr.size() > 18)
      throw ParseError(source, line_no, "bad address '" + f[2] + "' (expected 0x-prefixed hex)");
    ev.addr = std::stoull(addr.substr(2), nullptr, 16);

    if (f[3].empty() || f[3].find_first_not_of("0123456789") != std::string::npos || f[3].size() > 19)
      throw ParseError(source, line_no, "bad size '" + f[3] + "'");
    ev.size = std::stoull(f[3]);
    if (ev.size < 1) throw ParseError(source, line_no, "size must be >= 1");

    try {
      ev.phase = parse_phase_tag(f[4]);
    } catch (const UsageError& e) {
      throw ParseError(source, line_no, e.what());
    }
    t.events.push_back(ev);
    t.lines.push_back(line_no);
  }
  return t;
}

Trace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace file '" + path + "'");
  return parse_trace(in, path);
}

void write_trace(std::ostream& out, const std::vector<AccessEvent>& events) {
  for (const auto& ev : events) {
    std::ostringstream hex;
    hex << std::hex << ev.addr;
    out << (ev.agent == Agent::Cpu ? "CPU" : "GPU") << ',' << to_string(ev.op) << ",0x" << hex.str() << ','
        << ev.size << ',' << to_string(ev.phase) << '\n';
  }
}

}  // namespace umsim
