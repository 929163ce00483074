#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "umsim/error.hpp"
#include "umsim/names.hpp"
#include "umsim/report_io.hpp"
#include "umsim/scenario.hpp"

namespace py = pybind11;
using namespace umsim;

namespace {

template <class T>
T named(std::optional<T> v, const std::string& what, const std::string& text) {
  if (!v) throw ConfigError("unknown " + what + " '" + text + "'");
  return *v;
}

Residency residency_from(const std::string& s) {
  if (s == "cpu" || s == "CPU") return Residency::Cpu;
  if (s == "gpu" || s == "GPU") return Residency::Gpu;
  throw ConfigError("residency must be cpu or gpu, got '" + s + "'");
}

MemOp op_from(const std::string& s) {
  if (s == "r" || s == "R" || s == "read") return MemOp::Read;
  if (s == "w" || s == "W" || s == "write") return MemOp::Write;
  if (s == "a" || s == "A" || s == "atomic") return MemOp::Atomic;
  throw ConfigError("op must be read, write or atomic, got '" + s + "'");
}

std::string run_scenario_text(const std::string& text, const std::string& base_dir) {
  std::istringstream in(text);
  return to_json(execute(parse_scenario(in, "<python>", base_dir)));
}

}  // namespace

PYBIND11_MODULE(_umsim, m) {
  m.doc() = "Unified-memory CPU-GPU simulator core";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<OutOfMemory> oom_error(m, "OutOfMemory", PyExc_MemoryError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const OutOfMemory& e) {
      py::set_error(oom_error, e.what());
    } catch (const AllocationFailure& e) {
      py::set_error(oom_error, e.what());
    } catch (const CapacityError& e) {
      py::set_error(oom_error, e.what());
    } catch (const Error& e) {
      py::set_error(config_error, e.what());
    }
  });

  m.def("run_scenario_file", [](const std::string& path) { return to_json(execute(load_scenario(path))); },
        py::arg("path"), "Runs a scenario file; returns the report as JSON text.");
  m.def("run_scenario_text", &run_scenario_text, py::arg("text"), py::arg("base_dir") = ".",
        "Runs scenario text; returns the report as JSON text.");

  m.def(
      "resolve_access",
      [](const std::string& agent, const std::string& op, Bytes size, const std::string& residency) {
        MachineConfig cfg;
        AccessEvent ev{named(agent_from(agent), "agent", agent), op_from(op), MemorySystem::kVirtualBase, size,
                       PhaseTag::compute(0)};
        const auto r = resolve_access(ev, residency_from(residency), cfg);
        const char* from = r.serviced_from == ServicedFrom::LocalCpu   ? "local_cpu"
                           : r.serviced_from == ServicedFrom::LocalGpu ? "local_gpu"
                                                                       : "remote";
        py::dict d;
        d["serviced_from"] = from;
        d["bytes_on_wire"] = r.bytes_on_wire;
        d["elapsed_s"] = r.elapsed;
        d["wrote_back"] = r.wrote_back;
        return d;
      },
      py::arg("agent"), py::arg("op"), py::arg("size"), py::arg("residency"),
      "Cost of one access on the default machine.");

  m.def(
      "cost_of_migration",
      [](Bytes bytes, const std::string& dir) {
        return cost_of_migration(bytes, named(direction_from(dir), "direction", dir), MachineConfig{});
      },
      py::arg("bytes"), py::arg("direction"));

  m.def(
      "setup_oversubscription",
      [](double ratio, Bytes m_peak) {
        const auto s = setup_oversubscription(ratio, m_peak, MachineConfig{});
        py::dict d;
        d["reserved_bytes"] = s.reserved_bytes;
        d["m_peak"] = s.m_peak;
        d["m_gpu"] = s.m_gpu;
        d["r_oversub"] = s.r_oversub;
        return d;
      },
      py::arg("ratio"), py::arg("m_peak"));

  m.def("statevector_bytes", &statevector_bytes, py::arg("n_qubits"));

  m.def(
      "compare_reports",
      [](const std::vector<std::string>& reports) {
        std::vector<SimulationReport> rs;
        for (const auto& r : reports) rs.push_back(report_from_json(r));
        return compare_csv(compare(rs));
      },
      py::arg("reports"), "Speedup table (CSV text) of JSON reports against the first.");
}
