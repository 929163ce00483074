#include "umsim/cli.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <thread>

#include <CLI11.hpp>

#include "umsim/error.hpp"
#include "umsim/report_io.hpp"
#include "umsim/scenario.hpp"

#ifndef UMSIM_PRESETS_DIR
#define UMSIM_PRESETS_DIR "presets"
#endif

namespace fs = std::filesystem;

namespace umsim {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const AllocationFailure*>(&e) || dynamic_cast<const OutOfMemory*>(&e) ||
      dynamic_cast<const CapacityError*>(&e))
    return kExitOom;
  return kExitConfig;
}

namespace {

struct Overrides {
  std::string out;
  std::string seed;
  std::string sampling_ms;
  std::string page_size;
  std::string threshold;
  std::string allocator;
  std::string oversub;
  std::string presets_dir = UMSIM_PRESETS_DIR;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--seed", o.seed, "Run seed");
  cmd->add_option("--sampling-ms", o.sampling_ms, "Profiler sampling period in ms (default 100)");
  cmd->add_option("--page-size", o.page_size, "System page size: 4k or 64k");
  cmd->add_option("--threshold", o.threshold, "Access-counter threshold, or off");
  cmd->add_option("--allocator", o.allocator, "Override buffer allocator: system or managed");
  cmd->add_option("--oversub", o.oversub, "Oversubscription ratio, or none");
  cmd->add_option("--presets-dir", o.presets_dir, "Where preset scenarios live");
}

fs::path resolve_scenario(const std::string& arg, const Overrides& o) {
  if (fs::exists(arg)) return arg;
  const fs::path preset = fs::path(o.presets_dir) / (arg + ".scenario");
  if (fs::exists(preset)) return preset;
  throw ConfigError("scenario '" + arg + "' is neither a file nor a preset in " + o.presets_dir);
}

Scenario load_with_overrides(const std::string& arg, const Overrides& o) {
  Scenario s = load_scenario(resolve_scenario(arg, o));
  if (!o.page_size.empty()) {
    if (o.page_size != "4k" && o.page_size != "64k" && o.page_size != "4096" && o.page_size != "65536")
      throw ConfigError("--page-size must be 4k or 64k");
    s = with_axis_value(s, SweepAxis::PageSize, o.page_size);
  }
  if (!o.threshold.empty()) s = with_axis_value(s, SweepAxis::Threshold, o.threshold);
  if (!o.allocator.empty()) s = with_axis_value(s, SweepAxis::Allocator, o.allocator);
  if (!o.oversub.empty()) s = with_axis_value(s, SweepAxis::OversubRatio, o.oversub);
  if (!o.seed.empty()) {
    if (o.seed.find_first_not_of("0123456789") != std::string::npos || o.seed.size() > 19)
      throw ConfigError("--seed must be a non-negative integer");
    s.seed = std::stoull(o.seed);
  }
  if (!o.sampling_ms.empty()) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(o.sampling_ms, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != o.sampling_ms.size() || !(v > 0)) throw ConfigError("--sampling-ms must be a positive number");
    s.sampling_ms = v;
  }
  if (!o.out.empty()) s.out = o.out;
  return s;
}

int cmd_run(const std::string& scenario, const Overrides& o, std::ostream& out) {
  const Scenario s = load_with_overrides(scenario, o);
  const SimulationReport r = execute(s);
  write_report(r, s.out);
  out << summary_line(r) << " out=" << s.out << '\n';
  return kExitOk;
}

std::string point_dir_name(SweepAxis axis, const std::string& value) {
  std::string v = value;
  for (char& c : v) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '_';
  }
  return std::string(to_string(axis)) + "-" + v;
}

int cmd_sweep(const std::string& scenario, const std::string& axis_arg, const std::vector<std::string>& values_arg,
              unsigned jobs, const Overrides& o, std::ostream& out, std::ostream& err) {
  const Scenario base = load_with_overrides(scenario, o);
  SweepSpec sw;
  if (base.sweep) sw = *base.sweep;
  if (!axis_arg.empty()) {
    auto a = sweep_axis_from(axis_arg);
    if (!a) throw ConfigError("--axis must be page_size, threshold, oversub_ratio or allocator");
    sw.axis = *a;
    if (values_arg.empty() && !(base.sweep && base.sweep->axis == *a))
      throw ConfigError("--axis given without --values");
  }
  if (!values_arg.empty()) sw.values = values_arg;
  if (sw.values.empty()) throw ConfigError("nothing to sweep: give [sweep] in the scenario or --axis/--values");

  std::vector<Scenario> points;
  for (const auto& v : sw.values) {
    Scenario p = with_axis_value(base, sw.axis, v);
    p.out = (fs::path(base.out) / point_dir_name(sw.axis, v)).string();
    points.push_back(std::move(p));
  }

  struct Result {
    int code = 0;
    std::string message;
    std::optional<SimulationReport> report;
  };
  std::vector<Result> results(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < points.size();) {
      try {
        auto r = execute(points[i]);
        write_report(r, points[i].out);
        results[i].report = std::move(r);
      } catch (const std::exception& e) {
        results[i].code = exit_code_for(e);
        results[i].message = e.what();
      }
    }
  };
  jobs = std::clamp<unsigned>(jobs, 1, static_cast<unsigned>(points.size()));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::string csv = "value,total_time_s,t_init_s,t_compute_s,t_dealloc_s,c2c_bytes,status\n";
  int code = kExitOk;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& res = results[i];
    const auto& v = sw.values[i];
    if (res.report) {
      const auto& t = res.report->timings;
      csv += v + ',' + format_number(t.total()) + ',' + format_number(t.t_init) + ',' + format_number(t.t_compute) +
             ',' + format_number(t.t_dealloc) + ',' + std::to_string(res.report->traffic.c2c_total()) + ",ok\n";
      out << to_string(sw.axis) << '=' << v << ' ' << summary_line(*res.report) << '\n';
    } else {
      csv += v + ",,,,,,exit_" + std::to_string(res.code) + '\n';
      err << "sweep point " << to_string(sw.axis) << '=' << v << " failed: " << res.message << '\n';
      code = std::max(code, res.code);
    }
  }
  fs::create_directories(base.out);
  std::ofstream f(fs::path(base.out) / "sweep.csv", std::ios::binary);
  if (!f) throw ConfigError("cannot write sweep.csv in '" + base.out + "'");
  f << csv;
  return code;
}

int cmd_compare(const std::vector<std::string>& paths, const std::string& out_dir, std::ostream& out) {
  if (paths.size() < 2) throw UsageError("compare needs at least two reports");
  std::vector<SimulationReport> reports;
  for (const auto& p : paths) {
    fs::path path(p);
    if (fs::is_directory(path)) path /= "report.json";
    reports.push_back(load_report(path));
  }
  const auto rows = compare(reports);
  const fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  fs::create_directories(dir);
  std::ofstream f(dir / "compare.csv", std::ios::binary);
  if (!f) throw ConfigError("cannot write compare.csv in '" + dir.string() + "'");
  f << compare_csv(rows);

  out << std::left << std::setw(12) << "metric";
  for (std::size_t i = 0; i < reports.size(); ++i) out << std::setw(18) << ("[" + std::to_string(i) + "] " + reports[i].allocator);
  out << '\n';
  for (std::size_t k = 0; k < rows.size(); k += reports.size()) {
    out << std::setw(12) << rows[k].metric;
    for (std::size_t i = 0; i < reports.size(); ++i) out << std::setw(18) << format_number(rows[k + i].speedup);
    out << '\n';
  }
  return kExitOk;
}

int cmd_presets_list(const Overrides& o, std::ostream& out) {
  for (const auto& p : list_presets(o.presets_dir)) out << std::left << std::setw(20) << p.name << p.description << '\n';
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unified-memory CPU-GPU simulator", "umsim"};
  app.require_subcommand(1);

  Overrides o;
  std::string scenario;

  auto* run = app.add_subcommand("run", "Run one scenario and write its report");
  run->add_option("scenario", scenario, "Scenario file or preset name")->required();
  add_common(run, o);

  std::string axis;
  std::vector<std::string> values;
  unsigned jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Run a scenario once per value of one axis");
  sweep->add_option("scenario", scenario, "Scenario file or preset name")->required();
  sweep->add_option("--axis", axis, "page_size, threshold, oversub_ratio or allocator");
  sweep->add_option("--values", values, "Comma-separated axis values")->delimiter(',');
  sweep->add_option("--jobs", jobs, "Points run in parallel");
  add_common(sweep, o);

  std::vector<std::string> reports;
  std::string compare_out;
  auto* cmp = app.add_subcommand("compare", "Speedups of reports against the first one");
  cmp->add_option("reports", reports, "report.json files or run directories");
  cmp->add_option("--out", compare_out, "Directory for compare.csv");

  auto* presets = app.add_subcommand("presets", "Bundled scenarios");
  auto* list = presets->add_subcommand("list", "List bundled scenarios");
  list->add_option("--presets-dir", o.presets_dir, "Where preset scenarios live");
  presets->require_subcommand(1);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "umsim: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(scenario, o, out);
    if (sweep->parsed()) return cmd_sweep(scenario, axis, values, jobs, o, out, err);
    if (cmp->parsed()) return cmd_compare(reports, compare_out, out);
    if (list->parsed()) return cmd_presets_list(o, out);
  } catch (const std::exception& e) {
    err << "umsim: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitConfig;
}

}  // namespace umsim
