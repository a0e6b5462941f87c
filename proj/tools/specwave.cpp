// specwave: command-line driver for meshing, simulation and validation runs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "specwave/specwave.hpp"

namespace fs = std::filesystem;
using namespace specwave;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitConfig = 2;

int default_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return int(std::max(1u, std::thread::hardware_concurrency()));
#endif
}

struct Options {
  std::string config;
  int threads = 0;
  std::string out;
  long snapshot_every = -1;
  bool hu_snap = false;
  bool builtin = false;
};

struct Loaded {
  SimulationConfig cfg;
  std::string text;
  std::string hash;
};

Loaded load(const Options& o) {
  if (o.config.empty()) throw Error(ErrorKind::Config, "--config is required");
  std::ifstream f(o.config);
  if (!f) throw Error(ErrorKind::Config, "cannot open config file " + o.config);
  std::stringstream ss;
  ss << f.rdbuf();
  Loaded l;
  l.text = ss.str();
  std::istringstream is(l.text);
  l.cfg = parse_config(is, fs::path(o.config).parent_path());
  l.hash = config_hash(serialize_config(l.cfg));
  return l;
}

int threads_of(const Options& o) { return o.threads > 0 ? o.threads : default_threads(); }

fs::path out_dir(const Options& o, const SimulationConfig& c) { return o.out.empty() ? fs::path(c.output_dir) : fs::path(o.out); }

void print(const Manifest& m) {
  for (const auto& [k, v] : m) std::cout << k << '=' << v << '\n';
}

void save_report(const fs::path& dir, const std::string& name, const Manifest& m) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + dir.string());
  write_manifest(dir / name, m);
}

bool passed(const Manifest& m) {
  for (const auto& [k, v] : m)
    if (k == "pass") return v == "true";
  return false;
}

int cmd_run(const Options& o) {
  const auto l = load(o);
  const auto in = build_simulation(l.cfg, o.hu_snap, threads_of(o));
  OutputOptions out;
  out.dir = out_dir(o, l.cfg);
  out.snapshot_every = o.snapshot_every >= 0 ? o.snapshot_every : l.cfg.snapshot_every;
  out.extra = applied_defaults(l.cfg);
  out.extra.push_back({"config_hash", l.hash});
  const auto res = run_simulation(in, out);
  std::cout << "steps " << res.grid.n_steps << ", dt " << format_double(res.grid.dt) << " s, wall "
            << format_double(res.wall_seconds) << " s, output in " << out.dir.string() << '\n';
  return kExitOk;
}

int cmd_mesh(const Options& o) {
  const auto l = load(o);
  const auto table = build_material_table(l.cfg);
  const auto mesh = build_mesh(l.cfg, table, o.hu_snap);
  const auto q = quality_statistics(mesh);
  std::cout << "elements=" << mesh.num_elements() << '\n'
            << "nodes=" << mesh.nodes.size() << '\n'
            << "scaled_jacobian_min=" << format_double(q.min) << '\n'
            << "scaled_jacobian_max=" << format_double(q.max) << '\n'
            << "scaled_jacobian_average=" << format_double(q.average) << '\n'
            << "scaled_jacobian_std=" << format_double(q.std_dev) << '\n';
  for (int e : q.warnings)
    std::cerr << "warning: element " << e << " has scaled Jacobian below " << kQualityWarnThreshold << '\n';
  quality_report(mesh);
  const fs::path dir = out_dir(o, l.cfg);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + dir.string());
  write_shex1_file((dir / "mesh.shex").string(), mesh);
  std::cout << "mesh written to " << (dir / "mesh.shex").string() << '\n';
  return kExitOk;
}

int cmd_materials(const Options& o) {
  MaterialTable t;
  if (o.builtin) {
    t = builtin_dolphin_table();
  } else if (!o.config.empty()) {
    t = build_material_table(load(o).cfg);
  } else {
    throw Error(ErrorKind::Config, "materials needs --builtin or --config");
  }
  std::cout << "# id name rho vp vs hu_min hu_max\n";
  write_smat1(std::cout, t);
  return kExitOk;
}

int cmd_info(const Options& o) {
  const auto l = load(o);
  const auto table = build_material_table(l.cfg);
  const auto mesh = build_mesh(l.cfg, table, o.hu_snap);
  const GllRule rule = gll_rule(l.cfg.degree);
  const WaveOperators ops(mesh, table, rule, threads_of(o));
  const auto grid = compute_dt(mesh, table, rule, l.cfg.courant, l.cfg.t_end.value_or(0.0));
  Manifest m{{"elements", std::to_string(mesh.num_elements())},
             {"nodes", std::to_string(mesh.nodes.size())},
             {"degree", std::to_string(l.cfg.degree)},
             {"courant", format_double(l.cfg.courant)},
             {"dofs_fluid", std::to_string(ops.dofs().num_fluid)},
             {"dofs_solid", std::to_string(ops.dofs().num_solid)},
             {"dofs_interface", std::to_string(ops.dofs().num_interface)},
             {"coupling_faces", std::to_string(ops.num_coupling_faces())},
             {"min_gll_spacing", format_double(min_gll_spacing(mesh, rule))},
             {"dt", format_double(grid.dt)}};
  if (l.cfg.t_end) {
    m.push_back({"t_end", format_double(*l.cfg.t_end)});
    m.push_back({"n_steps", std::to_string(grid.n_steps)});
  }
  m.push_back({"config_hash", l.hash});
  print(m);
  return kExitOk;
}

int cmd_reciprocity(const Options& o) {
  const auto l = load(o);
  if (!l.cfg.reciprocity) throw Error(ErrorKind::Config, "config has no [reciprocity] section");
  if (!l.cfg.t_end) throw Error(ErrorKind::Config, "[solver] t_end is required");
  const auto& rs = *l.cfg.reciprocity;
  ReciprocitySetup s;
  s.table = build_material_table(l.cfg);
  s.mesh = build_mesh(l.cfg, s.table, o.hu_snap);
  s.run = {l.cfg.degree, l.cfg.courant, threads_of(o)};
  s.t_end = *l.cfg.t_end;
  s.r1 = rs.r1;
  s.r2 = rs.r2;
  s.kind = rs.kind;
  s.direction = rs.direction;
  s.stf = rs.stf.build();
  const auto r = reciprocity_test(s);
  const auto report = reciprocity_report(r, rs.threshold_db, l.hash);
  print(report);
  const fs::path dir = out_dir(o, l.cfg);
  save_report(dir, "reciprocity.txt", report);
  Seismogram traces;
  traces.time = r.time;
  traces.names = {"trace_12", "trace_21"};
  traces.channels = {r.trace_12, r.trace_21};
  std::ofstream f(dir / "reciprocity.csv");
  write_csv(f, traces);
  if (!f) throw Error(ErrorKind::Io, "cannot write reciprocity.csv");
  return passed(report) ? kExitOk : kExitValidation;
}

int cmd_oracle(const Options& o) {
  const auto l = load(o);
  if (!l.cfg.oracle) throw Error(ErrorKind::Config, "config has no [oracle] section");
  const auto& os = *l.cfg.oracle;
  GreensSetup s;
  s.table = build_material_table(l.cfg);
  s.mesh = build_mesh(l.cfg, s.table, o.hu_snap);
  s.run = {l.cfg.degree, l.cfg.courant, threads_of(o)};
  s.source = os.source;
  s.receiver = os.receiver;
  s.stf = os.stf.build();
  s.min_points_per_wavelength = os.min_points_per_wavelength;
  const auto g = greens_oracle_test(s);
  const auto report = greens_report(g, os.tolerance, l.hash);
  print(report);
  const fs::path dir = out_dir(o, l.cfg);
  save_report(dir, "oracle.txt", report);
  Seismogram traces;
  traces.time = g.time;
  traces.names = {"numeric_p", "analytic_p"};
  traces.channels = {g.numeric, g.analytic};
  std::ofstream f(dir / "oracle.csv");
  write_csv(f, traces);
  if (!f) throw Error(ErrorKind::Io, "cannot write oracle.csv");
  return passed(report) ? kExitOk : kExitValidation;
}

int cmd_converge(const Options& o) {
  const auto l = load(o);
  if (!l.cfg.converge) throw Error(ErrorKind::Config, "config has no [converge] section");
  const auto& cs = *l.cfg.converge;
  ConvergenceSetup s;
  s.table = build_material_table(l.cfg);
  s.material = resolve_material(s.table, cs.material);
  s.length = cs.length;
  s.elements = cs.elements;
  s.degrees = cs.degrees;
  s.courant = l.cfg.courant;
  s.threads = threads_of(o);
  s.periods = cs.periods;
  const auto c = convergence_study(s);
  const auto report = convergence_report(c, cs.min_ratio, l.hash);
  print(report);
  save_report(out_dir(o, l.cfg), "converge.txt", report);
  return passed(report) ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral-element solver for coupled acoustic/elastic waves"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool threads, bool out, bool hu) {
    sub->add_option("--config", o.config, "Simulation config file")->required();
    if (threads) sub->add_option("--threads", o.threads, "Worker threads (default: all)")->check(CLI::PositiveNumber);
    if (out) sub->add_option("--out", o.out, "Output directory");
    if (hu) sub->add_flag("--hu-snap", o.hu_snap, "Assign out-of-range HU values to the nearest tissue");
  };
  auto* run = app.add_subcommand("run", "Run a simulation");
  add_common(run, true, true, true);
  run->add_option("--snapshot-every", o.snapshot_every, "Snapshot interval in steps (0: none)")
      ->check(CLI::NonNegativeNumber);
  auto* mesh = app.add_subcommand("mesh", "Build the mesh and report its quality");
  add_common(mesh, false, true, true);
  auto* materials = app.add_subcommand("materials", "Print a material table");
  materials->add_flag("--builtin", o.builtin, "Print the built-in tissue table");
  materials->add_option("--config", o.config, "Print the table of a config file");
  auto* reciprocity = app.add_subcommand("reciprocity", "Source/receiver swap test");
  add_common(reciprocity, true, true, true);
  auto* converge = app.add_subcommand("converge", "Spectral convergence study");
  add_common(converge, true, true, false);
  auto* oracle = app.add_subcommand("oracle", "Compare with the analytic Green's function");
  add_common(oracle, true, true, true);
  auto* info = app.add_subcommand("info", "Mesh, DOF and time-step summary");
  add_common(info, true, false, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(o);
    if (*mesh) return cmd_mesh(o);
    if (*materials) return cmd_materials(o);
    if (*reciprocity) return cmd_reciprocity(o);
    if (*converge) return cmd_converge(o);
    if (*oracle) return cmd_oracle(o);
    if (*info) return cmd_info(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::BlowUp ? kExitValidation : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
