// usvplan: plan, track, bench and project subcommands over scenario files.
//
// Exit codes: 0 success, 1 other failure, 2 parse/validation error,
// 3 planning failure, 4 solver failure, 5 collision in execution.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "usvplan/harness.hpp"
#include "usvplan/svg.hpp"

using namespace usvplan;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kOther = 1, kParse = 2, kPlanning = 3, kSolver = 4, kCollision = 5 };

struct Common {
  std::string out_dir = "out";
  std::optional<int> seed;
  bool svg = true;
};

const char* const kColors[] = {"#d62728", "#ff7f0e", "#2ca02c", "#1f77b4"};

SvgStyle style_of(Variant v) { return {tag(v), kColors[static_cast<int>(v)]}; }

/// A file name fragment without '+'.
std::string slug(Variant v) {
  std::string s = tag(v);
  std::replace(s.begin(), s.end(), '+', '_');
  return s;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

int exit_for(Stage s) {
  switch (s) {
    case Stage::kPlan:
      return kPlanning;
    case Stage::kOptimize:
      return kSolver;
    case Stage::kTrack:
      return kOther;
    case Stage::kSafety:
      return kCollision;
  }
  return kOther;
}

/// Most severe code: collision, then solver, planning, other.
int worst_exit(const std::vector<BenchReport>& reports) {
  int code = kOk;
  auto rank = [](int c) {
    switch (c) {
      case kCollision:
        return 4;
      case kSolver:
        return 3;
      case kPlanning:
        return 2;
      case kOther:
        return 1;
      default:
        return 0;
    }
  };
  for (const auto& rep : reports)
    for (const auto& r : rep.results)
      if (!r.ok) {
        const int c = r.failed_stage ? exit_for(*r.failed_stage) : kOther;
        if (rank(c) > rank(code)) code = c;
      }
  return code;
}

/// Input-file readers throw runtime_error; report those as parse failures.
template <class F>
auto parsing(F&& read) {
  try {
    return read();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
}

Scenario load(const std::string& path, const Common& c, bool full_size) {
  Scenario s = load_scenario(path, c.seed);
  if (full_size) s = rescale_scenario(s, 200.0, 100.0);
  return s;
}

std::vector<std::string> scenario_files(const std::vector<std::string>& args) {
  std::vector<std::string> files;
  for (const auto& a : args) {
    if (fs::is_directory(a)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(a))
        if (e.is_regular_file() && e.path().extension() == ".scn") found.push_back(e.path().string());
      std::sort(found.begin(), found.end());
      if (found.empty()) throw ConfigError(a + ": no .scn files");
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(a);
    }
  }
  return files;
}

// ---------------------------------------------------------------------------

int cmd_plan(const std::string& path, const std::string& variant_tag, bool full_size, const Common& c) {
  const auto v = parse_variant(variant_tag);
  if (!v) throw ConfigError("--variant: unknown tag '" + variant_tag + "'");
  const Scenario s = load(path, c, full_size);
  fs::create_directories(c.out_dir);
  const fs::path dir = c.out_dir;

  std::vector<SvgOverlay> overlays;
  if (*v == Variant::kLop) {
    // Limited perception plans online; the plan is the sequence of segments.
    const VariantResult r = run_variant(s, *v);
    if (!r.ok) {
      std::cerr << "plan: " << r.message << "\n";
      return r.failed_stage ? exit_for(*r.failed_stage) : kOther;
    }
    for (std::size_t k = 0; k < r.paths.size(); ++k) {
      save_path_csv((dir / ("path_" + std::to_string(k) + ".csv")).string(), r.paths[k]);
      overlays.push_back(SvgOverlay::of(r.paths[k], {"segment " + std::to_string(k), "#999999", 1.0, true}));
    }
    save_trajectory_csv((dir / "trajectory.csv").string(), r.executed);
    overlays.push_back(SvgOverlay::of(r.executed, style_of(*v)));
    std::cout << "LOP: " << r.paths.size() << " segments, executed length " << fixed(r.metrics.length, 2) << " m\n";
  } else {
    GlobalStages g = plan_global(s);
    if (!g.path) {
      std::cerr << "plan: " << g.error << "\n";
      return kPlanning;
    }
    save_path_csv((dir / "path.csv").string(), *g.path);
    overlays.push_back(SvgOverlay::of(*g.path, {"path", "#999999", 1.0, true}));
    const Trajectory* out = &g.reference;
    if (*v != Variant::kGpLop) {
      optimize_global(s, g);
      if (!g.optimized->ok()) {
        std::cerr << "plan: " << g.error << "\n";
        return kSolver;
      }
      out = &g.optimized->trajectory;
    }
    save_trajectory_csv((dir / "trajectory.csv").string(), *out);
    overlays.push_back(SvgOverlay::of(*out, style_of(*v)));
    std::cout << tag(*v) << ": path " << fixed(g.path->length, 2) << " m, trajectory " << out->size() << " knots, "
              << fixed(out->planar_length(), 2) << " m";
    if (g.optimized) std::cout << ", max defect " << g.optimized->max_defect;
    std::cout << "\ntimings: plan " << fixed(g.plan_ms, 0) << " ms, optimize " << fixed(g.optimize_ms, 0) << " ms\n";
  }
  if (c.svg) write_file(dir / "plan.svg", render_svg(s.grid, overlays));
  return kOk;
}

int cmd_track(const std::string& path, const std::string& traj_file, const std::string& controller,
              const Common& c) {
  const Scenario s = load(path, c, false);
  const Trajectory ref = parsing([&] { return load_trajectory_csv(traj_file); });
  ControllerConfig ctrl;
  if (controller == "nmpc")
    ctrl = s.nmpc;
  else if (controller == "pid")
    ctrl = s.pid;
  else
    throw ConfigError("--controller: expected nmpc or pid");

  const double cdt = controller_dt(ctrl);
  TrackingLog log;
  try {
    log = run_tracking(ref, ref.state(0), ctrl, s.hull, s.sim_dt,
                       harness_detail::tracking_duration(ref, 2.0, cdt), &s.grid);
  } catch (const TrackingError& e) {
    std::cerr << "track: " << e.what() << "\n";
    return kOther;
  }
  fs::create_directories(c.out_dir);
  const fs::path dir = c.out_dir;
  {
    std::ofstream out(dir / "tracking.csv", std::ios::binary);
    write_tracking_csv(out, log);
  }
  const Metrics m = trajectory_metrics(log.executed, harness_detail::tracked_states(ref, log));
  const int hits = harness_detail::count_collisions(log.executed, s);
  std::cout << controller << ": rmse " << fixed(m.rmse, 4) << " m, max error " << fixed(m.max_error, 4)
            << " m, length " << fixed(m.length, 2) << " m, degraded steps " << log.degraded_steps
            << ", collisions " << hits << "\n";
  if (c.svg)
    write_file(dir / "track.svg", render_svg(s.grid, {SvgOverlay::of(ref, {"reference", "#999999", 1.0, true}),
                                                      SvgOverlay::of(log.executed, {controller, "#1f77b4"})}));
  return hits > 0 ? kCollision : kOk;
}

int cmd_bench(const std::vector<std::string>& args, const std::vector<std::string>& tags, bool full_size,
              unsigned threads, const Common& c) {
  std::vector<Variant> variants;
  for (const auto& t : tags) {
    const auto v = parse_variant(t);
    if (!v) throw ConfigError("--variants: unknown tag '" + t + "'");
    variants.push_back(*v);
  }
  if (variants.empty()) variants = all_variants();

  std::vector<Scenario> scenarios;
  for (const auto& f : scenario_files(args)) scenarios.push_back(load(f, c, full_size));
  std::vector<const Scenario*> ptrs;
  for (const auto& s : scenarios) ptrs.push_back(&s);

  const auto t0 = std::chrono::steady_clock::now();
  const auto reports = run_suite(ptrs, variants, threads);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  fs::create_directories(c.out_dir);
  const fs::path dir = c.out_dir;
  {
    std::ofstream out(dir / "report.csv", std::ios::binary);
    write_report_csv(out, reports);
  }
  write_file(dir / "table.txt", render_table(reports));
  const std::string timed = render_table(reports, true);
  write_file(dir / "timings.txt", timed + "wall_s " + fixed(wall, 3) + "\n");

  for (std::size_t i = 0; i < reports.size(); ++i) {
    std::vector<SvgOverlay> overlays;
    for (const auto& r : reports[i].results) {
      if (r.executed.empty()) continue;
      save_trajectory_csv((dir / (reports[i].scenario + "_" + slug(r.variant) + ".csv")).string(), r.executed);
      overlays.push_back(SvgOverlay::of(r.executed, style_of(r.variant)));
    }
    if (c.svg) write_file(dir / (reports[i].scenario + ".svg"), render_svg(scenarios[i].grid, overlays));
  }

  std::cout << timed << "wall " << fixed(wall, 1) << " s\n";
  for (const auto& rep : reports)
    for (const auto& r : rep.results)
      if (!r.ok) std::cerr << rep.scenario << " " << tag(r.variant) << ": " << r.message << "\n";
  return worst_exit(reports);
}

int cmd_project(const std::string& mask_file, const std::string& camera_file, const std::string& out_file,
                double width, double height, double resolution, double origin_x, double origin_y, double inflation,
                const Common& c) {
  const SegMask mask = parsing([&] { return load_pgm_mask(mask_file); });
  const CameraModel cam = load_camera(camera_file);
  OccupancyGrid grid;
  try {
    GridSpec spec = GridSpec::covering(width, height, resolution);
    spec.origin_x = origin_x;
    spec.origin_y = origin_y;
    spec.validate();
    grid = mask_to_grid(mask, cam.intrinsics, cam.pose, spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (inflation > 0.0) grid = inflate(grid, inflation);
  if (fs::path(out_file).has_parent_path()) fs::create_directories(fs::path(out_file).parent_path());
  save_grid(out_file, grid);
  std::cout << "grid " << grid.ncols() << "x" << grid.nrows() << ", occupied " << occupied_cells(grid) << ", unknown "
            << std::count(grid.cells().begin(), grid.cells().end(), Cell::kUnknown) << "\n";
  if (c.svg) {
    fs::path svg = out_file;
    svg.replace_extension(".svg");
    write_file(svg, render_svg(grid, {}));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"USV global planning, trajectory optimisation and tracking"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  int seed = 0;
  app.add_option("--out-dir", common.out_dir, "Directory for output files")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "Override the scenario seed");
  app.add_flag("--svg,!--no-svg", common.svg, "Write SVG renders (default on)");

  std::string scenario, variant = "GOP+LOP", trajectory, controller = "nmpc";
  bool full_size = false;
  auto* plan = app.add_subcommand("plan", "Global plan (and optimisation) for one variant");
  plan->add_option("scenario", scenario, "Scenario file")->required();
  plan->add_option("--variant", variant, "LOP | GP+LOP | GOP+LOP | GOP+LP")->capture_default_str();
  plan->add_flag("--full-size", full_size, "Stretch the scenario to 200 x 100 m");

  auto* track = app.add_subcommand("track", "Track a trajectory file in a scenario");
  track->add_option("scenario", scenario, "Scenario file")->required();
  track->add_option("--trajectory", trajectory, "Trajectory CSV")->required();
  track->add_option("--controller", controller, "nmpc | pid")->capture_default_str();

  std::vector<std::string> bench_args, tags;
  unsigned threads = default_threads();
  auto* bench = app.add_subcommand("bench", "Ablation over scenarios and variants");
  bench->add_option("scenarios", bench_args, "Scenario files or directories")->required();
  bench->add_option("--variants", tags, "Variant tags (default all)");
  bench->add_flag("--full-size", full_size, "Stretch every scenario to 200 x 100 m");
  bench->add_option("--threads", threads, "Worker threads")->capture_default_str();

  std::string mask, camera, out;
  double width = 200.0, height = 100.0, resolution = 0.5, origin_x = 0.0, origin_y = 0.0, inflation = 0.0;
  auto* project = app.add_subcommand("project", "Project a segmentation mask to an occupancy grid");
  project->add_option("--mask", mask, "PGM mask")->required();
  project->add_option("--camera", camera, "Camera file")->required();
  project->add_option("--out", out, "Output grid file")->required();
  project->add_option("--width", width, "Grid width (m)")->capture_default_str();
  project->add_option("--height", height, "Grid height (m)")->capture_default_str();
  project->add_option("--resolution", resolution, "Cell size (m)")->capture_default_str();
  project->add_option("--origin-x", origin_x, "Grid origin x (m)")->capture_default_str();
  project->add_option("--origin-y", origin_y, "Grid origin y (m)")->capture_default_str();
  project->add_option("--inflate", inflation, "Inflation radius (m)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kParse;
  }
  if (*seed_opt) common.seed = seed;

  try {
    if (*plan) return cmd_plan(scenario, variant, full_size, common);
    if (*track) return cmd_track(scenario, trajectory, controller, common);
    if (*bench) return cmd_bench(bench_args, tags, full_size, threads, common);
    if (*project)
      return cmd_project(mask, camera, out, width, height, resolution, origin_x, origin_y, inflation, common);
  } catch (const ConfigError& e) {
    std::cerr << "usvplan: " << e.what() << "\n";
    return kParse;
  } catch (const std::exception& e) {
    std::cerr << "usvplan: " << e.what() << "\n";
    return kOther;
  }
  return kOther;
}
