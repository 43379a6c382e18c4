#pragma once

// Pipeline variants and the ablation runner.
//
//   LOP      limited sensing disc, replan on discovery, short local
//            optimisation windows, NMPC tracking
//   GP+LOP   global search, NMPC tracking the raw time-parameterised path
//   GOP+LOP  global search, trajectory optimisation, NMPC tracking
//   GOP+LP   global search, trajectory optimisation, PID tracking

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "usvplan/hybrid_astar.hpp"
#include "usvplan/scenario.hpp"
#include "usvplan/tracking_control.hpp"
#include "usvplan/trajectory_optimizer.hpp"

namespace usvplan {

enum class Variant { kLop, kGpLop, kGopLop, kGopLp };

inline const char* tag(Variant v) {
  switch (v) {
    case Variant::kLop:
      return "LOP";
    case Variant::kGpLop:
      return "GP+LOP";
    case Variant::kGopLop:
      return "GOP+LOP";
    case Variant::kGopLp:
      return "GOP+LP";
  }
  return "?";
}

inline const char* description(Variant v) {
  switch (v) {
    case Variant::kLop:
      return "limited-perception replanning, local optimisation, NMPC";
    case Variant::kGpLop:
      return "global search, raw reference, NMPC";
    case Variant::kGopLop:
      return "global search, optimised trajectory, NMPC";
    case Variant::kGopLp:
      return "global search, optimised trajectory, PID";
  }
  return "";
}

inline std::vector<Variant> all_variants() { return {Variant::kLop, Variant::kGpLop, Variant::kGopLop, Variant::kGopLp}; }

inline std::optional<Variant> parse_variant(const std::string& s) {
  for (Variant v : all_variants())
    if (s == tag(v)) return v;
  return std::nullopt;
}

enum class Stage { kPlan, kOptimize, kTrack, kSafety };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::kPlan:
      return "plan";
    case Stage::kOptimize:
      return "optimize";
    case Stage::kTrack:
      return "track";
    case Stage::kSafety:
      return "safety";
  }
  return "?";
}

class StageError : public std::runtime_error {
 public:
  StageError(Stage s, const std::string& what) : std::runtime_error(std::string(to_string(s)) + ": " + what), stage(s) {}
  Stage stage;
};

struct Timings {
  double plan_ms = 0.0, optimize_ms = 0.0, track_ms = 0.0;
  double total() const { return plan_ms + optimize_ms + track_ms; }
};

struct VariantResult {
  Variant variant = Variant::kGopLop;
  bool ok = false;
  std::optional<Stage> failed_stage;
  std::string message;

  Trajectory executed;
  Trajectory tracked;               ///< reference state matched to each executed knot
  std::vector<PlannedPath> paths;   ///< every search result used (one unless LOP)
  Metrics metrics;                  ///< executed vs tracked
  double planned_length = 0.0;      ///< length of the tracked reference
  double max_defect = 0.0;          ///< worst optimizer defect, 0 when not optimised
  int replans = 0;
  int degraded_steps = 0;
  int collisions = 0;               ///< executed knots overlapping the uninflated grid
  Timings timings;
};

struct LopOptions {
  int local_knots = 150;      ///< optimisation window per segment
  double refresh_s = 10.0;    ///< replan at least this often
  double tail_s = 2.0;        ///< hold time after the final segment ends
  int max_segments = 200;
};

/// Stages shared by every global variant of one scenario.
struct GlobalStages {
  std::optional<PlannedPath> path;
  Trajectory reference;
  std::optional<OptimizeResult> optimized;
  std::string error;
  Stage error_stage = Stage::kPlan;
  double plan_ms = 0.0, optimize_ms = 0.0;
};

namespace harness_detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

inline SearchPose pose_of(const VesselState& x) { return {x.x, x.y, x.psi, Direction::kForward}; }

inline int count_collisions(const Trajectory& t, const Scenario& s) {
  int n = 0;
  for (const auto& k : t.knots)
    if (!collision_free(pose_of(k.state), s.grid, s.search.footprint, false)) ++n;
  return n;
}

inline Trajectory tracked_states(const Trajectory& reference, const TrackingLog& log) {
  Trajectory t;
  t.dt = log.executed.dt;
  for (std::size_t i : log.ref_index) t.knots.push_back(reference.knots[i]);
  return t;
}

inline double tracking_duration(const Trajectory& ref, double tail, double cdt) {
  return std::ceil((ref.duration() + tail) / cdt - 1e-9) * cdt;
}

inline void finish(VariantResult& r, const Scenario& s) {
  r.metrics = trajectory_metrics(r.executed, r.tracked);
  r.planned_length = r.tracked.planar_length();
  r.collisions = count_collisions(r.executed, s);
  if (r.collisions > 0) {
    r.ok = false;
    r.failed_stage = Stage::kSafety;
    r.message = std::to_string(r.collisions) + " executed knots overlap obstacles";
    return;
  }
  r.ok = true;
}

}  // namespace harness_detail

/// Global search (or the prescribed route) and its time parameterisation.
inline GlobalStages plan_global(const Scenario& s) {
  using namespace harness_detail;
  GlobalStages g;
  const auto t0 = Clock::now();
  if (!s.route.empty()) {
    PlannedPath p = route_path(s);
    for (const auto& q : p.poses)
      if (!collision_free(q, s.inflated, s.search.footprint, s.search.unknown_is_obstacle)) {
        g.error = "prescribed route collides";
        return g;
      }
    g.path = std::move(p);
  } else {
    g.path = search(s.start, s.goal, s.inflated, s.primitives, s.search);
    if (!g.path) {
      g.error = "no path to the goal";
      g.plan_ms = ms_since(t0);
      return g;
    }
  }
  g.reference = build_reference(*g.path, s.hull, s.cruise, s.ref_dt, s.start_state(), s.goal_state());
  g.plan_ms = ms_since(t0);
  return g;
}

inline void optimize_global(const Scenario& s, GlobalStages& g) {
  using namespace harness_detail;
  if (!g.path) return;
  const auto t0 = Clock::now();
  g.optimized = optimize(g.reference, s.start_state(), s.goal_state(), &s.inflated, s.hull, s.weights, s.optimizer);
  g.optimize_ms = ms_since(t0);
  if (!g.optimized->ok()) {
    g.error_stage = Stage::kOptimize;
    g.error = std::string(to_string(g.optimized->status)) + ": " + g.optimized->message;
  }
}

namespace harness_detail {

inline VariantResult run_global(const Scenario& s, Variant v, const GlobalStages& g) {
  VariantResult r;
  r.variant = v;
  r.timings.plan_ms = g.plan_ms;
  if (!g.path) throw StageError(Stage::kPlan, g.error);
  r.paths.push_back(*g.path);
  const Trajectory* ref = &g.reference;
  if (v != Variant::kGpLop) {
    r.timings.optimize_ms = g.optimize_ms;
    if (!g.optimized) throw StageError(Stage::kOptimize, "optimisation stage did not run");
    r.max_defect = g.optimized->max_defect;
    if (!g.optimized->ok()) throw StageError(Stage::kOptimize, g.error);
    ref = &g.optimized->trajectory;
  }
  const ControllerConfig ctrl = v == Variant::kGopLp ? ControllerConfig(s.pid) : ControllerConfig(s.nmpc);
  const double cdt = controller_dt(ctrl);
  const auto t0 = Clock::now();
  TrackingLog log;
  try {
    log = run_tracking(*ref, s.start_state(), ctrl, s.hull, s.sim_dt, tracking_duration(*ref, 2.0, cdt), &s.grid);
  } catch (const TrackingError& e) {
    throw StageError(Stage::kTrack, e.what());
  }
  r.timings.track_ms = ms_since(t0);
  r.degraded_steps = log.degraded_steps;
  r.tracked = tracked_states(*ref, log);
  r.executed = std::move(log.executed);
  finish(r, s);
  return r;
}

/// 4-connected labels of the occupied cells (-1 elsewhere).
inline std::vector<int> label_obstacles(const OccupancyGrid& g) {
  std::vector<int> label(g.cells().size(), -1);
  int next = 0;
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < g.nrows(); ++r)
    for (int c = 0; c < g.ncols(); ++c) {
      if (g.at(c, r) != Cell::kOccupied || label[static_cast<std::size_t>(r) * g.ncols() + c] >= 0) continue;
      stack.assign(1, {c, r});
      label[static_cast<std::size_t>(r) * g.ncols() + c] = next;
      while (!stack.empty()) {
        const auto [cc, rr] = stack.back();
        stack.pop_back();
        for (auto [dc, dr] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
          const int nc = cc + dc, nr = rr + dr;
          if (!g.inside(nc, nr) || g.at(nc, nr) != Cell::kOccupied) continue;
          int& l = label[static_cast<std::size_t>(nr) * g.ncols() + nc];
          if (l >= 0) continue;
          l = next;
          stack.emplace_back(nc, nr);
        }
      }
      ++next;
    }
  return label;
}

struct Reveal {
  int new_cells = 0;      ///< occupied cells seen for the first time
  int new_obstacles = 0;  ///< obstacles (connected components) seen for the first time
};

/// Copies the true map into `known` inside the sensing disc.
inline Reveal reveal(const OccupancyGrid& truth, const std::vector<int>& labels, std::vector<char>& seen,
                     OccupancyGrid& known, double x, double y, double radius) {
  const auto& g = truth.spec();
  const int k = static_cast<int>(std::ceil(radius / g.resolution)) + 1;
  const int cc = static_cast<int>(std::floor((x - g.origin_x) / g.resolution));
  const int cr = static_cast<int>(std::floor((y - g.origin_y) / g.resolution));
  Reveal out;
  for (int r = std::max(0, cr - k); r <= std::min(g.nrows - 1, cr + k); ++r)
    for (int c = std::max(0, cc - k); c <= std::min(g.ncols - 1, cc + k); ++c) {
      const double px = g.origin_x + (c + 0.5) * g.resolution, py = g.origin_y + (r + 0.5) * g.resolution;
      if (std::hypot(px - x, py - y) > radius) continue;
      const Cell t = truth.at(c, r);
      if (known.at(c, r) == t) continue;
      known.set(c, r, t);
      if (t != Cell::kOccupied) continue;
      ++out.new_cells;
      const int l = labels[static_cast<std::size_t>(r) * g.ncols + c];
      if (l >= 0 && !seen[l]) {
        seen[l] = 1;
        ++out.new_obstacles;
      }
    }
  return out;
}

/// Replans when a new obstacle enters the sensing disc, when newly seen
/// cells block the near part of the current segment, and every refresh_s.
inline VariantResult run_lop(const Scenario& s, const LopOptions& lo) {
  VariantResult r;
  r.variant = Variant::kLop;
  const std::vector<int> labels = label_obstacles(s.grid);
  std::vector<char> seen(labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1, 0);
  OccupancyGrid known(s.grid.spec(), Cell::kUnknown);
  OccupancyGrid known_inflated;
  SearchOptions so = s.search;
  so.unknown_is_obstacle = false;
  OptimizerOptions oo = s.optimizer;
  oo.unknown_is_obstacle = false;

  const double cdt = s.nmpc.dt;
  const int sub = static_cast<int>(std::round(cdt / s.sim_dt));
  if (sub < 1 || std::abs(sub * s.sim_dt - cdt) > 1e-9)
    throw std::invalid_argument("LOP: controller dt must be a multiple of sim_dt");
  r.executed.dt = cdt;
  r.executed.provenance = Provenance::kExecuted;
  r.tracked.dt = cdt;

  VesselState x = s.start_state();
  NmpcMemory mem;
  Trajectory seg;  // local segment being tracked
  bool final_segment = false;
  double t_seg = 0.0;
  bool need_plan = true;
  reveal(s.grid, labels, seen, known, x.x, x.y, s.sensing_radius);
  known_inflated = inflate(known, s.inflation, UnknownPolicy::kAsFree);

  // Segment knots within this distance of the vessel must stay clear.
  const double guard = std::max(0.0, s.sensing_radius - 5.0);
  auto segment_blocked = [&](double t_rel) {
    for (std::size_t i = seg.index_at(t_rel); i < seg.size(); ++i) {
      const auto& st = seg.state(i);
      if (std::hypot(st.x - x.x, st.y - x.y) > guard) break;
      if (!collision_free(pose_of(st), known_inflated, so.footprint, false)) return true;
    }
    return false;
  };

  for (int j = 0;; ++j) {
    const double t = j * cdt;
    if (!x.finite()) throw StageError(Stage::kTrack, "state became non-finite at t = " + detail::fmt_num(t));
    if (!s.grid.cell_of(x.x, x.y)) throw StageError(Stage::kTrack, "vessel left the map at t = " + detail::fmt_num(t));
    const Reveal rv = reveal(s.grid, labels, seen, known, x.x, x.y, s.sensing_radius);
    if (rv.new_cells > 0) {
      known_inflated = inflate(known, s.inflation, UnknownPolicy::kAsFree);
      if (rv.new_obstacles > 0 || (!need_plan && segment_blocked(t - t_seg))) need_plan = true;
    }
    if (!final_segment && t - t_seg >= lo.refresh_s - 1e-9) need_plan = true;

    if (need_plan) {
      if (r.replans >= lo.max_segments) throw StageError(Stage::kPlan, "segment budget exhausted");
      auto t0 = Clock::now();
      auto path = search(pose_of(x), s.goal, known_inflated, s.primitives, so);
      r.timings.plan_ms += ms_since(t0);
      if (!path) throw StageError(Stage::kPlan, "no path from t = " + detail::fmt_num(t));
      Trajectory plan = build_reference(*path, s.hull, s.cruise, s.ref_dt, x, s.goal_state(), std::max(0.0, x.u));
      r.paths.push_back(std::move(*path));
      ++r.replans;

      t0 = Clock::now();
      final_segment = static_cast<int>(plan.size()) - 1 <= lo.local_knots;
      OptimizerOptions local_opts = oo;
      if (!final_segment) {
        plan.knots.resize(static_cast<std::size_t>(lo.local_knots) + 1);
        local_opts.pin_final = false;
      }
      auto opt = optimize(plan, x, plan.knots.back().state, &known_inflated, s.hull, s.weights, local_opts);
      r.timings.optimize_ms += ms_since(t0);
      r.max_defect = std::max(r.max_defect, opt.max_defect);
      if (!opt.ok()) throw StageError(Stage::kOptimize, std::string(to_string(opt.status)) + ": " + opt.message);
      seg = std::move(opt.trajectory);
      t_seg = t;
      mem.has_warm = false;
      need_plan = false;
    }

    const double t_rel = t - t_seg;
    if (final_segment && t_rel > seg.duration() + lo.tail_s - 1e-9) {
      r.executed.knots.push_back({x, ControlInput{}});
      r.tracked.knots.push_back(seg.knots[seg.index_at(t_rel)]);
      break;
    }
    const auto t0 = Clock::now();
    const NmpcStep st = nmpc_step(x, seg, t_rel, s.nmpc, s.hull, mem);
    r.timings.track_ms += ms_since(t0);
    r.degraded_steps += st.degraded ? 1 : 0;
    r.executed.knots.push_back({x, st.applied});
    r.tracked.knots.push_back(seg.knots[seg.index_at(t_rel)]);
    for (int k = 0; k < sub; ++k) x = step_rk4(x, st.applied, s.hull, s.sim_dt);
  }
  finish(r, s);
  return r;
}

template <class F>
VariantResult guarded(Variant v, F&& body) {
  try {
    return body();
  } catch (const StageError& e) {
    VariantResult r;
    r.variant = v;
    r.failed_stage = e.stage;
    r.message = e.what();
    return r;
  }
}

}  // namespace harness_detail

/// Runs one variant end to end. `shared`, when given, supplies the global
/// search and optimisation results instead of recomputing them.
inline VariantResult run_variant(const Scenario& s, Variant v, const GlobalStages* shared = nullptr,
                                 const LopOptions& lop = {}) {
  using namespace harness_detail;
  return guarded(v, [&] {
    if (v == Variant::kLop) return run_lop(s, lop);
    if (shared) return run_global(s, v, *shared);
    GlobalStages g = plan_global(s);
    if (v != Variant::kGpLop) optimize_global(s, g);
    return run_global(s, v, g);
  });
}

struct BenchReport {
  std::string scenario;
  std::vector<VariantResult> results;  ///< ordered by variant tag
};

/// Runs work items on up to `threads` workers; results land by index.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) body(i);
    });
  for (auto& th : pool) th.join();
}

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Ablation over several scenarios. Global stages are computed once per
/// scenario, then every (scenario, variant) pair runs as an independent task.
inline std::vector<BenchReport> run_suite(const std::vector<const Scenario*>& scenarios, std::vector<Variant> variants,
                                          unsigned threads = default_threads(), const LopOptions& lop = {}) {
  if (variants.empty()) throw std::invalid_argument("run_ablation: need at least one variant");
  std::sort(variants.begin(), variants.end());
  variants.erase(std::unique(variants.begin(), variants.end()), variants.end());
  const bool need_global = std::any_of(variants.begin(), variants.end(), [](Variant v) { return v != Variant::kLop; });
  const bool need_opt = std::any_of(variants.begin(), variants.end(),
                                    [](Variant v) { return v == Variant::kGopLop || v == Variant::kGopLp; });

  std::vector<GlobalStages> stages(scenarios.size());
  if (need_global)
    parallel_for(scenarios.size(), threads, [&](std::size_t i) {
      stages[i] = plan_global(*scenarios[i]);
      if (need_opt) optimize_global(*scenarios[i], stages[i]);
    });

  const std::size_t nv = variants.size();
  std::vector<VariantResult> flat(scenarios.size() * nv);
  parallel_for(flat.size(), threads, [&](std::size_t k) {
    const std::size_t i = k / nv;
    flat[k] = run_variant(*scenarios[i], variants[k % nv], &stages[i], lop);
  });

  std::vector<BenchReport> out;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    BenchReport rep;
    rep.scenario = scenarios[i]->name;
    for (std::size_t j = 0; j < nv; ++j) rep.results.push_back(std::move(flat[i * nv + j]));
    out.push_back(std::move(rep));
  }
  return out;
}

inline BenchReport run_ablation(const Scenario& s, const std::vector<Variant>& variants,
                                unsigned threads = default_threads(), const LopOptions& lop = {}) {
  return std::move(run_suite({&s}, variants, threads, lop).front());
}

// ---------------------------------------------------------------------------
// Report tables. Nothing here depends on wall-clock time.

inline constexpr const char* kReportCsvHeader =
    "scenario,variant,status,stage,length,planned_length,rmse,max_error,mean_speed,max_defect,replans,"
    "degraded_steps,collisions";

inline void write_report_csv(std::ostream& out, const std::vector<BenchReport>& reports) {
  using detail::fmt_num;
  out << kReportCsvHeader << '\n';
  for (const auto& rep : reports)
    for (const auto& r : rep.results) {
      out << rep.scenario << ',' << tag(r.variant) << ',' << (r.ok ? "ok" : "failed") << ','
          << (r.failed_stage ? to_string(*r.failed_stage) : "") << ',';
      if (r.executed.empty()) {
        out << ",,,,,,";
      } else {
        out << fmt_num(r.metrics.length) << ',' << fmt_num(r.planned_length) << ',' << fmt_num(r.metrics.rmse) << ','
            << fmt_num(r.metrics.max_error) << ',' << fmt_num(r.metrics.mean_speed) << ',' << fmt_num(r.max_defect)
            << ',';
      }
      out << r.replans << ',' << r.degraded_steps << ',' << r.collisions << '\n';
    }
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v == 0.0 ? 0.0 : v);
  return buf;
}

/// Fixed-width text table; timing columns only when `timings` is set.
inline std::string render_table(const std::vector<BenchReport>& reports, bool timings = false) {
  std::ostringstream o;
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.insert(0, w - s.size(), ' ');
    return s;
  };
  o << pad("scenario", 16) << pad("variant", 9) << pad("status", 10) << pad("length", 9) << pad("rmse", 8)
    << pad("max_err", 9) << pad("speed", 7);
  if (timings) o << pad("plan_ms", 10) << pad("opt_ms", 10) << pad("track_ms", 10);
  o << '\n';
  for (const auto& rep : reports)
    for (const auto& r : rep.results) {
      const bool has = !r.executed.empty();
      o << pad(rep.scenario, 16) << pad(tag(r.variant), 9)
        << pad(r.ok ? "ok" : (r.failed_stage ? to_string(*r.failed_stage) : "failed"), 10)
        << pad(has ? fixed(r.metrics.length, 2) : "-", 9) << pad(has ? fixed(r.metrics.rmse, 3) : "-", 8)
        << pad(has ? fixed(r.metrics.max_error, 3) : "-", 9) << pad(has ? fixed(r.metrics.mean_speed, 2) : "-", 7);
      if (timings)
        o << pad(fixed(r.timings.plan_ms, 0), 10) << pad(fixed(r.timings.optimize_ms, 0), 10)
          << pad(fixed(r.timings.track_ms, 0), 10);
      o << '\n';
    }
  return o.str();
}

}  // namespace usvplan
