// Coarse grid search for the PID baseline gains on an obstacle-free
// scenario. Candidates must first settle on a straight constant-speed track
// (surge thrust within 5% of the damping force, yaw moment near zero); the
// admissible ones are ranked by RMSE. The winner is what PidConfig ships with.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "usvplan/harness.hpp"

using namespace usvplan;

namespace {

struct Candidate {
  PidConfig cfg;
  double rmse = 0.0, max_error = 0.0;
};

Trajectory straight_track(const HullParams& hp, double speed, double seconds) {
  Trajectory t;
  t.dt = 0.1;
  const int n = static_cast<int>(seconds / t.dt) + 1;
  for (int i = 0; i < n; ++i) t.knots.push_back({{5.0 + speed * t.dt * i, 20.0, 0.0, speed, 0.0, 0.0}, {hp.d11 * speed, 0.0}});
  return t;
}

/// Steady cruise check over the last 10 s before the reference ends.
bool settles(const PidConfig& cfg, const HullParams& hp, const Trajectory& track, double sim_dt) {
  const double speed = track.state(0).u;
  const auto log = run_tracking(track, track.state(0), cfg, hp, sim_dt, track.duration());
  const std::size_t n = log.executed.size();
  for (std::size_t i = n - 101; i + 1 < n; ++i) {
    const ControlInput& u = log.executed.control(i);
    if (std::abs(u.tau_u - hp.d11 * speed) > 0.05 * hp.d11 * speed) return false;
    if (std::abs(u.tau_r) > 0.05 * hp.tau_r_max) return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid search for PID tracking gains"};
  std::string path = std::string(USVPLAN_DATA_DIR) + "/scenarios/s_curve.scn";
  int top = 5;
  app.add_option("scenario", path, "Scenario file (obstacle-free)");
  app.add_option("--top", top, "Candidates to list");
  CLI11_PARSE(app, argc, argv);

  try {
    const Scenario s = load_scenario(path);
    GlobalStages g = plan_global(s);
    optimize_global(s, g);
    if (!g.optimized || !g.optimized->ok()) {
      std::cerr << "pid_tune: reference stage failed: " << g.error << "\n";
      return 3;
    }
    const Trajectory& ref = g.optimized->trajectory;
    const double duration = ref.duration() + 2.0;
    const Trajectory track = straight_track(s.hull, s.cruise, 60.0);
    int rejected = 0;

    std::vector<Candidate> all;
    for (double hkp : {40.0, 80.0, 160.0, 320.0, 640.0, 1280.0})
      for (double hkd : {20.0, 40.0, 80.0, 160.0, 320.0})
        for (double hki : {0.0, 2.0})
          for (double skp : {200.0, 400.0, 800.0, 1600.0, 3200.0, 6400.0})
            for (double ski : {240.0, 480.0, 960.0, 1920.0, 3840.0, 7680.0, 15360.0, 30720.0, 61440.0})
              for (double look : {0.5, 1.0, 1.5, 2.0, 3.0}) {
                Candidate c;
                c.cfg = s.pid;
                c.cfg.heading = {hkp, hki, hkd};
                c.cfg.speed = {skp, ski, 0.0};
                c.cfg.lookahead = look;
                try {
                  if (!settles(c.cfg, s.hull, track, s.sim_dt)) {
                    ++rejected;
                    continue;
                  }
                  const auto log = run_tracking(ref, ref.state(0), c.cfg, s.hull, s.sim_dt, duration, &s.grid);
                  const Metrics m = trajectory_metrics(log.executed, ref);
                  c.rmse = m.rmse;
                  c.max_error = m.max_error;
                } catch (const TrackingError&) {
                  continue;
                }
                all.push_back(c);
              }
    std::printf("%zu admissible, %d rejected for not settling\n", all.size(), rejected);
    std::stable_sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) { return a.rmse < b.rmse; });
    std::printf("%8s %8s %8s %8s %8s %8s %8s %8s\n", "h.kp", "h.ki", "h.kd", "s.kp", "s.ki", "look", "rmse", "max");
    for (int i = 0; i < std::min<int>(top, static_cast<int>(all.size())); ++i) {
      const auto& c = all[i].cfg;
      std::printf("%8g %8g %8g %8g %8g %8g %8.4f %8.4f\n", c.heading.kp, c.heading.ki, c.heading.kd, c.speed.kp,
                  c.speed.ki, c.lookahead, all[i].rmse, all[i].max_error);
    }
    if (all.empty()) return 4;
    const auto& b = all.front().cfg;
    std::cout << "\n[controller]\npid_heading = " << b.heading.kp << ' ' << b.heading.ki << ' ' << b.heading.kd
              << "\npid_speed = " << b.speed.kp << ' ' << b.speed.ki << ' ' << b.speed.kd
              << "\npid_lookahead = " << b.lookahead << "\n";
  } catch (const ConfigError& e) {
    std::cerr << "pid_tune: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
