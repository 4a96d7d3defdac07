// Runs one docking scenario with the default configuration and prints the
// onboard estimate against ground truth twice per second.

#include "dockekf/dockekf.hpp"

#include <cstdio>
#include <cstdlib>

int main(int argc, char** argv) {
  dockekf::ScenarioConfig cfg;
  if (argc > 1) cfg.seed = std::strtoull(argv[1], nullptr, 10);

  const dockekf::RunMetrics m = dockekf::runDocking(cfg).metrics;
  std::printf("%6s %9s  %24s  %24s  %8s\n", "t [s]", "phase", "true p [m]", "estimated p [m]", "err [cm]");
  double next = 0.0;
  for (const auto& s : m.steps) {
    if (s.t + 1e-9 < next) continue;
    next = s.t + 0.5;
    std::printf("%6.2f %9s  %7.3f %7.3f %7.3f   %7.3f %7.3f %7.3f   %8.2f\n", s.t, dockekf::phaseName(s.phase),
                s.true_position.x(), s.true_position.y(), s.true_position.z(), s.estimated_position.x(),
                s.estimated_position.y(), s.estimated_position.z(), 100.0 * s.position_error_norm);
  }
  if (m.success) {
    std::printf("docked at t = %.2f s, horizontal offset at motor stop %.1f mm\n", *m.time_to_dock,
                1000.0 * m.capture_offset);
  } else {
    std::printf("failed: %s\n", m.failure_reason.c_str());
  }
  return m.success ? 0 : 2;
}
