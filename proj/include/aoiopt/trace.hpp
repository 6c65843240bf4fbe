#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace aoiopt {

struct TracePoint {
  int iteration = 0;
  double best_aoi_ms = 0.0;
  double speed_kmh = 0.0;
  double rri_ms = 0.0;
};

// Per-iteration best-so-far record shared by all optimizers. best_aoi_ms is
// monotone nonincreasing along points.
struct OptimizerTrace {
  std::string method;
  std::vector<TracePoint> points;
  long evaluations = 0;

  static std::string csv_header() { return "iteration,best_aoi_ms,speed_kmh,rri_ms"; }

  std::string to_csv() const {
    std::string out = csv_header() + "\n";
    char buf[160];
    for (const auto& p : points) {
      std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g\n", p.iteration,
                    p.best_aoi_ms, p.speed_kmh, p.rri_ms);
      out += buf;
    }
    return out;
  }
};

}  // namespace aoiopt
