#pragma once

// Expected calibration error over equal-mass bins: sort by predicted score,
// cut into `bins` groups of (nearly) equal size, and average
// |mean prediction - empirical accuracy| weighted by group size.

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace oracle {

inline double expected_calibration_error(std::vector<std::pair<double, bool>> scored, int bins = 10) {
  if (scored.empty()) return 0.0;
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const double n = static_cast<double>(scored.size());
  double ece = 0.0;
  for (int b = 0; b < bins; ++b) {
    auto lo = static_cast<std::size_t>(std::floor(n * b / bins));
    auto hi = static_cast<std::size_t>(std::floor(n * (b + 1) / bins));
    if (hi <= lo) continue;
    double conf = 0.0, acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      conf += scored[i].first;
      acc += scored[i].second ? 1.0 : 0.0;
    }
    double m = static_cast<double>(hi - lo);
    ece += (m / n) * std::abs(conf / m - acc / m);
  }
  return ece;
}

}  // namespace oracle
