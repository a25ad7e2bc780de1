#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>

namespace vida {

// Index of the point of maximum perpendicular distance to the chord joining
// the first and last points of y (x = index). Empty when the curve has fewer
// than three points or lies on its chord.
inline std::optional<std::size_t> knee_index(std::span<const double> y) {
  const std::size_t n = y.size();
  if (n < 3) return std::nullopt;
  const double dx = static_cast<double>(n - 1);
  const double dy = y[n - 1] - y[0];
  const double norm = std::hypot(dx, dy);
  double scale = 0.0;
  for (double v : y) scale = std::fmax(scale, std::fabs(v - y[0]));
  std::size_t best = 0;
  double best_distance = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double d = std::fabs(dy * static_cast<double>(i) - dx * (y[i] - y[0])) / norm;
    if (d > best_distance) {
      best_distance = d;
      best = i;
    }
  }
  // Distances are in mixed units; compare against the curve's own spread.
  if (best == 0 || best_distance <= 1e-12 * std::fmax(scale, 1e-300) * dx / norm) return std::nullopt;
  return best;
}

}  // namespace vida
