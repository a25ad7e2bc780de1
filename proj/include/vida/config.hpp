// Named parameter presets for the reactions the pipeline was tuned on.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace vida {

struct Preset {
  std::string_view name;
  double mpt_weight;   // delta
  double ged_weight;   // epsilon
  std::size_t k = 100;
  std::size_t min_samples = 4;
  std::size_t n_landmarks = 2000;
  double decay = 40.0;
  std::size_t n_neighbors = 5;
  std::optional<double> eps;        // DBSCAN radius, when one was published
  std::optional<double> threshold;  // cumulative time filter (s)
};

std::span<const Preset> presets();
const Preset* find_preset(std::string_view name);

}  // namespace vida
