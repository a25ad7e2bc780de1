#include "vida/config.hpp"

#include <array>

namespace vida {

namespace {

const std::array<Preset, 3> kPresets{{
    {"gao-p4t4", 0.0004, 0.00004, 100, 4, 2000, 40.0, 5, 0.0034, 5e-4},
    {"hata-39", 0.0001, 0.0001, 100, 4, 2000, 40.0, 5, std::nullopt, std::nullopt},
    {"machinek", 0.0004, 0.00001, 100, 4, 2000, 40.0, 5, std::nullopt, std::nullopt},
}};

}  // namespace

std::span<const Preset> presets() { return kPresets; }

const Preset* find_preset(std::string_view name) {
  for (const auto& p : kPresets)
    if (p.name == name) return &p;
  return nullptr;
}

}  // namespace vida
