#pragma once

#include <cmath>
#include <cstdint>

#include "panfuse/image.hpp"

namespace panfuse {

inline constexpr Rgb8 kUnlabeledColor{128, 128, 128};

inline Rgb8 hsv_to_rgb8(double hue_deg, double saturation, double value) {
  const double h = std::fmod(std::fmod(hue_deg, 360.0) + 360.0, 360.0) / 60.0;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = value * (1.0 - saturation);
  const double q = value * (1.0 - saturation * f);
  const double t = value * (1.0 - saturation * (1.0 - f));
  double r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = value; g = t; b = p; break;
    case 1: r = q; g = value; b = p; break;
    case 2: r = p; g = value; b = t; break;
    case 3: r = p; g = q; b = value; break;
    case 4: r = t; g = p; b = value; break;
    default: r = value; g = p; b = q; break;
  }
  const auto to8 = [](double c) {
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
  };
  return {to8(r), to8(g), to8(b)};
}

/// Golden-angle palette: well-separated hues for consecutive ids.
inline Rgb8 id_color(std::uint32_t id) {
  if (id == 0) return kUnlabeledColor;
  const double hue = std::fmod(id * 137.50776405003785, 360.0);
  return hsv_to_rgb8(hue, 0.65, 0.95);
}

}  // namespace panfuse
