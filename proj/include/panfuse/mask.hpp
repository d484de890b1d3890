#pragma once

#include <compare>
#include <cstdint>

#include "panfuse/image.hpp"

namespace panfuse {

/// Panoptic identity of a segment: semantic class plus instance id.
/// Instance id 0 is reserved for "stuff"/background classes.
struct PanopticLabel {
  int class_id = 0;
  std::uint32_t instance_id = 0;

  bool is_stuff() const { return instance_id == 0; }

  friend auto operator<=>(const PanopticLabel&, const PanopticLabel&) = default;
};

/// Binary pixel mask paired with its panoptic label. Nonzero bitmap pixels
/// belong to the instance.
struct InstanceMask {
  Image<std::uint8_t> bitmap;
  PanopticLabel label;

  std::size_t set_count() const {
    std::size_t n = 0;
    for (std::uint8_t v : bitmap.data()) n += (v != 0);
    return n;
  }

  bool empty() const { return set_count() == 0; }
};

}  // namespace panfuse
