#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ecanet {

/// (H,W) grid of class indices into a palette of canonical class names.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::string> classes;
  std::vector<std::uint32_t> indices;  // row-major, size height*width

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::vector<std::string> palette)
      : height(h), width(w), classes(std::move(palette)), indices(h * w, 0) {}

  std::uint32_t at(std::size_t h, std::size_t w) const { return indices[h * width + w]; }
  std::uint32_t& at(std::size_t h, std::size_t w) { return indices[h * width + w]; }
  const std::string& name_at(std::size_t h, std::size_t w) const { return classes.at(at(h, w)); }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// Palette "class0", "class1", ... for anonymous class spaces.
std::vector<std::string> numbered_classes(std::size_t count);

}  // namespace ecanet
