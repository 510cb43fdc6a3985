#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecanet/label_map.hpp"
#include "ecanet/tensor.hpp"

namespace ecanet {

/// Dataset-specific label set. Class names are canonical and unique.
class SemanticSpace {
 public:
  SemanticSpace(int id, std::vector<std::string> classes);

  int id() const { return id_; }
  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t size() const { return classes_.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;

 private:
  int id_;
  std::vector<std::string> classes_;
};

/// Unnormalized per-pixel class scores of one output head, shape (Cj,H,W).
struct LogitVolume {
  int space_id;
  Tensor scores;

  std::size_t classes() const { return scores.extent(0); }
  std::size_t height() const { return scores.extent(1); }
  std::size_t width() const { return scores.extent(2); }
};

enum class FusionStrategy { MinVariance, MaxProbability, CalibratedRatio };

std::string_view to_string(FusionStrategy s);
std::optional<FusionStrategy> parse_strategy(std::string_view name);
std::vector<std::string> strategy_names();

/// Classes present in every space, sorted by name.
std::vector<std::string> intersect_spaces(std::span<const SemanticSpace> spaces);

/// Population variance (divisor Cj).
double pixel_variance(std::span<const double> z);

struct HeadSelection {
  std::size_t head = 0;
  // Variance, top softmax probability, or top-1/top-2 probability ratio.
  double score = 0.0;
};

/// Picks the most reliable head for one pixel. Ties go to the lowest index.
HeadSelection select_head(std::span<const std::vector<double>> z_per_head, FusionStrategy strategy);

struct FusedResult {
  LabelMap labels;                // palette = default head's space
  Tensor uncertainty{Shape{1}};   // (H,W) selector score of the chosen head
  std::vector<std::uint8_t> refined;  // 1 where the fused label replaced the default head's

  double refined_fraction() const;
};

/// Per-pixel multi-space fusion: choose head j*, and when j*'s own argmax
/// lies in the shared classes, relabel with the argmax of j*'s scores
/// restricted to the shared classes; otherwise keep the default head's label.
FusedResult fuse(std::span<const LogitVolume> volumes, std::span<const SemanticSpace> spaces,
                 std::size_t default_head, FusionStrategy strategy);

}  // namespace ecanet
