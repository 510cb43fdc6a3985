#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ecanet/label_map.hpp"
#include "ecanet/tensor.hpp"

namespace ecanet {

/// Maps a (C,H,W) panorama to (Cj,H,W) class scores with the same H and W.
using Predictor = std::function<Tensor(const Tensor&)>;

/// Horizontal column offsets for the rotation ensemble. Offsets are
/// distinct, lie in [0, width) and include 0.
class RotationSchedule {
 public:
  RotationSchedule(std::vector<std::size_t> offsets, std::size_t width);

  /// `count` evenly spaced offsets {0, W/count, 2W/count, ...}.
  static RotationSchedule uniform(std::size_t width, std::size_t count);

  const std::vector<std::size_t>& offsets() const { return offsets_; }
  std::size_t width() const { return width_; }

 private:
  std::vector<std::size_t> offsets_;
  std::size_t width_;
};

/// Wrap-around shift: column w moves to (w + offset) mod W.
Tensor rotate_columns(const Tensor& img, std::size_t offset);

enum class EnsembleAveraging { Logits, Probabilities };

struct EnsembleResult {
  Tensor mean{Shape{1}};          // (Cj,H,W) averaged scores
  LabelMap pseudo_labels;         // argmax of the mean, ties to the lowest class
  std::vector<double> agreement;  // per schedule entry: fraction of pixels whose
                                  // own argmax matches the pseudo-label
};

/// Rotates the input by every offset, predicts, rotates the prediction back
/// and averages. Accumulation runs in ascending offset order, so the result
/// does not depend on how the schedule was listed.
EnsembleResult rotation_ensemble(const Tensor& img, const Predictor& predictor, const RotationSchedule& schedule,
                                 EnsembleAveraging averaging = EnsembleAveraging::Logits);

struct DirectionalCorrelation {
  double horizontal = 0.0;
  double vertical = 0.0;
  std::size_t horizontal_pairs = 0;
  std::size_t vertical_pairs = 0;
};

/// Mean pairwise Pearson correlation between per-position class-frequency
/// vectors, over position pairs that share a row (horizontal) or a column
/// (vertical). Positions with a constant frequency vector are skipped.
DirectionalCorrelation directional_correlation(std::span<const LabelMap> labels, std::size_t num_classes);

namespace stubs {
Predictor identity();
/// Per-pixel tanh(M x) with M of shape (Cj x C); commutes with rotation.
Predictor pixelwise_mix(Tensor mix);
/// Identity except columns [begin, end) are zeroed; position dependent.
Predictor column_window(std::size_t begin, std::size_t end);
}  // namespace stubs

}  // namespace ecanet
