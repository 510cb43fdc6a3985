#include "ecanet/distill.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ecanet/errors.hpp"

namespace ecanet {

RotationSchedule::RotationSchedule(std::vector<std::size_t> offsets, std::size_t width)
    : offsets_(std::move(offsets)), width_(width) {
  if (width_ == 0) throw ContractError("rotation schedule: width must be positive");
  if (offsets_.empty()) throw ContractError("rotation schedule: no offsets");
  std::set<std::size_t> seen;
  for (auto o : offsets_) {
    if (o >= width_) {
      throw ContractError("rotation schedule: offset " + std::to_string(o) + " outside [0, " + std::to_string(width_) +
                          ")");
    }
    if (!seen.insert(o).second) throw ContractError("rotation schedule: duplicate offset " + std::to_string(o));
  }
  if (!seen.count(0)) throw ContractError("rotation schedule: offset 0 (identity) is required");
}

RotationSchedule RotationSchedule::uniform(std::size_t width, std::size_t count) {
  if (count == 0 || count > width) {
    throw ContractError("rotation schedule: cannot place " + std::to_string(count) + " offsets in width " +
                        std::to_string(width));
  }
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < count; ++i) offsets.push_back(i * width / count);
  return RotationSchedule(std::move(offsets), width);
}

Tensor rotate_columns(const Tensor& img, std::size_t offset) {
  if (img.rank() != 3) throw DimensionError("rotate_columns: expected (C,H,W), got " + to_string(img.shape()));
  const std::size_t C = img.extent(0), H = img.extent(1), W = img.extent(2);
  if (offset >= W) {
    throw ContractError("rotate_columns: offset " + std::to_string(offset) + " outside [0, " + std::to_string(W) + ")");
  }
  Tensor out(img.shape());
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w) out.at(c, h, (w + offset) % W) = img.at(c, h, w);
  return out;
}

namespace {

void softmax_channels(Tensor& t) {
  const std::size_t C = t.extent(0), H = t.extent(1), W = t.extent(2);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t w = 0; w < W; ++w) {
      double peak = t.at(0, h, w);
      for (std::size_t c = 1; c < C; ++c) peak = std::max(peak, t.at(c, h, w));
      double total = 0.0;
      for (std::size_t c = 0; c < C; ++c) total += (t.at(c, h, w) = std::exp(t.at(c, h, w) - peak));
      for (std::size_t c = 0; c < C; ++c) t.at(c, h, w) /= total;
    }
}

std::uint32_t argmax_channel(const Tensor& t, std::size_t h, std::size_t w) {
  std::uint32_t best = 0;
  for (std::size_t c = 1; c < t.extent(0); ++c)
    if (t.at(c, h, w) > t.at(best, h, w)) best = static_cast<std::uint32_t>(c);
  return best;
}

}  // namespace

EnsembleResult rotation_ensemble(const Tensor& img, const Predictor& predictor, const RotationSchedule& schedule,
                                 EnsembleAveraging averaging) {
  if (img.rank() != 3) throw DimensionError("rotation_ensemble: expected (C,H,W), got " + to_string(img.shape()));
  const std::size_t H = img.extent(1), W = img.extent(2);
  if (schedule.width() != W) {
    throw ContractError("rotation_ensemble: schedule built for width " + std::to_string(schedule.width()) +
                        ", image has width " + std::to_string(W));
  }

  std::vector<std::size_t> order = schedule.offsets();
  std::sort(order.begin(), order.end());

  std::vector<Tensor> restored;
  restored.reserve(order.size());
  for (std::size_t offset : order) {
    Tensor pred = predictor(rotate_columns(img, offset));
    if (pred.rank() != 3 || pred.extent(1) != H || pred.extent(2) != W) {
      throw ContractError("rotation_ensemble: predictor returned " + to_string(pred.shape()) +
                          " for input " + to_string(img.shape()));
    }
    if (!restored.empty() && pred.extent(0) != restored[0].extent(0)) {
      throw ContractError("rotation_ensemble: predictor class count changed between rotations");
    }
    restored.push_back(rotate_columns(pred, (W - offset) % W));
  }

  const std::size_t K = restored[0].extent(0);
  // Running mean: identical members reproduce their value bit for bit.
  Tensor mean({K, H, W});
  for (std::size_t k = 0; k < restored.size(); ++k) {
    Tensor term = restored[k];
    if (averaging == EnsembleAveraging::Probabilities) softmax_channels(term);
    const double n = static_cast<double>(k + 1);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += (term[i] - mean[i]) / n;
  }

  EnsembleResult result{mean, LabelMap(H, W, numbered_classes(K)), {}};
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t w = 0; w < W; ++w) result.pseudo_labels.at(h, w) = argmax_channel(mean, h, w);

  for (std::size_t offset : schedule.offsets()) {
    const auto pos = static_cast<std::size_t>(std::find(order.begin(), order.end(), offset) - order.begin());
    std::size_t agree = 0;
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w) agree += argmax_channel(restored[pos], h, w) == result.pseudo_labels.at(h, w);
    result.agreement.push_back(static_cast<double>(agree) / static_cast<double>(H * W));
  }
  return result;
}

namespace {

struct Centered {
  std::vector<double> dev;
  double ss = 0.0;  // sum of squared deviations
  bool constant = true;
};

}  // namespace

DirectionalCorrelation directional_correlation(std::span<const LabelMap> labels, std::size_t num_classes) {
  if (labels.empty()) throw ContractError("directional_correlation: no label maps");
  if (num_classes < 2) throw ContractError("directional_correlation: need at least 2 classes");
  const std::size_t H = labels[0].height, W = labels[0].width;
  std::vector<std::vector<std::size_t>> counts(H * W, std::vector<std::size_t>(num_classes, 0));
  for (const auto& map : labels) {
    if (map.height != H || map.width != W) throw DimensionError("directional_correlation: label maps differ in size");
    for (std::size_t i = 0; i < H * W; ++i) {
      if (map.indices[i] >= num_classes) {
        throw ContractError("directional_correlation: label " + std::to_string(map.indices[i]) + " >= " +
                            std::to_string(num_classes) + " classes");
      }
      ++counts[i][map.indices[i]];
    }
  }

  const double m = static_cast<double>(labels.size());
  const double k = static_cast<double>(num_classes);
  std::vector<Centered> q(H * W);
  for (std::size_t i = 0; i < H * W; ++i) {
    const auto& cnt = counts[i];
    q[i].constant = std::all_of(cnt.begin(), cnt.end(), [&](std::size_t c) { return c == cnt[0]; });
    // Frequencies sum to 1, so every vector has mean 1/K.
    q[i].dev.resize(num_classes);
    double ss = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
      q[i].dev[c] = static_cast<double>(cnt[c]) / m - 1.0 / k;
      ss += q[i].dev[c] * q[i].dev[c];
    }
    q[i].ss = ss;
  }

  auto pearson = [&](const Centered& a, const Centered& b) {
    double dot = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) dot += a.dev[c] * b.dev[c];
    // sqrt(fl(s*s)) == s, so identical vectors give exactly 1.
    return dot / std::sqrt(a.ss * b.ss);
  };

  DirectionalCorrelation out;
  double hsum = 0.0, vsum = 0.0;
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t w1 = 0; w1 < W; ++w1)
      for (std::size_t w2 = w1 + 1; w2 < W; ++w2) {
        const auto& a = q[h * W + w1];
        const auto& b = q[h * W + w2];
        if (a.constant || b.constant) continue;
        hsum += pearson(a, b);
        ++out.horizontal_pairs;
      }
  for (std::size_t w = 0; w < W; ++w)
    for (std::size_t h1 = 0; h1 < H; ++h1)
      for (std::size_t h2 = h1 + 1; h2 < H; ++h2) {
        const auto& a = q[h1 * W + w];
        const auto& b = q[h2 * W + w];
        if (a.constant || b.constant) continue;
        vsum += pearson(a, b);
        ++out.vertical_pairs;
      }
  if (out.horizontal_pairs == 0 || out.vertical_pairs == 0) {
    throw UndefinedCorrelationError(std::string("directional_correlation: no non-degenerate ") +
                                    (out.horizontal_pairs == 0 ? "horizontal" : "vertical") + " position pairs");
  }
  out.horizontal = hsum / static_cast<double>(out.horizontal_pairs);
  out.vertical = vsum / static_cast<double>(out.vertical_pairs);
  return out;
}

namespace stubs {

Predictor identity() {
  return [](const Tensor& x) { return x; };
}

Predictor pixelwise_mix(Tensor mix) {
  if (mix.rank() != 2) throw DimensionError("pixelwise_mix: mix matrix must be rank 2");
  return [mix = std::move(mix)](const Tensor& x) {
    if (x.rank() != 3 || x.extent(0) != mix.extent(1)) {
      throw DimensionError("pixelwise_mix: input " + to_string(x.shape()) + " does not fit mix " +
                           to_string(mix.shape()));
    }
    const FeatureMap projected = project_1x1(FeatureMap(x), mix);
    Tensor out = projected.tensor();
    for (auto& v : out.data()) v = std::tanh(v);
    return out;
  };
}

Predictor column_window(std::size_t begin, std::size_t end) {
  return [begin, end](const Tensor& x) {
    Tensor out = x;
    for (std::size_t c = 0; c < x.extent(0); ++c)
      for (std::size_t h = 0; h < x.extent(1); ++h)
        for (std::size_t w = begin; w < std::min(end, x.extent(2)); ++w) out.at(c, h, w) = 0.0;
    return out;
  };
}

}  // namespace stubs

}  // namespace ecanet
