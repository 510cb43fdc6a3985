#include "ecanet/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ecanet/errors.hpp"

namespace ecanet {

std::vector<std::string> numbered_classes(std::size_t count) {
  std::vector<std::string> names;
  names.reserve(count);
  for (std::size_t i = 0; i < count; ++i) names.push_back("class" + std::to_string(i));
  return names;
}

SemanticSpace::SemanticSpace(int id, std::vector<std::string> classes) : id_(id), classes_(std::move(classes)) {
  std::set<std::string_view> seen;
  for (const auto& c : classes_) {
    if (!seen.insert(c).second) {
      throw ContractError("semantic space " + std::to_string(id_) + ": duplicate class '" + c + "'");
    }
  }
}

std::optional<std::size_t> SemanticSpace::index_of(std::string_view name) const {
  auto it = std::find(classes_.begin(), classes_.end(), name);
  if (it == classes_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - classes_.begin());
}

std::string_view to_string(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::MinVariance: return "min-variance";
    case FusionStrategy::MaxProbability: return "max-probability";
    case FusionStrategy::CalibratedRatio: return "calibrated-ratio";
  }
  return "?";
}

std::optional<FusionStrategy> parse_strategy(std::string_view name) {
  for (auto s : {FusionStrategy::MinVariance, FusionStrategy::MaxProbability, FusionStrategy::CalibratedRatio}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

std::vector<std::string> strategy_names() {
  return {"min-variance", "max-probability", "calibrated-ratio"};
}

std::vector<std::string> intersect_spaces(std::span<const SemanticSpace> spaces) {
  if (spaces.empty()) throw ContractError("intersect_spaces: no semantic spaces given");
  std::set<std::string> common(spaces[0].classes().begin(), spaces[0].classes().end());
  for (const auto& s : spaces.subspan(1)) {
    std::set<std::string> next;
    for (const auto& c : s.classes())
      if (common.count(c)) next.insert(c);
    common = std::move(next);
  }
  return {common.begin(), common.end()};
}

double pixel_variance(std::span<const double> z) {
  if (z.empty()) throw ContractError("pixel_variance: empty score vector");
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(z.size());
  double acc = 0.0;
  for (double v : z) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(z.size());
}

namespace {

std::size_t argmax(std::span<const double> z) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < z.size(); ++c)
    if (z[c] > z[best]) best = c;
  return best;
}

double top_probability(std::span<const double> z) {
  const double peak = z[argmax(z)];
  double total = 0.0;
  for (double v : z) total += std::exp(v - peak);
  return 1.0 / total;
}

// p(1)/p(2) = exp(z(1) - z(2)); the gap orders heads without overflow.
double top2_gap(std::span<const double> z) {
  const std::size_t first = argmax(z);
  double second = -INFINITY;
  for (std::size_t c = 0; c < z.size(); ++c)
    if (c != first) second = std::max(second, z[c]);
  return z[first] - second;
}

}  // namespace

HeadSelection select_head(std::span<const std::vector<double>> z_per_head, FusionStrategy strategy) {
  if (z_per_head.empty()) throw ContractError("select_head: no heads");
  for (std::size_t j = 0; j < z_per_head.size(); ++j) {
    if (z_per_head[j].empty()) throw ContractError("select_head: head " + std::to_string(j) + " has no classes");
    if (strategy == FusionStrategy::CalibratedRatio && z_per_head[j].size() < 2) {
      throw ContractError("select_head: calibrated ratio needs >= 2 classes, head " + std::to_string(j) + " has 1");
    }
  }

  HeadSelection best;
  switch (strategy) {
    case FusionStrategy::MinVariance:
      best.score = pixel_variance(z_per_head[0]);
      for (std::size_t j = 1; j < z_per_head.size(); ++j) {
        const double v = pixel_variance(z_per_head[j]);
        if (v < best.score) best = {j, v};
      }
      break;
    case FusionStrategy::MaxProbability:
      best.score = top_probability(z_per_head[0]);
      for (std::size_t j = 1; j < z_per_head.size(); ++j) {
        const double p = top_probability(z_per_head[j]);
        if (p > best.score) best = {j, p};
      }
      break;
    case FusionStrategy::CalibratedRatio: {
      double best_gap = top2_gap(z_per_head[0]);
      for (std::size_t j = 1; j < z_per_head.size(); ++j) {
        const double gap = top2_gap(z_per_head[j]);
        if (gap > best_gap) {
          best_gap = gap;
          best.head = j;
        }
      }
      best.score = std::exp(best_gap);
      break;
    }
  }
  return best;
}

double FusedResult::refined_fraction() const {
  if (refined.empty()) return 0.0;
  std::size_t count = 0;
  for (auto r : refined) count += r;
  return static_cast<double>(count) / static_cast<double>(refined.size());
}

FusedResult fuse(std::span<const LogitVolume> volumes, std::span<const SemanticSpace> spaces,
                 std::size_t default_head, FusionStrategy strategy) {
  if (volumes.empty()) throw ContractError("fuse: no logit volumes");
  if (default_head >= volumes.size()) {
    throw ContractError("fuse: default head " + std::to_string(default_head) + " out of range for " +
                        std::to_string(volumes.size()) + " volumes");
  }

  std::vector<const SemanticSpace*> space_of;
  for (const auto& vol : volumes) {
    if (vol.scores.rank() != 3) throw DimensionError("fuse: logit volume must be (C,H,W), got " + to_string(vol.scores.shape()));
    auto it = std::find_if(spaces.begin(), spaces.end(), [&](const SemanticSpace& s) { return s.id() == vol.space_id; });
    if (it == spaces.end()) throw ContractError("fuse: no semantic space with id " + std::to_string(vol.space_id));
    if (it->size() != vol.classes()) {
      throw ContractError("fuse: space " + std::to_string(vol.space_id) + " has " + std::to_string(it->size()) +
                          " classes but its volume has " + std::to_string(vol.classes()));
    }
    if (vol.height() != volumes[0].height() || vol.width() != volumes[0].width()) {
      throw DimensionError("fuse: volume " + to_string(vol.scores.shape()) + " does not share (H,W) with " +
                           to_string(volumes[0].scores.shape()));
    }
    space_of.push_back(&*it);
  }

  std::vector<SemanticSpace> used;
  for (const auto* s : space_of) used.push_back(*s);
  const std::vector<std::string> shared = intersect_spaces(used);

  // shared_index[j][k]: index of shared class k inside head j's space.
  std::vector<std::vector<std::size_t>> shared_index(volumes.size());
  std::vector<std::vector<bool>> is_shared(volumes.size());
  for (std::size_t j = 0; j < volumes.size(); ++j) {
    is_shared[j].assign(space_of[j]->size(), false);
    for (const auto& name : shared) {
      const std::size_t idx = *space_of[j]->index_of(name);
      shared_index[j].push_back(idx);
      is_shared[j][idx] = true;
    }
  }

  const SemanticSpace& home = *space_of[default_head];
  const std::size_t H = volumes[0].height(), W = volumes[0].width();
  FusedResult result{LabelMap(H, W, home.classes()), Tensor({H, W}), std::vector<std::uint8_t>(H * W, 0)};

  std::vector<std::vector<double>> z(volumes.size());
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t w = 0; w < W; ++w) {
      for (std::size_t j = 0; j < volumes.size(); ++j) {
        z[j].resize(volumes[j].classes());
        for (std::size_t c = 0; c < z[j].size(); ++c) z[j][c] = volumes[j].scores.at(c, h, w);
      }
      const HeadSelection sel = select_head(z, strategy);
      const std::uint32_t fallback = static_cast<std::uint32_t>(argmax(z[default_head]));
      std::uint32_t label = fallback;

      const std::vector<double>& zs = z[sel.head];
      if (is_shared[sel.head][argmax(zs)]) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < shared.size(); ++k)
          if (zs[shared_index[sel.head][k]] > zs[shared_index[sel.head][best]]) best = k;
        label = static_cast<std::uint32_t>(*home.index_of(shared[best]));
        result.refined[h * W + w] = label != fallback ? 1 : 0;
      }
      result.labels.at(h, w) = label;
      result.uncertainty.at(h, w) = sel.score;
    }
  }
  return result;
}

}  // namespace ecanet
