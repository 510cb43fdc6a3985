#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ecanet/autodiff.hpp"
#include "ecanet/random.hpp"
#include "ecanet/tensor.hpp"

namespace ecanet {

/// Options shared by every attention variant. Both toggles default off:
/// the modules compute bare dot-product attention and their outputs are
/// concatenated by the head rather than added back to the input.
struct AttentionOptions {
  bool scale_affinity = false;  // multiply affinities by 1/sqrt(C) before softmax
  bool residual = false;        // add the input to the attended output
  // Eager execution refuses to materialize a single affinity map larger than
  // this many entries (MemoryBudgetError). Counting runs ignore it.
  std::uint64_t max_affinity_entries = std::uint64_t{1} << 24;
};

/// Horizontal segment attention geometry.
struct HsaConfig {
  std::size_t segments = 4;
  std::size_t pooled_h = 2;
  std::size_t pooled_w = 16;
  std::size_t reduced_channels = 0;  // 0 selects max(Ce/8, 1)
  AttentionOptions options{};
};

/// Pyramidal space attention geometry; one attention branch per scale.
struct PsaConfig {
  std::vector<std::pair<std::size_t, std::size_t>> scales{{3, 3}, {4, 4}, {6, 6}};
  std::size_t reduced_channels = 0;  // 0 selects max(Ce/8, 1)
  AttentionOptions options{};
};

/// Query/key width used when a config leaves reduced_channels at 0.
std::size_t default_reduced_channels(std::size_t input_channels);
std::size_t resolve_reduced_channels(std::size_t configured, std::size_t input_channels);

/// Validates HSA geometry against a (Ce,He,We) input; throws GeometryError.
void validate(const HsaConfig& cfg, std::size_t He, std::size_t We);
void validate(const PsaConfig& cfg, std::size_t He, std::size_t We);

/// 1x1 projection matrices for one attention branch: Wq, Wk are (C x Ce),
/// Wv is (Ce x Ce).
struct AttentionWeights {
  Tensor wq;
  Tensor wk;
  Tensor wv;

  std::size_t input_channels() const { return wv.extent(1); }
  std::size_t reduced_channels() const { return wq.extent(0); }

  /// Uniform in [-1/sqrt(Ce), 1/sqrt(Ce)].
  static AttentionWeights random(std::size_t input_channels, std::size_t reduced_channels, SplitMix64& rng);
};

struct EcaWeights {
  AttentionWeights hsa;
  std::vector<AttentionWeights> psa;  // one per PSA scale

  static EcaWeights random(std::size_t input_channels, const HsaConfig& hsa, const PsaConfig& psa,
                           SplitMix64& rng);
};

FeatureMap hsa_forward(const FeatureMap& f, const HsaConfig& cfg, const AttentionWeights& w);
std::vector<FeatureMap> psa_forward(const FeatureMap& f, const PsaConfig& cfg,
                                    std::span<const AttentionWeights> w);
FeatureMap nonlocal_forward(const FeatureMap& f, const AttentionWeights& w,
                            const AttentionOptions& options = {});
/// Backbone, HSA output and every PSA output stacked along channels:
/// Ce * (2 + scales) channels.
FeatureMap ecanet_head(const FeatureMap& f, const HsaConfig& hsa, const PsaConfig& psa, const EcaWeights& w);

// Differentiable versions recorded on a tape. Same pipeline as above.
struct AttentionVars {
  Var wq;
  Var wk;
  Var wv;
};
AttentionVars attach(Tape& tape, const AttentionWeights& w, const std::string& prefix);

Var hsa_forward(Tape& tape, const Var& f, const HsaConfig& cfg, const AttentionVars& w);
std::vector<Var> psa_forward(Tape& tape, const Var& f, const PsaConfig& cfg, std::span<const AttentionVars> w);
Var nonlocal_forward(Tape& tape, const Var& f, const AttentionVars& w, const AttentionOptions& options = {});
Var ecanet_head(Tape& tape, const Var& f, const HsaConfig& hsa, const PsaConfig& psa, const AttentionVars& hsa_w,
                std::span<const AttentionVars> psa_w);

// Counting-only runs: identical control flow and ledger events over shapes
// alone, no arithmetic. Used to audit shapes too large to materialize.
// `reduced_channels` of 0 resolves to max(Ce/8, 1).
Shape count_hsa(const Shape& input, const HsaConfig& cfg);
std::vector<Shape> count_psa(const Shape& input, const PsaConfig& cfg);
Shape count_nonlocal(const Shape& input, std::size_t reduced_channels = 0, const AttentionOptions& options = {});

}  // namespace ecanet
