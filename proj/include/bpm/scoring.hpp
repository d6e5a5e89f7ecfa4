#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bpm/domain.hpp"

namespace bpm {

struct ScoreCard {
  std::string model_id;
  double bpm = 0.0;
  int agreement = 0;
  double l1_similarity = 0.0;
  std::array<std::optional<double>, kPropertyCount> distance{};  // D_i, unset when excluded
  std::array<std::optional<bool>, kPropertyCount> present{};     // effect > 0, unset when missing
  std::size_t n_scored = 0;
};

/// Per-property distance from the brain. Positive effects cost |b - m|;
/// non-positive effects cost b - lambda * m under the corrected form, so the
/// penalty grows with lambda and lambda = 1 gives |b - m|.
double property_distance(double b, double m, double lambda, PenaltyForm form = PenaltyForm::Corrected);

/// Properties that enter the composite sums: in the config subset and
/// present in the effect vector.
std::vector<PropertyId> scored_properties(const EffectVector& effects, const ScoringConfig& cfg);

/// 1 / (1 + sum of property distances) over the scored properties.
double bpm_score(const EffectVector& effects, const BrainReference& ref, const ScoringConfig& cfg);

/// Number of scored properties with a positive effect.
int agreement(const EffectVector& effects, const ScoringConfig& cfg);

/// 1 / (1 + Manhattan distance to the reference) over the scored properties.
double l1_similarity(const EffectVector& effects, const BrainReference& ref, const ScoringConfig& cfg);

/// Presence per property (effect > 0); nullopt for missing entries.
std::array<std::optional<bool>, kPropertyCount> binarize(const EffectVector& effects);

ScoreCard score_model(const EffectVector& effects, const BrainReference& ref, const ScoringConfig& cfg);

struct RankedRow {
  int rank = 0;
  ScoreCard card;
};

/// Descending BPM; ties broken by higher agreement, then model_id.
std::vector<RankedRow> rank_models(std::vector<ScoreCard> cards);

}  // namespace bpm
