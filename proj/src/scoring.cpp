#include "bpm/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "bpm/error.hpp"

namespace bpm {

double property_distance(double b, double m, double lambda, PenaltyForm form) {
  if (!(b > 0.0)) throw Error(ErrorCode::NonpositiveBrainReference, "b = " + format_double(b));
  if (m > 0.0) return std::abs(b - m);
  return form == PenaltyForm::Corrected ? b - lambda * m : b + lambda * m;
}

std::vector<PropertyId> scored_properties(const EffectVector& effects, const ScoringConfig& cfg) {
  std::vector<PropertyId> out;
  for (PropertyId p : all_properties()) {
    if (cfg.property_subset.count(p) && effects.has(p)) out.push_back(p);
  }
  return out;
}

namespace {

double reference_for(const BrainReference& ref, PropertyId p) {
  const auto b = ref.get(p);
  if (!b) throw Error(ErrorCode::MissingBrainReference, std::string(property_name(p)));
  return *b;
}

}  // namespace

double bpm_score(const EffectVector& effects, const BrainReference& ref, const ScoringConfig& cfg) {
  double total = 0.0;
  for (PropertyId p : scored_properties(effects, cfg)) {
    total += property_distance(reference_for(ref, p), *effects.get(p), cfg.lambda, cfg.penalty);
  }
  if (!(1.0 + total > 0.0)) {
    throw Error(ErrorCode::InvariantViolation, "total distance " + format_double(total) + " makes BPM undefined");
  }
  return 1.0 / (1.0 + total);
}

int agreement(const EffectVector& effects, const ScoringConfig& cfg) {
  int n = 0;
  for (PropertyId p : scored_properties(effects, cfg)) n += (*effects.get(p) > 0.0) ? 1 : 0;
  return n;
}

double l1_similarity(const EffectVector& effects, const BrainReference& ref, const ScoringConfig& cfg) {
  double total = 0.0;
  for (PropertyId p : scored_properties(effects, cfg)) total += std::abs(reference_for(ref, p) - *effects.get(p));
  return 1.0 / (1.0 + total);
}

std::array<std::optional<bool>, kPropertyCount> binarize(const EffectVector& effects) {
  std::array<std::optional<bool>, kPropertyCount> out{};
  for (const auto& e : effects.entries()) {
    if (e.effect) out[property_index(e.property)] = *e.effect > 0.0;
  }
  return out;
}

ScoreCard score_model(const EffectVector& effects, const BrainReference& ref, const ScoringConfig& cfg) {
  ScoreCard card;
  card.model_id = effects.model_id();
  card.bpm = bpm_score(effects, ref, cfg);
  card.agreement = agreement(effects, cfg);
  card.l1_similarity = l1_similarity(effects, ref, cfg);
  const auto scored = scored_properties(effects, cfg);
  card.n_scored = scored.size();
  for (PropertyId p : scored) {
    const auto i = property_index(p);
    card.distance[i] = property_distance(reference_for(ref, p), *effects.get(p), cfg.lambda, cfg.penalty);
    card.present[i] = *effects.get(p) > 0.0;
  }
  return card;
}

std::vector<RankedRow> rank_models(std::vector<ScoreCard> cards) {
  std::sort(cards.begin(), cards.end(), [](const ScoreCard& a, const ScoreCard& b) {
    if (a.bpm != b.bpm) return a.bpm > b.bpm;
    if (a.agreement != b.agreement) return a.agreement > b.agreement;
    return a.model_id < b.model_id;
  });
  std::vector<RankedRow> out;
  for (std::size_t i = 0; i < cards.size(); ++i) out.push_back({static_cast<int>(i + 1), std::move(cards[i])});
  return out;
}

}  // namespace bpm
