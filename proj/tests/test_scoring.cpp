#include "doctest.h"

#include <cmath>
#include <random>

#include "bpm/error.hpp"
#include "bpm/scoring.hpp"
#include "oracle.hpp"

using namespace bpm;

namespace {

// b and m on the first two properties only
std::pair<BrainReference, EffectVector> two_property_case() {
  BrainReference ref;
  for (PropertyId p : all_properties()) ref.set(p, 0.5);
  ref.set(PropertyId::NormPairs, 0.5);
  ref.set(PropertyId::NormTriplets, 0.2);
  EffectVector m("m");
  m.set(PropertyId::NormPairs, 0.3);
  m.set(PropertyId::NormTriplets, -0.1);
  return {ref, m};
}

ScoringConfig first_two() {
  ScoringConfig cfg;
  cfg.property_subset = {PropertyId::NormPairs, PropertyId::NormTriplets};
  return cfg;
}

}  // namespace

TEST_CASE("property distance") {
  CHECK(property_distance(0.5, 0.5, 2) == 0.0);
  CHECK(property_distance(0.2, -0.1, 2) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(property_distance(0.2, -0.1, 1) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(property_distance(0.2, 0.0, 2) == 0.2);
  // the printed form rewards anti-brain effects; kept only for comparison
  CHECK(property_distance(0.2, -0.1, 2, PenaltyForm::Printed) == doctest::Approx(0.0).epsilon(1e-15));
  try {
    property_distance(0.0, 0.1, 2);
    FAIL("expected NonpositiveBrainReference");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonpositiveBrainReference);
  }
}

TEST_CASE("hand-evaluated composite scores") {
  auto [ref, m] = two_property_case();
  const auto cfg = first_two();
  CHECK(bpm_score(m, ref, cfg) == 0.625);  // 1 / (1 + 0.2 + 0.4)
  CHECK(l1_similarity(m, ref, cfg) == doctest::Approx(1 / 1.5).epsilon(1e-15));
  CHECK(agreement(m, cfg) == 1);

  EffectVector clone("clone");
  clone.set(PropertyId::NormPairs, 0.5);
  clone.set(PropertyId::NormTriplets, 0.2);
  CHECK(bpm_score(clone, ref, cfg) == 1.0);
  CHECK(l1_similarity(clone, ref, cfg) == 1.0);
  CHECK(agreement(clone, cfg) == 2);
}

TEST_CASE("missing entries shrink the sum") {
  BrainReference ref;
  for (PropertyId p : all_properties()) ref.set(p, 0.4);
  EffectVector v("m");
  for (PropertyId p : all_properties())
    if (p != PropertyId::SceneIncongruence) v.set(p, 0.4);
  const ScoringConfig cfg;
  CHECK(scored_properties(v, cfg).size() == 14);
  CHECK(bpm_score(v, ref, cfg) == 1.0);
  const auto card = score_model(v, ref, cfg);
  CHECK(card.n_scored == 14);
  CHECK_FALSE(card.distance[property_index(PropertyId::SceneIncongruence)].has_value());
  CHECK_FALSE(card.present[property_index(PropertyId::SceneIncongruence)].has_value());
  CHECK(agreement(v, cfg) == 14);
}

TEST_CASE("scoring invariants on random vectors") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1), b(0.01, 1);
  for (int t = 0; t < 200; ++t) {
    BrainReference ref;
    EffectVector v("m");
    oracle::Vec bv, mv;
    for (PropertyId p : all_properties()) {
      ref.set(p, b(rng));
      v.set(p, u(rng));
      bv.push_back(*ref.get(p));
      mv.push_back(*v.get(p));
    }
    ScoringConfig cfg;
    for (double lambda : {0.0, 1.0, 2.0, 3.5}) {
      cfg.lambda = lambda;
      CHECK(std::fabs(bpm_score(v, ref, cfg) - oracle::bpm(bv, mv, lambda)) < 1e-12);
    }
    cfg.lambda = 1;
    CHECK(std::fabs(bpm_score(v, ref, cfg) - oracle::l1_similarity(bv, mv)) < 1e-12);
    CHECK(std::fabs(l1_similarity(v, ref, cfg) - oracle::l1_similarity(bv, mv)) < 1e-12);

    // a larger single distance gives a lower BPM
    BrainReference r2 = ref;
    r2.set(PropertyId::Thatcher, 0.5);
    EffectVector d0 = v, d1 = v, d2 = v;
    d0.set(PropertyId::Thatcher, 0.5);
    d1.set(PropertyId::Thatcher, 0.9);
    d2.set(PropertyId::Thatcher, -0.2);
    CHECK(bpm_score(d1, r2, cfg) < bpm_score(d0, r2, cfg));
    CHECK(bpm_score(d2, r2, cfg) < bpm_score(d1, r2, cfg));

    // binarization is invariant to positive rescaling
    EffectVector scaled("m");
    const double c = b(rng);
    for (PropertyId p : all_properties()) scaled.set(p, *v.get(p) * c);
    CHECK(binarize(scaled) == binarize(v));
  }

  // all-positive effects: BPM does not depend on lambda
  BrainReference ref;
  EffectVector pos("p");
  for (PropertyId p : all_properties()) {
    ref.set(p, 0.3);
    pos.set(p, 0.1 + 0.05 * static_cast<double>(property_index(p)) / 15);
  }
  ScoringConfig a, c;
  a.lambda = 0.5;
  c.lambda = 7;
  CHECK(bpm_score(pos, ref, a) == bpm_score(pos, ref, c));
}

TEST_CASE("ranking") {
  BrainReference ref;
  for (PropertyId p : all_properties()) ref.set(p, 0.5);
  EffectVector clone("clone"), near("near"), anti("anti");
  for (PropertyId p : all_properties()) {
    clone.set(p, 0.5);
    near.set(p, 0.45);
    anti.set(p, -0.5);
  }
  const ScoringConfig cfg;
  // hand: near sums 15 * 0.05 = 0.75 -> 1/1.75; anti sums 15 * (0.5 + 1) -> 1/23.5
  const auto ranked = rank_models({score_model(anti, ref, cfg), score_model(near, ref, cfg), score_model(clone, ref, cfg)});
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0].card.model_id == "clone");
  CHECK(ranked[1].card.model_id == "near");
  CHECK(ranked[1].card.bpm == doctest::Approx(1 / 1.75).epsilon(1e-14));
  CHECK(ranked[2].card.model_id == "anti");
  CHECK(ranked[2].card.bpm == doctest::Approx(1 / 23.5).epsilon(1e-14));
  CHECK(ranked[0].rank == 1);
  CHECK(ranked[2].rank == 3);

  // exact ties fall back to agreement, then model id
  EffectVector x("b_model"), y("a_model");
  for (PropertyId p : all_properties()) {
    x.set(p, 0.5);
    y.set(p, 0.5);
  }
  const auto tie = rank_models({score_model(x, ref, cfg), score_model(y, ref, cfg)});
  CHECK(tie[0].card.model_id == "a_model");
}
