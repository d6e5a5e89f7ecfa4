#include "doctest.h"

#include "bpm/pipeline.hpp"
#include "fixtures.hpp"

using namespace bpm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) { return read_text_file(p); }

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  for (auto& l : split(s, '\n'))
    if (!l.empty()) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("two models are scored and ranked") {
  const auto w = fixtures::make_world("pipe_two", 2);
  const auto report = run_benchmark(w.config);
  REQUIRE(report.ranking.size() == 2);
  CHECK(report.ranking[0].rank == 1);
  CHECK(report.ranking[1].rank == 2);
  CHECK(report.ranking[0].card.bpm >= report.ranking[1].card.bpm);
  for (const auto& row : report.ranking) {
    CHECK(row.card.bpm > 0.0);
    CHECK(row.card.bpm <= 1.0);
    CHECK(row.card.n_scored > 0);
  }
  REQUIRE(report.effects.size() == 2);
  CHECK(report.effects[0].model_id() == "net0");
  // every failure must explain a missing entry
  for (const auto& f : report.failures) CHECK_FALSE(report.effects[f.model_id == "net0" ? 0 : 1].has(f.property));
  for (const auto& v : report.effects)
    for (const auto& e : v.entries()) {
      if (!e.effect) continue;
      const auto b = effect_bounds(e.property);
      CHECK(*e.effect >= b.lo);
      CHECK(*e.effect <= b.hi);
    }

  emit_report(report, w.root / "r1");
  emit_report(report, w.root / "r2");
  for (const char* f : {"ranking.csv", "ranking.txt", "presence.csv", "presence.txt", "distances.csv", "effects.csv",
                        "failures.csv", "summary.json", "embedding.csv", "clustering.csv"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(w.root / "r1" / f));
    CHECK(slurp(w.root / "r1" / f) == slurp(w.root / "r2" / f));
  }
  const auto ranking = lines(slurp(w.root / "r1" / "ranking.csv"));
  CHECK(ranking.size() == 3);
  CHECK(ranking[0] == "rank,model_id,bpm,agreement,l1_similarity,n_scored");

  // effects.csv parses back to the same vectors
  CHECK(read_effect_vectors(w.root / "r1" / "effects.csv") == report.effects);
}

TEST_CASE("a missing container is a soft failure") {
  auto w = fixtures::make_world("pipe_missing", 2);
  fs::remove_all(w.root / "models" / "net1" / "thatcher");
  const auto report = run_benchmark(w.config);
  CHECK(report.ranking.size() == 2);
  bool found = false;
  for (const auto& f : report.failures)
    found = found || (f.model_id == "net1" && f.property == PropertyId::Thatcher && f.code == ErrorCode::MissingContainer);
  CHECK(found);
  CHECK_FALSE(report.effects[1].has(PropertyId::Thatcher));

  const auto presence = lines(format_presence_csv(report.effects));
  CHECK(presence.size() == 3);
  CHECK(split(presence[0], ',').size() == 16);
  const auto table = format_ranking_table(report.ranking);
  CHECK(table.find("net1") != std::string::npos);
}

TEST_CASE("hard configuration errors") {
  auto w = fixtures::make_world("pipe_hard", 1);
  write_text_file(w.reference, brain_reference_template());
  try {
    run_benchmark(w.config);
    FAIL("expected MissingBrainReference");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingBrainReference);
  }
  w.config.scoring.lambda = -1;
  CHECK_THROWS_AS(validate_run_config(w.config), Error);
}

TEST_CASE("run configuration file") {
  const auto dir = fixtures::scratch_dir("cfg");
  write_text_file(dir / "run.json", R"({
    "stimuli": "stim", "reference": "ref.txt", "output": "out",
    "models": {"b": "models/b", "a": "models/a"},
    "root_seed": 9, "workers": 3,
    "scoring": {"lambda": 1.5, "distance_metric": "cityblock", "penalty": "printed", "properties": ["thatcher", "webers_law"]},
    "groupings": {"family": {"a": "x", "b": "y"}}
  })");
  const auto cfg = read_run_config(dir / "run.json");
  CHECK(cfg.stimulus_dir == dir / "stim");
  CHECK(cfg.report_dir == dir / "out");
  CHECK(cfg.models.size() == 2);
  CHECK(cfg.root_seed == 9);
  CHECK(cfg.workers == 3);
  CHECK(cfg.scoring.lambda == 1.5);
  CHECK(cfg.scoring.distance_metric == DistanceMetric::Cityblock);
  CHECK(cfg.scoring.penalty == PenaltyForm::Printed);
  CHECK(cfg.scoring.property_subset == std::set<PropertyId>{PropertyId::Thatcher, PropertyId::WebersLaw});
  CHECK(cfg.groupings.at("family").at("b") == "y");

  write_text_file(dir / "groups.csv", "model_id,family,size\na,x,small\nb,y,large\n");
  const auto g = read_groupings(dir / "groups.csv");
  CHECK(g.at("size").at("b") == "large");
  CHECK(g.at("family").at("a") == "x");
}

TEST_CASE("assembled reports from precomputed effects") {
  BrainReference ref;
  for (PropertyId p : all_properties()) ref.set(p, 0.5);
  std::vector<EffectVector> vs;
  for (int i = 0; i < 4; ++i) {
    EffectVector v("m" + std::to_string(i));
    for (PropertyId p : all_properties()) v.set(p, 0.5 + 0.1 * ((i * 7 + property_index(p)) % 5) - 0.2);
    vs.push_back(v);
  }
  ScoringConfig cfg;
  const auto r = assemble_report(vs, {}, ref, cfg, {{"pairs", {{"m0", "a"}, {"m1", "a"}, {"m2", "b"}, {"m3", "b"}}}});
  CHECK(r.ranking.size() == 4);
  REQUIRE(r.embedding);
  CHECK(r.embedding->coordinates.size() == 5);  // models plus the brain
  CHECK(r.embedding_labels.back() == "brain");
  REQUIRE(r.clustering.size() == 1);
  CHECK(r.clustering[0].n_models == 4);
  CHECK(r.clustering[0].strength == doctest::Approx(clustering_strength(r.clustering[0].davies_bouldin)));
}

TEST_CASE("layerwise runs produce ordered trajectories") {
  const auto w = fixtures::make_world("pipe_layers", 2, 4, true);
  const auto report = run_benchmark(w.config);
  REQUIRE(report.trajectories.count("net0"));
  const auto& t = report.trajectories.at("net0");
  REQUIRE(t.size() == 3);
  CHECK(t.front().first);
  CHECK(t.back().last);
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i - 1].depth_percentile < t[i].depth_percentile);
  emit_report(report, w.root / "rl");
  CHECK(lines(slurp(w.root / "rl" / "trajectories.csv")).size() == 7);
}
