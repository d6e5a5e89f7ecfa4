#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bpm/analysis.hpp"
#include "bpm/domain.hpp"
#include "bpm/metrics.hpp"
#include "bpm/scoring.hpp"

namespace bpm {

/// Model directory layout, as written by the extractor:
///   <model>/<property>/{meta,data.f32}                 final (penultimate) layer
///   <model>/layers/<depth>/<property>/{meta,data.f32}  layerwise dumps
struct ModelSource {
  std::string model_id;
  std::filesystem::path dir;
};

struct RunConfig {
  std::filesystem::path stimulus_dir;
  std::vector<ModelSource> models;
  std::filesystem::path reference_path;
  ScoringConfig scoring;
  std::filesystem::path report_dir;
  // grouping name -> (model_id -> group label), for clustering strength
  std::map<std::string, std::map<std::string, std::string>> groupings;
  bool layerwise = false;
  std::uint64_t root_seed = 0;
  unsigned workers = 0;  // 0 = hardware concurrency
};

/// Reads a JSON run configuration. Relative paths resolve against the
/// config file's directory.
RunConfig read_run_config(const std::filesystem::path& path);

/// Throws on hard (configuration) errors: missing paths, unfilled reference.
void validate_run_config(const RunConfig& cfg);

struct SoftFailure {
  std::string model_id;
  std::string layer_tag;  // empty for the final layer
  PropertyId property;
  ErrorCode code;
  std::string message;
};

struct ClusteringResult {
  std::string grouping;
  double davies_bouldin = 0.0;
  double strength = 0.0;
  std::size_t n_models = 0;
};

struct BenchmarkReport {
  std::uint64_t root_seed = 0;
  ScoringConfig scoring;
  std::string reference_provenance;
  BrainReference reference;
  std::vector<EffectVector> effects;  // final layer, one per model, model order
  std::map<std::string, std::vector<EffectVector>> layer_effects;
  std::vector<RankedRow> ranking;
  std::optional<Embedding> embedding;
  std::vector<std::string> embedding_labels;
  std::vector<ClusteringResult> clustering;
  std::map<std::string, std::vector<TrajectoryPoint>> trajectories;
  std::map<std::string, std::map<std::string, std::string>> groupings;
  std::vector<SoftFailure> failures;
  std::vector<std::string> warnings;
};

/// Effect vectors for one model directory. Layerwise vectors are tagged
/// with their depth directory name.
struct ModelEffects {
  EffectComputation final_layer;
  std::vector<EffectComputation> layers;
};

std::map<PropertyId, StimulusSet> load_stimulus_manifests(const std::filesystem::path& stimulus_dir,
                                                          const ScoringConfig& cfg, std::vector<std::string>& warnings);

ModelEffects compute_model_effects(const ModelSource& model, const std::map<PropertyId, StimulusSet>& stimuli,
                                   const ScoringConfig& cfg, bool layerwise);

/// Scores, ranks and embeds precomputed effect vectors. `effects` are final
/// layer vectors; `layers` optional per-model layerwise vectors.
BenchmarkReport assemble_report(std::vector<EffectVector> effects,
                                std::map<std::string, std::vector<EffectVector>> layers, const BrainReference& ref,
                                const ScoringConfig& cfg,
                                const std::map<std::string, std::map<std::string, std::string>>& groupings);

BenchmarkReport run_benchmark(const RunConfig& cfg);

inline constexpr unsigned kReportScores = 1;    // ranking, presence, distances
inline constexpr unsigned kReportAnalysis = 2;  // embedding, trajectories, clustering
inline constexpr unsigned kReportAll = kReportScores | kReportAnalysis;

/// Writes the selected report tables into `dir`; effects.csv, failures.csv
/// and summary.json are always written. Output is a pure function of the
/// report, so reruns are byte-identical.
void emit_report(const BenchmarkReport& report, const std::filesystem::path& dir, unsigned parts = kReportAll);

std::string format_ranking_csv(const std::vector<RankedRow>& ranking);
std::string format_ranking_table(const std::vector<RankedRow>& ranking);
std::string format_presence_csv(const std::vector<EffectVector>& effects);
std::string format_presence_table(const std::vector<EffectVector>& effects);

/// Groupings CSV: header `model_id,<grouping>...`, one row per model.
std::map<std::string, std::map<std::string, std::string>> read_groupings(const std::filesystem::path& path);

}  // namespace bpm
