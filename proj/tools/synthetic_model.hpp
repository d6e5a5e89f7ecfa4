#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace bpm::synth {

// A throwaway "network" for demos and end-to-end tests: block-averaged
// grayscale pixels pushed through a few random ReLU layers. Writes the
// extractor directory layout so the benchmark can consume it directly.
struct SyntheticModel {
  std::string model_id;
  std::uint64_t seed = 1;
  int grid = 16;       // input is grid x grid block averages
  int units = 64;      // per layer
  int depth = 4;       // hidden layers; the last one is the scored layer
  bool layerwise = false;
};

/// Runs every `<stimulus_dir>/<property>/manifest.tsv` set through the model
/// and writes `<out_dir>/<property>/{meta,data.f32}` (plus `layers/<pct>/`).
/// Returns the number of containers written.
int write_synthetic_model(const SyntheticModel& m, const std::filesystem::path& stimulus_dir,
                          const std::filesystem::path& out_dir);

/// Writes a tiny scene asset bundle (flat-color objects and scenes) so the
/// scene protocol can be exercised without real photographs.
void write_toy_scene_assets(const std::filesystem::path& dir, int n_objects, std::uint64_t seed);

}  // namespace bpm::synth
