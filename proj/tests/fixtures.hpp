#pragma once

// Stimulus sets from the real generators paired with hand-built activation
// containers whose effect is known in closed form. Every planted value is
// exactly representable in float32 so the container round trip loses nothing.

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <unistd.h>

#include "bpm/activation_store.hpp"
#include "bpm/metrics.hpp"
#include "bpm/pipeline.hpp"
#include "bpm/stimulus.hpp"
#include "oracle.hpp"
#include "synthetic_model.hpp"

namespace fixtures {

using namespace bpm;
namespace fs = std::filesystem;

inline fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("bpm_test_" + std::to_string(::getpid())) / name;
  fs::create_directories(dir);
  return dir;
}

inline const fs::path& toy_assets() {
  static const fs::path dir = [] {
    const auto d = scratch_dir("assets");
    synth::write_toy_scene_assets(d, 8, 11);
    return d;
  }();
  return dir;
}

/// Small but structurally complete stimulus set for `p`.
inline StimulusSet small_set(PropertyId p, std::uint64_t seed = 1, int count = 6) {
  StimulusSpec spec;
  spec.property = p;
  spec.canvas_px = 64;
  spec.count = count;
  spec.seed = seed;
  spec.weber_start = 4.0;
  spec.weber_count = 6;
  spec.displays = 12;
  if (p == PropertyId::SceneIncongruence) spec.assets_dir = toy_assets();
  return generate_stimulus_set(spec);
}

inline std::vector<std::string> ids_of(const StimulusSet& s) {
  std::vector<std::string> ids;
  for (const auto& r : s.manifest) ids.push_back(r.stimulus_id);
  return ids;
}

/// Container whose row for record i is `row(i, record)`.
inline ActivationContainer build(const StimulusSet& s, std::size_t units,
                                 const std::function<std::vector<double>(std::size_t, const ManifestRecord&)>& row,
                                 ContainerKind kind = ContainerKind::Activations, std::map<int, std::string> labels = {}) {
  std::vector<float> data;
  for (std::size_t i = 0; i < s.manifest.size(); ++i) {
    const auto r = row(i, s.manifest[i]);
    for (double v : r) data.push_back(static_cast<float>(v));
  }
  return ActivationContainer("planted", "100", kind, ids_of(s), units, std::move(data), std::move(labels));
}

struct Planted {
  StimulusSet set;
  ActivationContainer container;
  double expected;
};

/// Distances planted per group, in the order the index consumes them:
/// role -> offset along a private axis, scaled by a per-group power of two.
inline Planted plant_grouped(PropertyId p, std::mt19937_64& rng, const std::map<std::string, std::pair<int, double>>& offsets,
                             double expected) {
  auto set = small_set(p, rng());
  constexpr std::size_t kUnits = 12;
  std::map<std::string, std::vector<double>> base;
  std::map<std::string, double> scale;
  std::uniform_int_distribution<int> digit(1, 9);
  auto c = build(set, kUnits, [&](std::size_t, const ManifestRecord& r) {
    auto& b = base[r.group_id];
    if (b.empty()) {
      for (std::size_t u = 0; u < kUnits; ++u) b.push_back(digit(rng));
      scale[r.group_id] = std::ldexp(1.0, static_cast<int>(base.size() % 4));
    }
    auto v = b;
    const auto& [axis, amount] = offsets.at(r.role);
    if (axis >= 0) v[static_cast<std::size_t>(axis)] += amount * scale[r.group_id];
    return v;
  });
  return {std::move(set), std::move(c), expected};
}

inline double weber_expected_planted(const StimulusSet& set) {
  std::vector<double> lengths;
  for (const auto& r : set.manifest) lengths.push_back(*r.value);
  const auto [g, a] = oracle::weber_regressors(lengths);
  return oracle::pearson(a, g) - 1.0;  // distances equal |l_i - l_j|
}

/// Planted instance for every property; `expected` is known analytically
/// (or from the oracle for the Weber regressors).
inline Planted planted(PropertyId p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // An offset of {axis, amount}; two roles on different axes are sqrt(a^2+b^2)
  // apart, so roles compared by a metric either share the base or sit on it.
  switch (p) {
    case PropertyId::NormPairs:
    case PropertyId::NormTriplets: {
      auto set = small_set(p, seed);
      const int arity = normalization_arity(p);
      constexpr std::size_t kUnits = 10;
      std::map<std::string, std::vector<double>> single;
      std::uniform_int_distribution<int> digit(1, 8);
      for (const auto& r : set.manifest) {
        if (r.role != role::kSingle) continue;
        auto& v = single[r.stimulus_id];
        for (std::size_t u = 0; u < kUnits; ++u) v.push_back(arity * digit(rng));
      }
      auto c = build(set, kUnits, [&](std::size_t, const ManifestRecord& r) {
        if (r.role == role::kSingle) return single.at(r.stimulus_id);
        std::vector<double> v(kUnits, 0.0);
        for (const auto& l : r.links)
          for (std::size_t u = 0; u < kUnits; ++u) v[u] += single.at(l)[u] / arity;
        return v;
      });
      return {std::move(set), std::move(c), 1.0 / arity};
    }
    case PropertyId::SceneIncongruence: {
      auto set = small_set(p, seed);
      int classes = 0;
      for (const auto& r : set.manifest) classes = std::max(classes, static_cast<int>(*r.value) + 1);
      std::map<int, std::string> labels;
      for (int k = 0; k < classes; ++k) labels[k] = "c" + std::to_string(k);
      // congruent always right; every other incongruent trial wrong
      int incongruent_seen = 0;
      auto c = build(
          set, static_cast<std::size_t>(classes),
          [&](std::size_t, const ManifestRecord& r) {
            int guess = static_cast<int>(*r.value);
            if (r.role == role::kIncongruent && incongruent_seen++ % 2 == 1) guess = (guess + 1) % classes;
            std::vector<double> v(static_cast<std::size_t>(classes), 0.25 / (classes - 1));
            v[static_cast<std::size_t>(guess)] = 0.75;
            return v;
          },
          ContainerKind::ClassProbabilities, labels);
      const double acc_i = static_cast<double>(incongruent_seen - incongruent_seen / 2) / incongruent_seen;
      return {std::move(set), std::move(c), (1.0 - acc_i) / (1.0 + acc_i)};
    }
    case PropertyId::MirrorConfusion: {
      // orig = base + (1, 0), vflip = base + (1, 1/8), hflip = base + (0, 1) on the first two units
      auto set = small_set(p, seed);
      std::map<std::string, std::vector<double>> base;
      std::uniform_int_distribution<int> digit(1, 9);
      auto c = build(set, 8, [&](std::size_t, const ManifestRecord& r) {
        auto& b = base[r.group_id];
        if (b.empty())
          for (int u = 0; u < 8; ++u) b.push_back(digit(rng));
        auto v = b;
        if (r.role == role::kOriginal) v[0] += 1;
        if (r.role == role::kVflip) v[0] += 1, v[1] += 0.125;
        if (r.role == role::kHflip) v[1] += 1;
        return v;
      });
      return {std::move(set), std::move(c), (std::sqrt(2.0) - 0.125) / (std::sqrt(2.0) + 0.125)};
    }
    case PropertyId::SparsenessMorph:
    case PropertyId::SparsenessShapeTexture: {
      // unit u fires (at a unit-specific level) for its first k_u stimuli of
      // each set; sparseness on either set is affine in k_u, so r = 1
      auto set = small_set(p, seed);
      const auto first_role = p == PropertyId::SparsenessMorph ? role::kReference : role::kShape;
      std::size_t n_a = 0, n_b = 0;
      for (const auto& r : set.manifest) (r.role == first_role ? n_a : n_b)++;
      const std::size_t units = 9;
      std::vector<std::size_t> k(units);
      std::vector<double> level(units);
      for (std::size_t u = 0; u < units; ++u) {
        k[u] = 1 + u % (std::min(n_a, n_b) - 1);
        level[u] = 1 + u % 3;
      }
      std::size_t seen_a = 0, seen_b = 0;
      auto c = build(set, units, [&](std::size_t, const ManifestRecord& r) {
        const std::size_t pos = r.role == first_role ? seen_a++ : seen_b++;
        std::vector<double> v(units);
        for (std::size_t u = 0; u < units; ++u) v[u] = pos < k[u] ? level[u] : 0.0;
        return v;
      });
      return {std::move(set), std::move(c), 1.0};
    }
    case PropertyId::WebersLaw: {
      auto set = small_set(p, seed);
      auto c = build(set, 3, [&](std::size_t, const ManifestRecord& r) { return std::vector<double>{*r.value, 1, 2}; });
      const double e = weber_expected_planted(set);
      return {std::move(set), std::move(c), e};
    }
    // {d2 on axis 0, d1 on axis 1}: OI = (2 - 4) / 6
    case PropertyId::OcclusionBasic:
      return plant_grouped(p, rng, {{"unoccluded", {-1, 0}}, {"occluded", {1, 4}}, {"control", {0, 2}}}, -1.0 / 3);
    // d1 = 0: maximal completion
    case PropertyId::OcclusionDepth:
      return plant_grouped(p, rng, {{"unoccluded", {-1, 0}}, {"occluded", {-1, 0}}, {"control", {0, 3}}}, 1.0);
    // d2 = 3 (proportional), d1 = 1 (disproportional)
    case PropertyId::RelativeSize:
      return plant_grouped(p, rng, {{"base", {-1, 0}}, {"proportional", {0, 3}}, {"disproportional", {1, 1}}}, 0.5);
    // d2 = 2 (congruent), d1 = 0.5 (incongruent): 1.5 / 2.5
    case PropertyId::SurfaceInvariance:
      return plant_grouped(p, rng, {{"base", {-1, 0}}, {"congruent", {0, 2}}, {"incongruent", {1, 0.5}}}, 0.6);
    // 3D pair 1.5 apart, 2D pair 0.5 apart
    case PropertyId::ThreeD1:
      return plant_grouped(p, rng,
                           {{"base_3d", {-1, 0}}, {"changed_3d", {0, 1.5}}, {"base_2d", {-1, 0}}, {"changed_2d", {1, 0.5}}},
                           0.5);
    // reversed: anti-brain
    case PropertyId::ThreeD2:
      return plant_grouped(p, rng,
                           {{"base_3d", {-1, 0}}, {"changed_3d", {0, 0.5}}, {"base_2d", {-1, 0}}, {"changed_2d", {1, 1.5}}},
                           -0.5);
    case PropertyId::GlobalAdvantage:
      return plant_grouped(p, rng, {{"reference", {-1, 0}}, {"global_change", {0, 0.75}}, {"local_change", {1, 0.25}}},
                           0.5);
    case PropertyId::Thatcher:
      return plant_grouped(p, rng,
                           {{"upright", {-1, 0}},
                            {"upright_thatcher", {0, 0.25}},
                            {"inverted", {-1, 0}},
                            {"inverted_thatcher", {1, 0.5}}},
                           -1.0 / 3);
  }
  throw std::logic_error("unhandled property");
}

/// Random nonnegative responses aligned to a small generated set.
inline ActivationContainer random_container(const StimulusSet& set, std::size_t units, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return build(set, units, [&](std::size_t, const ManifestRecord&) {
    std::vector<double> v(units);
    for (auto& x : v) x = u(rng) < 0.2 ? 0.0 : u(rng);
    return v;
  });
}

inline oracle::Mat rows_of(const ActivationContainer& c) {
  oracle::Mat m;
  for (std::size_t i = 0; i < c.n_stimuli(); ++i) {
    const auto r = c.row(i);
    m.emplace_back(r.begin(), r.end());
  }
  return m;
}

/// The effect recomputed from scratch with the oracle formulas.
inline double oracle_effect(PropertyId p, const StimulusSet& s, const ActivationContainer& c, double threshold = 1e-6,
                            const std::string& metric = "euclidean") {
  const auto acts = rows_of(c);
  std::map<std::string, std::size_t> row;
  for (std::size_t i = 0; i < c.n_stimuli(); ++i) row[c.stimulus_ids()[i]] = i;
  auto dist = [&](const oracle::Vec& x, const oracle::Vec& y) {
    if (metric == "cityblock") return oracle::cityblock(x, y);
    if (metric == "one_minus_pearson") return oracle::one_minus_pearson(x, y);
    return oracle::euclidean(x, y);
  };
  // group -> role -> responses
  std::map<std::string, std::map<std::string, oracle::Vec>> groups;
  for (const auto& r : s.manifest) groups[r.group_id][r.role] = acts[row.at(r.stimulus_id)];
  auto grouped = [&](const char* a, const char* b, const char* c2, const char* d) {
    std::vector<std::pair<double, double>> pairs;
    for (auto& [g, roles] : groups) pairs.emplace_back(dist(roles.at(a), roles.at(b)), dist(roles.at(c2), roles.at(d)));
    return oracle::mean_index(pairs);
  };
  switch (p) {
    case PropertyId::NormPairs:
    case PropertyId::NormTriplets: {
      std::vector<std::pair<std::size_t, std::vector<std::size_t>>> displays;
      for (const auto& r : s.manifest) {
        if (r.role != "multi") continue;
        std::vector<std::size_t> singles;
        for (const auto& l : r.links) singles.push_back(row.at(l));
        displays.emplace_back(row.at(r.stimulus_id), singles);
      }
      return oracle::normalization_slope(acts, displays, oracle::active_units(acts, threshold));
    }
    case PropertyId::SceneIncongruence: {
      oracle::Mat pc, pi;
      std::vector<int> lc, li;
      for (const auto& r : s.manifest) {
        (r.role == "congruent" ? pc : pi).push_back(acts[row.at(r.stimulus_id)]);
        (r.role == "congruent" ? lc : li).push_back(static_cast<int>(*r.value));
      }
      const double ac = oracle::top1(pc, lc), ai = oracle::top1(pi, li);
      return (ac - ai) / (ac + ai);
    }
    case PropertyId::MirrorConfusion: return grouped("original", "hflip", "original", "vflip");
    case PropertyId::SparsenessMorph:
    case PropertyId::SparsenessShapeTexture: {
      const std::string first = p == PropertyId::SparsenessMorph ? "reference" : "shape";
      std::vector<std::size_t> ra, rb;
      for (const auto& r : s.manifest) (r.role == first ? ra : rb).push_back(row.at(r.stimulus_id));
      return oracle::correlated_sparseness(acts, ra, rb, oracle::active_units(acts, threshold));
    }
    case PropertyId::WebersLaw: {
      oracle::Vec d, lengths;
      for (std::size_t i = 0; i < s.manifest.size(); ++i) {
        lengths.push_back(*s.manifest[i].value);
        for (std::size_t j = i + 1; j < s.manifest.size(); ++j)
          d.push_back(dist(acts[row.at(s.manifest[i].stimulus_id)], acts[row.at(s.manifest[j].stimulus_id)]));
      }
      return oracle::weber(d, lengths);
    }
    case PropertyId::OcclusionBasic:
    case PropertyId::OcclusionDepth: return grouped("unoccluded", "control", "unoccluded", "occluded");
    case PropertyId::RelativeSize: return grouped("base", "proportional", "base", "disproportional");
    case PropertyId::SurfaceInvariance: return grouped("base", "congruent", "base", "incongruent");
    case PropertyId::ThreeD1:
    case PropertyId::ThreeD2: return grouped("base_3d", "changed_3d", "base_2d", "changed_2d");
    case PropertyId::GlobalAdvantage: return grouped("reference", "global_change", "reference", "local_change");
    case PropertyId::Thatcher: return grouped("upright", "upright_thatcher", "inverted", "inverted_thatcher");
  }
  throw std::logic_error("unhandled property");
}

/// A complete on-disk run: every stimulus set (small), synthetic models and a
/// filled brain reference with every value set to `ref_value`.
struct World {
  fs::path root, stimuli, reference;
  RunConfig config;
};

inline World make_world(const std::string& name, int n_models, std::uint64_t seed = 3, bool layerwise = false,
                        double ref_value = 0.5, bool full_size = false) {
  World w;
  w.root = scratch_dir(name);
  w.stimuli = w.root / "stimuli";
  for (PropertyId p : all_properties()) {
    StimulusSpec spec;
    spec.property = p;
    if (!full_size) {
      spec.canvas_px = 64;
      spec.count = 5;
      spec.displays = 10;
      spec.weber_start = 4.0;
      spec.weber_count = 6;
    }
    spec.seed = property_seed(seed, p);
    if (p == PropertyId::SceneIncongruence) spec.assets_dir = toy_assets();
    write_stimulus_set(generate_stimulus_set(spec), w.stimuli);
  }
  BrainReference ref;
  for (PropertyId p : all_properties()) ref.set(p, ref_value);
  ref.provenance = "test";
  w.reference = w.root / "brain_reference.txt";
  write_text_file(w.reference, format_brain_reference(ref));
  w.config.stimulus_dir = w.stimuli;
  w.config.reference_path = w.reference;
  w.config.report_dir = w.root / "report";
  w.config.root_seed = seed;
  w.config.layerwise = layerwise;
  w.config.workers = 2;
  for (int i = 0; i < n_models; ++i) {
    synth::SyntheticModel m;
    m.model_id = "net" + std::to_string(i);
    m.seed = seed * 100 + i;
    m.units = 48;
    m.depth = 3;
    m.layerwise = layerwise;
    synth::write_synthetic_model(m, w.stimuli, w.root / "models" / m.model_id);
    w.config.models.push_back({m.model_id, w.root / "models" / m.model_id});
  }
  return w;
}

}  // namespace fixtures
