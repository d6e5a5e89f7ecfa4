#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace bpm {

// Order is part of the file formats; do not reorder.
enum class PropertyId : int {
  NormPairs = 0,
  NormTriplets,
  SceneIncongruence,
  MirrorConfusion,
  SparsenessMorph,
  SparsenessShapeTexture,
  WebersLaw,
  OcclusionBasic,
  OcclusionDepth,
  RelativeSize,
  SurfaceInvariance,
  ThreeD1,
  ThreeD2,
  GlobalAdvantage,
  Thatcher,
};

inline constexpr std::size_t kPropertyCount = 15;

const std::array<PropertyId, kPropertyCount>& all_properties();
std::string_view property_name(PropertyId id);
std::optional<PropertyId> parse_property(std::string_view name);
std::size_t property_index(PropertyId id);

/// Closed interval an effect of this property must lie in. Normalization
/// slopes are unbounded (any finite real); the Weber effect is a difference
/// of two correlations and may span [-2, 2].
struct EffectBounds {
  double lo;
  double hi;
};
EffectBounds effect_bounds(PropertyId id);

struct EffectEntry {
  PropertyId property;
  std::optional<double> effect;  // nullopt == missing

  bool operator==(const EffectEntry&) const = default;
};

/// Per-model effect strengths over the fixed property order. Always holds all
/// 15 entries; properties that were not computed are missing.
class EffectVector {
 public:
  EffectVector(std::string model_id, std::optional<std::string> layer_tag = std::nullopt);

  // Throws InvariantViolation if the value is non-finite or out of bounds.
  void set(PropertyId id, double effect);
  void clear(PropertyId id);

  std::optional<double> get(PropertyId id) const { return entries_[property_index(id)].effect; }
  bool has(PropertyId id) const { return get(id).has_value(); }
  std::size_t present_count() const;

  const std::string& model_id() const { return model_id_; }
  const std::optional<std::string>& layer_tag() const { return layer_tag_; }
  const std::array<EffectEntry, kPropertyCount>& entries() const { return entries_; }

  bool operator==(const EffectVector&) const = default;

 private:
  std::string model_id_;
  std::optional<std::string> layer_tag_;
  std::array<EffectEntry, kPropertyCount> entries_;
};

struct BrainReference {
  std::array<std::optional<double>, kPropertyCount> values{};
  std::string provenance;

  std::optional<double> get(PropertyId id) const { return values[property_index(id)]; }
  void set(PropertyId id, double b) { values[property_index(id)] = b; }
};

enum class DistanceMetric { Euclidean, Cityblock, OneMinusPearson };

std::string_view metric_name(DistanceMetric m);
std::optional<DistanceMetric> parse_metric(std::string_view name);

/// How a non-positive model effect is penalized. `Corrected` uses b - lambda*m
/// (lambda = 1 reduces to |b - m|). `Printed` uses b + lambda*m literally,
/// kept for comparison with older results.
enum class PenaltyForm { Corrected, Printed };

struct ScoringConfig {
  double lambda = 2.0;
  DistanceMetric distance_metric = DistanceMetric::Euclidean;
  double active_unit_threshold = 1e-6;
  std::set<PropertyId> property_subset = {all_properties().begin(), all_properties().end()};
  PenaltyForm penalty = PenaltyForm::Corrected;
};

/// Checks lambda and that every property in the subset has a brain value
/// in (0, 1]. Returns the config unchanged on success.
ScoringConfig validate_config(const ScoringConfig& cfg, const BrainReference& ref);

// Brain reference file: `property_id = value` lines, `#` comments, `null`
// for values not yet filled in.
BrainReference parse_brain_reference(std::string_view text);
BrainReference read_brain_reference(const std::filesystem::path& path);
std::string brain_reference_template();
std::string format_brain_reference(const BrainReference& ref);

// Effect vectors as CSV: header `model_id,layer_tag,<property ids...>`,
// missing effects as empty fields, values in shortest round-trip form.
std::string format_effect_vectors(const std::vector<EffectVector>& vectors);
std::vector<EffectVector> parse_effect_vectors(std::string_view text);
void write_effect_vectors(const std::filesystem::path& path, const std::vector<EffectVector>& vectors);
std::vector<EffectVector> read_effect_vectors(const std::filesystem::path& path);

// Shared text helpers.
std::string format_double(double v);
double parse_double(std::string_view s);
std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace bpm
