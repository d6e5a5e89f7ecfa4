#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bpm/domain.hpp"
#include "bpm/image.hpp"

namespace bpm {

/// One row of manifest.tsv.
///
/// Columns: stimulus_id, role, group_id, value, links. `value` carries the
/// property's numeric parameter (bar length, slot index, morph position,
/// class label, ...) and is `-` when unused. `links` is a comma-separated
/// list of constituent stimulus ids for multi-object displays, `-` otherwise.
struct ManifestRecord {
  std::string stimulus_id;
  std::string role;
  std::string group_id;
  std::optional<double> value;
  std::vector<std::string> links;

  bool operator==(const ManifestRecord&) const = default;
};

struct Stimulus {
  std::string id;
  Image image;
};

struct StimulusSet {
  PropertyId property;
  std::vector<Stimulus> images;
  std::vector<ManifestRecord> manifest;
};

/// Protocol roles. For grouped properties every group holds exactly one
/// stimulus of each role in `group_roles`; other properties use set roles.
namespace role {
inline constexpr std::string_view kSingle = "single";
inline constexpr std::string_view kMulti = "multi";
inline constexpr std::string_view kCongruent = "congruent";
inline constexpr std::string_view kIncongruent = "incongruent";
inline constexpr std::string_view kOriginal = "original";
inline constexpr std::string_view kVflip = "vflip";  // reflected about the vertical axis
inline constexpr std::string_view kHflip = "hflip";  // reflected about the horizontal axis
inline constexpr std::string_view kReference = "reference";
inline constexpr std::string_view kMorph = "morph";
inline constexpr std::string_view kShape = "shape";
inline constexpr std::string_view kTexture = "texture";
inline constexpr std::string_view kBar = "bar";
inline constexpr std::string_view kUnoccluded = "unoccluded";
inline constexpr std::string_view kOccluded = "occluded";
inline constexpr std::string_view kControl = "control";
inline constexpr std::string_view kBase = "base";
inline constexpr std::string_view kProportional = "proportional";
inline constexpr std::string_view kDisproportional = "disproportional";
inline constexpr std::string_view kBase3d = "base_3d";
inline constexpr std::string_view kChanged3d = "changed_3d";
inline constexpr std::string_view kBase2d = "base_2d";
inline constexpr std::string_view kChanged2d = "changed_2d";
inline constexpr std::string_view kGlobalChange = "global_change";
inline constexpr std::string_view kLocalChange = "local_change";
inline constexpr std::string_view kUpright = "upright";
inline constexpr std::string_view kUprightThatcher = "upright_thatcher";
inline constexpr std::string_view kInverted = "inverted";
inline constexpr std::string_view kInvertedThatcher = "inverted_thatcher";
}  // namespace role

/// Roles that make up one complete group, or empty for set-structured
/// properties (normalization, scene, sparseness, Weber).
std::vector<std::string_view> group_roles(PropertyId id);

/// Every role the manifest of this property may contain.
std::vector<std::string_view> allowed_roles(PropertyId id);

/// Multi-object display arity for the normalization properties (2 or 3), 0 otherwise.
int normalization_arity(PropertyId id);

struct StimulusSpec {
  PropertyId property = PropertyId::MirrorConfusion;
  int canvas_px = 224;
  int background_gray = 128;
  std::uint64_t seed = 0;

  // Number of groups (or base shapes) for grouped and sparseness protocols.
  int count = 20;

  // normalization
  int positions = 4;
  int objects = 8;
  int displays = 24;

  // sparseness_morph
  int morph_steps = 7;

  // webers_law
  double weber_start = 16.0;
  double weber_ratio = 1.25;
  int weber_count = 10;

  // scene_incongruence: directory holding assets.tsv plus the images it names
  std::optional<std::filesystem::path> assets_dir;
};

/// Throws DegenerateSpec when the spec cannot produce a usable set.
void validate_spec(const StimulusSpec& spec);

/// Deterministic: equal specs give byte-identical images and manifests.
StimulusSet generate_stimulus_set(const StimulusSpec& spec);

/// Geometric series start * ratio^i, i = 0..n-1, computed by repeated
/// multiplication.
std::vector<double> weber_lengths(double start, double ratio, int n);

/// Derives the per-property seed from a run's root seed.
std::uint64_t property_seed(std::uint64_t root_seed, PropertyId id);

/// Mechanical check that the manifest has the group structure its metric
/// consumes. Throws SchemaError naming the offending row or group.
void validate_structure(const StimulusSet& set);

std::string format_manifest(const StimulusSet& set);
std::vector<ManifestRecord> parse_manifest(std::string_view text, PropertyId* property_out = nullptr);

/// Writes `<out>/<property>/<stimulus_id>.png` and `<out>/<property>/manifest.tsv`.
std::filesystem::path write_stimulus_set(const StimulusSet& set, const std::filesystem::path& out_root);

/// Reads a manifest.tsv plus the PNGs next to it (`<dir>/<stimulus_id>.png`).
StimulusSet load_external_set(const std::filesystem::path& manifest_path);

/// Same validation as load_external_set (including image presence) but
/// leaves the images undecoded; metrics only consume the manifest.
StimulusSet load_manifest(const std::filesystem::path& manifest_path);

}  // namespace bpm
