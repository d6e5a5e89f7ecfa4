#include "bpm/domain.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "bpm/error.hpp"

namespace bpm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingBrainReference: return "MissingBrainReference";
    case ErrorCode::InvalidLambda: return "InvalidLambda";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MissingAssets: return "MissingAssets";
    case ErrorCode::DegenerateSpec: return "DegenerateSpec";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::MissingImageFile: return "MissingImageFile";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UnknownVersion: return "UnknownVersion";
    case ErrorCode::MissingStimulus: return "MissingStimulus";
    case ErrorCode::DuplicateStimulus: return "DuplicateStimulus";
    case ErrorCode::NoActiveUnits: return "NoActiveUnits";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::NoUsableUnits: return "NoUsableUnits";
    case ErrorCode::DegenerateAccuracy: return "DegenerateAccuracy";
    case ErrorCode::LabelMismatch: return "LabelMismatch";
    case ErrorCode::AllGroupsDegenerate: return "AllGroupsDegenerate";
    case ErrorCode::TooFewUnits: return "TooFewUnits";
    case ErrorCode::NonpositiveBrainReference: return "NonpositiveBrainReference";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::ColumnMismatch: return "ColumnMismatch";
    case ErrorCode::CoincidentCentroids: return "CoincidentCentroids";
    case ErrorCode::UnsortableDepths: return "UnsortableDepths";
    case ErrorCode::MissingContainer: return "MissingContainer";
  }
  return "Unknown";
}

namespace {

constexpr std::array<std::string_view, kPropertyCount> kNames = {
    "norm_pairs",        "norm_triplets",       "scene_incongruence",
    "mirror_confusion",  "sparseness_morph",    "sparseness_shape_texture",
    "webers_law",        "occlusion_basic",     "occlusion_depth",
    "relative_size",     "surface_invariance",  "three_d_1",
    "three_d_2",         "global_advantage",    "thatcher",
};

}  // namespace

const std::array<PropertyId, kPropertyCount>& all_properties() {
  static const std::array<PropertyId, kPropertyCount> ids = [] {
    std::array<PropertyId, kPropertyCount> out{};
    for (std::size_t i = 0; i < kPropertyCount; ++i) out[i] = static_cast<PropertyId>(i);
    return out;
  }();
  return ids;
}

std::size_t property_index(PropertyId id) { return static_cast<std::size_t>(id); }

std::string_view property_name(PropertyId id) { return kNames.at(property_index(id)); }

std::optional<PropertyId> parse_property(std::string_view name) {
  for (std::size_t i = 0; i < kPropertyCount; ++i) {
    if (kNames[i] == name) return static_cast<PropertyId>(i);
  }
  return std::nullopt;
}

EffectBounds effect_bounds(PropertyId id) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (id) {
    case PropertyId::NormPairs:
    case PropertyId::NormTriplets:
      return {-inf, inf};
    case PropertyId::WebersLaw:
      return {-2.0, 2.0};
    default:
      return {-1.0, 1.0};
  }
}

EffectVector::EffectVector(std::string model_id, std::optional<std::string> layer_tag)
    : model_id_(std::move(model_id)), layer_tag_(std::move(layer_tag)) {
  for (std::size_t i = 0; i < kPropertyCount; ++i) {
    entries_[i] = {static_cast<PropertyId>(i), std::nullopt};
  }
}

void EffectVector::set(PropertyId id, double effect) {
  const auto b = effect_bounds(id);
  if (!std::isfinite(effect) || effect < b.lo || effect > b.hi) {
    throw Error(ErrorCode::InvariantViolation,
                std::string(property_name(id)) + " effect " + format_double(effect) +
                    " outside [" + format_double(b.lo) + ", " + format_double(b.hi) + "]");
  }
  entries_[property_index(id)].effect = effect;
}

void EffectVector::clear(PropertyId id) { entries_[property_index(id)].effect.reset(); }

std::size_t EffectVector::present_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.effect.has_value() ? 1 : 0;
  return n;
}

std::string_view metric_name(DistanceMetric m) {
  switch (m) {
    case DistanceMetric::Euclidean: return "euclidean";
    case DistanceMetric::Cityblock: return "cityblock";
    case DistanceMetric::OneMinusPearson: return "one_minus_pearson";
  }
  return "euclidean";
}

std::optional<DistanceMetric> parse_metric(std::string_view name) {
  if (name == "euclidean") return DistanceMetric::Euclidean;
  if (name == "cityblock") return DistanceMetric::Cityblock;
  if (name == "one_minus_pearson") return DistanceMetric::OneMinusPearson;
  return std::nullopt;
}

ScoringConfig validate_config(const ScoringConfig& cfg, const BrainReference& ref) {
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) {
    throw Error(ErrorCode::InvalidLambda, "lambda must be a finite value >= 0, got " +
                                              format_double(cfg.lambda));
  }
  if (cfg.property_subset.empty()) {
    throw Error(ErrorCode::InvalidConfig, "property subset is empty");
  }
  std::string missing;
  for (PropertyId id : cfg.property_subset) {
    if (!ref.get(id)) {
      if (!missing.empty()) missing += ", ";
      missing += property_name(id);
    }
  }
  if (!missing.empty()) throw Error(ErrorCode::MissingBrainReference, missing);
  for (PropertyId id : cfg.property_subset) {
    const double b = *ref.get(id);
    if (!(b > 0.0 && b <= 1.0)) {
      throw Error(ErrorCode::NonpositiveBrainReference,
                  std::string(property_name(id)) + " = " + format_double(b) + " not in (0, 1]");
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// text helpers

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ParseError, "not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// brain reference

BrainReference parse_brain_reference(std::string_view text) {
  BrainReference ref;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      if (line.substr(hash).rfind("# provenance:", 0) == 0 && ref.provenance.empty()) {
        ref.provenance = std::string(trim(line.substr(hash + 13)));
      }
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 'property = value'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "provenance") {
      ref.provenance = std::string(value);
      continue;
    }
    const auto id = parse_property(key);
    if (!id) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": unknown property '" + std::string(key) + "'");
    }
    if (value == "null" || value.empty()) continue;
    try {
      ref.set(*id, parse_double(value));
    } catch (const Error&) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": bad value '" + std::string(value) + "'");
    }
  }
  return ref;
}

BrainReference read_brain_reference(const std::filesystem::path& path) {
  return parse_brain_reference(read_text_file(path));
}

std::string brain_reference_template() {
  std::string out =
      "# Brain reference effect strengths, one per property, each in (0, 1].\n"
      "# Transcribe values from human behaviour or monkey IT measurements.\n"
      "# Scoring refuses to run while any scored property is null.\n"
      "provenance = unfilled template\n";
  for (PropertyId id : all_properties()) {
    out += std::string(property_name(id)) + " = null\n";
  }
  return out;
}

std::string format_brain_reference(const BrainReference& ref) {
  std::string out = "provenance = " + ref.provenance + "\n";
  for (PropertyId id : all_properties()) {
    const auto v = ref.get(id);
    out += std::string(property_name(id)) + " = " + (v ? format_double(*v) : "null") + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// effect vector CSV

std::string format_effect_vectors(const std::vector<EffectVector>& vectors) {
  std::string out = "model_id,layer_tag";
  for (PropertyId id : all_properties()) {
    out += ',';
    out += property_name(id);
  }
  out += '\n';
  for (const auto& v : vectors) {
    out += v.model_id();
    out += ',';
    out += v.layer_tag().value_or("");
    for (const auto& e : v.entries()) {
      out += ',';
      if (e.effect) out += format_double(*e.effect);
    }
    out += '\n';
  }
  return out;
}

std::vector<EffectVector> parse_effect_vectors(std::string_view text) {
  auto lines = split(text, '\n');
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorCode::ParseError, "effect file is empty");

  auto header = split(trim(lines[0]), ',');
  if (header.size() < 2 || header[0] != "model_id" || header[1] != "layer_tag") {
    throw Error(ErrorCode::ParseError, "effect header must start with model_id,layer_tag");
  }
  std::vector<PropertyId> columns;
  for (std::size_t c = 2; c < header.size(); ++c) {
    const auto id = parse_property(trim(header[c]));
    if (!id) throw Error(ErrorCode::ParseError, "unknown property column '" + header[c] + "'");
    columns.push_back(*id);
  }

  std::vector<EffectVector> out;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    std::string_view line = lines[r];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::ParseError, "row " + std::to_string(r + 1) + ": expected " +
                                             std::to_string(header.size()) + " fields");
    }
    std::optional<std::string> tag;
    if (!fields[1].empty()) tag = fields[1];
    EffectVector v(fields[0], tag);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto f = trim(fields[c + 2]);
      if (f.empty()) continue;
      v.set(columns[c], parse_double(f));
    }
    out.push_back(std::move(v));
  }
  return out;
}

void write_effect_vectors(const std::filesystem::path& path, const std::vector<EffectVector>& vectors) {
  write_text_file(path, format_effect_vectors(vectors));
}

std::vector<EffectVector> read_effect_vectors(const std::filesystem::path& path) {
  return parse_effect_vectors(read_text_file(path));
}

}  // namespace bpm
