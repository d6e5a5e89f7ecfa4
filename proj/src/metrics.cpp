#include "bpm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace bpm {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw Error(ErrorCode::LengthMismatch, "matrix data size");
}

Matrix Matrix::from_container(const ActivationContainer& c) {
  const auto src = c.data();
  return Matrix(c.n_stimuli(), c.n_units(), std::vector<double>(src.begin(), src.end()));
}

std::size_t UnitMask::count() const { return static_cast<std::size_t>(std::count(active.begin(), active.end(), true)); }

UnitMask detect_active_units(const Matrix& acts, double threshold, std::span<const std::size_t> rows) {
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(acts.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    rows = all;
  }
  if (rows.empty() || acts.cols() == 0) throw Error(ErrorCode::NoActiveUnits, "empty activation matrix");

  UnitMask mask{std::vector<bool>(acts.cols(), false), threshold};
  const double n = static_cast<double>(rows.size());
  for (std::size_t u = 0; u < acts.cols(); ++u) {
    double mx = acts(rows[0], u), mean = 0.0;
    for (auto r : rows) {
      mx = std::max(mx, acts(r, u));
      mean += acts(r, u);
    }
    mean /= n;
    double ss = 0.0;
    for (auto r : rows) ss += (acts(r, u) - mean) * (acts(r, u) - mean);
    const double sd = std::sqrt(ss / n);
    mask.active[u] = mx > threshold && sd > threshold;
  }
  if (mask.count() == 0) throw Error(ErrorCode::NoActiveUnits, "no unit exceeds threshold " + format_double(threshold));
  return mask;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "pearson inputs differ in length");
  if (x.size() < 2) throw Error(ErrorCode::ZeroVariance, "pearson needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw Error(ErrorCode::ZeroVariance, "pearson input is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double neural_distance(std::span<const double> x, std::span<const double> y, DistanceMetric metric) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  }
  if (x.empty()) throw Error(ErrorCode::LengthMismatch, "empty vectors");
  switch (metric) {
    case DistanceMetric::Euclidean: {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
      return std::sqrt(s);
    }
    case DistanceMetric::Cityblock: {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
      return s;
    }
    case DistanceMetric::OneMinusPearson:
      return std::max(0.0, 1.0 - pearson(x, y));
  }
  return 0.0;
}

double modulation_index(double a, double b) {
  if (!(a >= 0.0) || !(b >= 0.0)) throw Error(ErrorCode::InvariantViolation, "distances must be nonnegative");
  if (a + b == 0.0) throw Error(ErrorCode::AllGroupsDegenerate, "both distances are zero");
  return (a - b) / (a + b);
}

MetricResult mean_modulation_index(PropertyId property, std::span<const DistancePair> groups) {
  MetricResult res;
  res.property = property;
  double sum = 0.0;
  for (const auto& g : groups) {
    if (g.plus + g.minus == 0.0) {
      ++res.n_skipped;
      continue;
    }
    const double mi = modulation_index(g.plus, g.minus);
    res.per_group.push_back(mi);
    sum += mi;
  }
  res.n_groups = res.per_group.size();
  if (res.n_groups == 0) {
    throw Error(ErrorCode::AllGroupsDegenerate,
                std::to_string(res.n_skipped) + " groups, all with zero distances");
  }
  res.effect = sum / static_cast<double>(res.n_groups);
  return res;
}

DistancePair mirror_distances(std::span<const double> original, std::span<const double> vflip,
                              std::span<const double> hflip, DistanceMetric m) {
  return {neural_distance(original, hflip, m), neural_distance(original, vflip, m)};
}

DistancePair occlusion_distances(std::span<const double> unoccluded, std::span<const double> occluded,
                                 std::span<const double> control, DistanceMetric m) {
  return {neural_distance(unoccluded, control, m), neural_distance(unoccluded, occluded, m)};
}

DistancePair relative_size_distances(std::span<const double> base, std::span<const double> proportional,
                                     std::span<const double> disproportional, DistanceMetric m) {
  return {neural_distance(base, proportional, m), neural_distance(base, disproportional, m)};
}

DistancePair surface_distances(std::span<const double> base, std::span<const double> congruent,
                               std::span<const double> incongruent, DistanceMetric m) {
  return {neural_distance(base, congruent, m), neural_distance(base, incongruent, m)};
}

DistancePair three_d_distances(std::span<const double> base_3d, std::span<const double> changed_3d,
                               std::span<const double> base_2d, std::span<const double> changed_2d,
                               DistanceMetric m) {
  return {neural_distance(base_3d, changed_3d, m), neural_distance(base_2d, changed_2d, m)};
}

DistancePair global_distances(std::span<const double> reference, std::span<const double> global_change,
                              std::span<const double> local_change, DistanceMetric m) {
  return {neural_distance(reference, global_change, m), neural_distance(reference, local_change, m)};
}

DistancePair thatcher_distances(std::span<const double> upright, std::span<const double> upright_thatcher,
                                std::span<const double> inverted, std::span<const double> inverted_thatcher,
                                DistanceMetric m) {
  return {neural_distance(upright, upright_thatcher, m), neural_distance(inverted, inverted_thatcher, m)};
}

MetricResult mirror_confusion(std::span<const MirrorGroup> groups, DistanceMetric m) {
  std::vector<DistancePair> pairs;
  pairs.reserve(groups.size());
  for (const auto& g : groups) pairs.push_back(mirror_distances(g.original, g.vflip, g.hflip, m));
  return mean_modulation_index(PropertyId::MirrorConfusion, pairs);
}

MetricResult normalization_slope(PropertyId property, const Matrix& acts, std::span<const MultiDisplay> displays,
                                 const UnitMask& mask) {
  if (mask.active.size() != acts.cols()) throw Error(ErrorCode::LengthMismatch, "mask width differs from matrix");
  MetricResult res;
  res.property = property;
  res.n_groups = displays.size();
  double sum = 0.0;
  for (std::size_t u = 0; u < acts.cols(); ++u) {
    if (!mask.active[u]) continue;
    double sxy = 0.0, sxx = 0.0;
    for (const auto& d : displays) {
      double x = 0.0;
      for (auto r : d.single_rows) x += acts(r, u);
      const double y = acts(d.multi_row, u);
      sxy += x * y;
      sxx += x * x;
    }
    if (!(sxx > 0.0)) continue;
    const double slope = sxy / sxx;
    res.per_group.push_back(slope);
    sum += slope;
  }
  res.n_units_used = res.per_group.size();
  if (res.n_units_used == 0) throw Error(ErrorCode::NoUsableUnits, "every active unit has zero summed response");
  res.effect = sum / static_cast<double>(res.n_units_used);
  return res;
}

double sparseness(std::span<const double> responses) {
  const std::size_t n = responses.size();
  if (n < 2) throw Error(ErrorCode::LengthMismatch, "sparseness needs at least two responses");
  double s1 = 0.0, s2 = 0.0;
  for (double r : responses) {
    const double v = std::max(0.0, r);
    s1 += v;
    s2 += v * v;
  }
  if (s2 == 0.0) return 0.0;
  const double dn = static_cast<double>(n);
  const double a = (s1 / dn) * (s1 / dn) / (s2 / dn);
  return std::clamp((1.0 - a) / (1.0 - 1.0 / dn), 0.0, 1.0);
}

MetricResult correlated_sparseness(PropertyId property, const Matrix& acts, std::span<const std::size_t> rows_a,
                                   std::span<const std::size_t> rows_b, const UnitMask& mask) {
  if (mask.active.size() != acts.cols()) throw Error(ErrorCode::LengthMismatch, "mask width differs from matrix");
  std::vector<double> sa, sb, buf;
  for (std::size_t u = 0; u < acts.cols(); ++u) {
    if (!mask.active[u]) continue;
    buf.clear();
    for (auto r : rows_a) buf.push_back(acts(r, u));
    sa.push_back(sparseness(buf));
    buf.clear();
    for (auto r : rows_b) buf.push_back(acts(r, u));
    sb.push_back(sparseness(buf));
  }
  if (sa.size() < 3) throw Error(ErrorCode::TooFewUnits, std::to_string(sa.size()) + " active units, need 3");
  MetricResult res;
  res.property = property;
  res.effect = pearson(sa, sb);
  res.n_units_used = sa.size();
  res.n_groups = rows_a.size() + rows_b.size();
  return res;
}

double weber_from_distances(std::span<const double> pair_distances, std::span<const double> lengths) {
  const std::size_t n = lengths.size();
  if (pair_distances.size() != n * (n - 1) / 2) throw Error(ErrorCode::LengthMismatch, "pair count");
  std::vector<double> absolute, relative;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double diff = std::abs(lengths[i] - lengths[j]);
      absolute.push_back(diff);
      relative.push_back(diff / (lengths[i] + lengths[j]));
    }
  }
  return pearson(pair_distances, relative) - pearson(pair_distances, absolute);
}

MetricResult weber_effect(const Matrix& acts, std::span<const std::size_t> rows, std::span<const double> lengths,
                          DistanceMetric m) {
  if (rows.size() != lengths.size()) throw Error(ErrorCode::LengthMismatch, "one length per bar required");
  std::vector<double> sorted(lengths.begin(), lengths.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::unique(sorted.begin(), sorted.end()) - sorted.begin() < 3) {
    throw Error(ErrorCode::ZeroVariance, "need at least 3 distinct lengths");
  }
  std::vector<double> d;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j) d.push_back(neural_distance(acts.row(rows[i]), acts.row(rows[j]), m));
  MetricResult res;
  res.property = PropertyId::WebersLaw;
  res.effect = weber_from_distances(d, lengths);
  res.n_groups = d.size();
  res.per_group = std::move(d);
  return res;
}

double scene_incongruence_index(double acc_congruent, double acc_incongruent) {
  if (acc_congruent + acc_incongruent == 0.0) throw Error(ErrorCode::DegenerateAccuracy, "both accuracies are zero");
  return (acc_congruent - acc_incongruent) / (acc_congruent + acc_incongruent);
}

double top1_accuracy(std::span<const ClassTrial> trials) {
  if (trials.empty()) throw Error(ErrorCode::LabelMismatch, "no trials");
  std::size_t hits = 0;
  for (const auto& t : trials) {
    if (t.label < 0 || static_cast<std::size_t>(t.label) >= t.probabilities.size()) {
      throw Error(ErrorCode::LabelMismatch, "label " + std::to_string(t.label) + " outside " +
                                                std::to_string(t.probabilities.size()) + " classes");
    }
    const auto best = std::max_element(t.probabilities.begin(), t.probabilities.end()) - t.probabilities.begin();
    hits += (best == t.label) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(trials.size());
}

MetricResult scene_incongruence(std::span<const ClassTrial> congruent, std::span<const ClassTrial> incongruent) {
  MetricResult res;
  res.property = PropertyId::SceneIncongruence;
  const double acc_c = top1_accuracy(congruent);
  const double acc_i = top1_accuracy(incongruent);
  res.effect = scene_incongruence_index(acc_c, acc_i);
  res.per_group = {acc_c, acc_i};
  res.n_groups = congruent.size() + incongruent.size();
  return res;
}

// ---------------------------------------------------------------------------
// manifest-driven dispatch

namespace {

struct Grouped {
  // groups in first-appearance order; each maps role -> container row
  std::vector<std::unordered_map<std::string, std::size_t>> groups;
};

Grouped group_rows(const StimulusSet& s, const Alignment& a) {
  Grouped out;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < s.manifest.size(); ++i) {
    const auto& r = s.manifest[i];
    auto [it, fresh] = index.emplace(r.group_id, out.groups.size());
    if (fresh) out.groups.emplace_back();
    out.groups[it->second][r.role] = a.row_of_record[i];
  }
  return out;
}

std::vector<std::size_t> rows_with_role(const StimulusSet& s, const Alignment& a, std::string_view role) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < s.manifest.size(); ++i)
    if (s.manifest[i].role == role) rows.push_back(a.row_of_record[i]);
  return rows;
}

std::vector<DistancePair> grouped_pairs(PropertyId p, const Matrix& acts, const Grouped& g, DistanceMetric m) {
  using namespace role;
  std::vector<DistancePair> pairs;
  for (const auto& grp : g.groups) {
    auto row = [&](std::string_view r) { return acts.row(grp.at(std::string(r))); };
    switch (p) {
      case PropertyId::MirrorConfusion:
        pairs.push_back(mirror_distances(row(kOriginal), row(kVflip), row(kHflip), m));
        break;
      case PropertyId::OcclusionBasic:
      case PropertyId::OcclusionDepth:
        pairs.push_back(occlusion_distances(row(kUnoccluded), row(kOccluded), row(kControl), m));
        break;
      case PropertyId::RelativeSize:
        pairs.push_back(relative_size_distances(row(kBase), row(kProportional), row(kDisproportional), m));
        break;
      case PropertyId::SurfaceInvariance:
        pairs.push_back(surface_distances(row(kBase), row(kCongruent), row(kIncongruent), m));
        break;
      case PropertyId::ThreeD1:
      case PropertyId::ThreeD2:
        pairs.push_back(three_d_distances(row(kBase3d), row(kChanged3d), row(kBase2d), row(kChanged2d), m));
        break;
      case PropertyId::GlobalAdvantage:
        pairs.push_back(global_distances(row(kReference), row(kGlobalChange), row(kLocalChange), m));
        break;
      case PropertyId::Thatcher:
        pairs.push_back(thatcher_distances(row(kUpright), row(kUprightThatcher), row(kInverted),
                                           row(kInvertedThatcher), m));
        break;
      default:
        throw Error(ErrorCode::InvariantViolation, "not a grouped property");
    }
  }
  return pairs;
}

std::vector<std::size_t> all_rows(const Alignment& a) {
  std::vector<std::size_t> rows = a.row_of_record;
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  return rows;
}

}  // namespace

MetricResult compute_property(PropertyId property, const ActivationContainer& c, const StimulusSet& s,
                              const ScoringConfig& cfg) {
  if (s.property != property) {
    throw Error(ErrorCode::SchemaError, "stimulus set is for " + std::string(property_name(s.property)));
  }
  const bool wants_probs = property == PropertyId::SceneIncongruence;
  if (wants_probs != (c.kind() == ContainerKind::ClassProbabilities)) {
    throw Error(ErrorCode::SchemaError, std::string(property_name(property)) + " needs a " +
                                            (wants_probs ? "class_probabilities" : "activations") + " container");
  }
  return compute_property(property, Matrix::from_container(c), align(c, s), s, cfg, c.label_map());
}

MetricResult compute_property(PropertyId property, const Matrix& acts, const Alignment& a, const StimulusSet& s,
                              const ScoringConfig& cfg, const std::map<int, std::string>& label_map) {
  const auto metric = cfg.distance_metric;

  switch (property) {
    case PropertyId::NormPairs:
    case PropertyId::NormTriplets: {
      std::unordered_map<std::string, std::size_t> row_of;
      for (std::size_t i = 0; i < s.manifest.size(); ++i) row_of[s.manifest[i].stimulus_id] = a.row_of_record[i];
      std::vector<MultiDisplay> displays;
      for (std::size_t i = 0; i < s.manifest.size(); ++i) {
        const auto& r = s.manifest[i];
        if (r.role != role::kMulti) continue;
        MultiDisplay d{a.row_of_record[i], {}};
        for (const auto& l : r.links) d.single_rows.push_back(row_of.at(l));
        displays.push_back(std::move(d));
      }
      const auto rows = all_rows(a);
      return normalization_slope(property, acts, displays, detect_active_units(acts, cfg.active_unit_threshold, rows));
    }
    case PropertyId::SceneIncongruence: {
      std::vector<ClassTrial> congruent, incongruent;
      for (std::size_t i = 0; i < s.manifest.size(); ++i) {
        const auto& r = s.manifest[i];
        if (!r.value) throw Error(ErrorCode::LabelMismatch, r.stimulus_id + " has no class label");
        const int label = static_cast<int>(*r.value);
        if (!label_map.empty() && !label_map.count(label)) {
          throw Error(ErrorCode::LabelMismatch, "label " + std::to_string(label) + " not in the container label map");
        }
        ClassTrial t{acts.row(a.row_of_record[i]), label};
        (r.role == role::kCongruent ? congruent : incongruent).push_back(t);
      }
      return scene_incongruence(congruent, incongruent);
    }
    case PropertyId::SparsenessMorph:
    case PropertyId::SparsenessShapeTexture: {
      const bool morph = property == PropertyId::SparsenessMorph;
      const auto rows_a = rows_with_role(s, a, morph ? role::kReference : role::kShape);
      const auto rows_b = rows_with_role(s, a, morph ? role::kMorph : role::kTexture);
      const auto mask = detect_active_units(acts, cfg.active_unit_threshold, all_rows(a));
      return correlated_sparseness(property, acts, rows_a, rows_b, mask);
    }
    case PropertyId::WebersLaw: {
      std::vector<std::size_t> rows;
      std::vector<double> lengths;
      for (std::size_t i = 0; i < s.manifest.size(); ++i) {
        rows.push_back(a.row_of_record[i]);
        lengths.push_back(s.manifest[i].value.value_or(0.0));
      }
      return weber_effect(acts, rows, lengths, metric);
    }
    default: {
      const auto pairs = grouped_pairs(property, acts, group_rows(s, a), metric);
      return mean_modulation_index(property, pairs);
    }
  }
}

EffectComputation compute_effect_vector(const std::string& model_id, const std::optional<std::string>& layer_tag,
                                        const std::map<PropertyId, const PropertyInput*>& inputs,
                                        const ScoringConfig& cfg) {
  EffectComputation out{EffectVector(model_id, layer_tag), {}, {}};
  for (PropertyId p : cfg.property_subset) {
    const auto it = inputs.find(p);
    if (it == inputs.end() || it->second == nullptr) {
      out.failures.push_back({p, ErrorCode::MissingContainer, "no container for " + std::string(property_name(p))});
      continue;
    }
    try {
      auto res = compute_property(p, it->second->container, it->second->stimuli, cfg);
      out.vector.set(p, res.effect);
      out.results.emplace(p, std::move(res));
    } catch (const Error& e) {
      out.failures.push_back({p, e.code(), e.what()});
    }
  }
  return out;
}

}  // namespace bpm
