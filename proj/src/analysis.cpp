#include "bpm/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "bpm/error.hpp"

namespace bpm {

EffectMatrix build_effect_matrix(const std::vector<EffectVector>& vectors, const std::optional<BrainReference>& brain,
                                 const std::optional<std::vector<PropertyId>>& subset, const std::string& brain_label) {
  EffectMatrix m;
  for (PropertyId p : all_properties()) {
    if (subset && std::find(subset->begin(), subset->end(), p) == subset->end()) continue;
    bool everywhere = true;
    for (const auto& v : vectors) everywhere = everywhere && v.has(p);
    if (brain) everywhere = everywhere && brain->get(p).has_value();
    if (everywhere) m.columns.push_back(p);
  }
  for (const auto& v : vectors) {
    m.labels.push_back(v.layer_tag() ? v.model_id() + "@" + *v.layer_tag() : v.model_id());
    std::vector<double> row;
    for (PropertyId p : m.columns) row.push_back(*v.get(p));
    m.values.push_back(std::move(row));
  }
  if (brain) {
    m.labels.push_back(brain_label);
    std::vector<double> row;
    for (PropertyId p : m.columns) row.push_back(*brain->get(p));
    m.values.push_back(std::move(row));
  }
  return m;
}

Embedding pca_embed(const EffectMatrix& m) {
  const auto n = static_cast<Eigen::Index>(m.rows());
  const auto d = static_cast<Eigen::Index>(m.cols());
  if (n < 2 || d < 2) {
    throw Error(ErrorCode::RankDeficient, "PCA needs at least 2 rows and 2 columns, got " + std::to_string(n) + "x" +
                                              std::to_string(d));
  }
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(m.values[i].size()) != d) throw Error(ErrorCode::ColumnMismatch, m.labels[i]);
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = m.values[i][j];
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  if (x.cwiseAbs().maxCoeff() == 0.0) throw Error(ErrorCode::RankDeficient, "all rows identical");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeFullV);
  const Eigen::VectorXd sigma = svd.singularValues();
  const double total = sigma.squaredNorm();

  Embedding e;
  e.columns = m.columns;
  e.means.assign(mean.data(), mean.data() + d);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd axis = svd.matrixV().col(k);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0) axis = -axis;
    e.basis[k].assign(axis.data(), axis.data() + d);
    const double s = k < sigma.size() ? sigma(k) : 0.0;
    e.explained_variance_ratio[k] = s * s / total;
  }
  e.coordinates = project_into(m.values, e);
  return e;
}

std::vector<Coordinates> project_into(const std::vector<std::vector<double>>& rows, const Embedding& basis) {
  std::vector<Coordinates> out;
  for (const auto& r : rows) {
    if (r.size() != basis.means.size()) {
      throw Error(ErrorCode::ColumnMismatch,
                  "row has " + std::to_string(r.size()) + " columns, basis has " + std::to_string(basis.means.size()));
    }
    Coordinates c;
    for (std::size_t j = 0; j < r.size(); ++j) {
      const double centred = r[j] - basis.means[j];
      c.pc1 += centred * basis.basis[0][j];
      c.pc2 += centred * basis.basis[1][j];
    }
    out.push_back(c);
  }
  return out;
}

double davies_bouldin(const std::vector<std::vector<double>>& points, const std::vector<std::string>& labels) {
  if (points.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "one label per point required");
  std::map<std::string, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < labels.size(); ++i) clusters[labels[i]].push_back(i);
  if (clusters.size() < 2) throw Error(ErrorCode::InvalidConfig, "Davies-Bouldin needs at least 2 groups");
  const std::size_t dim = points.front().size();

  std::vector<Eigen::VectorXd> centroid;
  std::vector<double> scatter;
  for (const auto& [label, members] : clusters) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    for (auto i : members) {
      if (points[i].size() != dim) throw Error(ErrorCode::ColumnMismatch, "ragged effect rows");
      c += Eigen::Map<const Eigen::VectorXd>(points[i].data(), static_cast<Eigen::Index>(dim));
    }
    c /= static_cast<double>(members.size());
    double s = 0.0;
    for (auto i : members) {
      s += (Eigen::Map<const Eigen::VectorXd>(points[i].data(), static_cast<Eigen::Index>(dim)) - c).norm();
    }
    centroid.push_back(c);
    scatter.push_back(s / static_cast<double>(members.size()));
  }

  const std::size_t k = centroid.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      const double sep = (centroid[i] - centroid[j]).norm();
      if (sep == 0.0) throw Error(ErrorCode::CoincidentCentroids, "two groups share a centroid");
      worst = std::max(worst, (scatter[i] + scatter[j]) / sep);
    }
    sum += worst;
  }
  return sum / static_cast<double>(k);
}

double clustering_strength(double db) {
  if (!(db >= 0.0)) throw Error(ErrorCode::InvariantViolation, "Davies-Bouldin index must be >= 0");
  return 1.0 / (1.0 + db);
}

std::optional<double> parse_depth_percentile(const std::string& tag) {
  std::string_view s = trim(tag);
  if (!s.empty() && (s.front() == 'p' || s.front() == 'P')) s.remove_prefix(1);
  if (!s.empty() && s.back() == '%') s.remove_suffix(1);
  try {
    const double v = parse_double(s);
    if (v < 0.0 || v > 100.0) return std::nullopt;
    return v;
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<TrajectoryPoint> layer_trajectory(const std::vector<EffectVector>& layers, const Embedding& basis) {
  std::vector<TrajectoryPoint> path;
  std::set<double> seen;
  std::vector<std::vector<double>> rows;
  for (const auto& v : layers) {
    const auto tag = v.layer_tag().value_or("");
    const auto depth = parse_depth_percentile(tag);
    if (!depth) throw Error(ErrorCode::UnsortableDepths, "layer tag '" + tag + "' is not a depth percentile");
    if (!seen.insert(*depth).second) throw Error(ErrorCode::UnsortableDepths, "duplicate depth " + tag);
    std::vector<double> row;
    for (PropertyId p : basis.columns) {
      const auto e = v.get(p);
      if (!e) throw Error(ErrorCode::ColumnMismatch, tag + " lacks " + std::string(property_name(p)));
      row.push_back(*e);
    }
    rows.push_back(std::move(row));
    path.push_back({tag, *depth, {}, false, false});
  }
  const auto coords = project_into(rows, basis);
  for (std::size_t i = 0; i < path.size(); ++i) path[i].coords = coords[i];
  std::sort(path.begin(), path.end(),
            [](const TrajectoryPoint& a, const TrajectoryPoint& b) { return a.depth_percentile < b.depth_percentile; });
  if (!path.empty()) {
    path.front().first = true;
    path.back().last = true;
  }
  return path;
}

}  // namespace bpm
