#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bpm/domain.hpp"

namespace bpm {

/// Rows of effect strengths over a common property subset.
struct EffectMatrix {
  std::vector<std::string> labels;
  std::vector<PropertyId> columns;
  std::vector<std::vector<double>> values;  // values[row][col]

  std::size_t rows() const { return values.size(); }
  std::size_t cols() const { return columns.size(); }
};

/// Builds a matrix over the properties present in every vector (restricted
/// to `subset` when given). Optionally appends the brain reference as a row.
EffectMatrix build_effect_matrix(const std::vector<EffectVector>& vectors,
                                 const std::optional<BrainReference>& brain = std::nullopt,
                                 const std::optional<std::vector<PropertyId>>& subset = std::nullopt,
                                 const std::string& brain_label = "brain");

struct Coordinates {
  double pc1 = 0.0;
  double pc2 = 0.0;
};

struct Embedding {
  std::vector<PropertyId> columns;
  std::vector<double> means;
  std::array<std::vector<double>, 2> basis;  // unit loading vectors
  std::array<double, 2> explained_variance_ratio{};
  std::vector<Coordinates> coordinates;
};

/// Two-component PCA by SVD of the column-centred matrix. Each axis is signed
/// so its largest-magnitude loading is positive.
Embedding pca_embed(const EffectMatrix& m);

/// Centres rows with the stored means and projects them on the stored basis.
std::vector<Coordinates> project_into(const std::vector<std::vector<double>>& rows, const Embedding& basis);

/// Davies-Bouldin index in the full effect space with euclidean distances.
double davies_bouldin(const std::vector<std::vector<double>>& points, const std::vector<std::string>& labels);

/// 1 / (1 + DB).
double clustering_strength(double db);

struct TrajectoryPoint {
  std::string layer_tag;
  double depth_percentile = 0.0;
  Coordinates coords;
  bool first = false;
  bool last = false;
};

/// Parses a depth tag such as "50", "p50" or "50%".
std::optional<double> parse_depth_percentile(const std::string& tag);

/// Projects per-layer effect vectors of one model, ordered by depth.
std::vector<TrajectoryPoint> layer_trajectory(const std::vector<EffectVector>& layers, const Embedding& basis);

}  // namespace bpm
