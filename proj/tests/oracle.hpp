#pragma once

// Brute-force reference implementations used to check the library. They
// follow the textbook formulas literally (long double accumulators, explicit
// loops, no shared helpers with src/) so that agreement means something.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;  // rows

inline double euclidean(const Vec& x, const Vec& y) {
  long double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (long double)(x[i] - y[i]) * (x[i] - y[i]);
  return (double)std::sqrt(s);
}

inline double cityblock(const Vec& x, const Vec& y) {
  long double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::fabs((long double)x[i] - y[i]);
  return (double)s;
}

// r = cov / (sd_x sd_y), two passes
inline double pearson(const Vec& x, const Vec& y) {
  const std::size_t n = x.size();
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) throw std::domain_error("zero variance");
  return (double)(sxy / std::sqrt(sxx * syy));
}

inline double one_minus_pearson(const Vec& x, const Vec& y) { return 1.0 - pearson(x, y); }

inline double index(double plus, double minus) { return (plus - minus) / (plus + minus); }

// mean of per-group indices, skipping plus + minus == 0
inline double mean_index(const std::vector<std::pair<double, double>>& groups) {
  long double s = 0;
  int n = 0;
  for (auto [p, m] : groups) {
    if (p + m == 0) continue;
    s += index(p, m);
    ++n;
  }
  if (n == 0) throw std::domain_error("all degenerate");
  return (double)(s / n);
}

inline double sparseness(Vec r) {
  const std::size_t n = r.size();
  for (auto& v : r) v = std::max(v, 0.0);
  long double sum = 0, sq = 0;
  for (double v : r) {
    sum += v;
    sq += (long double)v * v;
  }
  if (sq == 0) return 0.0;
  const long double a = (sum / n) * (sum / n) / (sq / n);
  return (double)((1 - a) / (1 - 1.0L / n));
}

// unit active iff max > t and population sd > t
inline std::vector<bool> active_units(const Mat& acts, double t) {
  const std::size_t units = acts.front().size();
  std::vector<bool> out(units);
  for (std::size_t u = 0; u < units; ++u) {
    long double mx = -INFINITY, mean = 0, var = 0;
    for (const auto& row : acts) {
      mx = std::max<long double>(mx, row[u]);
      mean += row[u];
    }
    mean /= acts.size();
    for (const auto& row : acts) var += (row[u] - mean) * (row[u] - mean);
    var /= acts.size();
    out[u] = mx > t && std::sqrt(var) > t;
  }
  return out;
}

// Per unit: minimize sum_d (multi_d - s * sumsingles_d)^2 by setting the
// derivative to zero; mean over units with a nonzero regressor.
inline double normalization_slope(const Mat& acts, const std::vector<std::pair<std::size_t, std::vector<std::size_t>>>& displays,
                                  const std::vector<bool>& active) {
  long double total = 0;
  int used = 0;
  for (std::size_t u = 0; u < active.size(); ++u) {
    if (!active[u]) continue;
    long double num = 0, den = 0;
    for (const auto& [multi, singles] : displays) {
      long double x = 0;
      for (auto s : singles) x += acts[s][u];
      num += x * acts[multi][u];
      den += x * x;
    }
    if (den == 0) continue;
    total += num / den;
    ++used;
  }
  if (used == 0) throw std::domain_error("no usable units");
  return (double)(total / used);
}

inline double correlated_sparseness(const Mat& acts, const std::vector<std::size_t>& rows_a,
                                    const std::vector<std::size_t>& rows_b, const std::vector<bool>& active) {
  Vec sa, sb;
  for (std::size_t u = 0; u < active.size(); ++u) {
    if (!active[u]) continue;
    Vec ra, rb;
    for (auto r : rows_a) ra.push_back(acts[r][u]);
    for (auto r : rows_b) rb.push_back(acts[r][u]);
    sa.push_back(sparseness(ra));
    sb.push_back(sparseness(rb));
  }
  return pearson(sa, sb);
}

// pearson(d, g) - pearson(d, a) over pairs i < j
inline double weber(const Vec& d, const Vec& lengths) {
  Vec g, a;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    for (std::size_t j = i + 1; j < lengths.size(); ++j) {
      a.push_back(std::fabs(lengths[i] - lengths[j]));
      g.push_back(std::fabs(lengths[i] - lengths[j]) / (lengths[i] + lengths[j]));
    }
  }
  return pearson(d, g) - pearson(d, a);
}

inline std::pair<Vec, Vec> weber_regressors(const Vec& lengths) {
  Vec g, a;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    for (std::size_t j = i + 1; j < lengths.size(); ++j) {
      a.push_back(std::fabs(lengths[i] - lengths[j]));
      g.push_back(std::fabs(lengths[i] - lengths[j]) / (lengths[i] + lengths[j]));
    }
  }
  return {g, a};
}

inline double top1(const Mat& probs, const std::vector<int>& labels) {
  int hits = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < probs[i].size(); ++k)
      if (probs[i][k] > probs[i][best]) best = k;
    hits += (int)best == labels[i];
  }
  return (double)hits / probs.size();
}

// --- scoring -------------------------------------------------------------

inline double bpm(const Vec& b, const Vec& m, double lambda) {
  long double total = 0;
  for (std::size_t i = 0; i < b.size(); ++i) total += m[i] > 0 ? std::fabs(b[i] - m[i]) : b[i] - lambda * m[i];
  return (double)(1 / (1 + total));
}

inline double l1_similarity(const Vec& b, const Vec& m) {
  long double total = 0;
  for (std::size_t i = 0; i < b.size(); ++i) total += std::fabs((long double)b[i] - m[i]);
  return (double)(1 / (1 + total));
}

// --- analysis ------------------------------------------------------------

// Cyclic Jacobi rotations on a symmetric matrix; returns eigenpairs sorted
// by descending eigenvalue (vectors as columns of the second element).
inline std::pair<Vec, Mat> symmetric_eigen(Mat a) {
  const std::size_t n = a.size();
  Mat v(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const double t = (theta >= 0 ? 1 : -1) / (std::fabs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a[x][x] > a[y][y]; });
  Vec vals;
  Mat vecs(n, Vec(n));
  for (std::size_t j = 0; j < n; ++j) {
    vals.push_back(a[order[j]][order[j]]);
    for (std::size_t i = 0; i < n; ++i) vecs[i][j] = v[i][order[j]];
  }
  return {vals, vecs};
}

struct Pca {
  Mat coords;  // rows x 2
  Vec ratio;   // 2
};

// PCA through the covariance matrix's eigendecomposition.
inline Pca pca2(const Mat& x) {
  const std::size_t n = x.size(), d = x.front().size();
  Vec mean(d, 0.0);
  for (const auto& r : x)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j] / n;
  Mat cov(d, Vec(d, 0.0));
  for (const auto& r : x)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
  auto [vals, vecs] = symmetric_eigen(cov);
  double total = 0;
  for (double v : vals) total += std::max(v, 0.0);
  Pca out;
  for (const auto& r : x) {
    Vec c(2, 0.0);
    for (int k = 0; k < 2; ++k)
      for (std::size_t j = 0; j < d; ++j) c[k] += (r[j] - mean[j]) * vecs[j][k];
    out.coords.push_back(c);
  }
  out.ratio = {vals[0] / total, vals[1] / total};
  return out;
}

inline double davies_bouldin(const Mat& pts, const std::vector<std::string>& labels) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  std::vector<Vec> cent;
  Vec scatter;
  for (const auto& [l, idx] : groups) {
    Vec c(pts.front().size(), 0.0);
    for (auto i : idx)
      for (std::size_t j = 0; j < c.size(); ++j) c[j] += pts[i][j] / idx.size();
    double s = 0;
    for (auto i : idx) s += euclidean(pts[i], c) / idx.size();
    cent.push_back(c);
    scatter.push_back(s);
  }
  double db = 0;
  for (std::size_t i = 0; i < cent.size(); ++i) {
    double worst = -1;
    for (std::size_t j = 0; j < cent.size(); ++j)
      if (i != j) worst = std::max(worst, (scatter[i] + scatter[j]) / euclidean(cent[i], cent[j]));
    db += worst / cent.size();
  }
  return db;
}

}  // namespace oracle
