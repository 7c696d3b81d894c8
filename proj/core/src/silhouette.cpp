#include "aapl/silhouette.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "aapl/error.hpp"

namespace aapl {

namespace {

int cluster_of(const TokenCloud::Point& p, ClusterLabel label) {
  return label == ClusterLabel::by_augmentation ? static_cast<int>(p.kind)
                                                : p.class_id;
}

double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

SilhouetteResult silhouette_score(const TokenCloud& cloud, ClusterLabel label) {
  const auto& pts = cloud.points;
  if (pts.empty()) {
    throw DegenerateInputError("silhouette_score: empty cloud");
  }
  const std::size_t dim = pts[0].vec.size();
  for (const auto& p : pts) {
    if (p.vec.size() != dim) {
      throw ShapeError("silhouette_score: mixed vector dimensions");
    }
  }

  std::set<int> clusters;
  for (const auto& p : pts) clusters.insert(cluster_of(p, label));
  if (clusters.size() < 2) {
    throw DegenerateInputError(
        "silhouette_score: need at least 2 clusters, got " +
        std::to_string(clusters.size()));
  }

  SilhouetteResult result;
  result.per_point.resize(pts.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const int own = cluster_of(pts[i], label);
    double own_sum = 0.0;
    std::size_t own_count = 0;
    std::map<int, std::pair<double, std::size_t>> others;  // cluster -> (sum, n)
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j == i) continue;
      const int cj = cluster_of(pts[j], label);
      const double d = euclid(pts[i].vec, pts[j].vec);
      if (cj == own) {
        own_sum += d;
        ++own_count;
      } else {
        auto& slot = others[cj];
        slot.first += d;
        ++slot.second;
      }
    }
    double s = 0.0;
    if (own_count > 0) {  // singletons keep score 0
      const double a = own_sum / static_cast<double>(own_count);
      double b = std::numeric_limits<double>::infinity();
      for (const auto& [cj, slot] : others) {
        b = std::min(b, slot.first / static_cast<double>(slot.second));
      }
      const double denom = std::max(a, b);
      s = denom > 0.0 ? (b - a) / denom : 0.0;
    }
    result.per_point[i] = s;
    total += s;
  }
  result.mean = total / static_cast<double>(pts.size());
  return result;
}

std::map<AugmentationKind, double> per_kind_silhouettes(
    const TokenCloud& cloud) {
  const SilhouetteResult all =
      silhouette_score(cloud, ClusterLabel::by_augmentation);
  std::map<AugmentationKind, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    auto& slot = acc[cloud.points[i].kind];
    slot.first += all.per_point[i];
    ++slot.second;
  }
  std::map<AugmentationKind, double> out;
  for (const auto& [kind, slot] : acc) {
    out[kind] = slot.first / static_cast<double>(slot.second);
  }
  return out;
}

// ---------------------------------------------------------------------------
// PCA via cyclic Jacobi on the covariance matrix.
// ---------------------------------------------------------------------------

namespace {

void jacobi_eigen(std::vector<double>& a, int n, std::vector<double>& vecs) {
  vecs.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) vecs[static_cast<std::size_t>(i) * n + i] = 1.0;
  const auto at = [n](std::vector<double>& m, int r, int c) -> double& {
    return m[static_cast<std::size_t>(r) * n + c];
  };
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += at(a, p, q) * at(a, p, q);
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = at(a, p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (at(a, q, q) - at(a, p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(a, k, p);
          const double akq = at(a, k, q);
          at(a, k, p) = c * akp - s * akq;
          at(a, k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(a, p, k);
          const double aqk = at(a, q, k);
          at(a, p, k) = c * apk - s * aqk;
          at(a, q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = at(vecs, k, p);
          const double vkq = at(vecs, k, q);
          at(vecs, k, p) = c * vkp - s * vkq;
          at(vecs, k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
}

}  // namespace

std::vector<ProjectedPoint> pca_project_2d(const TokenCloud& cloud) {
  const auto& pts = cloud.points;
  if (pts.empty()) throw DegenerateInputError("pca_project_2d: empty cloud");
  const int d = static_cast<int>(pts[0].vec.size());
  if (d < 2) throw ShapeError("pca_project_2d: need dimension >= 2");

  std::vector<double> mean(d, 0.0);
  for (const auto& p : pts)
    for (int k = 0; k < d; ++k) mean[k] += p.vec[k];
  for (double& m : mean) m /= static_cast<double>(pts.size());

  std::vector<double> cov(static_cast<std::size_t>(d) * d, 0.0);
  for (const auto& p : pts) {
    for (int r = 0; r < d; ++r) {
      const double xr = p.vec[r] - mean[r];
      for (int c = 0; c < d; ++c) {
        cov[static_cast<std::size_t>(r) * d + c] += xr * (p.vec[c] - mean[c]);
      }
    }
  }
  for (double& v : cov) v /= static_cast<double>(pts.size());

  std::vector<double> vecs;
  jacobi_eigen(cov, d, vecs);

  // Diagonal now holds eigenvalues; pick the top two columns.
  int top1 = 0, top2 = 1;
  double best1 = -1.0, best2 = -1.0;
  for (int i = 0; i < d; ++i) {
    const double ev = cov[static_cast<std::size_t>(i) * d + i];
    if (ev > best1) {
      best2 = best1; top2 = top1;
      best1 = ev; top1 = i;
    } else if (ev > best2) {
      best2 = ev; top2 = i;
    }
  }

  const auto axis = [&](int col) {
    std::vector<double> v(d);
    for (int k = 0; k < d; ++k) v[k] = vecs[static_cast<std::size_t>(k) * d + col];
    int arg = 0;
    for (int k = 1; k < d; ++k) {
      if (std::abs(v[k]) > std::abs(v[arg])) arg = k;
    }
    if (v[arg] < 0.0) {
      for (double& x : v) x = -x;
    }
    return v;
  };
  const std::vector<double> ax1 = axis(top1);
  const std::vector<double> ax2 = axis(top2);

  std::vector<ProjectedPoint> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    ProjectedPoint q;
    q.kind = p.kind;
    q.class_id = p.class_id;
    for (int k = 0; k < d; ++k) {
      const double centered = p.vec[k] - mean[k];
      q.x += centered * ax1[k];
      q.y += centered * ax2[k];
    }
    out.push_back(q);
  }
  return out;
}

}  // namespace aapl
