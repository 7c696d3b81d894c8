#pragma once

#include <map>
#include <vector>

#include "aapl/augmentation.hpp"
#include "aapl/tensor.hpp"

namespace aapl {

/// A labeled point cloud of meta or delta tokens for cluster profiling.
struct TokenCloud {
  struct Point {
    std::vector<double> vec;
    AugmentationKind kind = AugmentationKind::random_crop;
    int class_id = 0;
  };
  enum class TokenType { meta, delta };

  std::vector<Point> points;
  TokenType token_type = TokenType::meta;
};

enum class ClusterLabel { by_augmentation, by_class };

struct SilhouetteResult {
  std::vector<double> per_point;  // in [-1, 1]
  double mean = 0.0;
};

/// Mean-distance silhouette (b - a) / max(a, b) with the Euclidean metric.
/// a(i): mean distance to own cluster excluding self; b(i): smallest mean
/// distance to any other cluster. Singleton clusters score 0.
/// DegenerateInputError when fewer than two clusters are present.
SilhouetteResult silhouette_score(const TokenCloud& cloud, ClusterLabel label);

/// Mean silhouette per augmentation kind (by-augmentation clustering).
std::map<AugmentationKind, double> per_kind_silhouettes(const TokenCloud& cloud);

struct ProjectedPoint {
  double x = 0.0;
  double y = 0.0;
  AugmentationKind kind = AugmentationKind::random_crop;
  int class_id = 0;
};

/// Projects the cloud onto its top two principal axes. Deterministic; the
/// sign of each axis is fixed by making its largest-magnitude entry positive.
std::vector<ProjectedPoint> pca_project_2d(const TokenCloud& cloud);

}  // namespace aapl
