#pragma once

#include <cstdint>
#include <vector>

#include "mhccl/dataset.hpp"
#include "mhccl/matrix.hpp"

namespace mhccl {

// Hierarchical Gaussian-ish blobs in feature space: super-groups far apart,
// classes within a group closer together. Radii follow sigma * Exp(1)^power,
// giving each class a dense core and a sparse halo.
struct FeatureBlobConfig {
  std::vector<int> sizes{150, 150, 75, 75, 75, 75};
  std::vector<std::vector<int>> groups{{0}, {1}, {2, 3, 4, 5}};
  std::vector<double> sigmas{10.0, 10.0, 1.5, 1.5, 1.5, 1.5};
  double super_separation = 80.0;
  double class_separation = 10.0;
  double radial_power = 2.0;
  int dim = 32;
};

struct LabeledPoints {
  MatF points;
  std::vector<std::int32_t> labels;
};

LabeledPoints make_feature_blobs(const FeatureBlobConfig& cfg, std::uint64_t seed);

// Labeled multivariate time series: per-class smooth prototype curves (classes
// within a super-group share a base frequency), instances add amplitude and
// shift jitter plus noise whose scale has the same dense-core/halo profile.
struct BlobSeriesConfig {
  int n = 300;
  int classes = 3;
  std::vector<std::vector<int>> groups{{0, 1}, {2}};
  int t = 32;
  int v = 2;
  double noise = 0.35;
  double amp_jitter = 0.25;
  int max_shift = 3;
};

TimeSeriesDataset make_blob_series(const BlobSeriesConfig& cfg, std::uint64_t seed);

// Generic generator for the CLI: n instances, `classes` classes arranged in a
// hierarchy `depth` levels deep (classes are split evenly into super-groups).
TimeSeriesDataset demo_blob_series(int n, int classes, int depth, int t, int v,
                                   std::uint64_t seed);
LabeledPoints demo_blob_features(int n, int classes, int depth, int dim, std::uint64_t seed);

// Wraps a feature matrix as a T=1 dataset so it can travel through the binary
// container.
TimeSeriesDataset features_as_dataset(const LabeledPoints& pts);
MatF dataset_as_features(const TimeSeriesDataset& ds);

}  // namespace mhccl
