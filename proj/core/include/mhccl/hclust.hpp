#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mhccl/matrix.hpp"

namespace mhccl {

struct MaskConfig {
  enum class Strategy { mask_threshold, mask_proportion, replace_prototypes, none };
  Strategy strategy = Strategy::mask_threshold;
  double parameter = 0.3;          // threshold t or proportion rho
  std::vector<int> apply_at = {1};  // 1-based partition indices

  void validate() const;
  bool applies_to(int partition_index) const;  // 1-based
  static Strategy parse_strategy(const std::string& name);
  static std::string strategy_name(Strategy s);
};

// omega[i] = argmin_{j != i} ||points[i] - points[j]||, ties to smallest index.
std::vector<int> first_neighbors(const MatF& points);

// A(i,j) = 1 iff omega_i = j or omega_j = i or omega_i = omega_j (i != j).
struct Adjacency {
  std::size_t n = 0;
  std::vector<std::vector<int>> neighbors;  // sorted, diagonal-free
};
Adjacency finch_adjacency(const std::vector<int>& omega);

struct Components {
  std::vector<int> labels;  // component ids numbered by smallest member index
  int count = 0;
};
Components connected_components(const Adjacency& adj);

// Row k = mean of member rows of cluster k.
MatF compute_prototypes(const MatF& points, const std::vector<int>& labels, int k);

// One level of the hierarchy. `point_labels`/`masked` run over this level's
// clustering inputs (instances at level 1, refined prototypes of the level
// below otherwise); `instance_labels` always runs over the original instances.
struct Partition {
  std::vector<int> point_labels;
  std::vector<int> instance_labels;
  int num_clusters = 0;
  MatF prototypes_original;  // means over all member points
  MatF prototypes_refined;   // means over unmasked members (strategy dependent)
  std::vector<std::uint8_t> masked;
  std::vector<int> parent_of_cluster;  // cluster ids at the next level; empty at the top
};

// Fills `masked` and `prototypes_refined` according to the strategy:
//   mask_threshold    mask members farther than t from the original prototype
//   mask_proportion   mask the floor(rho * size) farthest members per cluster
//   replace_prototypes  refined prototype = member closest to the mean
// Masked points keep their labels; they are only excluded from refined means.
void upward_mask(const MatF& points, Partition& partition, const MaskConfig& cfg);

struct ClusterHierarchy {
  std::vector<Partition> partitions;  // bottom-up
  MatF features;                      // level-1 inputs
  std::size_t n = 0;                  // instance count

  int depth() const { return static_cast<int>(partitions.size()); }
};

// Bottom-up first-neighbor clustering, recursing on refined prototypes.
// Construction stops before emitting a level with fewer than two clusters
// (the first level is always emitted so callers can handle n tiny).
ClusterHierarchy build_hierarchy(const MatF& points, const MaskConfig& cfg);

// Takes the partition with the smallest cluster count >= k_target and merges
// the closest prototype pair until exactly k_target clusters remain.
Partition required_k(const ClusterHierarchy& hierarchy, int k_target);

}  // namespace mhccl
