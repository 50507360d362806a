#pragma once

#include <cstdint>
#include <vector>

#include "mhccl/hclust.hpp"

namespace mhccl {

// Which encoder/view a pair slot reads: the query encoder on the weak view,
// or the momentum encoder on the strong view. Gradients flow only into
// query_a slots.
enum class ViewTag : std::uint8_t { query_a, key_b };

struct ViewRef {
  int batch_pos = -1;
  ViewTag tag = ViewTag::key_b;
};

// Fixed-size slot layout: candidates occupy consecutive slot pairs; slot 1 and
// every even slot read the momentum view, the remaining odd slots read the
// query view. Shortfalls are filled by replicating the anchor's momentum view.
struct InstancePairSet {
  int anchor_pos = -1;
  std::vector<ViewRef> positives;  // 2 * s_pos
  std::vector<ViewRef> negatives;  // 2 * s_neg
  bool degenerate = false;         // no out-of-cluster candidate in the batch
};

// bottom_labels[r] is the bottom-partition cluster of the instance at batch
// position r. Per-anchor rng streams are derived from (seed, anchor position).
std::vector<InstancePairSet> instance_pairs(const std::vector<int>& bottom_labels, int s_pos,
                                            int s_neg, std::uint64_t seed);

struct ProtoRef {
  int partition = 0;  // 0-based into the hierarchy
  int cluster = 0;
};

struct PartitionPairs {
  int partition = 0;
  std::vector<ProtoRef> positives;  // first entry is the anchor's own prototype
  std::vector<ProtoRef> negatives;  // empty when no negative pool exists
};

struct ClusterPairSet {
  int anchor = -1;  // instance index into the hierarchy
  std::vector<PartitionPairs> partitions;
};

// Per used partition: the anchor's own refined prototype plus h_pos - 1 draws
// from clusters sharing its parent (the parent prototype itself is an eligible
// draw); negatives from non-sibling clusters. With downward=false every other
// cluster is a negative candidate and no sibling positives are added.
ClusterPairSet cluster_pairs(const ClusterHierarchy& hierarchy, int anchor, int h_pos, int h_neg,
                             int m_used, std::uint64_t seed, bool downward = true);

// Single-partition hierarchy over externally supplied flat cluster labels
// (k-means baseline and batch-scope clustering reuse the same pair machinery).
ClusterHierarchy single_partition_hierarchy(const MatF& features, const std::vector<int>& labels);

}  // namespace mhccl
