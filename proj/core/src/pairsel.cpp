#include "mhccl/pairsel.hpp"

#include <algorithm>
#include <stdexcept>

#include "mhccl/rng.hpp"

namespace mhccl {

namespace {

// Slot j (1-based): odd j > 1 reads the query view; j == 1 and even j read the
// momentum view.
ViewTag slot_tag(int j) { return (j != 1 && j % 2 == 1) ? ViewTag::query_a : ViewTag::key_b; }

void expand_views(const std::vector<int>& candidates, int first_slot,
                  std::vector<ViewRef>& out) {
  int j = first_slot;
  for (int cand : candidates) {
    out.push_back({cand, slot_tag(j)});
    out.push_back({cand, slot_tag(j + 1)});
    j += 2;
  }
}

}  // namespace

std::vector<InstancePairSet> instance_pairs(const std::vector<int>& bottom_labels, int s_pos,
                                            int s_neg, std::uint64_t seed) {
  if (s_pos < 1 || s_neg < 1) throw std::invalid_argument("pair counts must be >= 1");
  const int b = static_cast<int>(bottom_labels.size());

  std::vector<InstancePairSet> out(b);
  for (int a = 0; a < b; ++a) {
    InstancePairSet& ps = out[a];
    ps.anchor_pos = a;
    Rng rng(derive_seed(seed, 0x9a125, static_cast<std::uint64_t>(a)));

    std::vector<int> same, other;
    for (int r = 0; r < b; ++r) {
      if (r == a) continue;
      (bottom_labels[r] == bottom_labels[a] ? same : other).push_back(r);
    }
    if (other.empty()) {
      ps.degenerate = true;
      continue;
    }

    // positive candidates: the anchor itself, then same-cluster draws without
    // replacement; shortfall replicates the anchor (its momentum view fills in)
    std::vector<int> pos{a};
    const int want = s_pos - 1;
    const int take = std::min<int>(want, static_cast<int>(same.size()));
    if (take > 0) {
      std::vector<int> pick = sample_without_replacement(rng, static_cast<int>(same.size()), take);
      for (int p : pick) pos.push_back(same[p]);
    }
    while (static_cast<int>(pos.size()) < s_pos) pos.push_back(a);

    std::vector<int> neg;
    if (static_cast<int>(other.size()) >= s_neg) {
      std::vector<int> pick =
          sample_without_replacement(rng, static_cast<int>(other.size()), s_neg);
      for (int p : pick) neg.push_back(other[p]);
    } else {
      for (int i = 0; i < s_neg; ++i) neg.push_back(other[rng.bounded(other.size())]);
    }

    expand_views(pos, 1, ps.positives);
    expand_views(neg, 2 * s_pos + 1, ps.negatives);
  }
  return out;
}

ClusterPairSet cluster_pairs(const ClusterHierarchy& hierarchy, int anchor, int h_pos, int h_neg,
                             int m_used, std::uint64_t seed, bool downward) {
  if (h_pos < 1 || h_neg < 1) throw std::invalid_argument("pair counts must be >= 1");
  if (hierarchy.depth() < 1) throw std::invalid_argument("cluster_pairs: empty hierarchy");

  ClusterPairSet out;
  out.anchor = anchor;
  const int used = std::min(m_used, hierarchy.depth());
  for (int p = 0; p < used; ++p) {
    const Partition& part = hierarchy.partitions[p];
    const int k = part.num_clusters;
    if (k < 2) continue;  // single cluster contributes no terms

    Rng rng(derive_seed(seed, 0xc1a57e4, static_cast<std::uint64_t>(anchor),
                        static_cast<std::uint64_t>(p)));
    const int own = part.instance_labels[anchor];
    const bool has_parent = !part.parent_of_cluster.empty();
    const int parent = has_parent ? part.parent_of_cluster[own] : -1;

    PartitionPairs pp;
    pp.partition = p;
    pp.positives.push_back({p, own});

    std::vector<ProtoRef> sibling_pool, negative_pool;
    for (int c = 0; c < k; ++c) {
      if (c == own) continue;
      if (downward && has_parent && part.parent_of_cluster[c] == parent)
        sibling_pool.push_back({p, c});
      else
        negative_pool.push_back({p, c});
    }
    // the parent prototype itself is an eligible positive draw
    if (downward && has_parent) sibling_pool.push_back({p + 1, parent});

    const int want = h_pos - 1;
    const int take = std::min<int>(want, static_cast<int>(sibling_pool.size()));
    if (take > 0) {
      std::vector<int> pick =
          sample_without_replacement(rng, static_cast<int>(sibling_pool.size()), take);
      for (int i : pick) pp.positives.push_back(sibling_pool[i]);
    }
    while (static_cast<int>(pp.positives.size()) < h_pos) pp.positives.push_back({p, own});

    if (!negative_pool.empty()) {
      if (static_cast<int>(negative_pool.size()) >= h_neg) {
        std::vector<int> pick =
            sample_without_replacement(rng, static_cast<int>(negative_pool.size()), h_neg);
        for (int i : pick) pp.negatives.push_back(negative_pool[i]);
      } else {
        for (int i = 0; i < h_neg; ++i)
          pp.negatives.push_back(negative_pool[rng.bounded(negative_pool.size())]);
      }
    }
    out.partitions.push_back(std::move(pp));
  }
  return out;
}

ClusterHierarchy single_partition_hierarchy(const MatF& features,
                                            const std::vector<int>& labels) {
  if (features.rows != labels.size())
    throw std::invalid_argument("single_partition_hierarchy: size mismatch");
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);

  ClusterHierarchy h;
  h.features = features;
  h.n = features.rows;
  Partition part;
  part.point_labels = labels;
  part.instance_labels = labels;
  part.num_clusters = k;
  part.prototypes_original = compute_prototypes(features, labels, k);
  part.prototypes_refined = part.prototypes_original;
  part.masked.assign(features.rows, 0);
  h.partitions.push_back(std::move(part));
  return h;
}

}  // namespace mhccl
