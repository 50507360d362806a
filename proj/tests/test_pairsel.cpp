#include <doctest.h>

#include <set>

#include "mhccl/pairsel.hpp"
#include "mhccl/rng.hpp"

using namespace mhccl;

namespace {

MatF grid_points(std::size_t n, std::size_t d, float spread) {
  MatF pts(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) pts[i][j] = spread * float(i) + 0.1f * float(j);
  return pts;
}

int count_tag(const std::vector<ViewRef>& refs, ViewTag tag) {
  int c = 0;
  for (const ViewRef& r : refs) c += r.tag == tag ? 1 : 0;
  return c;
}

}  // namespace

TEST_SUITE_BEGIN("pairsel");

TEST_CASE("figure-style scenario: same-cluster mates are positives, others negatives") {
  // batch of 5: anchor 0 shares a cluster with 1 and 2; 3 and 4 are elsewhere
  const std::vector<int> bottom{0, 0, 0, 1, 2};
  const auto sets = instance_pairs(bottom, /*s_pos=*/3, /*s_neg=*/2, 7);
  const InstancePairSet& ps = sets[0];
  REQUIRE_FALSE(ps.degenerate);
  REQUIRE(ps.positives.size() == 6);
  REQUIRE(ps.negatives.size() == 4);

  std::set<int> pos_instances, neg_instances;
  for (const ViewRef& r : ps.positives) pos_instances.insert(r.batch_pos);
  for (const ViewRef& r : ps.negatives) neg_instances.insert(r.batch_pos);
  CHECK(pos_instances == std::set<int>{0, 1, 2});
  for (int n : neg_instances) CHECK((n == 3 || n == 4));

  // slot 1 is the anchor's own momentum view; no negative shares the cluster
  CHECK(ps.positives[0].batch_pos == 0);
  CHECK(ps.positives[0].tag == ViewTag::key_b);
}

TEST_CASE("slot parity alternates views per the selection rule") {
  const std::vector<int> bottom{0, 0, 0, 0, 1, 1, 1, 1};
  const auto sets = instance_pairs(bottom, 4, 4, 3);
  for (const InstancePairSet& ps : sets) {
    REQUIRE(ps.positives.size() == 8);
    REQUIRE(ps.negatives.size() == 8);
    // global slots: j=1 -> key, j=2 -> key, then odd -> query, even -> key
    CHECK(ps.positives[0].tag == ViewTag::key_b);
    CHECK(ps.positives[1].tag == ViewTag::key_b);
    for (std::size_t j = 2; j < ps.positives.size(); j += 2) {
      CHECK(ps.positives[j].tag == ViewTag::query_a);
      CHECK(ps.positives[j + 1].tag == ViewTag::key_b);
    }
    for (std::size_t j = 0; j < ps.negatives.size(); j += 2) {
      CHECK(ps.negatives[j].tag == ViewTag::query_a);
      CHECK(ps.negatives[j + 1].tag == ViewTag::key_b);
    }
  }
}

TEST_CASE("singleton anchor replicates its momentum view into the shortfall") {
  const std::vector<int> bottom{0, 1, 1, 2, 2};
  const auto sets = instance_pairs(bottom, 3, 2, 5);
  const InstancePairSet& ps = sets[0];  // anchor 0 is alone in its cluster
  REQUIRE_FALSE(ps.degenerate);
  REQUIRE(ps.positives.size() == 6);
  for (const ViewRef& r : ps.positives) CHECK(r.batch_pos == 0);
  CHECK(count_tag(ps.positives, ViewTag::key_b) == 4);
  CHECK(count_tag(ps.positives, ViewTag::query_a) == 2);
}

TEST_CASE("s_pos=1 reduces to the single-positive pairing") {
  const std::vector<int> bottom{0, 0, 1, 1};
  const auto sets = instance_pairs(bottom, 1, 1, 5);
  for (const InstancePairSet& ps : sets) {
    REQUIRE(ps.positives.size() == 2);
    REQUIRE(ps.negatives.size() == 2);
    for (const ViewRef& r : ps.positives) {
      CHECK(r.batch_pos == ps.anchor_pos);
      CHECK(r.tag == ViewTag::key_b);
    }
  }
}

TEST_CASE("anchor with no out-of-cluster candidate is degenerate") {
  const std::vector<int> bottom{0, 0, 0};
  const auto sets = instance_pairs(bottom, 2, 2, 5);
  for (const InstancePairSet& ps : sets) CHECK(ps.degenerate);
}

TEST_CASE("pair selection is deterministic in the seed") {
  std::vector<int> bottom;
  for (int i = 0; i < 32; ++i) bottom.push_back(i % 5);
  const auto a = instance_pairs(bottom, 3, 6, 11);
  const auto b = instance_pairs(bottom, 3, 6, 11);
  const auto c = instance_pairs(bottom, 3, 6, 12);
  REQUIRE(a.size() == b.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].positives.size() == b[i].positives.size());
    for (std::size_t j = 0; j < a[i].positives.size(); ++j) {
      CHECK(a[i].positives[j].batch_pos == b[i].positives[j].batch_pos);
    }
    for (std::size_t j = 0; j < a[i].negatives.size(); ++j) {
      CHECK(a[i].negatives[j].batch_pos == b[i].negatives[j].batch_pos);
      if (a[i].negatives[j].batch_pos != c[i].negatives[j].batch_pos) any_diff = true;
    }
  }
  CHECK(any_diff);
}

TEST_CASE("ground-truth clustering yields no same-class negative (soundness)") {
  Rng rng(4);
  std::vector<int> classes;
  for (int i = 0; i < 64; ++i) classes.push_back(int(rng.bounded(4)));
  const auto sets = instance_pairs(classes, 3, 8, 21);
  for (const InstancePairSet& ps : sets) {
    if (ps.degenerate) continue;
    for (const ViewRef& r : ps.negatives)
      CHECK(classes[r.batch_pos] != classes[ps.anchor_pos]);
  }
}

// A fixed two-level hierarchy for cluster-pair tests:
//   level 1: clusters {0,1} under parent 0, {2,3} under parent 1 (12 points)
//   level 2: clusters {0}, {1}
namespace {

ClusterHierarchy fixed_hierarchy() {
  MatF pts(12, 1);
  // clusters at 0, 2, 10, 12 -> level-2 groups {0,2} and {10,12}
  const float centers[4] = {0.0f, 2.0f, 10.0f, 12.0f};
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 3; ++i) pts[c * 3 + i][0] = centers[c] + 0.1f * float(i - 1);
  MaskConfig cfg;
  cfg.strategy = MaskConfig::Strategy::none;
  return build_hierarchy(pts, cfg);
}

}  // namespace

TEST_CASE("cluster pairs: own prototype first, siblings and parent as positives") {
  const ClusterHierarchy h = fixed_hierarchy();
  REQUIRE(h.depth() == 2);
  REQUIRE(h.partitions[0].num_clusters == 4);
  REQUIRE(h.partitions[1].num_clusters == 2);

  const ClusterPairSet set = cluster_pairs(h, /*anchor=*/0, /*h_pos=*/3, /*h_neg=*/2, 3, 5);
  REQUIRE(set.partitions.size() == 2);

  const PartitionPairs& p1 = set.partitions[0];
  REQUIRE(p1.positives.size() == 3);
  CHECK(p1.positives[0].partition == 0);
  CHECK(p1.positives[0].cluster == h.partitions[0].instance_labels[0]);
  // positive pool: the sibling cluster at level 1 plus the parent at level 2
  std::set<std::pair<int, int>> pool;
  for (std::size_t i = 1; i < p1.positives.size(); ++i)
    pool.insert({p1.positives[i].partition, p1.positives[i].cluster});
  const int own = h.partitions[0].instance_labels[0];
  const int parent = h.partitions[0].parent_of_cluster[own];
  for (const auto& [part, cl] : pool) {
    if (part == 0) CHECK(h.partitions[0].parent_of_cluster[cl] == parent);
    else CHECK(cl == parent);
  }
  // negatives never share the parent
  for (const ProtoRef& r : p1.negatives) {
    CHECK(r.partition == 0);
    CHECK(h.partitions[0].parent_of_cluster[r.cluster] != parent);
  }
}

TEST_CASE("topmost partition has own-prototype positives only") {
  const ClusterHierarchy h = fixed_hierarchy();
  const ClusterPairSet set = cluster_pairs(h, 0, 3, 1, 3, 5);
  const PartitionPairs& top = set.partitions.back();
  REQUIRE(top.partition == 1);
  for (const ProtoRef& r : top.positives) {
    CHECK(r.partition == 1);
    CHECK(r.cluster == h.partitions[1].instance_labels[0]);
  }
  // the only other top cluster is the negative
  REQUIRE(top.negatives.size() == 1);
  CHECK(top.negatives[0].cluster != h.partitions[1].instance_labels[0]);
}

TEST_CASE("two siblings under one parent leave the negative pool empty") {
  // one tight group of two clusters: level 2 merges them into a single parent
  MatF pts(6, 1);
  const float centers[2] = {0.0f, 2.0f};
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 3; ++i) pts[c * 3 + i][0] = centers[c] + 0.1f * float(i - 1);
  MaskConfig cfg;
  cfg.strategy = MaskConfig::Strategy::none;
  const ClusterHierarchy h = build_hierarchy(pts, cfg);
  REQUIRE(h.depth() == 1);  // the merge to one cluster is not emitted
  // ...so force the sibling situation through a 3-cluster layout instead
  MatF pts2(9, 1);
  const float centers2[3] = {0.0f, 2.0f, 40.0f};
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 3; ++i) pts2[c * 3 + i][0] = centers2[c] + 0.1f * float(i - 1);
  const ClusterHierarchy h2 = build_hierarchy(pts2, cfg);
  REQUIRE(h2.depth() == 2);
  REQUIRE(h2.partitions[0].num_clusters == 3);

  // anchor in the isolated cluster: its level-1 siblings are empty and the
  // negative pool holds the two paired clusters
  const ClusterPairSet set = cluster_pairs(h2, 6, 2, 4, 3, 9);
  const PartitionPairs& p1 = set.partitions[0];
  for (const ProtoRef& r : p1.positives) {
    const bool own_or_parent = (r.partition == 0 && r.cluster == 2) || r.partition == 1;
    CHECK(own_or_parent);
  }
  CHECK(p1.negatives.size() == 4);  // drawn with replacement from two clusters
}

TEST_CASE("downward=false treats every other cluster as negative") {
  const ClusterHierarchy h = fixed_hierarchy();
  const ClusterPairSet set = cluster_pairs(h, 0, 2, 3, 3, 5, /*downward=*/false);
  const PartitionPairs& p1 = set.partitions[0];
  for (const ProtoRef& r : p1.positives) CHECK(r.cluster == h.partitions[0].instance_labels[0]);
  // siblings may now appear among negatives
  std::set<int> negs;
  for (const ProtoRef& r : p1.negatives) negs.insert(r.cluster);
  CHECK(negs.count(h.partitions[0].instance_labels[0]) == 0);
}

TEST_CASE("single-cluster partition contributes no terms") {
  MatF pts(4, 1);
  pts[0][0] = 0.0f;
  pts[1][0] = 1.0f;
  pts[2][0] = 0.5f;
  pts[3][0] = 1.5f;
  const ClusterHierarchy h = single_partition_hierarchy(pts, {0, 0, 0, 0});
  const ClusterPairSet set = cluster_pairs(h, 1, 2, 2, 3, 5);
  CHECK(set.partitions.empty());
}

TEST_SUITE_END();
