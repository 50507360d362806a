#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mhccl/matrix.hpp"

namespace mhccl {

struct ConfusionMatrix {
  int classes = 0;
  std::vector<std::int64_t> counts;  // classes x classes, rows = true class

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int c) : classes(c), counts(std::size_t(c) * c, 0) {}
  std::int64_t& at(int truth, int pred) { return counts[std::size_t(truth) * classes + pred]; }
  std::int64_t at(int truth, int pred) const {
    return counts[std::size_t(truth) * classes + pred];
  }
  std::int64_t total() const;
};

struct MetricsReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double kappa = 0.0;
  ConfusionMatrix confusion;
};

// ACC, unweighted mean of per-class F1 (0 on zero denominators), and Cohen's
// kappa with multiclass chance agreement p_e = sum_c row_c * col_c / N^2.
MetricsReport metrics_from_confusion(const ConfusionMatrix& cm);

struct LinearProbe {
  int classes = 0;
  int dim = 0;
  std::vector<double> weights;  // classes x dim
  std::vector<double> bias;     // classes
};

// Multinomial logistic regression on frozen embeddings, full-batch gradient
// descent. Deterministic in the seed.
LinearProbe linear_probe_train(const MatF& embeddings, const std::vector<std::int32_t>& labels,
                               int epochs, double lr, std::uint64_t seed);
std::vector<std::int32_t> probe_predict(const LinearProbe& probe, const MatF& embeddings);
MetricsReport evaluate(const LinearProbe& probe, const MatF& embeddings,
                       const std::vector<std::int32_t>& labels);

// Lloyd's iterations from seeded farthest-point initialization. Empty clusters
// are re-seeded to the point farthest from its center.
std::vector<int> kmeans(const MatF& points, int k, int iters, std::uint64_t seed);
double kmeans_inertia(const MatF& points, const std::vector<int>& labels, int k);

struct PairDecision {
  enum class Level : std::uint8_t { instance, cluster };
  Level level = Level::instance;
  int anchor = -1;
  bool positive = false;
  int counterpart = -1;  // instance index, or cluster id at `partition`
  int partition = -1;    // cluster level only
};

struct AuditReport {
  std::int64_t total_instance_negatives = 0;
  std::int64_t false_instance_negatives = 0;
  std::int64_t total_cluster_negatives = 0;
  std::int64_t false_cluster_negatives = 0;
  std::int64_t baseline_total_instance_negatives = 0;
  std::int64_t baseline_false_instance_negatives = 0;
  std::int64_t baseline_total_cluster_negatives = 0;
  std::int64_t baseline_false_cluster_negatives = 0;
  // 1 - rate/baseline_rate; NaN when the baseline rate is zero.
  double instance_reduction = 0.0;
  double cluster_reduction = 0.0;

  std::string to_json() const;
};

// A negative pair is false when both members share a ground-truth class; at
// cluster level the counterpart's class is the majority label of its cluster.
// majority[partition][cluster] tables come from the clustering that emitted
// the decisions.
AuditReport false_pair_audit(const std::vector<PairDecision>& decisions,
                             const std::vector<std::int32_t>& labels,
                             const std::vector<std::vector<int>>& majority,
                             const std::vector<PairDecision>& baseline_decisions,
                             const std::vector<std::vector<int>>& baseline_majority);

// Majority ground-truth label per cluster for each partition of a hierarchy
// (ties resolved toward the smaller label).
std::vector<std::vector<int>> majority_labels(const std::vector<std::vector<int>>& instance_labels,
                                              const std::vector<std::int32_t>& truth);

}  // namespace mhccl
