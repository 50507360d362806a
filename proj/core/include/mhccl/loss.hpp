#pragma once

#include <span>
#include <vector>

#include "mhccl/matrix.hpp"
#include "mhccl/pairsel.hpp"

namespace mhccl {

struct LossConfig {
  double tau = 0.2;
  int s_pos = 3;
  int s_neg = 8;
  int h_pos = 2;
  int h_neg = 4;
  int m_used = 3;

  void validate() const;
};

double cosine_sim(std::span<const float> a, std::span<const float> b);
double cosine_sim(std::span<const double> a, std::span<const double> b);

// -sum_pos log sigmoid(sim/tau) - sum_neg log(1 - sigmoid(sim/tau)) over the
// pair set's view slots. Gradients flow into the anchor row and query-view
// counterpart rows of grad_z_a; momentum-view embeddings are constants.
template <class S>
double instance_loss(const Mat<S>& z_a, const Mat<S>& h_b, const InstancePairSet& pairs,
                     double tau, Mat<double>* grad_z_a);

// Mean over contributing partitions of the per-partition BCE sums against
// refined prototypes. Prototypes are constants; only the anchor row of
// grad_z_a receives gradient.
template <class S>
double cluster_loss(const Mat<S>& z_a, int anchor_row, const ClusterPairSet& pairs,
                    const ClusterHierarchy& hierarchy, double tau, Mat<double>* grad_z_a);

struct LossBreakdown {
  double total = 0.0;
  double instance_part = 0.0;
  double cluster_part = 0.0;
  std::vector<double> per_anchor;
  Mat<double> grad;  // d total / d z_a
};

// Sums instance and cluster losses over the batch and accumulates all
// gradients into one B x D matrix (anchors processed in batch order).
template <class S>
LossBreakdown overall_loss(const Mat<S>& z_a, const Mat<S>& h_b,
                           const std::vector<InstancePairSet>& instance_sets,
                           const std::vector<ClusterPairSet>& cluster_sets,
                           const ClusterHierarchy& hierarchy, const LossConfig& cfg);

}  // namespace mhccl
