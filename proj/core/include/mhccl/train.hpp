#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mhccl/dataset.hpp"
#include "mhccl/encoder.hpp"
#include "mhccl/evalmetrics.hpp"
#include "mhccl/hclust.hpp"
#include "mhccl/loss.hpp"
#include "mhccl/pairsel.hpp"

namespace mhccl {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 128;
  double lr = 0.05;
  double sgd_momentum = 0.9;
  double weight_decay = 1e-4;
  double ema = 0.999;  // momentum-encoder coefficient
  int recluster_every = 1;
  int checkpoint_every = 10;
  bool shuffle = true;
  std::uint64_t seed = 0;
  int threads = 1;

  LossConfig loss;
  MaskConfig mask;
  AugmentParams aug;

  enum class ClusterScope { full, batch };
  ClusterScope cluster_scope = ClusterScope::full;
  int flat_kmeans_k = 0;  // > 0 replaces the hierarchy with flat k-means
  int kmeans_iters = 100;
  bool downward_masking = true;
  bool use_instance = true;
  bool use_cluster = true;

  std::vector<int> arch_channels{32, 64, 128};
  std::vector<int> arch_kernels{8, 5, 3};
  int embed_dim = 128;

  void validate() const;
  EncoderArch arch_for(const TimeSeriesDataset& ds) const;
};

struct TrainState {
  int epoch = 0;  // completed epochs
  std::int64_t step = 0;
  EncoderParams query;
  EncoderParams key;
  SgdStateT<float> velocity;
  ClusterHierarchy hierarchy;  // most recent full-set hierarchy
  std::vector<double> loss_history;
};

struct StepLog {
  std::int64_t step = 0;
  int epoch = 0;
  double total = 0.0;
  double instance_part = 0.0;
  double cluster_part = 0.0;
  double grad_norm = 0.0;

  std::string to_json() const;
};

// Momentum-encoder embeddings of all raw sequences, L2-normalized rows.
MatF embed_all(const EncoderParams& key_params, const TimeSeriesDataset& ds, int threads = 1);

// Embeddings through an arbitrary parameter set (query encoder at eval time).
MatF embed_with(const EncoderParams& params, const TimeSeriesDataset& ds, int threads = 1);

void train_epoch(TrainState& state, const TimeSeriesDataset& train_set, const TrainConfig& cfg,
                 std::vector<StepLog>* log);

struct PretrainResult {
  TrainState state;
  std::vector<StepLog> log;
};

// Runs cfg.epochs epochs over a label-stripped view of `data`. When out_dir is
// non-empty, writes periodic checkpoints (aligned to reclustering boundaries so
// they resume exactly), the final checkpoint, and a JSON-lines training log.
// resume_path restarts from a saved checkpoint.
PretrainResult pretrain(const TrainConfig& cfg, const TimeSeriesDataset& data,
                        const std::string& out_dir = "", const std::string& resume_path = "");

void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

// Pair decisions over the given batches of instance indices, for the audit.
// Instance pools and supplements are driven by the hierarchy's bottom
// partition; cluster pairs follow the downward flag.
std::vector<PairDecision> emit_pair_decisions(const ClusterHierarchy& hierarchy,
                                              const std::vector<std::vector<int>>& batches,
                                              const LossConfig& cfg, std::uint64_t seed,
                                              bool downward);

}  // namespace mhccl
