#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mhccl/matrix.hpp"
#include "mhccl/rng.hpp"

namespace mhccl {

struct ChannelStats {
  std::vector<float> mean;
  std::vector<float> stdev;  // clamped to 1 when below 1e-8
  bool empty() const { return mean.empty(); }
};

// N instances, each a T x V sequence stored instance-major, time-major,
// variable-minor. Labels are optional and are only ever read by evaluation
// and audit code paths.
struct TimeSeriesDataset {
  std::size_t n = 0;
  std::size_t t = 0;
  std::size_t v = 0;
  std::vector<float> values;    // n * t * v
  std::vector<std::int32_t> labels;  // empty when unlabeled
  std::vector<std::int32_t> ids;
  ChannelStats norm;            // stats that were applied, if any

  bool has_labels() const { return !labels.empty(); }
  int num_classes() const;

  std::span<const float> instance(std::size_t i) const {
    return {values.data() + i * t * v, t * v};
  }
  std::span<float> instance(std::size_t i) { return {values.data() + i * t * v, t * v}; }
  float at(std::size_t i, std::size_t tt, std::size_t vv) const {
    return values[(i * t + tt) * v + vv];
  }

  TimeSeriesDataset without_labels() const;
};

enum class DataFormat { binary, csv };

// Loads and validates a dataset. With normalize=true (the default) each
// variable is z-normalized over the loaded instances and the constants are
// stored on the dataset for reuse.
TimeSeriesDataset load_dataset(const std::string& path, DataFormat format,
                               bool normalize = true);
void save_dataset(const std::string& path, const TimeSeriesDataset& ds, DataFormat format);

ChannelStats compute_channel_stats(const TimeSeriesDataset& ds);
void apply_channel_stats(TimeSeriesDataset& ds, const ChannelStats& stats);

struct SplitResult {
  TimeSeriesDataset train;
  TimeSeriesDataset val;
  TimeSeriesDataset test;
};

// Seeded shuffled split. Validation is carved out of the training fraction:
// |train| = round(n * train_frac) * (1 - val_frac), |test| = rest.
SplitResult split(const TimeSeriesDataset& ds, double train_frac, double val_frac,
                  std::uint64_t seed);

struct AugmentParams {
  float weak_noise_sigma = 0.05f;
  float weak_scale_sigma = 0.1f;
  int strong_max_segments = 8;
  float strong_noise_sigma = 0.08f;

  void validate(std::size_t t) const;
};

// x * s + eps with per-channel s ~ N(1, weak_scale_sigma^2) and elementwise
// eps ~ N(0, weak_noise_sigma^2).
void weak_augment(std::span<const float> x, std::span<float> out, std::size_t t, std::size_t v,
                  const AugmentParams& p, Rng& rng);

// Splits the time axis into k <= strong_max_segments contiguous segments at
// random cut points, permutes the segments, then adds N(0, strong_noise_sigma^2)
// jitter.
void strong_augment(std::span<const float> x, std::span<float> out, std::size_t t, std::size_t v,
                    const AugmentParams& p, Rng& rng);

struct Batch {
  MatF raw;     // B x (t*v)
  MatF view_a;  // weak-augmented
  MatF view_b;  // strong-augmented
  std::vector<std::int32_t> indices;  // positions into the source dataset
  std::size_t t = 0;
  std::size_t v = 0;
};

// One epoch worth of batches covering every instance exactly once. The rng
// stream is derived from (seed, epoch), so distinct epochs shuffle and augment
// differently while staying reproducible.
std::vector<Batch> minibatches(const TimeSeriesDataset& ds, std::size_t batch_size, bool shuffle,
                               std::uint64_t seed, std::uint64_t epoch, const AugmentParams& p);

}  // namespace mhccl
