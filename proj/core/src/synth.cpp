#include "mhccl/synth.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mhccl/rng.hpp"

namespace mhccl {

namespace {

std::vector<double> random_unit(Rng& rng, int dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace

LabeledPoints make_feature_blobs(const FeatureBlobConfig& cfg, std::uint64_t seed) {
  const int classes = static_cast<int>(cfg.sizes.size());
  if (cfg.sigmas.size() != cfg.sizes.size())
    throw std::invalid_argument("feature blobs: sizes/sigmas mismatch");

  Rng layout_rng(derive_seed(seed, 0x1a407));
  std::vector<std::vector<double>> centers(classes, std::vector<double>(cfg.dim, 0.0));
  for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
    std::vector<double> super = random_unit(layout_rng, cfg.dim);
    for (double& x : super) x *= cfg.super_separation;
    for (int c : cfg.groups[g]) {
      std::vector<double> dir = random_unit(layout_rng, cfg.dim);
      for (int j = 0; j < cfg.dim; ++j) centers[c][j] = super[j] + cfg.class_separation * dir[j];
    }
  }

  int n = 0;
  for (int s : cfg.sizes) n += s;
  LabeledPoints out;
  out.points = MatF(n, cfg.dim);
  out.labels.resize(n);

  Rng rng(derive_seed(seed, 0xb70b5));
  int row = 0;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < cfg.sizes[c]; ++i, ++row) {
      std::vector<double> dir = random_unit(rng, cfg.dim);
      const double r = cfg.sigmas[c] * std::pow(rng.exponential(), cfg.radial_power);
      for (int j = 0; j < cfg.dim; ++j)
        out.points[row][j] = static_cast<float>(centers[c][j] + r * dir[j]);
      out.labels[row] = c;
    }
  }

  // shuffle rows so class blocks do not line up with indices
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  Rng perm_rng(derive_seed(seed, 0x5b44));
  perm_rng.shuffle(perm);
  LabeledPoints shuffled;
  shuffled.points = MatF(n, cfg.dim);
  shuffled.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    std::copy(out.points.row(perm[i]).begin(), out.points.row(perm[i]).end(),
              shuffled.points.row(i).begin());
    shuffled.labels[i] = out.labels[perm[i]];
  }
  return shuffled;
}

TimeSeriesDataset make_blob_series(const BlobSeriesConfig& cfg, std::uint64_t seed) {
  if (cfg.classes < 1 || cfg.n < cfg.classes)
    throw std::invalid_argument("blob series: need n >= classes >= 1");

  // class prototype curves; classes in one group share a base frequency
  Rng proto_rng(derive_seed(seed, 0x9e0705));
  std::vector<double> base_freq(cfg.groups.size());
  for (double& f : base_freq) f = 1.5 + 2.5 * proto_rng.uniform01();

  struct ClassProto {
    double freq;
    std::vector<double> phase;     // per channel
    std::vector<double> harmonic;  // per channel weight of the 2nd harmonic
  };
  std::vector<ClassProto> protos(cfg.classes);
  for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
    for (int c : cfg.groups[g]) {
      ClassProto& p = protos[c];
      p.freq = base_freq[g];
      for (int ch = 0; ch < cfg.v; ++ch) {
        p.phase.push_back(2.0 * std::numbers::pi * proto_rng.uniform01());
        p.harmonic.push_back(0.3 + 0.7 * proto_rng.uniform01());
      }
    }
  }

  TimeSeriesDataset ds;
  ds.n = cfg.n;
  ds.t = cfg.t;
  ds.v = cfg.v;
  ds.values.resize(std::size_t(cfg.n) * cfg.t * cfg.v);
  ds.labels.resize(cfg.n);
  ds.ids.resize(cfg.n);

  Rng rng(derive_seed(seed, 0x5e41e5));
  for (int i = 0; i < cfg.n; ++i) {
    const int c = i % cfg.classes;
    const ClassProto& p = protos[c];
    const double amp = 1.0 + cfg.amp_jitter * rng.normal();
    const int shift = cfg.max_shift > 0
                          ? static_cast<int>(rng.bounded(2 * cfg.max_shift + 1)) - cfg.max_shift
                          : 0;
    const double noise_scale = cfg.noise * rng.exponential();  // dense core, sparse halo
    for (int tt = 0; tt < cfg.t; ++tt) {
      const double phase_t =
          2.0 * std::numbers::pi * p.freq * static_cast<double>(tt + shift) / cfg.t;
      for (int ch = 0; ch < cfg.v; ++ch) {
        const double clean = amp * (std::sin(phase_t + p.phase[ch]) +
                                    p.harmonic[ch] * std::sin(2.0 * phase_t + 0.5 * p.phase[ch]));
        ds.values[(std::size_t(i) * cfg.t + tt) * cfg.v + ch] =
            static_cast<float>(clean + noise_scale * rng.normal());
      }
    }
    ds.labels[i] = c;
    ds.ids[i] = i;
  }
  return ds;
}

namespace {

std::vector<std::vector<int>> even_groups(int classes, int depth) {
  // depth 1: every class its own group; depth >= 2: split classes into
  // ceil(classes/2) super-groups of two
  std::vector<std::vector<int>> groups;
  if (depth <= 1) {
    for (int c = 0; c < classes; ++c) groups.push_back({c});
  } else {
    for (int c = 0; c < classes; c += 2) {
      std::vector<int> g{c};
      if (c + 1 < classes) g.push_back(c + 1);
      groups.push_back(std::move(g));
    }
  }
  return groups;
}

}  // namespace

TimeSeriesDataset demo_blob_series(int n, int classes, int depth, int t, int v,
                                   std::uint64_t seed) {
  BlobSeriesConfig cfg;
  cfg.n = n;
  cfg.classes = classes;
  cfg.groups = even_groups(classes, depth);
  cfg.t = t;
  cfg.v = v;
  return make_blob_series(cfg, seed);
}

LabeledPoints demo_blob_features(int n, int classes, int depth, int dim, std::uint64_t seed) {
  FeatureBlobConfig cfg;
  cfg.dim = dim;
  cfg.sizes.assign(classes, n / classes);
  for (int c = 0; c < n % classes; ++c) ++cfg.sizes[c];
  cfg.sigmas.assign(classes, 2.0);
  cfg.groups = even_groups(classes, depth);
  return make_feature_blobs(cfg, seed);
}

TimeSeriesDataset features_as_dataset(const LabeledPoints& pts) {
  TimeSeriesDataset ds;
  ds.n = pts.points.rows;
  ds.t = 1;
  ds.v = pts.points.cols;
  ds.values = pts.points.data;
  ds.labels = pts.labels;
  ds.ids.resize(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) ds.ids[i] = static_cast<std::int32_t>(i);
  return ds;
}

MatF dataset_as_features(const TimeSeriesDataset& ds) {
  MatF out(ds.n, ds.t * ds.v);
  out.data = ds.values;
  return out;
}

}  // namespace mhccl
