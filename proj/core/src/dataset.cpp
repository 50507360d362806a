#include "mhccl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mhccl {

namespace {

constexpr char kMagic[4] = {'M', 'H', 'C', '1'};

void check_finite(const TimeSeriesDataset& ds) {
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (float x : ds.instance(i)) {
      if (!std::isfinite(x)) {
        throw std::runtime_error("dataset contains non-finite value at instance " +
                                 std::to_string(i));
      }
    }
  }
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}

TimeSeriesDataset load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("malformed header (bad magic) in " + path);

  TimeSeriesDataset ds;
  ds.n = read_u32(in);
  ds.t = read_u32(in);
  ds.v = read_u32(in);
  char label_flag = 0;
  in.read(&label_flag, 1);
  if (!in) throw std::runtime_error("malformed header (truncated) in " + path);
  if (ds.n == 0 || ds.t == 0 || ds.v == 0)
    throw std::runtime_error("malformed header (zero dimension) in " + path);

  ds.values.resize(ds.n * ds.t * ds.v);
  in.read(reinterpret_cast<char*>(ds.values.data()),
          static_cast<std::streamsize>(ds.values.size() * sizeof(float)));
  if (!in) throw std::runtime_error("truncated value block in " + path);

  if (label_flag == 1) {
    ds.labels.resize(ds.n);
    in.read(reinterpret_cast<char*>(ds.labels.data()),
            static_cast<std::streamsize>(ds.n * sizeof(std::int32_t)));
    if (!in) throw std::runtime_error("truncated label block in " + path);
  } else if (label_flag != 0) {
    throw std::runtime_error("malformed label flag in " + path);
  }

  ds.ids.resize(ds.n);
  std::iota(ds.ids.begin(), ds.ids.end(), 0);
  return ds;
}

TimeSeriesDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  struct Row {
    std::int64_t t;
    std::vector<float> vals;
    std::optional<std::int32_t> label;
  };
  std::map<std::int32_t, std::vector<Row>> per_id;

  std::string line;
  std::size_t lineno = 0;
  std::size_t n_vars = 0;
  bool has_labels = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("id", 0) == 0) continue;  // optional header row

    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 3)
      throw std::runtime_error("csv row " + std::to_string(lineno) + ": too few columns");

    std::int32_t id;
    Row row;
    try {
      id = static_cast<std::int32_t>(std::stol(cells[0]));
      row.t = std::stol(cells[1]);
    } catch (const std::exception&) {
      throw std::runtime_error("csv row " + std::to_string(lineno) + ": bad id/t field");
    }

    // Column layout is id, t, v1..vV, then optionally a label. The variable
    // count is fixed by the first data row.
    std::size_t vcount = cells.size() - 2;
    if (n_vars == 0) {
      n_vars = vcount;
    } else if (vcount == n_vars + 1) {
      has_labels = true;
      vcount = n_vars;
    } else if (vcount != n_vars && vcount != n_vars + (has_labels ? 1 : 0)) {
      throw std::runtime_error("csv row " + std::to_string(lineno) + ": ragged column count");
    }
    if (has_labels) {
      if (cells.size() != 2 + n_vars + 1)
        throw std::runtime_error("csv row " + std::to_string(lineno) + ": missing label column");
      row.label = static_cast<std::int32_t>(std::stol(cells.back()));
      vcount = n_vars;
    }

    for (std::size_t j = 0; j < vcount; ++j) {
      float x;
      try {
        x = std::stof(cells[2 + j]);
      } catch (const std::exception&) {
        throw std::runtime_error("csv row " + std::to_string(lineno) + ": bad value field");
      }
      row.vals.push_back(x);
    }
    per_id[id].push_back(std::move(row));
  }
  if (per_id.empty()) throw std::runtime_error("empty csv dataset: " + path);

  // Infer T from the first instance, require every instance to cover 0..T-1.
  std::size_t T = per_id.begin()->second.size();
  TimeSeriesDataset ds;
  ds.n = per_id.size();
  ds.t = T;
  ds.v = n_vars;
  ds.values.assign(ds.n * ds.t * ds.v, 0.0f);
  if (has_labels) ds.labels.resize(ds.n);

  std::size_t i = 0;
  for (auto& [id, rows] : per_id) {
    if (rows.size() != T)
      throw std::runtime_error("csv instance id " + std::to_string(id) + ": expected " +
                               std::to_string(T) + " timesteps, got " +
                               std::to_string(rows.size()));
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
    std::optional<std::int32_t> label;
    for (std::size_t tt = 0; tt < T; ++tt) {
      if (rows[tt].t != static_cast<std::int64_t>(tt))
        throw std::runtime_error("csv instance id " + std::to_string(id) +
                                 ": missing or duplicate timestep " + std::to_string(tt));
      if (rows[tt].label) {
        if (label && *label != *rows[tt].label)
          throw std::runtime_error("csv instance id " + std::to_string(id) +
                                   ": inconsistent label");
        label = rows[tt].label;
      }
      for (std::size_t j = 0; j < n_vars; ++j)
        ds.values[(i * T + tt) * n_vars + j] = rows[tt].vals[j];
    }
    if (has_labels) {
      if (!label)
        throw std::runtime_error("csv instance id " + std::to_string(id) + ": missing label");
      ds.labels[i] = *label;
    }
    ds.ids.push_back(id);
    ++i;
  }
  return ds;
}

}  // namespace

int TimeSeriesDataset::num_classes() const {
  if (labels.empty()) return 0;
  std::int32_t mx = 0;
  for (std::int32_t l : labels) {
    if (l < 0) throw std::runtime_error("negative class label");
    mx = std::max(mx, l);
  }
  return static_cast<int>(mx) + 1;
}

TimeSeriesDataset TimeSeriesDataset::without_labels() const {
  TimeSeriesDataset out = *this;
  out.labels.clear();
  return out;
}

ChannelStats compute_channel_stats(const TimeSeriesDataset& ds) {
  ChannelStats st;
  st.mean.assign(ds.v, 0.0f);
  st.stdev.assign(ds.v, 1.0f);
  const double count = static_cast<double>(ds.n * ds.t);
  for (std::size_t j = 0; j < ds.v; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < ds.n; ++i)
      for (std::size_t tt = 0; tt < ds.t; ++tt) sum += ds.at(i, tt, j);
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t i = 0; i < ds.n; ++i)
      for (std::size_t tt = 0; tt < ds.t; ++tt) {
        const double d = ds.at(i, tt, j) - mean;
        sq += d * d;
      }
    double sd = std::sqrt(sq / count);
    if (sd < 1e-8) sd = 1.0;  // constant channel: avoid division blowup
    st.mean[j] = static_cast<float>(mean);
    st.stdev[j] = static_cast<float>(sd);
  }
  return st;
}

void apply_channel_stats(TimeSeriesDataset& ds, const ChannelStats& stats) {
  if (stats.mean.size() != ds.v) throw std::runtime_error("channel stats dimension mismatch");
  for (std::size_t i = 0; i < ds.n; ++i)
    for (std::size_t tt = 0; tt < ds.t; ++tt)
      for (std::size_t j = 0; j < ds.v; ++j) {
        float& x = ds.values[(i * ds.t + tt) * ds.v + j];
        x = (x - stats.mean[j]) / stats.stdev[j];
      }
  ds.norm = stats;
}

TimeSeriesDataset load_dataset(const std::string& path, DataFormat format, bool normalize) {
  TimeSeriesDataset ds = format == DataFormat::binary ? load_binary(path) : load_csv(path);
  check_finite(ds);
  if (ds.has_labels()) ds.num_classes();  // validates label range
  if (normalize) apply_channel_stats(ds, compute_channel_stats(ds));
  return ds;
}

void save_dataset(const std::string& path, const TimeSeriesDataset& ds, DataFormat format) {
  if (format == DataFormat::binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    out.write(kMagic, 4);
    write_u32(out, static_cast<std::uint32_t>(ds.n));
    write_u32(out, static_cast<std::uint32_t>(ds.t));
    write_u32(out, static_cast<std::uint32_t>(ds.v));
    char flag = ds.has_labels() ? 1 : 0;
    out.write(&flag, 1);
    out.write(reinterpret_cast<const char*>(ds.values.data()),
              static_cast<std::streamsize>(ds.values.size() * sizeof(float)));
    if (ds.has_labels())
      out.write(reinterpret_cast<const char*>(ds.labels.data()),
                static_cast<std::streamsize>(ds.n * sizeof(std::int32_t)));
    if (!out) throw std::runtime_error("write failed: " + path);
  } else {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    out << "id,t";
    for (std::size_t j = 0; j < ds.v; ++j) out << ",v" << (j + 1);
    if (ds.has_labels()) out << ",label";
    out << "\n";
    for (std::size_t i = 0; i < ds.n; ++i)
      for (std::size_t tt = 0; tt < ds.t; ++tt) {
        out << (ds.ids.empty() ? static_cast<std::int32_t>(i) : ds.ids[i]) << "," << tt;
        for (std::size_t j = 0; j < ds.v; ++j) out << "," << ds.at(i, tt, j);
        if (ds.has_labels()) out << "," << ds.labels[i];
        out << "\n";
      }
  }
}

namespace {

TimeSeriesDataset take(const TimeSeriesDataset& ds, std::span<const std::size_t> idx) {
  TimeSeriesDataset out;
  out.t = ds.t;
  out.v = ds.v;
  out.n = idx.size();
  out.norm = ds.norm;
  out.values.reserve(out.n * ds.t * ds.v);
  for (std::size_t i : idx) {
    auto row = ds.instance(i);
    out.values.insert(out.values.end(), row.begin(), row.end());
    if (ds.has_labels()) out.labels.push_back(ds.labels[i]);
    out.ids.push_back(ds.ids.empty() ? static_cast<std::int32_t>(i) : ds.ids[i]);
  }
  return out;
}

}  // namespace

SplitResult split(const TimeSeriesDataset& ds, double train_frac, double val_frac,
                  std::uint64_t seed) {
  if (train_frac <= 0.0 || train_frac >= 1.0 || val_frac <= 0.0 || val_frac >= 1.0)
    throw std::invalid_argument("split fractions must lie in (0, 1)");

  const std::size_t n = ds.n;
  const std::size_t n_trainval =
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_frac));
  const std::size_t n_val =
      static_cast<std::size_t>(std::llround(static_cast<double>(n_trainval) * val_frac));
  const std::size_t n_train = n_trainval - n_val;
  const std::size_t n_test = n - n_trainval;
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw std::invalid_argument("dataset too small for requested split (n=" + std::to_string(n) +
                                ")");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, 0x5917));
  rng.shuffle(perm);

  SplitResult out;
  out.train = take(ds, std::span(perm).subspan(0, n_train));
  out.val = take(ds, std::span(perm).subspan(n_train, n_val));
  out.test = take(ds, std::span(perm).subspan(n_trainval, n_test));
  return out;
}

void AugmentParams::validate(std::size_t t) const {
  if (weak_noise_sigma < 0 || weak_scale_sigma < 0 || strong_noise_sigma < 0)
    throw std::invalid_argument("augmentation sigmas must be >= 0");
  if (strong_max_segments < 1 || static_cast<std::size_t>(strong_max_segments) > t)
    throw std::invalid_argument("strong_max_segments must lie in [1, T]");
}

void weak_augment(std::span<const float> x, std::span<float> out, std::size_t t, std::size_t v,
                  const AugmentParams& p, Rng& rng) {
  std::vector<double> scale(v);
  for (std::size_t j = 0; j < v; ++j) scale[j] = rng.normal(1.0, p.weak_scale_sigma);
  for (std::size_t tt = 0; tt < t; ++tt)
    for (std::size_t j = 0; j < v; ++j) {
      const double eps = p.weak_noise_sigma > 0 ? rng.normal(0.0, p.weak_noise_sigma) : 0.0;
      out[tt * v + j] = static_cast<float>(x[tt * v + j] * scale[j] + eps);
    }
}

void strong_augment(std::span<const float> x, std::span<float> out, std::size_t t, std::size_t v,
                    const AugmentParams& p, Rng& rng) {
  const int max_seg = std::min<int>(p.strong_max_segments, static_cast<int>(t));
  const int k = max_seg > 1 ? 1 + static_cast<int>(rng.bounded(max_seg)) : 1;

  // k-1 distinct cut points in [1, t-1], then permute the segments.
  std::vector<std::size_t> cuts;
  if (k > 1) {
    std::vector<int> pts = sample_without_replacement(rng, static_cast<int>(t) - 1, k - 1);
    for (int c : pts) cuts.push_back(static_cast<std::size_t>(c) + 1);
    std::sort(cuts.begin(), cuts.end());
  }
  cuts.insert(cuts.begin(), 0);
  cuts.push_back(t);

  std::vector<int> order(cuts.size() - 1);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  std::size_t w = 0;
  for (int seg : order) {
    for (std::size_t tt = cuts[seg]; tt < cuts[seg + 1]; ++tt, ++w)
      for (std::size_t j = 0; j < v; ++j) out[w * v + j] = x[tt * v + j];
  }
  if (p.strong_noise_sigma > 0) {
    for (std::size_t i = 0; i < t * v; ++i)
      out[i] = static_cast<float>(out[i] + rng.normal(0.0, p.strong_noise_sigma));
  }
}

std::vector<Batch> minibatches(const TimeSeriesDataset& ds, std::size_t batch_size, bool shuffle,
                               std::uint64_t seed, std::uint64_t epoch, const AugmentParams& p) {
  if (batch_size < 2) throw std::invalid_argument("batch size must be >= 2");
  if (batch_size > ds.n)
    throw std::invalid_argument("batch size " + std::to_string(batch_size) +
                                " exceeds dataset size " + std::to_string(ds.n));
  p.validate(ds.t);

  std::vector<std::int32_t> order(ds.n);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    Rng rng(derive_seed(seed, 0xba7c4, epoch));
    rng.shuffle(order);
  }

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < ds.n; start += batch_size) {
    const std::size_t b = std::min(batch_size, ds.n - start);
    Batch batch;
    batch.t = ds.t;
    batch.v = ds.v;
    batch.raw = MatF(b, ds.t * ds.v);
    batch.view_a = MatF(b, ds.t * ds.v);
    batch.view_b = MatF(b, ds.t * ds.v);
    batch.indices.assign(order.begin() + start, order.begin() + start + b);
    for (std::size_t r = 0; r < b; ++r) {
      const std::size_t i = static_cast<std::size_t>(batch.indices[r]);
      auto src = ds.instance(i);
      std::copy(src.begin(), src.end(), batch.raw.row(r).begin());
      Rng rng_a(derive_seed(seed, 0xa06a, epoch, i));
      Rng rng_b(derive_seed(seed, 0xb06b, epoch, i));
      weak_augment(src, batch.view_a.row(r), ds.t, ds.v, p, rng_a);
      strong_augment(src, batch.view_b.row(r), ds.t, ds.v, p, rng_b);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<int> sample_without_replacement(Rng& rng, int n, int k) {
  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<int> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) {
    const std::size_t j = rng.bounded(pool.size() - i);
    out.push_back(pool[j]);
    std::swap(pool[j], pool[pool.size() - 1 - i]);
  }
  return out;
}

}  // namespace mhccl
