#include "mhccl/train.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mhccl/rng.hpp"

namespace mhccl {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (batch_size < 2) throw std::invalid_argument("train: batch size must be >= 2");
  if (lr <= 0.0) throw std::invalid_argument("train: lr must be > 0");
  if (ema < 0.0 || ema >= 1.0) throw std::invalid_argument("train: ema must lie in [0, 1)");
  if (recluster_every < 1) throw std::invalid_argument("train: recluster_every must be >= 1");
  if (checkpoint_every < 1) throw std::invalid_argument("train: checkpoint_every must be >= 1");
  if (threads < 1) throw std::invalid_argument("train: threads must be >= 1");
  if (flat_kmeans_k < 0) throw std::invalid_argument("train: flat_kmeans_k must be >= 0");
  loss.validate();
  mask.validate();
}

EncoderArch TrainConfig::arch_for(const TimeSeriesDataset& ds) const {
  EncoderArch arch;
  arch.input_channels = static_cast<int>(ds.v);
  arch.input_length = static_cast<int>(ds.t);
  arch.channels = arch_channels;
  arch.kernels = arch_kernels;
  arch.embed_dim = embed_dim;
  arch.validate();
  return arch;
}

std::string StepLog::to_json() const {
  std::ostringstream out;
  out << "{\"step\":" << step << ",\"epoch\":" << epoch << ",\"total\":" << total
      << ",\"instance_part\":" << instance_part << ",\"cluster_part\":" << cluster_part
      << ",\"grad_norm\":" << grad_norm << "}";
  return out.str();
}

MatF embed_with(const EncoderParams& params, const TimeSeriesDataset& ds, int threads) {
  const std::size_t chunk = 256;
  MatF out(ds.n, params.arch.embed_dim);
  for (std::size_t start = 0; start < ds.n; start += chunk) {
    const std::size_t b = std::min(chunk, ds.n - start);
    MatF batch(b, ds.t * ds.v);
    for (std::size_t r = 0; r < b; ++r) {
      auto src = ds.instance(start + r);
      std::copy(src.begin(), src.end(), batch.row(r).begin());
    }
    MatF emb = forward(params, batch, static_cast<ForwardCacheT<float>*>(nullptr), threads);
    for (std::size_t r = 0; r < b; ++r)
      std::copy(emb.row(r).begin(), emb.row(r).end(), out.row(start + r).begin());
  }
  l2_normalize_rows(out);
  return out;
}

MatF embed_all(const EncoderParams& key_params, const TimeSeriesDataset& ds, int threads) {
  return embed_with(key_params, ds, threads);
}

namespace {

ClusterHierarchy build_clustering(const MatF& features, const TrainConfig& cfg,
                                  std::uint64_t seed) {
  if (cfg.flat_kmeans_k > 0) {
    std::vector<int> labels = kmeans(features, cfg.flat_kmeans_k, cfg.kmeans_iters, seed);
    return single_partition_hierarchy(features, labels);
  }
  return build_hierarchy(features, cfg.mask);
}

MatF normalized_rows_of(const EncoderParams& params, const MatF& raw, int threads) {
  MatF emb = forward(params, raw, static_cast<ForwardCacheT<float>*>(nullptr), threads);
  l2_normalize_rows(emb);
  return emb;
}

}  // namespace

void train_epoch(TrainState& state, const TimeSeriesDataset& train_set, const TrainConfig& cfg,
                 std::vector<StepLog>* log) {
  cfg.validate();
  const int epoch = state.epoch;

  const bool full_scope = cfg.cluster_scope == TrainConfig::ClusterScope::full;
  if (full_scope && epoch % cfg.recluster_every == 0) {
    const MatF features = embed_all(state.key, train_set, cfg.threads);
    state.hierarchy = build_clustering(features, cfg, derive_seed(cfg.seed, 0x4a3a15, epoch));
  }

  std::vector<Batch> batches = minibatches(train_set, cfg.batch_size, cfg.shuffle, cfg.seed,
                                           static_cast<std::uint64_t>(epoch), cfg.aug);
  for (std::size_t bi = 0; bi < batches.size(); ++bi) {
    const Batch& batch = batches[bi];
    const std::size_t b = batch.indices.size();

    ForwardCacheT<float> cache;
    MatF z_a = forward(state.query, batch.view_a, &cache, cfg.threads);
    MatF h_b =
        forward(state.key, batch.view_b, static_cast<ForwardCacheT<float>*>(nullptr), cfg.threads);

    // batch-scope clustering works over the batch's raw momentum embeddings
    const ClusterHierarchy* hier = &state.hierarchy;
    ClusterHierarchy local;
    if (!full_scope) {
      MatF feats = normalized_rows_of(state.key, batch.raw, cfg.threads);
      local = build_clustering(feats, cfg, derive_seed(cfg.seed, 0x4a3a15, epoch, bi));
      hier = &local;
    }

    std::vector<int> bottom(b);
    const std::vector<int>& inst = hier->partitions.front().instance_labels;
    for (std::size_t r = 0; r < b; ++r)
      bottom[r] = full_scope ? inst[batch.indices[r]] : inst[r];

    std::vector<InstancePairSet> ins_sets;
    if (cfg.use_instance)
      ins_sets = instance_pairs(bottom, cfg.loss.s_pos, cfg.loss.s_neg,
                                derive_seed(cfg.seed, 0x15a17, epoch, bi));

    std::vector<ClusterPairSet> clu_sets;
    if (cfg.use_cluster) {
      clu_sets.reserve(b);
      const std::uint64_t cp_seed = derive_seed(cfg.seed, 0xc7a17, epoch, bi);
      for (std::size_t r = 0; r < b; ++r) {
        const int anchor = full_scope ? batch.indices[r] : static_cast<int>(r);
        clu_sets.push_back(cluster_pairs(*hier, anchor, cfg.loss.h_pos, cfg.loss.h_neg,
                                         cfg.loss.m_used, cp_seed, cfg.downward_masking));
      }
    }

    LossBreakdown breakdown = overall_loss(z_a, h_b, ins_sets, clu_sets, *hier, cfg.loss);
    if (!std::isfinite(breakdown.total))
      throw std::runtime_error("train: non-finite loss at step " + std::to_string(state.step));

    double gnorm_sq = 0.0;
    for (double g : breakdown.grad.data) gnorm_sq += g * g;

    MatF grad_f = breakdown.grad.cast<float>();
    EncoderGradsT<float> grads = backward(state.query, cache, grad_f);
    sgd_step(state.query, state.velocity, grads, cfg.lr, cfg.sgd_momentum, cfg.weight_decay);
    momentum_update(state.key, state.query, cfg.ema);

    state.loss_history.push_back(breakdown.total);
    if (log) {
      StepLog entry;
      entry.step = state.step;
      entry.epoch = epoch;
      entry.total = breakdown.total;
      entry.instance_part = breakdown.instance_part;
      entry.cluster_part = breakdown.cluster_part;
      entry.grad_norm = std::sqrt(gnorm_sq);
      log->push_back(entry);
    }
    ++state.step;
  }
  ++state.epoch;
}

namespace {

constexpr char kCkptMagic[4] = {'M', 'H', 'C', 'K'};
constexpr std::uint32_t kCkptVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

void write_blob(std::ostream& out, const std::vector<std::vector<float>>& tensors) {
  for (const auto& t : tensors)
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(float)));
}

void read_blob(std::istream& in, std::vector<std::vector<float>>& tensors) {
  for (auto& t : tensors)
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);

  std::ostringstream text;
  text << state.query.arch.canonical_text();
  text << "state.epoch=" << state.epoch << "\n";
  text << "state.step=" << state.step << "\n";
  const std::string header = text.str();

  out.write(kCkptMagic, 4);
  write_u32(out, kCkptVersion);
  write_u32(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  write_blob(out, state.query.tensors);
  if (state.velocity.velocity.empty()) {
    // un-stepped optimizer: zero velocities keep the layout fixed
    for (const auto& t : state.query.tensors) {
      std::vector<float> zeros(t.size(), 0.0f);
      out.write(reinterpret_cast<const char*>(zeros.data()),
                static_cast<std::streamsize>(zeros.size() * sizeof(float)));
    }
  } else {
    write_blob(out, state.velocity.velocity);
  }
  write_blob(out, state.key.tensors);
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCkptMagic, 4) != 0)
    throw std::runtime_error("bad checkpoint magic in " + path);
  const std::uint32_t version = read_u32(in);
  if (version != kCkptVersion)
    throw std::runtime_error("unsupported checkpoint version in " + path);
  const std::uint32_t text_len = read_u32(in);
  std::string header(text_len, '\0');
  in.read(header.data(), text_len);
  if (!in) throw std::runtime_error("truncated checkpoint header in " + path);

  TrainState state;
  const EncoderArch arch = EncoderArch::from_text(header);
  std::istringstream hs(header);
  std::string line;
  while (std::getline(hs, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    if (key == "state.epoch") state.epoch = std::stoi(line.substr(eq + 1));
    else if (key == "state.step") state.step = std::stoll(line.substr(eq + 1));
  }

  state.query = init_encoder<float>(arch, 0);  // shapes only; contents overwritten
  state.key = init_encoder<float>(arch, 0);
  state.velocity.velocity.clear();
  for (const auto& t : state.query.tensors) state.velocity.velocity.emplace_back(t.size(), 0.0f);

  read_blob(in, state.query.tensors);
  read_blob(in, state.velocity.velocity);
  read_blob(in, state.key.tensors);
  if (!in) throw std::runtime_error("truncated checkpoint blobs in " + path);
  state.query.version = 1;
  state.key.version = 1;
  return state;
}

PretrainResult pretrain(const TrainConfig& cfg, const TimeSeriesDataset& data,
                        const std::string& out_dir, const std::string& resume_path) {
  cfg.validate();
  const TimeSeriesDataset train_set = data.without_labels();  // labels never reach training

  PretrainResult result;
  TrainState& state = result.state;
  if (!resume_path.empty()) {
    state = load_checkpoint(resume_path);
    if (!(state.query.arch == cfg.arch_for(train_set)))
      throw std::runtime_error("resume: checkpoint architecture does not match config/data");
  } else {
    const EncoderArch arch = cfg.arch_for(train_set);
    state.query = init_encoder<float>(arch, cfg.seed);
    state.key = state.query;
  }

  namespace fs = std::filesystem;
  std::ofstream log_stream;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    log_stream.open(fs::path(out_dir) / "train_log.jsonl",
                    resume_path.empty() ? std::ios::trunc : std::ios::app);
  }

  auto checkpoint_name = [&](int epoch) {
    std::ostringstream name;
    name << "checkpoint_epoch_" << epoch << ".mhck";
    return (fs::path(out_dir) / name.str()).string();
  };

  while (state.epoch < cfg.epochs) {
    std::vector<StepLog> epoch_log;
    try {
      train_epoch(state, train_set, cfg, &epoch_log);
    } catch (const std::exception&) {
      if (!out_dir.empty())
        save_checkpoint((fs::path(out_dir) / "checkpoint_abort.mhck").string(), state);
      throw;
    }
    for (const StepLog& entry : epoch_log) {
      if (log_stream.is_open()) log_stream << entry.to_json() << "\n";
      result.log.push_back(entry);
    }
    // periodic checkpoints only at reclustering boundaries, so a resumed run
    // rebuilds the same hierarchy the uninterrupted run would use next
    if (!out_dir.empty() && state.epoch % cfg.checkpoint_every == 0 &&
        state.epoch % cfg.recluster_every == 0 && state.epoch < cfg.epochs) {
      save_checkpoint(checkpoint_name(state.epoch), state);
    }
  }
  if (!out_dir.empty()) {
    save_checkpoint((fs::path(out_dir) / "checkpoint_final.mhck").string(), state);
    if (log_stream.is_open()) log_stream.flush();
  }
  return result;
}

std::vector<PairDecision> emit_pair_decisions(const ClusterHierarchy& hierarchy,
                                              const std::vector<std::vector<int>>& batches,
                                              const LossConfig& cfg, std::uint64_t seed,
                                              bool downward) {
  std::vector<PairDecision> out;
  const std::vector<int>& bottom_inst = hierarchy.partitions.front().instance_labels;
  for (std::size_t bi = 0; bi < batches.size(); ++bi) {
    const std::vector<int>& idx = batches[bi];
    std::vector<int> bottom(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) bottom[r] = bottom_inst[idx[r]];

    const std::vector<InstancePairSet> ins =
        instance_pairs(bottom, cfg.s_pos, cfg.s_neg, derive_seed(seed, 0x15a17, bi));
    for (const InstancePairSet& ps : ins) {
      if (ps.degenerate) continue;
      const int anchor = idx[ps.anchor_pos];
      for (const ViewRef& ref : ps.positives)
        out.push_back({PairDecision::Level::instance, anchor, true, idx[ref.batch_pos], -1});
      for (const ViewRef& ref : ps.negatives)
        out.push_back({PairDecision::Level::instance, anchor, false, idx[ref.batch_pos], -1});
    }

    const std::uint64_t cp_seed = derive_seed(seed, 0xc7a17, bi);
    for (int anchor : idx) {
      const ClusterPairSet set =
          cluster_pairs(hierarchy, anchor, cfg.h_pos, cfg.h_neg, cfg.m_used, cp_seed, downward);
      for (const PartitionPairs& pp : set.partitions) {
        for (const ProtoRef& ref : pp.positives)
          out.push_back(
              {PairDecision::Level::cluster, anchor, true, ref.cluster, ref.partition});
        for (const ProtoRef& ref : pp.negatives)
          out.push_back(
              {PairDecision::Level::cluster, anchor, false, ref.cluster, ref.partition});
      }
    }
  }
  return out;
}

}  // namespace mhccl
