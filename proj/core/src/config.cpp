#include "mhccl/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mhccl {

namespace {

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + ": expected integer, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return static_cast<std::uint64_t>(x);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + ": expected integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config key " + key + ": expected number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw std::invalid_argument("config key " + key + ": expected boolean, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(to_int(key, tok));
  if (out.empty()) throw std::invalid_argument("config key " + key + ": empty list");
  return out;
}

std::string join(const std::vector<int>& v) {
  std::ostringstream out;
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
  return out.str();
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw std::invalid_argument("config key " + key + ": " + what);
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  TrainConfig& t = train;
  if (key == "train.epochs") {
    t.epochs = to_int(key, value);
    require(t.epochs >= 0, key, "must be >= 0");
  } else if (key == "train.batch_size") {
    t.batch_size = to_int(key, value);
    require(t.batch_size >= 2, key, "must be >= 2");
  } else if (key == "train.lr") {
    t.lr = to_double(key, value);
    require(t.lr > 0, key, "must be > 0");
  } else if (key == "train.sgd_momentum") {
    t.sgd_momentum = to_double(key, value);
    require(t.sgd_momentum >= 0 && t.sgd_momentum < 1, key, "must lie in [0, 1)");
  } else if (key == "train.weight_decay") {
    t.weight_decay = to_double(key, value);
    require(t.weight_decay >= 0, key, "must be >= 0");
  } else if (key == "train.ema") {
    t.ema = to_double(key, value);
    require(t.ema >= 0 && t.ema < 1, key, "must lie in [0, 1)");
  } else if (key == "train.recluster_every") {
    t.recluster_every = to_int(key, value);
    require(t.recluster_every >= 1, key, "must be >= 1");
  } else if (key == "train.checkpoint_every") {
    t.checkpoint_every = to_int(key, value);
    require(t.checkpoint_every >= 1, key, "must be >= 1");
  } else if (key == "train.shuffle") {
    t.shuffle = to_bool(key, value);
  } else if (key == "train.seed") {
    t.seed = to_u64(key, value);
  } else if (key == "train.threads") {
    t.threads = to_int(key, value);
    require(t.threads >= 1, key, "must be >= 1");
  } else if (key == "loss.tau") {
    t.loss.tau = to_double(key, value);
    require(t.loss.tau > 0, key, "must be > 0");
  } else if (key == "loss.s_pos") {
    t.loss.s_pos = to_int(key, value);
    require(t.loss.s_pos >= 1, key, "must be >= 1");
  } else if (key == "loss.s_neg") {
    t.loss.s_neg = to_int(key, value);
    require(t.loss.s_neg >= 1, key, "must be >= 1");
  } else if (key == "loss.h_pos") {
    t.loss.h_pos = to_int(key, value);
    require(t.loss.h_pos >= 1, key, "must be >= 1");
  } else if (key == "loss.h_neg") {
    t.loss.h_neg = to_int(key, value);
    require(t.loss.h_neg >= 1, key, "must be >= 1");
  } else if (key == "loss.m_used") {
    t.loss.m_used = to_int(key, value);
    require(t.loss.m_used >= 1, key, "must be >= 1");
  } else if (key == "loss.use_instance") {
    t.use_instance = to_bool(key, value);
  } else if (key == "loss.use_cluster") {
    t.use_cluster = to_bool(key, value);
  } else if (key == "mask.strategy") {
    t.mask.strategy = MaskConfig::parse_strategy(value);
  } else if (key == "mask.parameter") {
    t.mask.parameter = to_double(key, value);
    require(t.mask.parameter >= 0, key, "must be >= 0");
  } else if (key == "mask.apply_at") {
    t.mask.apply_at = to_int_list(key, value);
    for (int p : t.mask.apply_at) require(p >= 1, key, "partition indices are 1-based");
  } else if (key == "aug.weak_noise_sigma") {
    t.aug.weak_noise_sigma = static_cast<float>(to_double(key, value));
    require(t.aug.weak_noise_sigma >= 0, key, "must be >= 0");
  } else if (key == "aug.weak_scale_sigma") {
    t.aug.weak_scale_sigma = static_cast<float>(to_double(key, value));
    require(t.aug.weak_scale_sigma >= 0, key, "must be >= 0");
  } else if (key == "aug.strong_max_segments") {
    t.aug.strong_max_segments = to_int(key, value);
    require(t.aug.strong_max_segments >= 1, key, "must be >= 1");
  } else if (key == "aug.strong_noise_sigma") {
    t.aug.strong_noise_sigma = static_cast<float>(to_double(key, value));
    require(t.aug.strong_noise_sigma >= 0, key, "must be >= 0");
  } else if (key == "arch.channels") {
    t.arch_channels = to_int_list(key, value);
  } else if (key == "arch.kernels") {
    t.arch_kernels = to_int_list(key, value);
  } else if (key == "arch.embed_dim") {
    t.embed_dim = to_int(key, value);
    require(t.embed_dim >= 1, key, "must be >= 1");
  } else if (key == "cluster.scope") {
    if (value == "full") t.cluster_scope = TrainConfig::ClusterScope::full;
    else if (value == "batch") t.cluster_scope = TrainConfig::ClusterScope::batch;
    else throw std::invalid_argument("config key cluster.scope: expected full|batch");
  } else if (key == "cluster.flat_k") {
    t.flat_kmeans_k = to_int(key, value);
    require(t.flat_kmeans_k >= 0, key, "must be >= 0");
  } else if (key == "cluster.kmeans_iters") {
    t.kmeans_iters = to_int(key, value);
    require(t.kmeans_iters >= 1, key, "must be >= 1");
  } else if (key == "cluster.downward") {
    t.downward_masking = to_bool(key, value);
  } else if (key == "split.train_frac") {
    split_train_frac = to_double(key, value);
    require(split_train_frac > 0 && split_train_frac < 1, key, "must lie in (0, 1)");
  } else if (key == "split.val_frac") {
    split_val_frac = to_double(key, value);
    require(split_val_frac > 0 && split_val_frac < 1, key, "must lie in (0, 1)");
  } else if (key == "probe.epochs") {
    probe_epochs = to_int(key, value);
    require(probe_epochs >= 1, key, "must be >= 1");
  } else if (key == "probe.lr") {
    probe_lr = to_double(key, value);
    require(probe_lr >= 0, key, "must be >= 0");
  } else if (key == "audit.kmeans_k") {
    audit_kmeans_k = to_int(key, value);
    require(audit_kmeans_k >= 0, key, "must be >= 0");
  } else {
    throw std::invalid_argument("unknown config key: " + key);
  }
}

void RunConfig::apply_line(const std::string& raw) {
  std::string line = raw;
  const auto hash = line.find('#');
  if (hash != std::string::npos) line.erase(hash);
  // trim
  const auto l = line.find_first_not_of(" \t\r\n");
  if (l == std::string::npos) return;
  const auto r = line.find_last_not_of(" \t\r\n");
  line = line.substr(l, r - l + 1);
  if (line.empty()) return;

  const auto eq = line.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("config line is not key=value: '" + line + "'");
  std::string key = line.substr(0, eq);
  std::string value = line.substr(eq + 1);
  const auto kr = key.find_last_not_of(" \t");
  key = key.substr(0, kr + 1);
  const auto vl = value.find_first_not_of(" \t");
  value = vl == std::string::npos ? "" : value.substr(vl);
  apply(key, value);
}

RunConfig RunConfig::from_file(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    while (std::getline(in, line)) cfg.apply_line(line);
  }
  for (const std::string& o : overrides) cfg.apply_line(o);
  cfg.train.validate();
  return cfg;
}

RunConfig RunConfig::from_overrides(const std::vector<std::string>& overrides) {
  return from_file("", overrides);
}

std::string RunConfig::canonical_text() const {
  const TrainConfig& t = train;
  std::map<std::string, std::string> kv;
  auto num = [](double x) {
    std::ostringstream s;
    s << x;
    return s.str();
  };
  kv["train.epochs"] = std::to_string(t.epochs);
  kv["train.batch_size"] = std::to_string(t.batch_size);
  kv["train.lr"] = num(t.lr);
  kv["train.sgd_momentum"] = num(t.sgd_momentum);
  kv["train.weight_decay"] = num(t.weight_decay);
  kv["train.ema"] = num(t.ema);
  kv["train.recluster_every"] = std::to_string(t.recluster_every);
  kv["train.checkpoint_every"] = std::to_string(t.checkpoint_every);
  kv["train.shuffle"] = t.shuffle ? "true" : "false";
  kv["train.seed"] = std::to_string(t.seed);
  kv["train.threads"] = std::to_string(t.threads);
  kv["loss.tau"] = num(t.loss.tau);
  kv["loss.s_pos"] = std::to_string(t.loss.s_pos);
  kv["loss.s_neg"] = std::to_string(t.loss.s_neg);
  kv["loss.h_pos"] = std::to_string(t.loss.h_pos);
  kv["loss.h_neg"] = std::to_string(t.loss.h_neg);
  kv["loss.m_used"] = std::to_string(t.loss.m_used);
  kv["loss.use_instance"] = t.use_instance ? "true" : "false";
  kv["loss.use_cluster"] = t.use_cluster ? "true" : "false";
  kv["mask.strategy"] = MaskConfig::strategy_name(t.mask.strategy);
  kv["mask.parameter"] = num(t.mask.parameter);
  kv["mask.apply_at"] = join(t.mask.apply_at);
  kv["aug.weak_noise_sigma"] = num(t.aug.weak_noise_sigma);
  kv["aug.weak_scale_sigma"] = num(t.aug.weak_scale_sigma);
  kv["aug.strong_max_segments"] = std::to_string(t.aug.strong_max_segments);
  kv["aug.strong_noise_sigma"] = num(t.aug.strong_noise_sigma);
  kv["arch.channels"] = join(t.arch_channels);
  kv["arch.kernels"] = join(t.arch_kernels);
  kv["arch.embed_dim"] = std::to_string(t.embed_dim);
  kv["cluster.scope"] =
      t.cluster_scope == TrainConfig::ClusterScope::full ? "full" : "batch";
  kv["cluster.flat_k"] = std::to_string(t.flat_kmeans_k);
  kv["cluster.kmeans_iters"] = std::to_string(t.kmeans_iters);
  kv["cluster.downward"] = t.downward_masking ? "true" : "false";
  kv["split.train_frac"] = num(split_train_frac);
  kv["split.val_frac"] = num(split_val_frac);
  kv["probe.epochs"] = std::to_string(probe_epochs);
  kv["probe.lr"] = num(probe_lr);
  kv["audit.kmeans_k"] = std::to_string(audit_kmeans_k);

  std::ostringstream out;
  for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
  return out.str();
}

}  // namespace mhccl
