// Command-line front end: pretrain, evaluate, cluster, audit-pairs, plus a
// synthetic data generator so every pipeline can run without external data.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mhccl/config.hpp"
#include "mhccl/dataset.hpp"
#include "mhccl/evalmetrics.hpp"
#include "mhccl/hclust.hpp"
#include "mhccl/rng.hpp"
#include "mhccl/synth.hpp"
#include "mhccl/train.hpp"

namespace fs = std::filesystem;
using namespace mhccl;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;  // -1: keep config value
  bool deterministic = false;
  int threads = 0;  // 0: keep config value
};

RunConfig resolve_config(const GlobalOpts& g) {
  RunConfig cfg = RunConfig::from_file(g.config_path, g.overrides);
  if (g.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(g.seed);
  if (g.threads > 0) cfg.train.threads = g.threads;
  if (g.deterministic) cfg.train.threads = 1;
  return cfg;
}

void echo_config(const RunConfig& cfg, const std::string& out_dir) {
  if (out_dir.empty()) return;
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "config.txt");
  out << cfg.canonical_text();
}

DataFormat parse_format(const std::string& name) {
  if (name == "binary") return DataFormat::binary;
  if (name == "csv") return DataFormat::csv;
  throw std::invalid_argument("unknown data format: " + name);
}

std::string metrics_json(const MetricsReport& rep) {
  std::ostringstream out;
  out << "{\"accuracy\":" << rep.accuracy << ",\"macro_f1\":" << rep.macro_f1
      << ",\"kappa\":" << rep.kappa << ",\"classes\":" << rep.confusion.classes
      << ",\"instances\":" << rep.confusion.total() << "}";
  return out.str();
}

void write_confusion_csv(const ConfusionMatrix& cm, const std::string& path) {
  std::ofstream out(path);
  out << "true_class,pred_class,count\n";
  for (int r = 0; r < cm.classes; ++r)
    for (int c = 0; c < cm.classes; ++c) out << r << "," << c << "," << cm.at(r, c) << "\n";
}

int run_pretrain(const GlobalOpts& g, const std::string& data_path, const std::string& format,
                 const std::string& resume) {
  RunConfig cfg = resolve_config(g);
  if (g.out_dir.empty()) throw std::runtime_error("pretrain requires --out");
  echo_config(cfg, g.out_dir);

  TimeSeriesDataset ds = load_dataset(data_path, parse_format(format));
  SplitResult splits = split(ds, cfg.split_train_frac, cfg.split_val_frac, cfg.train.seed);
  if (cfg.train.batch_size > static_cast<int>(splits.train.n))
    cfg.train.batch_size = static_cast<int>(splits.train.n);

  PretrainResult result = pretrain(cfg.train, splits.train, g.out_dir, resume);
  std::cout << "{\"epochs\":" << result.state.epoch << ",\"steps\":" << result.state.step
            << ",\"final_loss\":"
            << (result.log.empty() ? 0.0 : result.log.back().total) << "}" << std::endl;
  return 0;
}

int run_evaluate(const GlobalOpts& g, const std::string& data_path, const std::string& format,
                 const std::string& checkpoint) {
  RunConfig cfg = resolve_config(g);
  if (!fs::exists(checkpoint))
    throw std::runtime_error("checkpoint not found: " + checkpoint);
  TrainState state = load_checkpoint(checkpoint);

  TimeSeriesDataset ds = load_dataset(data_path, parse_format(format));
  if (!ds.has_labels()) throw std::runtime_error("evaluate requires a labeled dataset");
  SplitResult splits = split(ds, cfg.split_train_frac, cfg.split_val_frac, cfg.train.seed);

  const MatF emb_train = embed_with(state.query, splits.train, cfg.train.threads);
  const MatF emb_test = embed_with(state.query, splits.test, cfg.train.threads);
  LinearProbe probe = linear_probe_train(emb_train, splits.train.labels, cfg.probe_epochs,
                                         cfg.probe_lr, cfg.train.seed);
  MetricsReport rep = evaluate(probe, emb_test, splits.test.labels);

  if (!g.out_dir.empty()) {
    echo_config(cfg, g.out_dir);
    write_confusion_csv(rep.confusion, (fs::path(g.out_dir) / "confusion.csv").string());
    std::ofstream mj(fs::path(g.out_dir) / "metrics.json");
    mj << metrics_json(rep) << "\n";
  }
  std::cout << metrics_json(rep) << std::endl;
  return 0;
}

int run_cluster(const GlobalOpts& g, const std::string& data_path, const std::string& format,
                int k_target) {
  RunConfig cfg = resolve_config(g);
  if (g.out_dir.empty()) throw std::runtime_error("cluster requires --out");
  echo_config(cfg, g.out_dir);

  // embedding container: T=1 rows are feature vectors, taken as-is
  TimeSeriesDataset ds = load_dataset(data_path, parse_format(format), /*normalize=*/false);
  const MatF features = dataset_as_features(ds);
  const ClusterHierarchy hierarchy = build_hierarchy(features, cfg.train.mask);

  std::ofstream out(fs::path(g.out_dir) / "clusters.csv");
  out << "partition,instance_id,cluster_id,masked\n";
  auto masked_for_instance = [&](int p, std::size_t i) -> int {
    // an instance is masked at level p when the point carrying it there
    // (itself at level 1, its cluster below otherwise) was masked
    const Partition& part = hierarchy.partitions[p];
    const std::size_t point =
        p == 0 ? i : static_cast<std::size_t>(hierarchy.partitions[p - 1].instance_labels[i]);
    return part.masked[point] ? 1 : 0;
  };
  if (k_target > 0) {
    const Partition forced = required_k(hierarchy, k_target);
    for (std::size_t i = 0; i < ds.n; ++i)
      out << 1 << "," << ds.ids[i] << "," << forced.instance_labels[i] << ",0\n";
  } else {
    for (int p = 0; p < hierarchy.depth(); ++p)
      for (std::size_t i = 0; i < ds.n; ++i)
        out << (p + 1) << "," << ds.ids[i] << "," << hierarchy.partitions[p].instance_labels[i]
            << "," << masked_for_instance(p, i) << "\n";
  }
  std::cout << "{\"partitions\":"
            << (k_target > 0 ? 1 : hierarchy.depth()) << ",\"instances\":" << ds.n << "}"
            << std::endl;
  return 0;
}

void write_pairs_csv(const std::string& path, const std::vector<PairDecision>& decisions,
                     const std::vector<std::vector<int>>& majority) {
  std::ofstream out(path);
  out << "anchor_id,kind,counterpart_id,role,partition,counterpart_majority\n";
  for (const PairDecision& d : decisions) {
    const bool inst = d.level == PairDecision::Level::instance;
    out << d.anchor << "," << (inst ? "instance" : "cluster") << "," << d.counterpart << ","
        << (d.positive ? "pos" : "neg") << "," << (inst ? -1 : d.partition + 1) << ","
        << (inst ? -1 : majority[d.partition][d.counterpart]) << "\n";
  }
}

std::vector<PairDecision> read_pairs_csv(const std::string& path, std::vector<int>& majorities) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pair csv: " + path);
  std::vector<PairDecision> out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw std::runtime_error("bad pair csv row: " + line);
    PairDecision d;
    d.anchor = std::stoi(cells[0]);
    d.level = cells[1] == "instance" ? PairDecision::Level::instance
                                     : PairDecision::Level::cluster;
    d.counterpart = std::stoi(cells[2]);
    d.positive = cells[3] == "pos";
    d.partition = std::stoi(cells[4]) - 1;
    out.push_back(d);
    majorities.push_back(std::stoi(cells[5]));
  }
  return out;
}

AuditReport audit_from_csv(const std::string& pairs_path, const std::string& baseline_path,
                           const std::vector<std::int32_t>& labels) {
  auto count = [&](const std::string& path, std::int64_t& ti, std::int64_t& fi, std::int64_t& tc,
                   std::int64_t& fc) {
    std::vector<int> majorities;
    const std::vector<PairDecision> ds = read_pairs_csv(path, majorities);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const PairDecision& d = ds[i];
      if (d.positive) continue;
      if (d.level == PairDecision::Level::instance) {
        ++ti;
        if (labels[d.anchor] == labels[d.counterpart]) ++fi;
      } else {
        ++tc;
        if (labels[d.anchor] == majorities[i]) ++fc;
      }
    }
  };
  AuditReport rep;
  count(pairs_path, rep.total_instance_negatives, rep.false_instance_negatives,
        rep.total_cluster_negatives, rep.false_cluster_negatives);
  count(baseline_path, rep.baseline_total_instance_negatives,
        rep.baseline_false_instance_negatives, rep.baseline_total_cluster_negatives,
        rep.baseline_false_cluster_negatives);
  auto rate = [](std::int64_t f, std::int64_t t) { return t > 0 ? double(f) / double(t) : 0.0; };
  const double bi = rate(rep.baseline_false_instance_negatives,
                         rep.baseline_total_instance_negatives);
  const double bc = rate(rep.baseline_false_cluster_negatives,
                         rep.baseline_total_cluster_negatives);
  rep.instance_reduction =
      bi > 0 ? 1.0 - rate(rep.false_instance_negatives, rep.total_instance_negatives) / bi
             : std::numeric_limits<double>::quiet_NaN();
  rep.cluster_reduction =
      bc > 0 ? 1.0 - rate(rep.false_cluster_negatives, rep.total_cluster_negatives) / bc
             : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

int run_audit(const GlobalOpts& g, const std::string& data_path, const std::string& format,
              const std::string& checkpoint, const std::string& pairs_csv,
              const std::string& baseline_csv) {
  RunConfig cfg = resolve_config(g);

  TimeSeriesDataset ds = load_dataset(data_path, parse_format(format),
                                      /*normalize=*/false);
  if (!ds.has_labels()) throw std::runtime_error("audit-pairs requires a labeled dataset");

  if (!pairs_csv.empty() || !baseline_csv.empty()) {
    if (pairs_csv.empty() || baseline_csv.empty())
      throw std::runtime_error("audit-pairs: --pairs and --baseline-pairs go together");
    const AuditReport rep = audit_from_csv(pairs_csv, baseline_csv, ds.labels);
    std::cout << rep.to_json() << std::endl;
    if (!g.out_dir.empty()) {
      echo_config(cfg, g.out_dir);
      std::ofstream out(fs::path(g.out_dir) / "audit.json");
      out << rep.to_json() << "\n";
    }
    return 0;
  }

  if (g.out_dir.empty()) throw std::runtime_error("audit-pairs requires --out");
  echo_config(cfg, g.out_dir);

  MatF features;
  if (!checkpoint.empty()) {
    TrainState state = load_checkpoint(checkpoint);
    TimeSeriesDataset norm = ds;
    apply_channel_stats(norm, compute_channel_stats(norm));
    features = embed_all(state.key, norm, cfg.train.threads);
  } else {
    if (ds.t != 1)
      throw std::runtime_error(
          "audit-pairs without --checkpoint expects a feature container (T=1)");
    features = dataset_as_features(ds);
  }

  const ClusterHierarchy hierarchy = build_hierarchy(features, cfg.train.mask);
  const int k = cfg.audit_kmeans_k > 0 ? cfg.audit_kmeans_k : ds.num_classes();
  const std::vector<int> flat =
      kmeans(features, k, cfg.train.kmeans_iters, derive_seed(cfg.train.seed, 0xa0d17));
  const ClusterHierarchy baseline = single_partition_hierarchy(features, flat);

  std::vector<std::vector<int>> batches(1, std::vector<int>(ds.n));
  for (std::size_t i = 0; i < ds.n; ++i) batches[0][i] = static_cast<int>(i);

  const std::vector<PairDecision> decisions =
      emit_pair_decisions(hierarchy, batches, cfg.train.loss, cfg.train.seed, true);
  const std::vector<PairDecision> base_decisions =
      emit_pair_decisions(baseline, batches, cfg.train.loss, cfg.train.seed, false);

  std::vector<std::vector<int>> inst_tables, base_tables;
  for (const Partition& p : hierarchy.partitions) inst_tables.push_back(p.instance_labels);
  for (const Partition& p : baseline.partitions) base_tables.push_back(p.instance_labels);
  const auto maj = majority_labels(inst_tables, ds.labels);
  const auto base_maj = majority_labels(base_tables, ds.labels);

  write_pairs_csv((fs::path(g.out_dir) / "mhccl_pairs.csv").string(), decisions, maj);
  write_pairs_csv((fs::path(g.out_dir) / "baseline_pairs.csv").string(), base_decisions,
                  base_maj);

  const AuditReport rep = false_pair_audit(decisions, ds.labels, maj, base_decisions, base_maj);
  std::ofstream out(fs::path(g.out_dir) / "audit.json");
  out << rep.to_json() << "\n";
  std::cout << rep.to_json() << std::endl;
  return 0;
}

int run_demo_blobs(const std::string& out_path, const std::string& format, const std::string& kind,
                   int n, int classes, int depth, int t, int v, int dim, std::uint64_t seed) {
  TimeSeriesDataset ds;
  if (kind == "ts") {
    ds = demo_blob_series(n, classes, depth, t, v, seed);
  } else if (kind == "features") {
    ds = features_as_dataset(demo_blob_features(n, classes, depth, dim, seed));
  } else {
    throw std::invalid_argument("demo-blobs kind must be ts|features");
  }
  save_dataset(out_path, ds, parse_format(format));
  std::cout << "{\"n\":" << ds.n << ",\"t\":" << ds.t << ",\"v\":" << ds.v
            << ",\"classes\":" << ds.num_classes() << "}" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked hierarchical cluster-wise contrastive learning for time series"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "key=value config file");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--seed", g.seed, "override train.seed");
  app.add_flag("--deterministic", g.deterministic, "single-threaded deterministic mode");
  app.add_option("--threads", g.threads, "worker threads");
  app.add_option("-o,--override", g.overrides, "config override key=value");

  std::string data_path, format = "binary", checkpoint, resume, pairs_csv, baseline_csv;
  int k_target = 0;

  CLI::App* cmd_pre = app.add_subcommand("pretrain", "self-supervised pretraining");
  cmd_pre->fallthrough();
  cmd_pre->add_option("--data", data_path, "dataset file")->required();
  cmd_pre->add_option("--format", format, "binary|csv");
  cmd_pre->add_option("--resume", resume, "checkpoint to resume from");

  CLI::App* cmd_eval = app.add_subcommand("evaluate", "linear probe on frozen representations");
  cmd_eval->fallthrough();
  cmd_eval->add_option("--data", data_path, "labeled dataset file")->required();
  cmd_eval->add_option("--format", format, "binary|csv");
  cmd_eval->add_option("--checkpoint", checkpoint, "pretrained checkpoint")->required();

  CLI::App* cmd_clu = app.add_subcommand("cluster", "hierarchical clustering of an embedding file");
  cmd_clu->fallthrough();
  cmd_clu->add_option("--data", data_path, "embedding container (T=1)")->required();
  cmd_clu->add_option("--format", format, "binary|csv");
  cmd_clu->add_option("--k", k_target, "force exactly k clusters");

  CLI::App* cmd_aud = app.add_subcommand("audit-pairs", "false-negative pair audit");
  cmd_aud->fallthrough();
  cmd_aud->add_option("--data", data_path, "labeled dataset or feature container")->required();
  cmd_aud->add_option("--format", format, "binary|csv");
  cmd_aud->add_option("--checkpoint", checkpoint, "embed time series through this checkpoint");
  cmd_aud->add_option("--pairs", pairs_csv, "consume an existing pair decision csv");
  cmd_aud->add_option("--baseline-pairs", baseline_csv, "baseline pair decision csv");

  int n = 300, classes = 3, depth = 2, t = 32, v = 2, dim = 32;
  std::uint64_t blob_seed = 0;
  std::string kind = "ts", blob_out;
  CLI::App* cmd_demo = app.add_subcommand("demo-blobs", "generate a synthetic dataset");
  cmd_demo->fallthrough();
  cmd_demo->add_option("--n", n, "instances");
  cmd_demo->add_option("--classes", classes, "classes");
  cmd_demo->add_option("--depth", depth, "hierarchy depth");
  cmd_demo->add_option("--t", t, "timesteps (ts kind)");
  cmd_demo->add_option("--v", v, "variables (ts kind)");
  cmd_demo->add_option("--dim", dim, "feature dim (features kind)");
  cmd_demo->add_option("--kind", kind, "ts|features");
  cmd_demo->add_option("--blob-seed", blob_seed, "generator seed");
  cmd_demo->add_option("--file", blob_out, "output dataset path")->required();
  cmd_demo->add_option("--format", format, "binary|csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_pre->parsed()) return run_pretrain(g, data_path, format, resume);
    if (cmd_eval->parsed()) return run_evaluate(g, data_path, format, checkpoint);
    if (cmd_clu->parsed()) return run_cluster(g, data_path, format, k_target);
    if (cmd_aud->parsed()) return run_audit(g, data_path, format, checkpoint, pairs_csv,
                                            baseline_csv);
    if (cmd_demo->parsed())
      return run_demo_blobs(blob_out, format, kind, n, classes, depth, t, v, dim, blob_seed);
  } catch (const std::exception& e) {
    std::cerr << "{\"error\":\"" << e.what() << "\"}" << std::endl;
    return 1;
  }
  std::cerr << app.help() << std::endl;
  return 2;
}
