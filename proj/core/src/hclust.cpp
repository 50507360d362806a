#include "mhccl/hclust.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mhccl {

void MaskConfig::validate() const {
  switch (strategy) {
    case Strategy::mask_threshold:
      if (parameter < 0.0) throw std::invalid_argument("mask threshold must be >= 0");
      break;
    case Strategy::mask_proportion:
      if (parameter < 0.0 || parameter >= 1.0)
        throw std::invalid_argument("mask proportion must lie in [0, 1)");
      break;
    case Strategy::replace_prototypes:
    case Strategy::none:
      break;
  }
  for (int p : apply_at)
    if (p < 1) throw std::invalid_argument("mask apply_at indices are 1-based");
}

bool MaskConfig::applies_to(int partition_index) const {
  if (strategy == Strategy::none) return false;
  return std::find(apply_at.begin(), apply_at.end(), partition_index) != apply_at.end();
}

MaskConfig::Strategy MaskConfig::parse_strategy(const std::string& name) {
  if (name == "mask_threshold") return Strategy::mask_threshold;
  if (name == "mask_proportion") return Strategy::mask_proportion;
  if (name == "replace_prototypes") return Strategy::replace_prototypes;
  if (name == "none") return Strategy::none;
  throw std::invalid_argument("unknown masking strategy: " + name);
}

std::string MaskConfig::strategy_name(Strategy s) {
  switch (s) {
    case Strategy::mask_threshold: return "mask_threshold";
    case Strategy::mask_proportion: return "mask_proportion";
    case Strategy::replace_prototypes: return "replace_prototypes";
    case Strategy::none: return "none";
  }
  return "none";
}

std::vector<int> first_neighbors(const MatF& points) {
  const std::size_t n = points.rows;
  if (n < 2) throw std::invalid_argument("first_neighbors: need at least two points");
  std::vector<int> omega(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_j = -1;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = squared_distance(points.row(i), points.row(j));
      if (d < best) {
        best = d;
        best_j = static_cast<int>(j);
      }
    }
    omega[i] = best_j;
  }
  return omega;
}

Adjacency finch_adjacency(const std::vector<int>& omega) {
  const std::size_t n = omega.size();
  Adjacency adj;
  adj.n = n;
  adj.neighbors.assign(n, {});

  auto link = [&](int a, int b) {
    if (a == b) return;
    adj.neighbors[a].push_back(b);
    adj.neighbors[b].push_back(a);
  };

  for (std::size_t i = 0; i < n; ++i) link(static_cast<int>(i), omega[i]);

  // shared-neighbor cliques: group points by their first neighbor
  std::vector<std::vector<int>> by_target(n);
  for (std::size_t i = 0; i < n; ++i) by_target[omega[i]].push_back(static_cast<int>(i));
  for (const auto& group : by_target)
    for (std::size_t a = 0; a < group.size(); ++a)
      for (std::size_t b = a + 1; b < group.size(); ++b) link(group[a], group[b]);

  for (auto& nbrs : adj.neighbors) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  return adj;
}

Components connected_components(const Adjacency& adj) {
  Components comps;
  comps.labels.assign(adj.n, -1);
  std::vector<int> stack;
  for (std::size_t i = 0; i < adj.n; ++i) {
    if (comps.labels[i] >= 0) continue;
    const int label = comps.count++;
    stack.push_back(static_cast<int>(i));
    comps.labels[i] = label;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int w : adj.neighbors[u]) {
        if (comps.labels[w] < 0) {
          comps.labels[w] = label;
          stack.push_back(w);
        }
      }
    }
  }
  return comps;
}

MatF compute_prototypes(const MatF& points, const std::vector<int>& labels, int k) {
  MatF protos(k, points.cols, 0.0f);
  std::vector<std::size_t> counts(k, 0);
  // 64-bit accumulation per cluster
  std::vector<double> acc(static_cast<std::size_t>(k) * points.cols, 0.0);
  for (std::size_t i = 0; i < points.rows; ++i) {
    const int c = labels[i];
    ++counts[c];
    double* row = acc.data() + static_cast<std::size_t>(c) * points.cols;
    for (std::size_t d = 0; d < points.cols; ++d) row[d] += points[i][d];
  }
  for (int c = 0; c < k; ++c) {
    if (counts[c] == 0) throw std::runtime_error("compute_prototypes: empty cluster");
    for (std::size_t d = 0; d < points.cols; ++d)
      protos[c][d] = static_cast<float>(acc[static_cast<std::size_t>(c) * points.cols + d] /
                                        static_cast<double>(counts[c]));
  }
  return protos;
}

namespace {

MatF refined_means(const MatF& points, const Partition& part) {
  const int k = part.num_clusters;
  MatF refined(k, points.cols, 0.0f);
  std::vector<double> acc(static_cast<std::size_t>(k) * points.cols, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < points.rows; ++i) {
    if (part.masked[i]) continue;
    const int c = part.point_labels[i];
    ++counts[c];
    double* row = acc.data() + static_cast<std::size_t>(c) * points.cols;
    for (std::size_t d = 0; d < points.cols; ++d) row[d] += points[i][d];
  }
  for (int c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      // all members masked: fall back to the original prototype
      std::copy(part.prototypes_original.row(c).begin(), part.prototypes_original.row(c).end(),
                refined.row(c).begin());
    } else {
      for (std::size_t d = 0; d < points.cols; ++d)
        refined[c][d] = static_cast<float>(acc[static_cast<std::size_t>(c) * points.cols + d] /
                                           static_cast<double>(counts[c]));
    }
  }
  return refined;
}

}  // namespace

void upward_mask(const MatF& points, Partition& part, const MaskConfig& cfg) {
  cfg.validate();
  const std::size_t n = points.rows;
  const int k = part.num_clusters;
  part.masked.assign(n, 0);

  std::vector<double> dist(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    dist[i] = std::sqrt(
        squared_distance(points.row(i), part.prototypes_original.row(part.point_labels[i])));

  switch (cfg.strategy) {
    case MaskConfig::Strategy::none:
      part.prototypes_refined = part.prototypes_original;
      return;
    case MaskConfig::Strategy::mask_threshold: {
      for (std::size_t i = 0; i < n; ++i)
        if (dist[i] > cfg.parameter) part.masked[i] = 1;
      part.prototypes_refined = refined_means(points, part);
      return;
    }
    case MaskConfig::Strategy::mask_proportion: {
      std::vector<std::vector<int>> members(k);
      for (std::size_t i = 0; i < n; ++i) members[part.point_labels[i]].push_back(int(i));
      for (int c = 0; c < k; ++c) {
        auto& m = members[c];
        const std::size_t drop =
            static_cast<std::size_t>(cfg.parameter * static_cast<double>(m.size()));
        if (drop == 0) continue;
        // farthest first; ties resolved toward the smaller index
        std::sort(m.begin(), m.end(), [&](int a, int b) {
          if (dist[a] != dist[b]) return dist[a] > dist[b];
          return a < b;
        });
        for (std::size_t i = 0; i < drop; ++i) part.masked[m[i]] = 1;
      }
      part.prototypes_refined = refined_means(points, part);
      return;
    }
    case MaskConfig::Strategy::replace_prototypes: {
      // no masking: refined prototype = member closest to the mean
      part.prototypes_refined = part.prototypes_original;
      std::vector<double> best(k, std::numeric_limits<double>::infinity());
      std::vector<int> best_i(k, -1);
      for (std::size_t i = 0; i < n; ++i) {
        const int c = part.point_labels[i];
        if (dist[i] < best[c]) {
          best[c] = dist[i];
          best_i[c] = static_cast<int>(i);
        }
      }
      for (int c = 0; c < k; ++c)
        std::copy(points.row(best_i[c]).begin(), points.row(best_i[c]).end(),
                  part.prototypes_refined.row(c).begin());
      return;
    }
  }
}

ClusterHierarchy build_hierarchy(const MatF& points, const MaskConfig& cfg) {
  if (points.rows < 2) throw std::invalid_argument("build_hierarchy: need at least two points");
  cfg.validate();

  ClusterHierarchy h;
  h.features = points;
  h.n = points.rows;

  MatF level_points = points;
  std::vector<int> inst_labels;  // instance -> cluster at the current level
  int level = 1;
  int prev_k = std::numeric_limits<int>::max();
  while (level_points.rows >= 2) {
    const std::vector<int> omega = first_neighbors(level_points);
    const Components comps = connected_components(finch_adjacency(omega));
    if (comps.count >= prev_k) break;               // no progress
    if (comps.count < 2 && !h.partitions.empty()) break;  // do not emit a trivial top

    Partition part;
    part.point_labels = comps.labels;
    part.num_clusters = comps.count;
    part.prototypes_original = compute_prototypes(level_points, part.point_labels, comps.count);
    if (cfg.applies_to(level)) {
      upward_mask(level_points, part, cfg);
    } else {
      part.masked.assign(level_points.rows, 0);
      part.prototypes_refined = part.prototypes_original;
    }

    if (h.partitions.empty()) {
      part.instance_labels = part.point_labels;
    } else {
      h.partitions.back().parent_of_cluster = part.point_labels;
      part.instance_labels.resize(h.n);
      const std::vector<int>& below = h.partitions.back().instance_labels;
      for (std::size_t i = 0; i < h.n; ++i) part.instance_labels[i] = part.point_labels[below[i]];
    }

    level_points = part.prototypes_refined;
    prev_k = part.num_clusters;
    h.partitions.push_back(std::move(part));
    ++level;
    if (prev_k < 2) break;
  }
  return h;
}

Partition required_k(const ClusterHierarchy& hierarchy, int k_target) {
  if (k_target < 1) throw std::invalid_argument("required_k: k_target must be >= 1");
  const Partition* source = nullptr;
  int source_level = -1;
  for (int p = 0; p < hierarchy.depth(); ++p) {
    if (hierarchy.partitions[p].num_clusters >= k_target) {
      source = &hierarchy.partitions[p];
      source_level = p;
    }
  }
  if (!source)
    throw std::invalid_argument("required_k: no partition has at least " +
                                std::to_string(k_target) + " clusters");

  // Points this partition was built over.
  const MatF& pts = source_level == 0 ? hierarchy.features
                                      : hierarchy.partitions[source_level - 1].prototypes_refined;

  std::vector<int> labels = source->point_labels;
  int k = source->num_clusters;
  MatF protos = source->prototypes_refined;
  std::vector<std::size_t> counts(k, 0);
  for (int l : labels) ++counts[l];

  while (k > k_target) {
    double best = std::numeric_limits<double>::infinity();
    int bi = -1, bj = -1;
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) {
        const double d = squared_distance(protos.row(i), protos.row(j));
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    // merge bj into bi, count-weighted prototype; compact labels
    const double wi = static_cast<double>(counts[bi]);
    const double wj = static_cast<double>(counts[bj]);
    for (std::size_t d = 0; d < protos.cols; ++d)
      protos[bi][d] = static_cast<float>((wi * protos[bi][d] + wj * protos[bj][d]) / (wi + wj));
    counts[bi] += counts[bj];
    for (auto& l : labels) {
      if (l == bj) l = bi;
      if (l > bj) --l;
    }
    for (int c = bj; c + 1 < k; ++c) {
      std::copy(protos.row(c + 1).begin(), protos.row(c + 1).end(), protos.row(c).begin());
      counts[c] = counts[c + 1];
    }
    protos.rows = static_cast<std::size_t>(k - 1);
    protos.data.resize(protos.rows * protos.cols);
    counts.resize(k - 1);
    --k;
  }

  // renumber clusters by smallest member point index
  std::vector<int> remap(k, -1);
  int next = 0;
  for (int l : labels)
    if (remap[l] < 0) remap[l] = next++;
  Partition out;
  out.point_labels.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out.point_labels[i] = remap[labels[i]];
  out.num_clusters = k;
  out.prototypes_original = compute_prototypes(pts, out.point_labels, k);
  out.prototypes_refined = out.prototypes_original;
  out.masked.assign(labels.size(), 0);

  // instance view
  if (source_level == 0) {
    out.instance_labels = out.point_labels;
  } else {
    out.instance_labels.resize(hierarchy.n);
    const std::vector<int>& below = hierarchy.partitions[source_level - 1].instance_labels;
    for (std::size_t i = 0; i < hierarchy.n; ++i)
      out.instance_labels[i] = out.point_labels[below[i]];
  }
  return out;
}

}  // namespace mhccl
