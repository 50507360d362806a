#include "mhccl/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mhccl/rng.hpp"

namespace mhccl {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (std::int64_t c : counts) t += c;
  return t;
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm) {
  MetricsReport rep;
  rep.confusion = cm;
  const int C = cm.classes;
  const double n = static_cast<double>(cm.total());
  if (n == 0) return rep;

  std::int64_t correct = 0;
  for (int c = 0; c < C; ++c) correct += cm.at(c, c);
  rep.accuracy = static_cast<double>(correct) / n;

  double f1_sum = 0.0;
  for (int c = 0; c < C; ++c) {
    std::int64_t tp = cm.at(c, c), fp = 0, fn = 0;
    for (int o = 0; o < C; ++o) {
      if (o == c) continue;
      fp += cm.at(o, c);
      fn += cm.at(c, o);
    }
    const double p = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double r = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    f1_sum += (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  rep.macro_f1 = f1_sum / C;

  double pe = 0.0;
  for (int c = 0; c < C; ++c) {
    std::int64_t row = 0, col = 0;
    for (int o = 0; o < C; ++o) {
      row += cm.at(c, o);
      col += cm.at(o, c);
    }
    pe += static_cast<double>(row) * static_cast<double>(col);
  }
  pe /= n * n;
  rep.kappa = pe < 1.0 ? (rep.accuracy - pe) / (1.0 - pe) : 1.0;
  return rep;
}

LinearProbe linear_probe_train(const MatF& embeddings, const std::vector<std::int32_t>& labels,
                               int epochs, double lr, std::uint64_t seed) {
  if (embeddings.rows != labels.size())
    throw std::invalid_argument("probe: embeddings/labels size mismatch");
  int classes = 0;
  for (std::int32_t l : labels) classes = std::max(classes, static_cast<int>(l) + 1);
  if (classes < 2) throw std::invalid_argument("probe: need at least two classes");

  const std::size_t n = embeddings.rows;
  const int d = static_cast<int>(embeddings.cols);
  LinearProbe probe;
  probe.classes = classes;
  probe.dim = d;
  probe.weights.assign(std::size_t(classes) * d, 0.0);
  probe.bias.assign(classes, 0.0);
  Rng rng(derive_seed(seed, 0x960be));
  for (double& w : probe.weights) w = rng.normal(0.0, 0.01);

  std::vector<double> logits(classes), probs(classes);
  std::vector<double> gw(std::size_t(classes) * d), gb(classes);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const float* x = embeddings[i];
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < classes; ++c) {
        double acc = probe.bias[c];
        const double* w = probe.weights.data() + std::size_t(c) * d;
        for (int j = 0; j < d; ++j) acc += w[j] * x[j];
        logits[c] = acc;
        mx = std::max(mx, acc);
      }
      double z = 0.0;
      for (int c = 0; c < classes; ++c) z += (probs[c] = std::exp(logits[c] - mx));
      for (int c = 0; c < classes; ++c) {
        const double err = probs[c] / z - (labels[i] == c ? 1.0 : 0.0);
        gb[c] += err;
        double* g = gw.data() + std::size_t(c) * d;
        for (int j = 0; j < d; ++j) g[j] += err * x[j];
      }
    }
    const double scale = lr / static_cast<double>(n);
    for (std::size_t j = 0; j < probe.weights.size(); ++j) probe.weights[j] -= scale * gw[j];
    for (int c = 0; c < classes; ++c) probe.bias[c] -= scale * gb[c];
  }
  return probe;
}

std::vector<std::int32_t> probe_predict(const LinearProbe& probe, const MatF& embeddings) {
  std::vector<std::int32_t> pred(embeddings.rows);
  for (std::size_t i = 0; i < embeddings.rows; ++i) {
    const float* x = embeddings[i];
    double best = -std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int c = 0; c < probe.classes; ++c) {
      double acc = probe.bias[c];
      const double* w = probe.weights.data() + std::size_t(c) * probe.dim;
      for (int j = 0; j < probe.dim; ++j) acc += w[j] * x[j];
      if (acc > best) {
        best = acc;
        arg = c;
      }
    }
    pred[i] = arg;
  }
  return pred;
}

MetricsReport evaluate(const LinearProbe& probe, const MatF& embeddings,
                       const std::vector<std::int32_t>& labels) {
  if (embeddings.rows != labels.size())
    throw std::invalid_argument("evaluate: embeddings/labels size mismatch");
  int classes = probe.classes;
  for (std::int32_t l : labels) classes = std::max(classes, static_cast<int>(l) + 1);
  ConfusionMatrix cm(classes);
  const std::vector<std::int32_t> pred = probe_predict(probe, embeddings);
  for (std::size_t i = 0; i < labels.size(); ++i) ++cm.at(labels[i], pred[i]);
  return metrics_from_confusion(cm);
}

std::vector<int> kmeans(const MatF& points, int k, int iters, std::uint64_t seed) {
  const std::size_t n = points.rows;
  if (k < 1 || static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("kmeans: k must lie in [1, n]");
  const std::size_t d = points.cols;

  // farthest-point initialization
  Rng rng(derive_seed(seed, 0x43ea25));
  MatD centers(k, d);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.bounded(n);
  for (std::size_t j = 0; j < d; ++j) centers[0][j] = points[first][j];
  for (int c = 1; c < k; ++c) {
    double far = -1.0;
    std::size_t far_i = 0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points.row(i), centers.row(c - 1)));
      if (nearest[i] > far) {
        far = nearest[i];
        far_i = i;
      }
    }
    for (std::size_t j = 0; j < d; ++j) centers[c][j] = points[far_i][j];
  }

  std::vector<int> labels(n, 0);
  for (int it = 0; it < iters; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int c = 0; c < k; ++c) {
        const double dist = squared_distance(points.row(i), centers.row(c));
        if (dist < best) {
          best = dist;
          arg = c;
        }
      }
      if (labels[i] != arg) {
        labels[i] = arg;
        changed = true;
      }
    }

    std::vector<std::size_t> counts(k, 0);
    MatD sums(k, d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[labels[i]];
      for (std::size_t j = 0; j < d; ++j) sums[labels[i]][j] += points[i][j];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < d; ++j)
          centers[c][j] = sums[c][j] / static_cast<double>(counts[c]);
      } else {
        // re-seed to the point farthest from its assigned center
        double far = -1.0;
        std::size_t far_i = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const double dist = squared_distance(points.row(i), centers.row(labels[i]));
          if (dist > far) {
            far = dist;
            far_i = i;
          }
        }
        for (std::size_t j = 0; j < d; ++j) centers[c][j] = points[far_i][j];
        changed = true;
      }
    }
    if (!changed && it > 0) break;
  }
  return labels;
}

double kmeans_inertia(const MatF& points, const std::vector<int>& labels, int k) {
  MatF centers = MatF(k, points.cols, 0.0f);
  std::vector<std::size_t> counts(k, 0);
  std::vector<double> acc(std::size_t(k) * points.cols, 0.0);
  for (std::size_t i = 0; i < points.rows; ++i) {
    ++counts[labels[i]];
    for (std::size_t j = 0; j < points.cols; ++j)
      acc[std::size_t(labels[i]) * points.cols + j] += points[i][j];
  }
  for (int c = 0; c < k; ++c)
    for (std::size_t j = 0; j < points.cols; ++j)
      if (counts[c] > 0)
        centers[c][j] = static_cast<float>(acc[std::size_t(c) * points.cols + j] / counts[c]);
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.rows; ++i)
    inertia += squared_distance(points.row(i), centers.row(labels[i]));
  return inertia;
}

std::vector<std::vector<int>> majority_labels(const std::vector<std::vector<int>>& instance_labels,
                                              const std::vector<std::int32_t>& truth) {
  std::vector<std::vector<int>> out;
  int classes = 0;
  for (std::int32_t l : truth) classes = std::max(classes, static_cast<int>(l) + 1);
  for (const auto& part : instance_labels) {
    int k = 0;
    for (int l : part) k = std::max(k, l + 1);
    std::vector<std::vector<std::int64_t>> hist(k, std::vector<std::int64_t>(classes, 0));
    for (std::size_t i = 0; i < part.size(); ++i) ++hist[part[i]][truth[i]];
    std::vector<int> maj(k, 0);
    for (int c = 0; c < k; ++c) {
      std::int64_t best = -1;
      for (int cls = 0; cls < classes; ++cls)
        if (hist[c][cls] > best) {
          best = hist[c][cls];
          maj[c] = cls;
        }
    }
    out.push_back(std::move(maj));
  }
  return out;
}

namespace {

void count_false(const std::vector<PairDecision>& decisions,
                 const std::vector<std::int32_t>& labels,
                 const std::vector<std::vector<int>>& majority, std::int64_t& total_inst,
                 std::int64_t& false_inst, std::int64_t& total_clu, std::int64_t& false_clu) {
  for (const PairDecision& d : decisions) {
    if (d.positive) continue;
    if (d.level == PairDecision::Level::instance) {
      ++total_inst;
      if (labels[d.anchor] == labels[d.counterpart]) ++false_inst;
    } else {
      ++total_clu;
      if (labels[d.anchor] == majority[d.partition][d.counterpart]) ++false_clu;
    }
  }
}

}  // namespace

AuditReport false_pair_audit(const std::vector<PairDecision>& decisions,
                             const std::vector<std::int32_t>& labels,
                             const std::vector<std::vector<int>>& majority,
                             const std::vector<PairDecision>& baseline_decisions,
                             const std::vector<std::vector<int>>& baseline_majority) {
  if (labels.empty()) throw std::invalid_argument("false_pair_audit: dataset has no labels");

  AuditReport rep;
  count_false(decisions, labels, majority, rep.total_instance_negatives,
              rep.false_instance_negatives, rep.total_cluster_negatives,
              rep.false_cluster_negatives);
  count_false(baseline_decisions, labels, baseline_majority,
              rep.baseline_total_instance_negatives, rep.baseline_false_instance_negatives,
              rep.baseline_total_cluster_negatives, rep.baseline_false_cluster_negatives);

  auto rate = [](std::int64_t f, std::int64_t t) {
    return t > 0 ? static_cast<double>(f) / static_cast<double>(t) : 0.0;
  };
  const double base_i =
      rate(rep.baseline_false_instance_negatives, rep.baseline_total_instance_negatives);
  const double base_c =
      rate(rep.baseline_false_cluster_negatives, rep.baseline_total_cluster_negatives);
  rep.instance_reduction =
      base_i > 0.0 ? 1.0 - rate(rep.false_instance_negatives, rep.total_instance_negatives) / base_i
                   : std::numeric_limits<double>::quiet_NaN();
  rep.cluster_reduction =
      base_c > 0.0 ? 1.0 - rate(rep.false_cluster_negatives, rep.total_cluster_negatives) / base_c
                   : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

std::string AuditReport::to_json() const {
  std::ostringstream out;
  auto num = [](double x) {
    std::ostringstream s;
    if (std::isnan(x)) s << "null";
    else s << x;
    return s.str();
  };
  out << "{";
  out << "\"total_instance_negatives\":" << total_instance_negatives << ",";
  out << "\"false_instance_negatives\":" << false_instance_negatives << ",";
  out << "\"total_cluster_negatives\":" << total_cluster_negatives << ",";
  out << "\"false_cluster_negatives\":" << false_cluster_negatives << ",";
  out << "\"baseline_total_instance_negatives\":" << baseline_total_instance_negatives << ",";
  out << "\"baseline_false_instance_negatives\":" << baseline_false_instance_negatives << ",";
  out << "\"baseline_total_cluster_negatives\":" << baseline_total_cluster_negatives << ",";
  out << "\"baseline_false_cluster_negatives\":" << baseline_false_cluster_negatives << ",";
  out << "\"instance_reduction\":" << num(instance_reduction) << ",";
  out << "\"cluster_reduction\":" << num(cluster_reduction);
  out << "}";
  return out.str();
}

}  // namespace mhccl
