#include "mhccl/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace mhccl {

void LossConfig::validate() const {
  if (tau <= 0.0) throw std::invalid_argument("loss: tau must be > 0");
  if (s_pos < 1 || s_neg < 1 || h_pos < 1 || h_neg < 1 || m_used < 1)
    throw std::invalid_argument("loss: pair counts must be >= 1");
}

namespace {

double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

template <class A, class B>
double cosine_impl(std::span<const A> a, std::span<const B> b, double* na_out = nullptr,
                   double* nb_out = nullptr, double* dot_out = nullptr) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = static_cast<double>(a[i]);
    const double y = static_cast<double>(b[i]);
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na == 0.0 || nb == 0.0) throw std::runtime_error("cosine similarity of a zero vector");
  if (na_out) *na_out = na;
  if (nb_out) *nb_out = nb;
  if (dot_out) *dot_out = dot;
  return dot / (na * nb);
}

// One BCE term. Returns the loss value and writes d loss / d sim.
double bce_term(double sim, double tau, bool positive, double* dsim) {
  const double score = sim / tau;
  if (positive) {
    *dsim = -(1.0 - sigmoid(score)) / tau;
    return -log_sigmoid(score);
  }
  *dsim = sigmoid(score) / tau;
  return -log_sigmoid(-score);
}

// Accumulates d sim / d z and (optionally) d sim / d u scaled by `w`.
template <class A, class B>
void add_cosine_grad(std::span<const A> z, std::span<const B> u, double w, double* gz,
                     double* gu) {
  double nz, nu, dot;
  cosine_impl(z, u, &nz, &nu, &dot);
  const double sim = dot / (nz * nu);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double zi = static_cast<double>(z[i]);
    const double ui = static_cast<double>(u[i]);
    if (gz) gz[i] += w * (ui / (nz * nu) - sim * zi / (nz * nz));
    if (gu) gu[i] += w * (zi / (nz * nu) - sim * ui / (nu * nu));
  }
}

}  // namespace

double cosine_sim(std::span<const float> a, std::span<const float> b) { return cosine_impl(a, b); }
double cosine_sim(std::span<const double> a, std::span<const double> b) {
  return cosine_impl(a, b);
}

template <class S>
double instance_loss(const Mat<S>& z_a, const Mat<S>& h_b, const InstancePairSet& pairs,
                     double tau, Mat<double>* grad_z_a) {
  if (pairs.degenerate) return 0.0;
  const int a = pairs.anchor_pos;
  auto anchor = z_a.row(a);

  double total = 0.0;
  auto handle = [&](const ViewRef& ref, bool positive) {
    const bool via_query = ref.tag == ViewTag::query_a;
    std::span<const S> u = via_query ? z_a.row(ref.batch_pos) : h_b.row(ref.batch_pos);
    const double sim = cosine_impl(std::span<const S>(anchor), u);
    double dsim = 0.0;
    total += bce_term(sim, tau, positive, &dsim);
    if (grad_z_a) {
      // gz and gu may alias when a replicated anchor meets its own query view;
      // both contributions accumulate into the same row, which is the correct
      // total derivative.
      double* gz = (*grad_z_a)[a];
      double* gu = via_query ? (*grad_z_a)[ref.batch_pos] : nullptr;
      add_cosine_grad(std::span<const S>(anchor), u, dsim, gz, gu);
    }
  };
  for (const ViewRef& ref : pairs.positives) handle(ref, true);
  for (const ViewRef& ref : pairs.negatives) handle(ref, false);
  return total;
}

template <class S>
double cluster_loss(const Mat<S>& z_a, int anchor_row, const ClusterPairSet& pairs,
                    const ClusterHierarchy& hierarchy, double tau, Mat<double>* grad_z_a) {
  auto anchor = z_a.row(anchor_row);
  double sum = 0.0;
  int contributing = 0;

  // gradients are scaled by 1/M after the partition count is known, so stage
  // them into a local row first
  std::vector<double> gz(z_a.cols, 0.0);
  for (const PartitionPairs& pp : pairs.partitions) {
    bool contributed = false;
    auto handle = [&](const ProtoRef& ref, bool positive) {
      const MatF& protos = hierarchy.partitions[ref.partition].prototypes_refined;
      auto proto = protos.row(ref.cluster);
      const double sim = cosine_impl(std::span<const S>(anchor), proto);
      double dsim = 0.0;
      sum += bce_term(sim, tau, positive, &dsim);
      if (grad_z_a)
        add_cosine_grad(std::span<const S>(anchor), proto, dsim, gz.data(), nullptr);
      contributed = true;
    };
    for (const ProtoRef& ref : pp.positives) handle(ref, true);
    for (const ProtoRef& ref : pp.negatives) handle(ref, false);
    if (contributed) ++contributing;
  }
  if (contributing == 0) return 0.0;

  const double scale = 1.0 / static_cast<double>(contributing);
  if (grad_z_a) {
    double* out = (*grad_z_a)[anchor_row];
    for (std::size_t i = 0; i < gz.size(); ++i) out[i] += scale * gz[i];
  }
  return sum * scale;
}

template <class S>
LossBreakdown overall_loss(const Mat<S>& z_a, const Mat<S>& h_b,
                           const std::vector<InstancePairSet>& instance_sets,
                           const std::vector<ClusterPairSet>& cluster_sets,
                           const ClusterHierarchy& hierarchy, const LossConfig& cfg) {
  cfg.validate();
  LossBreakdown out;
  out.grad = Mat<double>(z_a.rows, z_a.cols, 0.0);
  out.per_anchor.assign(z_a.rows, 0.0);

  for (std::size_t a = 0; a < z_a.rows; ++a) {
    double ins = 0.0, clu = 0.0;
    if (a < instance_sets.size())
      ins = instance_loss(z_a, h_b, instance_sets[a], cfg.tau, &out.grad);
    if (a < cluster_sets.size())
      clu = cluster_loss(z_a, static_cast<int>(a), cluster_sets[a], hierarchy, cfg.tau,
                         &out.grad);
    out.instance_part += ins;
    out.cluster_part += clu;
    out.per_anchor[a] = ins + clu;
  }
  out.total = out.instance_part + out.cluster_part;
  return out;
}

template double instance_loss<float>(const Mat<float>&, const Mat<float>&, const InstancePairSet&,
                                     double, Mat<double>*);
template double instance_loss<double>(const Mat<double>&, const Mat<double>&,
                                      const InstancePairSet&, double, Mat<double>*);
template double cluster_loss<float>(const Mat<float>&, int, const ClusterPairSet&,
                                    const ClusterHierarchy&, double, Mat<double>*);
template double cluster_loss<double>(const Mat<double>&, int, const ClusterPairSet&,
                                     const ClusterHierarchy&, double, Mat<double>*);
template LossBreakdown overall_loss<float>(const Mat<float>&, const Mat<float>&,
                                           const std::vector<InstancePairSet>&,
                                           const std::vector<ClusterPairSet>&,
                                           const ClusterHierarchy&, const LossConfig&);
template LossBreakdown overall_loss<double>(const Mat<double>&, const Mat<double>&,
                                            const std::vector<InstancePairSet>&,
                                            const std::vector<ClusterPairSet>&,
                                            const ClusterHierarchy&, const LossConfig&);

}  // namespace mhccl
