#include <doctest.h>

#include <cmath>

#include "mhccl/encoder.hpp"
#include "mhccl/rng.hpp"
#include "oracles.hpp"

using namespace mhccl;

namespace {

EncoderArch small_arch(int v = 2, int t = 12) {
  EncoderArch arch;
  arch.input_channels = v;
  arch.input_length = t;
  arch.channels = {4, 6};
  arch.kernels = {5, 3};
  arch.embed_dim = 5;
  return arch;
}

template <class S>
Mat<S> random_batch(const EncoderArch& arch, std::size_t b, std::uint64_t seed) {
  Mat<S> batch(b, std::size_t(arch.input_length) * arch.input_channels);
  Rng rng(seed);
  for (auto& x : batch.data) x = static_cast<S>(rng.normal());
  return batch;
}

// scalar objective sum_ij G[i][j] * emb[i][j] used by the gradient checks
template <class S>
double weighted_sum(const Mat<S>& emb, const Mat<S>& g) {
  double acc = 0.0;
  for (std::size_t i = 0; i < emb.data.size(); ++i)
    acc += double(emb.data[i]) * double(g.data[i]);
  return acc;
}

}  // namespace

TEST_SUITE_BEGIN("encoder");

TEST_CASE("init is deterministic and bounded, biases zero") {
  const EncoderArch arch = small_arch();
  auto p1 = init_encoder<float>(arch, 33);
  auto p2 = init_encoder<float>(arch, 33);
  for (std::size_t t = 0; t < p1.tensors.size(); ++t) CHECK(p1.tensors[t] == p2.tensors[t]);
  auto p3 = init_encoder<float>(arch, 34);
  CHECK(p1.tensors[0] != p3.tensors[0]);

  // biases (odd tensors and the last) are zero
  CHECK(p1.tensors[1] == std::vector<float>(4, 0.0f));
  CHECK(p1.tensors[3] == std::vector<float>(6, 0.0f));
  CHECK(p1.tensors.back() == std::vector<float>(5, 0.0f));

  // glorot bound for the first conv: a = sqrt(6 / (in*k + out*k))
  const double a = std::sqrt(6.0 / (2 * 5 + 4 * 5));
  for (float w : p1.tensors[0]) CHECK(std::abs(w) <= a);
}

TEST_CASE("glorot bound is 1 when fan_in = fan_out = 3") {
  EncoderArch arch;
  arch.input_channels = 1;
  arch.input_length = 8;
  arch.channels = {1};
  arch.kernels = {3};
  arch.embed_dim = 2;
  auto p = init_encoder<float>(arch, 5);
  double mx = 0.0;
  for (float w : p.tensors[0]) mx = std::max(mx, double(std::abs(w)));
  CHECK(mx <= 1.0);
}

TEST_CASE("kernel wider than input is rejected") {
  EncoderArch arch = small_arch(2, 4);
  arch.kernels = {5, 3};
  CHECK_THROWS_AS(init_encoder<float>(arch, 0), std::invalid_argument);
}

TEST_CASE("zero input with zero biases gives zero embedding") {
  const EncoderArch arch = small_arch();
  auto params = init_encoder<float>(arch, 1);
  Mat<float> batch(3, std::size_t(arch.input_length) * arch.input_channels, 0.0f);
  Mat<float> emb = forward(params, batch, static_cast<ForwardCacheT<float>*>(nullptr));
  for (float e : emb.data) CHECK(e == 0.0f);
}

TEST_CASE("duplicated instances embed identically; batching matches single rows") {
  const EncoderArch arch = small_arch();
  auto params = init_encoder<float>(arch, 2);
  Mat<float> batch = random_batch<float>(arch, 4, 77);
  std::copy(batch.row(0).begin(), batch.row(0).end(), batch.row(3).begin());

  Mat<float> emb = forward(params, batch, static_cast<ForwardCacheT<float>*>(nullptr));
  for (std::size_t d = 0; d < emb.cols; ++d) CHECK(emb[0][d] == emb[3][d]);

  for (std::size_t r = 0; r < batch.rows; ++r) {
    Mat<float> single(1, batch.cols);
    std::copy(batch.row(r).begin(), batch.row(r).end(), single.row(0).begin());
    Mat<float> e1 = forward(params, single, static_cast<ForwardCacheT<float>*>(nullptr));
    for (std::size_t d = 0; d < emb.cols; ++d)
      CHECK(std::abs(e1[0][d] - emb[r][d]) < 1e-6);
  }
}

TEST_CASE("threaded forward is bitwise identical to single-threaded") {
  const EncoderArch arch = small_arch(3, 16);
  auto params = init_encoder<float>(arch, 9);
  Mat<float> batch = random_batch<float>(arch, 7, 5);
  Mat<float> a = forward(params, batch, static_cast<ForwardCacheT<float>*>(nullptr), 1);
  Mat<float> b = forward(params, batch, static_cast<ForwardCacheT<float>*>(nullptr), 4);
  CHECK(a.data == b.data);
}

TEST_CASE("non-finite input is rejected") {
  const EncoderArch arch = small_arch();
  auto params = init_encoder<float>(arch, 1);
  Mat<float> batch(1, std::size_t(arch.input_length) * arch.input_channels, 0.0f);
  batch.data[3] = std::nanf("");
  CHECK_THROWS_AS(forward(params, batch, static_cast<ForwardCacheT<float>*>(nullptr)),
                  std::runtime_error);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  const EncoderArch arch = small_arch();
  auto params = init_encoder<float>(arch, 3);
  Mat<float> batch = random_batch<float>(arch, 2, 11);
  ForwardCacheT<float> cache;
  forward(params, batch, &cache);
  Mat<float> g(2, arch.embed_dim, 0.0f);
  auto grads = backward(params, cache, g);
  for (const auto& t : grads.tensors)
    for (float x : t) CHECK(x == 0.0f);
}

TEST_CASE("stale cache is rejected") {
  const EncoderArch arch = small_arch();
  auto params = init_encoder<float>(arch, 3);
  Mat<float> batch = random_batch<float>(arch, 2, 11);
  ForwardCacheT<float> cache;
  forward(params, batch, &cache);
  Mat<float> g(2, arch.embed_dim, 1.0f);
  auto grads = backward(params, cache, g);
  SgdStateT<float> vel;
  sgd_step(params, vel, grads, 0.01, 0.0, 0.0);  // bumps the version
  CHECK_THROWS_AS(backward(params, cache, g), std::runtime_error);
}

TEST_CASE("analytic gradients match central finite differences (64-bit)") {
  Rng meta(20240);
  for (int trial = 0; trial < 6; ++trial) {
    EncoderArch arch;
    arch.input_channels = 1 + int(meta.bounded(3));
    arch.input_length = 8 + int(meta.bounded(9));
    arch.channels = {2 + int(meta.bounded(3)), 2 + int(meta.bounded(3))};
    arch.kernels = {3, 3};
    arch.embed_dim = 2 + int(meta.bounded(3));
    const std::size_t B = 1 + meta.bounded(3);

    auto params = init_encoder<double>(arch, meta.next_u64());
    Mat<double> batch = random_batch<double>(arch, B, meta.next_u64());
    Mat<double> g(B, arch.embed_dim);
    Rng grng(meta.next_u64());
    for (auto& x : g.data) x = grng.normal();

    ForwardCacheT<double> cache;
    forward(params, batch, &cache);
    auto grads = backward(params, cache, g, /*want_input_grad=*/true);

    // spot-check a sample of parameter coordinates per tensor
    double max_rel = 0.0;
    Rng pick(meta.next_u64());
    for (std::size_t ti = 0; ti < params.tensors.size(); ++ti) {
      for (int probe = 0; probe < 4; ++probe) {
        const std::size_t j = pick.bounded(params.tensors[ti].size());
        auto f = [&](double x) {
          auto p2 = params;
          p2.tensors[ti][j] = x;
          Mat<double> e = forward(p2, batch, static_cast<ForwardCacheT<double>*>(nullptr));
          return weighted_sum(e, g);
        };
        const double fd = oracle::central_diff(f, params.tensors[ti][j], 1e-3);
        max_rel = std::max(max_rel, oracle::rel_err(grads.tensors[ti][j], fd));
      }
    }
    // and a few input coordinates
    for (int probe = 0; probe < 6; ++probe) {
      const std::size_t j = pick.bounded(batch.data.size());
      auto f = [&](double x) {
        auto b2 = batch;
        b2.data[j] = x;
        Mat<double> e = forward(params, b2, static_cast<ForwardCacheT<double>*>(nullptr));
        return weighted_sum(e, g);
      };
      const double fd = oracle::central_diff(f, batch.data[j], 1e-3);
      max_rel = std::max(max_rel, oracle::rel_err(grads.input_grad.data[j], fd));
    }
    CHECK(max_rel < 1e-4);
  }
}

TEST_CASE("a dead ReLU unit receives zero kernel gradient") {
  EncoderArch arch;
  arch.input_channels = 1;
  arch.input_length = 8;
  arch.channels = {2};
  arch.kernels = {3};
  arch.embed_dim = 2;
  auto params = init_encoder<float>(arch, 4);
  params.tensors[1][0] = -100.0f;  // first conv unit: pre-activation stays < 0
  ++params.version;

  Mat<float> batch = random_batch<float>(arch, 3, 6);
  ForwardCacheT<float> cache;
  forward(params, batch, &cache);
  Mat<float> g(3, arch.embed_dim, 1.0f);
  auto grads = backward(params, cache, g);
  // kernel rows of unit 0: indices [0, in_c*k)
  for (int j = 0; j < 3; ++j) CHECK(grads.tensors[0][j] == 0.0f);
  CHECK(grads.tensors[1][0] == 0.0f);
}

TEST_CASE("vanilla sgd subtracts lr * grad; zero grad is a fixed point") {
  EncoderArch arch = small_arch();
  auto params = init_encoder<float>(arch, 8);
  auto before = params.tensors;
  EncoderGradsT<float> grads;
  for (const auto& t : params.tensors) grads.tensors.emplace_back(t.size(), 0.5f);
  SgdStateT<float> vel;
  sgd_step(params, vel, grads, 0.1, 0.0, 0.0);
  for (std::size_t t = 0; t < params.tensors.size(); ++t)
    for (std::size_t i = 0; i < params.tensors[t].size(); ++i)
      CHECK(params.tensors[t][i] == doctest::Approx(before[t][i] - 0.05f));

  for (auto& t : grads.tensors) std::fill(t.begin(), t.end(), 0.0f);
  SgdStateT<float> vel2;
  auto snapshot = params.tensors;
  sgd_step(params, vel2, grads, 0.1, 0.0, 0.0);
  CHECK(params.tensors == snapshot);
}

TEST_CASE("momentum sgd two-step hand computation: 0.9 then 0.71") {
  EncoderArch arch;
  arch.input_channels = 1;
  arch.input_length = 4;
  arch.channels = {1};
  arch.kernels = {1};
  arch.embed_dim = 1;
  auto params = init_encoder<float>(arch, 0);
  for (auto& t : params.tensors) std::fill(t.begin(), t.end(), 1.0f);

  EncoderGradsT<float> grads;
  for (const auto& t : params.tensors) grads.tensors.emplace_back(t.size(), 1.0f);
  SgdStateT<float> vel;
  sgd_step(params, vel, grads, 0.1, 0.9, 0.0);
  CHECK(params.tensors[0][0] == doctest::Approx(0.9));
  sgd_step(params, vel, grads, 0.1, 0.9, 0.0);
  CHECK(params.tensors[0][0] == doctest::Approx(0.71));
}

TEST_CASE("sgd rejects non-finite gradients") {
  EncoderArch arch = small_arch();
  auto params = init_encoder<float>(arch, 8);
  EncoderGradsT<float> grads;
  for (const auto& t : params.tensors) grads.tensors.emplace_back(t.size(), 0.0f);
  grads.tensors[0][0] = std::nanf("");
  SgdStateT<float> vel;
  CHECK_THROWS_AS(sgd_step(params, vel, grads, 0.1, 0.9, 0.0), std::runtime_error);
}

TEST_CASE("momentum update: m=0 copies, convex combination otherwise") {
  EncoderArch arch = small_arch();
  auto q = init_encoder<float>(arch, 1);
  auto k = init_encoder<float>(arch, 2);

  auto k0 = k;
  momentum_update(k0, q, 0.0);
  for (std::size_t t = 0; t < q.tensors.size(); ++t) CHECK(k0.tensors[t] == q.tensors[t]);

  // scalar case: theta_k=1, theta_q=0, m=0.9 -> 0.9
  for (auto& tq : q.tensors) std::fill(tq.begin(), tq.end(), 0.0f);
  for (auto& tk : k.tensors) std::fill(tk.begin(), tk.end(), 1.0f);
  momentum_update(k, q, 0.9);
  CHECK(k.tensors[0][0] == doctest::Approx(0.9));

  // repeated updates approach theta_q geometrically with ratio m
  double prev = std::abs(double(k.tensors[0][0]));
  for (int i = 0; i < 5; ++i) {
    momentum_update(k, q, 0.9);
    const double cur = std::abs(double(k.tensors[0][0]));
    CHECK(cur == doctest::Approx(prev * 0.9).epsilon(1e-5));
    prev = cur;
  }
}

TEST_CASE("momentum update rejects shape mismatch") {
  auto q = init_encoder<float>(small_arch(2, 12), 1);
  auto k = init_encoder<float>(small_arch(3, 12), 1);
  CHECK_THROWS_AS(momentum_update(k, q, 0.5), std::invalid_argument);
}

TEST_SUITE_END();
