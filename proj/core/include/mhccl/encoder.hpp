#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mhccl/matrix.hpp"

namespace mhccl {

// Temporal convolution stack: V -> channels[0] -> ... -> channels.back(),
// each block a same-padded 1-D convolution over time followed by ReLU, then
// global average pooling over time and an affine map to embed_dim.
struct EncoderArch {
  int input_channels = 0;  // V
  int input_length = 0;    // T
  std::vector<int> channels{32, 64, 128};
  std::vector<int> kernels{8, 5, 3};
  int embed_dim = 128;

  void validate() const;
  std::size_t param_count() const;
  std::string canonical_text() const;
  static EncoderArch from_text(const std::string& text);
  bool operator==(const EncoderArch&) const = default;
};

// All trainable tensors in fixed order: for each conv block its kernel
// [out_c][in_c][k] then bias [out_c]; finally the affine weight
// [embed_dim][channels.back()] and bias [embed_dim]. Checkpoints, gradients
// and velocity buffers all follow this order.
template <class S>
struct EncoderParamsT {
  EncoderArch arch;
  std::vector<std::vector<S>> tensors;
  std::uint64_t version = 0;  // bumped on every mutation

  std::size_t tensor_count() const { return tensors.size(); }

  template <class U>
  EncoderParamsT<U> cast() const {
    EncoderParamsT<U> out;
    out.arch = arch;
    out.version = version;
    out.tensors.reserve(tensors.size());
    for (const auto& t : tensors) {
      std::vector<U> u(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) u[i] = static_cast<U>(t[i]);
      out.tensors.push_back(std::move(u));
    }
    return out;
  }
};

using EncoderParams = EncoderParamsT<float>;

template <class S>
struct EncoderGradsT {
  std::vector<std::vector<S>> tensors;  // same order/shapes as the params
  Mat<S> input_grad;                    // filled only when requested
};

template <class S>
struct ForwardCacheT {
  std::uint64_t params_version = 0;
  std::size_t batch = 0;
  std::vector<Mat<S>> layer_input;  // per conv block: B x (T * in_c)
  std::vector<Mat<S>> preact;       // per conv block: B x (T * out_c)
  Mat<S> pooled;                    // B x channels.back()
};

template <class S>
struct SgdStateT {
  std::vector<std::vector<S>> velocity;
};

// Glorot-uniform kernels, zero biases; deterministic in the seed.
template <class S>
EncoderParamsT<S> init_encoder(const EncoderArch& arch, std::uint64_t seed);

// batch is B x (T*V), time-major/variable-minor per row. Returns raw
// (unnormalized) embeddings B x embed_dim. threads > 1 parallelizes across
// instances; per-row results are bitwise independent of the thread count.
template <class S>
Mat<S> forward(const EncoderParamsT<S>& params, const Mat<S>& batch, ForwardCacheT<S>* cache,
               int threads = 1);

// Exact gradients of sum_ij grad_embeddings[i][j] * embeddings[i][j] with
// respect to every parameter tensor (64-bit accumulation, fixed order).
template <class S>
EncoderGradsT<S> backward(const EncoderParamsT<S>& params, const ForwardCacheT<S>& cache,
                          const Mat<S>& grad_embeddings, bool want_input_grad = false);

// v <- momentum * v + grad + weight_decay * param; param <- param - lr * v.
template <class S>
void sgd_step(EncoderParamsT<S>& params, SgdStateT<S>& state, const EncoderGradsT<S>& grads,
              double lr, double momentum, double weight_decay);

// theta_k <- theta_q + m * (theta_k - theta_q), elementwise in double.
template <class S>
void momentum_update(EncoderParamsT<S>& theta_k, const EncoderParamsT<S>& theta_q, double m);

}  // namespace mhccl
