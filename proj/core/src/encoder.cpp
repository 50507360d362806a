#include "mhccl/encoder.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mhccl/rng.hpp"

namespace mhccl {

void EncoderArch::validate() const {
  if (input_channels < 1 || input_length < 1)
    throw std::invalid_argument("encoder: input dimensions must be positive");
  if (channels.empty() || channels.size() != kernels.size())
    throw std::invalid_argument("encoder: channels/kernels size mismatch");
  for (std::size_t l = 0; l < channels.size(); ++l) {
    if (channels[l] < 1) throw std::invalid_argument("encoder: channel count must be positive");
    if (kernels[l] < 1 || kernels[l] > input_length)
      throw std::invalid_argument("encoder: kernel width " + std::to_string(kernels[l]) +
                                  " exceeds input length " + std::to_string(input_length));
  }
  if (embed_dim < 1) throw std::invalid_argument("encoder: embed_dim must be positive");
}

std::size_t EncoderArch::param_count() const {
  std::size_t total = 0;
  int in_c = input_channels;
  for (std::size_t l = 0; l < channels.size(); ++l) {
    total += static_cast<std::size_t>(channels[l]) * in_c * kernels[l] + channels[l];
    in_c = channels[l];
  }
  total += static_cast<std::size_t>(embed_dim) * channels.back() + embed_dim;
  return total;
}

std::string EncoderArch::canonical_text() const {
  std::ostringstream out;
  out << "arch.input_channels=" << input_channels << "\n";
  out << "arch.input_length=" << input_length << "\n";
  out << "arch.channels=";
  for (std::size_t i = 0; i < channels.size(); ++i) out << (i ? "," : "") << channels[i];
  out << "\narch.kernels=";
  for (std::size_t i = 0; i < kernels.size(); ++i) out << (i ? "," : "") << kernels[i];
  out << "\narch.embed_dim=" << embed_dim << "\n";
  return out.str();
}

EncoderArch EncoderArch::from_text(const std::string& text) {
  EncoderArch arch;
  arch.channels.clear();
  arch.kernels.clear();
  std::istringstream in(text);
  std::string line;
  auto parse_list = [](const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
  };
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "arch.input_channels") arch.input_channels = std::stoi(val);
    else if (key == "arch.input_length") arch.input_length = std::stoi(val);
    else if (key == "arch.channels") arch.channels = parse_list(val);
    else if (key == "arch.kernels") arch.kernels = parse_list(val);
    else if (key == "arch.embed_dim") arch.embed_dim = std::stoi(val);
  }
  arch.validate();
  return arch;
}

namespace {

// Tensor shapes in checkpoint order. index pairs: (conv w, conv b)*, fc w, fc b.
std::vector<std::size_t> tensor_sizes(const EncoderArch& arch) {
  std::vector<std::size_t> sizes;
  int in_c = arch.input_channels;
  for (std::size_t l = 0; l < arch.channels.size(); ++l) {
    sizes.push_back(static_cast<std::size_t>(arch.channels[l]) * in_c * arch.kernels[l]);
    sizes.push_back(static_cast<std::size_t>(arch.channels[l]));
    in_c = arch.channels[l];
  }
  sizes.push_back(static_cast<std::size_t>(arch.embed_dim) * arch.channels.back());
  sizes.push_back(static_cast<std::size_t>(arch.embed_dim));
  return sizes;
}

}  // namespace

template <class S>
EncoderParamsT<S> init_encoder(const EncoderArch& arch, std::uint64_t seed) {
  arch.validate();
  EncoderParamsT<S> params;
  params.arch = arch;
  Rng rng(derive_seed(seed, 0xe4c0de));

  int in_c = arch.input_channels;
  for (std::size_t l = 0; l < arch.channels.size(); ++l) {
    const int out_c = arch.channels[l];
    const int k = arch.kernels[l];
    const double fan_in = static_cast<double>(in_c) * k;
    const double fan_out = static_cast<double>(out_c) * k;
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<S> w(static_cast<std::size_t>(out_c) * in_c * k);
    for (auto& x : w) x = static_cast<S>(a * (2.0 * rng.uniform01() - 1.0));
    params.tensors.push_back(std::move(w));
    params.tensors.emplace_back(out_c, S{0});
    in_c = out_c;
  }
  const double a_fc = std::sqrt(6.0 / (arch.channels.back() + arch.embed_dim));
  std::vector<S> w_fc(static_cast<std::size_t>(arch.embed_dim) * arch.channels.back());
  for (auto& x : w_fc) x = static_cast<S>(a_fc * (2.0 * rng.uniform01() - 1.0));
  params.tensors.push_back(std::move(w_fc));
  params.tensors.emplace_back(arch.embed_dim, S{0});
  params.version = 1;
  return params;
}

template <class S>
Mat<S> forward(const EncoderParamsT<S>& params, const Mat<S>& batch, ForwardCacheT<S>* cache,
               int threads) {
  const EncoderArch& arch = params.arch;
  const std::size_t B = batch.rows;
  const int T = arch.input_length;
  const int V = arch.input_channels;
  if (batch.cols != static_cast<std::size_t>(T) * V)
    throw std::invalid_argument("encoder forward: batch width does not match T*V");
  for (const S& x : batch.data)
    if (!std::isfinite(static_cast<double>(x)))
      throw std::runtime_error("encoder forward: non-finite input");

  const std::size_t L = arch.channels.size();
  ForwardCacheT<S> local;
  ForwardCacheT<S>& c = cache ? *cache : local;
  c.params_version = params.version;
  c.batch = B;
  c.layer_input.assign(L, {});
  c.preact.assign(L, {});
  int in_c = V;
  for (std::size_t l = 0; l < L; ++l) {
    c.layer_input[l] = Mat<S>(B, static_cast<std::size_t>(T) * in_c);
    c.preact[l] = Mat<S>(B, static_cast<std::size_t>(T) * arch.channels[l]);
    in_c = arch.channels[l];
  }
  c.pooled = Mat<S>(B, arch.channels.back());
  Mat<S> emb(B, arch.embed_dim);

  auto run_rows = [&](std::size_t r0, std::size_t r1) {
    for (std::size_t r = r0; r < r1; ++r) {
      std::copy(batch[r], batch[r] + batch.cols, c.layer_input[0][r]);
      int cin = V;
      for (std::size_t l = 0; l < L; ++l) {
        const int cout = arch.channels[l];
        const int k = arch.kernels[l];
        const int pad = (k - 1) / 2;
        const S* w = params.tensors[2 * l].data();
        const S* b = params.tensors[2 * l + 1].data();
        const S* in = c.layer_input[l][r];
        S* pre = c.preact[l][r];
        for (int t = 0; t < T; ++t) {
          for (int oc = 0; oc < cout; ++oc) {
            double acc = static_cast<double>(b[oc]);
            const S* wrow = w + static_cast<std::size_t>(oc) * cin * k;
            for (int dt = 0; dt < k; ++dt) {
              const int s = t + dt - pad;
              if (s < 0 || s >= T) continue;
              const S* src = in + static_cast<std::size_t>(s) * cin;
              for (int ic = 0; ic < cin; ++ic)
                acc += static_cast<double>(wrow[static_cast<std::size_t>(ic) * k + dt]) * src[ic];
            }
            pre[static_cast<std::size_t>(t) * cout + oc] = static_cast<S>(acc);
          }
        }
        if (l + 1 < L) {
          S* nxt = c.layer_input[l + 1][r];
          for (std::size_t i = 0; i < static_cast<std::size_t>(T) * cout; ++i)
            nxt[i] = pre[i] > S{0} ? pre[i] : S{0};
        } else {
          // ReLU + global average pool over time (64-bit accumulation)
          for (int ch = 0; ch < cout; ++ch) {
            double acc = 0.0;
            for (int t = 0; t < T; ++t) {
              const S x = pre[static_cast<std::size_t>(t) * cout + ch];
              if (x > S{0}) acc += static_cast<double>(x);
            }
            c.pooled[r][ch] = static_cast<S>(acc / T);
          }
        }
        cin = cout;
      }
      const S* w_fc = params.tensors[2 * L].data();
      const S* b_fc = params.tensors[2 * L + 1].data();
      const int C = arch.channels.back();
      for (int d = 0; d < arch.embed_dim; ++d) {
        double acc = static_cast<double>(b_fc[d]);
        const S* wrow = w_fc + static_cast<std::size_t>(d) * C;
        for (int ch = 0; ch < C; ++ch)
          acc += static_cast<double>(wrow[ch]) * static_cast<double>(c.pooled[r][ch]);
        emb[r][d] = static_cast<S>(acc);
      }
    }
  };

  if (threads <= 1 || B < 2) {
    run_rows(0, B);
  } else {
    const std::size_t nthreads = std::min<std::size_t>(threads, B);
    std::vector<std::thread> pool;
    const std::size_t chunk = (B + nthreads - 1) / nthreads;
    for (std::size_t w = 0; w < nthreads; ++w) {
      const std::size_t r0 = w * chunk;
      const std::size_t r1 = std::min(B, r0 + chunk);
      if (r0 >= r1) break;
      pool.emplace_back(run_rows, r0, r1);
    }
    for (auto& th : pool) th.join();
  }
  return emb;
}

template <class S>
EncoderGradsT<S> backward(const EncoderParamsT<S>& params, const ForwardCacheT<S>& cache,
                          const Mat<S>& grad_embeddings, bool want_input_grad) {
  if (cache.params_version != params.version)
    throw std::runtime_error("encoder backward: stale forward cache");
  const EncoderArch& arch = params.arch;
  const std::size_t B = cache.batch;
  if (grad_embeddings.rows != B ||
      grad_embeddings.cols != static_cast<std::size_t>(arch.embed_dim))
    throw std::invalid_argument("encoder backward: gradient shape mismatch");

  const std::size_t L = arch.channels.size();
  const int T = arch.input_length;

  // 64-bit accumulators in fixed (tensor, element) order; instances outermost.
  std::vector<std::vector<double>> acc;
  for (const auto& t : params.tensors) acc.emplace_back(t.size(), 0.0);

  EncoderGradsT<S> grads;
  if (want_input_grad)
    grads.input_grad = Mat<S>(B, static_cast<std::size_t>(T) * arch.input_channels);

  const int C_last = arch.channels.back();
  std::vector<double> d_out, d_in;
  for (std::size_t r = 0; r < B; ++r) {
    // affine layer
    const S* g = grad_embeddings[r];
    std::vector<double> d_pool(C_last, 0.0);
    const S* w_fc = params.tensors[2 * L].data();
    for (int d = 0; d < arch.embed_dim; ++d) {
      const double gd = static_cast<double>(g[d]);
      acc[2 * L + 1][d] += gd;  // fc bias
      const S* wrow = w_fc + static_cast<std::size_t>(d) * C_last;
      double* arow = acc[2 * L].data() + static_cast<std::size_t>(d) * C_last;
      for (int ch = 0; ch < C_last; ++ch) {
        arow[ch] += gd * static_cast<double>(cache.pooled[r][ch]);
        d_pool[ch] += gd * static_cast<double>(wrow[ch]);
      }
    }

    // pooling: every timestep shares d_pool / T, gated by the last ReLU
    d_out.assign(static_cast<std::size_t>(T) * C_last, 0.0);
    for (int t = 0; t < T; ++t)
      for (int ch = 0; ch < C_last; ++ch)
        d_out[static_cast<std::size_t>(t) * C_last + ch] = d_pool[ch] / T;

    // conv blocks, last to first
    for (std::size_t li = L; li-- > 0;) {
      const int cout = arch.channels[li];
      const int cin = li == 0 ? arch.input_channels : arch.channels[li - 1];
      const int k = arch.kernels[li];
      const int pad = (k - 1) / 2;
      const S* pre = cache.preact[li][r];
      const S* in = cache.layer_input[li][r];
      const S* w = params.tensors[2 * li].data();

      // ReLU gate
      for (std::size_t i = 0; i < d_out.size(); ++i)
        if (static_cast<double>(pre[i]) <= 0.0) d_out[i] = 0.0;

      double* wacc = acc[2 * li].data();
      double* bacc = acc[2 * li + 1].data();
      const bool need_din = li > 0 || want_input_grad;
      if (need_din) d_in.assign(static_cast<std::size_t>(T) * cin, 0.0);

      for (int t = 0; t < T; ++t) {
        for (int oc = 0; oc < cout; ++oc) {
          const double dpre = d_out[static_cast<std::size_t>(t) * cout + oc];
          if (dpre == 0.0) continue;
          bacc[oc] += dpre;
          const S* wrow = w + static_cast<std::size_t>(oc) * cin * k;
          double* warow = wacc + static_cast<std::size_t>(oc) * cin * k;
          for (int dt = 0; dt < k; ++dt) {
            const int s = t + dt - pad;
            if (s < 0 || s >= T) continue;
            const S* src = in + static_cast<std::size_t>(s) * cin;
            for (int ic = 0; ic < cin; ++ic) {
              warow[static_cast<std::size_t>(ic) * k + dt] +=
                  dpre * static_cast<double>(src[ic]);
              if (need_din)
                d_in[static_cast<std::size_t>(s) * cin + ic] +=
                    dpre * static_cast<double>(wrow[static_cast<std::size_t>(ic) * k + dt]);
            }
          }
        }
      }
      if (li == 0 && want_input_grad) {
        for (std::size_t i = 0; i < d_in.size(); ++i)
          grads.input_grad[r][i] = static_cast<S>(d_in[i]);
      }
      if (need_din) d_out = d_in;
    }
  }

  grads.tensors.reserve(acc.size());
  for (const auto& a : acc) {
    std::vector<S> t(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) t[i] = static_cast<S>(a[i]);
    grads.tensors.push_back(std::move(t));
  }
  return grads;
}

template <class S>
void sgd_step(EncoderParamsT<S>& params, SgdStateT<S>& state, const EncoderGradsT<S>& grads,
              double lr, double momentum, double weight_decay) {
  if (lr <= 0.0) throw std::invalid_argument("sgd: lr must be > 0");
  if (grads.tensors.size() != params.tensors.size())
    throw std::invalid_argument("sgd: gradient/parameter tensor count mismatch");
  if (state.velocity.empty()) {
    for (const auto& t : params.tensors) state.velocity.emplace_back(t.size(), S{0});
  }
  for (const auto& t : grads.tensors)
    for (const S& g : t)
      if (!std::isfinite(static_cast<double>(g)))
        throw std::runtime_error("sgd: non-finite gradient");

  for (std::size_t ti = 0; ti < params.tensors.size(); ++ti) {
    auto& p = params.tensors[ti];
    auto& v = state.velocity[ti];
    const auto& g = grads.tensors[ti];
    if (p.size() != g.size() || p.size() != v.size())
      throw std::invalid_argument("sgd: tensor size mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double vel = momentum * static_cast<double>(v[i]) + static_cast<double>(g[i]) +
                         weight_decay * static_cast<double>(p[i]);
      v[i] = static_cast<S>(vel);
      p[i] = static_cast<S>(static_cast<double>(p[i]) - lr * static_cast<double>(v[i]));
    }
  }
  ++params.version;
}

template <class S>
void momentum_update(EncoderParamsT<S>& theta_k, const EncoderParamsT<S>& theta_q, double m) {
  if (m < 0.0 || m >= 1.0) throw std::invalid_argument("momentum coefficient must lie in [0, 1)");
  if (theta_k.tensors.size() != theta_q.tensors.size())
    throw std::invalid_argument("momentum update: tensor count mismatch");
  for (std::size_t ti = 0; ti < theta_k.tensors.size(); ++ti) {
    auto& k = theta_k.tensors[ti];
    const auto& q = theta_q.tensors[ti];
    if (k.size() != q.size()) throw std::invalid_argument("momentum update: shape mismatch");
    for (std::size_t i = 0; i < k.size(); ++i) {
      const double diff = static_cast<double>(k[i]) - static_cast<double>(q[i]);
      k[i] = static_cast<S>(static_cast<double>(q[i]) + m * diff);
    }
  }
  ++theta_k.version;
}

template EncoderParamsT<float> init_encoder<float>(const EncoderArch&, std::uint64_t);
template EncoderParamsT<double> init_encoder<double>(const EncoderArch&, std::uint64_t);
template Mat<float> forward<float>(const EncoderParamsT<float>&, const Mat<float>&,
                                   ForwardCacheT<float>*, int);
template Mat<double> forward<double>(const EncoderParamsT<double>&, const Mat<double>&,
                                     ForwardCacheT<double>*, int);
template EncoderGradsT<float> backward<float>(const EncoderParamsT<float>&,
                                              const ForwardCacheT<float>&, const Mat<float>&,
                                              bool);
template EncoderGradsT<double> backward<double>(const EncoderParamsT<double>&,
                                                const ForwardCacheT<double>&, const Mat<double>&,
                                                bool);
template void sgd_step<float>(EncoderParamsT<float>&, SgdStateT<float>&,
                              const EncoderGradsT<float>&, double, double, double);
template void sgd_step<double>(EncoderParamsT<double>&, SgdStateT<double>&,
                               const EncoderGradsT<double>&, double, double, double);
template void momentum_update<float>(EncoderParamsT<float>&, const EncoderParamsT<float>&, double);
template void momentum_update<double>(EncoderParamsT<double>&, const EncoderParamsT<double>&,
                                      double);

}  // namespace mhccl
