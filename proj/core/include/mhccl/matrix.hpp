#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace mhccl {

// Dense row-major matrix. Rows are the unit of access everywhere in this
// project (instances, embeddings, prototypes).
template <class T>
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

  T* operator[](std::size_t r) { return data.data() + r * cols; }
  const T* operator[](std::size_t r) const { return data.data() + r * cols; }

  std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  void fill(T v) { data.assign(data.size(), v); }

  template <class U>
  Mat<U> cast() const {
    Mat<U> out(rows, cols);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using MatF = Mat<float>;
using MatD = Mat<double>;

template <class T, class U>
double squared_distance(std::span<T> a, std::span<U> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

template <class T>
double row_norm(std::span<T> a) {
  double acc = 0.0;
  for (const auto& x : a) acc += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(acc);
}

// In-place L2 row normalization; zero rows are left untouched.
template <class T>
void l2_normalize_rows(Mat<T>& m) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double n = row_norm(m.row(r));
    if (n > 0.0) {
      for (std::size_t c = 0; c < m.cols; ++c)
        m[r][c] = static_cast<T>(static_cast<double>(m[r][c]) / n);
    }
  }
}

}  // namespace mhccl
