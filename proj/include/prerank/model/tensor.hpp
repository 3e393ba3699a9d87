/*
 * Copyright 2026 The Prerank Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "prerank/core/error.hpp"
#include "prerank/core/random.hpp"

namespace prerank::model {

// Dense row-major tensor with its gradient buffer.
template <typename T>
struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> value;
  std::vector<T> grad;

  std::size_t size() const { return value.size(); }
  std::span<T> row(std::size_t r) { return {value.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const { return {value.data() + r * cols, cols}; }
  std::span<T> grad_row(std::size_t r) { return {grad.data() + r * cols, cols}; }
};

template <typename T>
class ParamSet {
 public:
  std::size_t Add(std::string name, std::size_t rows, std::size_t cols) {
    Tensor<T> t;
    t.name = std::move(name);
    t.rows = rows;
    t.cols = cols;
    t.value.assign(rows * cols, T(0));
    t.grad.assign(rows * cols, T(0));
    tensors_.push_back(std::move(t));
    return tensors_.size() - 1;
  }

  Tensor<T>& operator[](std::size_t handle) { return tensors_[handle]; }
  const Tensor<T>& operator[](std::size_t handle) const { return tensors_[handle]; }
  std::size_t size() const { return tensors_.size(); }
  std::vector<Tensor<T>>& tensors() { return tensors_; }
  const std::vector<Tensor<T>>& tensors() const { return tensors_; }

  std::size_t Find(const std::string& name) const {
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      if (tensors_[i].name == name) return i;
    }
    throw Error(ErrorCode::kLayoutMismatch, "no parameter named " + name);
  }

  std::size_t ParameterCount() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  void ZeroGrad() {
    for (auto& t : tensors_) std::fill(t.grad.begin(), t.grad.end(), T(0));
  }

  bool AllFinite() const {
    for (const auto& t : tensors_) {
      for (T v : t.value) {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

  template <typename U>
  ParamSet<U> Cast() const {
    ParamSet<U> out;
    for (const auto& t : tensors_) {
      const std::size_t h = out.Add(t.name, t.rows, t.cols);
      std::transform(t.value.begin(), t.value.end(), out[h].value.begin(),
                     [](T v) { return static_cast<U>(v); });
    }
    return out;
  }

 private:
  std::vector<Tensor<T>> tensors_;
};

// y = W x (+ b), W is rows x cols.
template <typename T>
void MatVec(std::span<const T> w, std::span<const T> bias, std::span<const T> x, std::span<T> y) {
  const std::size_t rows = y.size(), cols = x.size();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* wr = w.data() + r * cols;
    T acc = bias.empty() ? T(0) : bias[r];
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

// dx += W^T dy.
template <typename T>
void MatTVecAdd(std::span<const T> w, std::span<const T> dy, std::span<T> dx) {
  const std::size_t rows = dy.size(), cols = dx.size();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* wr = w.data() + r * cols;
    const T g = dy[r];
    if (g == T(0)) continue;
    for (std::size_t c = 0; c < cols; ++c) dx[c] += wr[c] * g;
  }
}

// G += dy x^T.
template <typename T>
void OuterAdd(std::span<T> g, std::span<const T> dy, std::span<const T> x) {
  const std::size_t rows = dy.size(), cols = x.size();
  for (std::size_t r = 0; r < rows; ++r) {
    const T d = dy[r];
    if (d == T(0)) continue;
    T* gr = g.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) gr[c] += d * x[c];
  }
}

template <typename T>
T Dot(std::span<const T> a, std::span<const T> b) {
  T acc = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
T Softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
T Sigmoid(T x) {
  if (x >= T(0)) {
    const T z = std::exp(-x);
    return T(1) / (T(1) + z);
  }
  const T z = std::exp(x);
  return z / (T(1) + z);
}

// In-place softmax.
template <typename T>
void Softmax(std::span<T> v) {
  if (v.empty()) return;
  const T mx = *std::max_element(v.begin(), v.end());
  T sum = T(0);
  for (T& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (T& x : v) x /= sum;
}

template <typename T>
void FillUniform(std::span<T> v, double bound, Rng& rng) {
  for (T& x : v) x = static_cast<T>(rng.Uniform(-bound, bound));
}

}  // namespace prerank::model
