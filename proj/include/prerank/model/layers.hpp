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

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "prerank/core/error.hpp"
#include "prerank/core/random.hpp"
#include "prerank/model/tensor.hpp"

namespace prerank::model {

// Fully connected layer, weight stored out x in.
struct Dense {
  std::size_t w = 0;
  std::size_t b = 0;
  std::size_t in = 0;
  std::size_t out = 0;

  template <typename T>
  static Dense Create(ParamSet<T>& p, const std::string& name, std::size_t in, std::size_t out,
                      Rng* rng) {
    Dense d{p.Add(name + ".w", out, in), p.Add(name + ".b", 1, out), in, out};
    if (rng != nullptr) FillUniform<T>(p[d.w].value, std::sqrt(6.0 / static_cast<double>(in)), *rng);
    return d;
  }

  template <typename T>
  void Forward(const ParamSet<T>& p, std::span<const T> x, std::span<T> y) const {
    MatVec<T>(p[w].value, p[b].value, x, y);
  }

  // Accumulates parameter gradients; adds W^T dy into dx when dx is non-empty.
  template <typename T>
  void Backward(ParamSet<T>& p, std::span<const T> x, std::span<const T> dy, std::span<T> dx) const {
    OuterAdd<T>(p[w].grad, dy, x);
    auto& gb = p[b].grad;
    for (std::size_t i = 0; i < out; ++i) gb[i] += dy[i];
    if (!dx.empty()) MatTVecAdd<T>(p[w].value, dy, dx);
  }
};

// Instance-guided mask: the input is gated elementwise by a softplus mask
// generated from the same input, then passed through a ReLU layer.
struct MaskBlock {
  Dense gen1;
  Dense gen2;
  Dense output;

  template <typename T>
  struct Trace {
    std::vector<T> h1, a1, h2, mask, z, pre;
  };

  template <typename T>
  static MaskBlock Create(ParamSet<T>& p, const std::string& name, std::size_t in, std::size_t hidden,
                          std::size_t out, Rng* rng) {
    MaskBlock m;
    m.gen1 = Dense::Create(p, name + ".gen1", in, hidden, rng);
    m.gen2 = Dense::Create(p, name + ".gen2", hidden, in, rng);
    m.output = Dense::Create(p, name + ".out", in, out, rng);
    if (rng != nullptr) {
      // softplus(ln(e - 1)) == 1: the mask starts near identity.
      const T start = static_cast<T>(std::log(std::exp(1.0) - 1.0));
      for (T& v : p[m.gen2.b].value) v = start;
    }
    return m;
  }

  template <typename T>
  void Forward(const ParamSet<T>& p, std::span<const T> x, Trace<T>& t, std::span<T> y) const {
    t.h1.assign(gen1.out, T(0));
    gen1.Forward<T>(p, x, t.h1);
    t.a1 = t.h1;
    for (T& v : t.a1) v = v > T(0) ? v : T(0);
    t.h2.assign(gen2.out, T(0));
    gen2.Forward<T>(p, t.a1, t.h2);
    t.mask.resize(t.h2.size());
    t.z.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      t.mask[i] = Softplus(t.h2[i]);
      t.z[i] = x[i] * t.mask[i];
    }
    t.pre.assign(output.out, T(0));
    output.Forward<T>(p, t.z, t.pre);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = t.pre[i] > T(0) ? t.pre[i] : T(0);
  }

  template <typename T>
  void Backward(ParamSet<T>& p, std::span<const T> x, const Trace<T>& t, std::span<const T> dy,
                std::span<T> dx) const {
    std::vector<T> dpre(dy.begin(), dy.end());
    for (std::size_t i = 0; i < dpre.size(); ++i) {
      if (t.pre[i] <= T(0)) dpre[i] = T(0);
    }
    std::vector<T> dz(x.size(), T(0));
    output.Backward<T>(p, t.z, dpre, dz);
    std::vector<T> dh2(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      dx[i] += dz[i] * t.mask[i];
      dh2[i] = dz[i] * x[i] * Sigmoid(t.h2[i]);
    }
    std::vector<T> da1(gen1.out, T(0));
    gen2.Backward<T>(p, t.a1, dh2, da1);
    for (std::size_t i = 0; i < da1.size(); ++i) {
      if (t.h1[i] <= T(0)) da1[i] = T(0);
    }
    gen1.Backward<T>(p, x, da1, dx);
  }
};

// Optional parallel mask blocks followed by ReLU hidden layers and a linear
// output layer.
struct Tower {
  std::vector<MaskBlock> blocks;
  std::vector<Dense> layers;
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;

  template <typename T>
  struct Trace {
    std::vector<T> input;
    std::vector<typename MaskBlock::template Trace<T>> blocks;
    std::vector<std::vector<T>> layer_in;
    std::vector<std::vector<T>> layer_pre;
    std::vector<T> output;
  };

  template <typename T>
  static Tower Create(ParamSet<T>& p, const std::string& name, std::size_t input_dim,
                      std::size_t num_blocks, std::size_t mask_hidden, std::size_t block_out,
                      const std::vector<int>& hidden, std::size_t output_dim, Rng* rng) {
    Tower tw;
    tw.input_dim = input_dim;
    tw.output_dim = output_dim;
    std::size_t width = input_dim;
    if (num_blocks > 0) {
      for (std::size_t i = 0; i < num_blocks; ++i) {
        tw.blocks.push_back(MaskBlock::Create(p, name + ".mask" + std::to_string(i), input_dim,
                                              mask_hidden, block_out, rng));
      }
      width = num_blocks * block_out;
    }
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      const auto h = static_cast<std::size_t>(hidden[i]);
      tw.layers.push_back(Dense::Create(p, name + ".ffn" + std::to_string(i), width, h, rng));
      width = h;
    }
    tw.layers.push_back(Dense::Create(p, name + ".final", width, output_dim, rng));
    return tw;
  }

  template <typename T>
  void Forward(const ParamSet<T>& p, Trace<T>& t) const {
    if (t.input.size() != input_dim) {
      throw Error(ErrorCode::kDimensionMismatch, "tower input has wrong width");
    }
    std::vector<T> h;
    if (blocks.empty()) {
      h = t.input;
    } else {
      const std::size_t bo = blocks.front().output.out;
      h.assign(blocks.size() * bo, T(0));
      t.blocks.resize(blocks.size());
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        blocks[i].Forward<T>(p, t.input, t.blocks[i], std::span<T>(h).subspan(i * bo, bo));
      }
    }
    t.layer_in.resize(layers.size());
    t.layer_pre.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      t.layer_in[l] = std::move(h);
      t.layer_pre[l].assign(layers[l].out, T(0));
      layers[l].Forward<T>(p, t.layer_in[l], t.layer_pre[l]);
      h = t.layer_pre[l];
      if (l + 1 < layers.size()) {
        for (T& v : h) v = v > T(0) ? v : T(0);
      }
    }
    t.output = std::move(h);
  }

  // Returns the gradient with respect to the tower input.
  template <typename T>
  std::vector<T> Backward(ParamSet<T>& p, const Trace<T>& t, std::span<const T> dout) const {
    std::vector<T> d(dout.begin(), dout.end());
    for (std::size_t l = layers.size(); l-- > 0;) {
      if (l + 1 < layers.size()) {
        for (std::size_t i = 0; i < d.size(); ++i) {
          if (t.layer_pre[l][i] <= T(0)) d[i] = T(0);
        }
      }
      std::vector<T> dx(layers[l].in, T(0));
      layers[l].Backward<T>(p, t.layer_in[l], d, dx);
      d = std::move(dx);
    }
    if (blocks.empty()) return d;
    std::vector<T> dinput(input_dim, T(0));
    const std::size_t bo = blocks.front().output.out;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      blocks[i].Backward<T>(p, t.input, t.blocks[i], std::span<const T>(d).subspan(i * bo, bo),
                            dinput);
    }
    return dinput;
  }
};

}  // namespace prerank::model
