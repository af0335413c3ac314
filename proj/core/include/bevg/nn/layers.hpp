// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "bevg/nn/ops.hpp"
#include "bevg/random.hpp"

namespace bevg::nn {

/// Uniform(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
std::vector<double> xavier_uniform(Rng& rng, std::size_t n, int fan_in, int fan_out);
/// Normal(0, sqrt(2 / fan_in)).
std::vector<double> kaiming_normal(Rng& rng, std::size_t n, int fan_in);

struct Linear {
  std::string name;
  int in = 0;
  int out = 0;
  bool bias = true;

  static Linear create(ParamStore& ps, Rng& rng, const std::string& name, int in, int out, bool bias = true,
                       double bias_init = 0.0);
  Var operator()(Tape& t, ParamStore& ps, Var x) const;  // x [n, in]
};

struct Conv2d {
  std::string name;
  int in = 0;
  int out = 0;
  int kernel = 1;
  Conv2dGeometry geom;
  bool bias = true;

  static Conv2d create(ParamStore& ps, Rng& rng, const std::string& name, int in, int out, int kernel,
                       int stride = 1, bool bias = true, double bias_init = 0.0, bool zero_init = false);
  Var operator()(Tape& t, ParamStore& ps, Var x) const;  // x [in, H, W]
};

struct LayerNorm {
  std::string name;
  int dim = 0;

  static LayerNorm create(ParamStore& ps, const std::string& name, int dim);
  Var operator()(Tape& t, ParamStore& ps, Var x) const;
};

/// Linear -> ReLU -> Linear.
struct Mlp {
  Linear fc1;
  Linear fc2;

  static Mlp create(ParamStore& ps, Rng& rng, const std::string& name, int in, int hidden, int out);
  Var operator()(Tape& t, ParamStore& ps, Var x) const;
};

struct AttentionOutput {
  Var out;                          // [nq, d]
  std::vector<std::vector<double>> weights;  // per head, row-major [nq, nk]
};

struct MultiHeadAttention {
  std::string name;
  int dim = 0;
  int heads = 1;
  Linear q, k, v, o;

  static MultiHeadAttention create(ParamStore& ps, Rng& rng, const std::string& name, int dim, int heads);
  /// query [nq, d]; key/value [nk, d]. Softmax over keys of QK^T / sqrt(d_head).
  AttentionOutput operator()(Tape& t, ParamStore& ps, Var query, Var key, Var value,
                             bool keep_weights = false) const;
};

/// x <- LN(x + MHA(x + qpos, kv + kpos, kv)); x <- LN(x + FFN(x)).
struct AttentionBlock {
  MultiHeadAttention attn;
  LayerNorm norm1;
  Mlp ffn;
  LayerNorm norm2;

  static AttentionBlock create(ParamStore& ps, Rng& rng, const std::string& name, int dim, int heads,
                               int ffn_dim);
  AttentionOutput operator()(Tape& t, ParamStore& ps, Var x, Var qpos, Var kv, Var kpos,
                             bool keep_weights = false) const;
};

}  // namespace bevg::nn
