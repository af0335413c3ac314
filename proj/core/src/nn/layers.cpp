// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace bevg::nn {

std::vector<double> xavier_uniform(Rng& rng, std::size_t n, int fan_in, int fan_out) {
  const double b = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<double> v(n);
  for (double& x : v) x = static_cast<float>(rng.uniform(-b, b));
  return v;
}

std::vector<double> kaiming_normal(Rng& rng, std::size_t n, int fan_in) {
  const double s = std::sqrt(2.0 / fan_in);
  std::vector<double> v(n);
  for (double& x : v) x = static_cast<float>(rng.normal(0.0, s));
  return v;
}

Linear Linear::create(ParamStore& ps, Rng& rng, const std::string& name, int in, int out, bool bias,
                      double bias_init) {
  Linear l{name, in, out, bias};
  ps.add(name + ".weight", {in, out}, xavier_uniform(rng, static_cast<std::size_t>(in) * out, in, out));
  if (bias) ps.add(name + ".bias", {out}, std::vector<double>(out, static_cast<float>(bias_init)));
  return l;
}

Var Linear::operator()(Tape& t, ParamStore& ps, Var x) const {
  Var y = matmul(x, t.param(ps.get(name + ".weight")));
  if (bias) y = add_row_bias(y, t.param(ps.get(name + ".bias")));
  return y;
}

Conv2d Conv2d::create(ParamStore& ps, Rng& rng, const std::string& name, int in, int out, int kernel,
                      int stride, bool bias, double bias_init, bool zero_init) {
  Conv2d c{name, in, out, kernel, {stride, kernel / 2}, bias};
  const std::size_t n = static_cast<std::size_t>(out) * in * kernel * kernel;
  ps.add(name + ".weight", {out, in, kernel, kernel},
         zero_init ? std::vector<double>(n, 0.0) : kaiming_normal(rng, n, in * kernel * kernel));
  if (bias) ps.add(name + ".bias", {out}, std::vector<double>(out, static_cast<float>(bias_init)));
  return c;
}

Var Conv2d::operator()(Tape& t, ParamStore& ps, Var x) const {
  Var w = t.param(ps.get(name + ".weight"));
  if (bias) return conv2d(x, w, t.param(ps.get(name + ".bias")), geom);
  return conv2d(x, w, geom);
}

LayerNorm LayerNorm::create(ParamStore& ps, const std::string& name, int dim) {
  ps.add(name + ".gamma", {dim}, std::vector<double>(dim, 1.0));
  ps.add(name + ".beta", {dim}, std::vector<double>(dim, 0.0));
  return LayerNorm{name, dim};
}

Var LayerNorm::operator()(Tape& t, ParamStore& ps, Var x) const {
  return layer_norm_rows(x, t.param(ps.get(name + ".gamma")), t.param(ps.get(name + ".beta")));
}

Mlp Mlp::create(ParamStore& ps, Rng& rng, const std::string& name, int in, int hidden, int out) {
  return Mlp{Linear::create(ps, rng, name + ".fc1", in, hidden), Linear::create(ps, rng, name + ".fc2", hidden, out)};
}

Var Mlp::operator()(Tape& t, ParamStore& ps, Var x) const { return fc2(t, ps, relu(fc1(t, ps, x))); }

MultiHeadAttention MultiHeadAttention::create(ParamStore& ps, Rng& rng, const std::string& name, int dim,
                                              int heads) {
  if (heads <= 0 || dim % heads != 0) {
    throw std::invalid_argument("MultiHeadAttention: dim " + std::to_string(dim) + " not divisible by heads " +
                                std::to_string(heads));
  }
  MultiHeadAttention m;
  m.name = name;
  m.dim = dim;
  m.heads = heads;
  m.q = Linear::create(ps, rng, name + ".q", dim, dim);
  m.k = Linear::create(ps, rng, name + ".k", dim, dim);
  m.v = Linear::create(ps, rng, name + ".v", dim, dim);
  m.o = Linear::create(ps, rng, name + ".o", dim, dim);
  return m;
}

AttentionOutput MultiHeadAttention::operator()(Tape& t, ParamStore& ps, Var query, Var key, Var value,
                                               bool keep_weights) const {
  const Var qp = q(t, ps, query);
  const Var kp = k(t, ps, key);
  const Var vp = v(t, ps, value);
  const int dh = dim / heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(dh));
  AttentionOutput res;
  std::vector<Var> outs;
  for (int h = 0; h < heads; ++h) {
    const Var qh = slice_cols(qp, h * dh, dh);
    const Var kh = slice_cols(kp, h * dh, dh);
    const Var vh = slice_cols(vp, h * dh, dh);
    const Var a = softmax_rows(scale(matmul_nt(qh, kh), s));
    if (keep_weights) res.weights.emplace_back(a.value().begin(), a.value().end());
    outs.push_back(matmul(a, vh));
  }
  res.out = o(t, ps, heads == 1 ? outs[0] : concat_cols(outs));
  return res;
}

AttentionBlock AttentionBlock::create(ParamStore& ps, Rng& rng, const std::string& name, int dim, int heads,
                                      int ffn_dim) {
  AttentionBlock b;
  b.attn = MultiHeadAttention::create(ps, rng, name + ".attn", dim, heads);
  b.norm1 = LayerNorm::create(ps, name + ".norm1", dim);
  b.ffn = Mlp::create(ps, rng, name + ".ffn", dim, ffn_dim, dim);
  b.norm2 = LayerNorm::create(ps, name + ".norm2", dim);
  return b;
}

AttentionOutput AttentionBlock::operator()(Tape& t, ParamStore& ps, Var x, Var qpos, Var kv, Var kpos,
                                           bool keep_weights) const {
  const Var q = qpos.valid() ? add(x, qpos) : x;
  const Var k = kpos.valid() ? add(kv, kpos) : kv;
  AttentionOutput a = attn(t, ps, q, k, kv, keep_weights);
  Var y = norm1(t, ps, add(x, a.out));
  y = norm2(t, ps, add(y, ffn(t, ps, y)));
  a.out = y;
  return a;
}

}  // namespace bevg::nn
