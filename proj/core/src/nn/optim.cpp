// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/nn/optim.hpp"

#include <cmath>

namespace bevg::nn {

namespace {
inline double f32(double x) { return static_cast<double>(static_cast<float>(x)); }
}  // namespace

void round_to_float(ParamStore& ps) {
  for (Parameter* p : ps.all()) {
    for (double& v : p->value) v = f32(v);
  }
}

double clip_grad_norm(ParamStore& ps, double max_norm) {
  double ss = 0.0;
  for (const Parameter* p : ps.all()) {
    if (!p->trainable) continue;
    for (double g : p->grad) ss += g * g;
  }
  const double norm = std::sqrt(ss);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-12);
    for (Parameter* p : ps.all()) {
      if (!p->trainable) continue;
      for (double& g : p->grad) g *= s;
    }
  }
  return norm;
}

void Adam::step(ParamStore& ps) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Parameter* p : ps.all()) {
    if (!p->trainable) continue;
    auto& m = m_[p->name];
    auto& v = v_[p->name];
    if (m.size() != p->size()) m.assign(p->size(), 0.0);
    if (v.size() != p->size()) v.assign(p->size(), 0.0);
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double g = p->grad[i] + cfg_.weight_decay * p->value[i];
      m[i] = f32(cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g);
      v[i] = f32(cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g);
      const double mh = m[i] / bc1;
      const double vh = v[i] / bc2;
      p->value[i] = f32(p->value[i] - cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps));
    }
  }
}

void Sgd::step(ParamStore& ps) {
  for (Parameter* p : ps.all()) {
    if (!p->trainable) continue;
    auto& vel = velocity_[p->name];
    if (vel.size() != p->size()) vel.assign(p->size(), 0.0);
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double g = p->grad[i] + cfg_.weight_decay * p->value[i];
      vel[i] = f32(cfg_.momentum * vel[i] + g);
      p->value[i] = f32(p->value[i] - cfg_.lr * vel[i]);
    }
  }
}

}  // namespace bevg::nn
