// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bevg {

using nn::Tape;
using nn::Var;

namespace {

// log(sigmoid(x)) and log(1 - sigmoid(x)) without cancellation.
double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double log_one_minus_sigmoid(double x) { return log_sigmoid(-x); }
double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

double gaussian_radius(double height, double width, double min_overlap) {
  const double a1 = 1.0;
  const double b1 = height + width;
  const double c1 = width * height * (1.0 - min_overlap) / (1.0 + min_overlap);
  const double r1 = (b1 + std::sqrt(b1 * b1 - 4.0 * a1 * c1)) / 2.0;

  const double a2 = 4.0;
  const double b2 = 2.0 * (height + width);
  const double c2 = (1.0 - min_overlap) * width * height;
  const double r2 = (b2 + std::sqrt(b2 * b2 - 4.0 * a2 * c2)) / 2.0;

  const double a3 = 4.0 * min_overlap;
  const double b3 = -2.0 * min_overlap * (height + width);
  const double c3 = (min_overlap - 1.0) * width * height;
  const double r3 = (b3 + std::sqrt(b3 * b3 - 4.0 * a3 * c3)) / 2.0;
  return std::min({r1, r2, r3});
}

void draw_gaussian(std::span<double> heatmap, int height, int width, int cx, int cy, int radius) {
  if (heatmap.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("draw_gaussian: heatmap size mismatch");
  }
  if (cx < 0 || cy < 0 || cx >= width || cy >= height) return;
  radius = std::max(radius, 0);
  const double sigma = (2.0 * radius + 1.0) / 6.0;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const int x = cx + dx, y = cy + dy;
      if (x < 0 || y < 0 || x >= width || y >= height) continue;
      double g = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      if (dx == 0 && dy == 0) g = 1.0;
      double& cell = heatmap[static_cast<std::size_t>(y) * width + x];
      cell = std::max(cell, g);
    }
  }
}

Var gaussian_focal_loss(Var logits, std::span<const double> target, FocalParams p) {
  if (target.size() != logits.numel()) throw std::invalid_argument("gaussian_focal_loss: target size mismatch");
  std::vector<double> t(target.begin(), target.end());
  const auto x = logits.value();
  double npos = 0.0;
  for (double v : t) npos += (v == 1.0);
  const double norm = std::max(1.0, npos);
  double loss = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double pr = sigmoid(x[i]);
    if (t[i] == 1.0) {
      loss -= std::pow(1.0 - pr, p.alpha) * log_sigmoid(x[i]);
    } else {
      loss -= std::pow(1.0 - t[i], p.beta) * std::pow(pr, p.alpha) * log_one_minus_sigmoid(x[i]);
    }
  }
  Tape& tape = *logits.tape();
  const int xi = logits.id();
  return tape.record({1}, {loss / norm}, {logits}, [=](Tape& tp, int o) {
    const double g = tp.grad_view(o)[0] / norm;
    const auto xv = tp.value(xi);
    auto gx = tp.grad(xi);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double pr = sigmoid(xv[i]);
      if (t[i] == 1.0) {
        gx[i] += g * std::pow(1.0 - pr, p.alpha) * (p.alpha * pr * log_sigmoid(xv[i]) - (1.0 - pr));
      } else {
        const double w = std::pow(1.0 - t[i], p.beta);
        gx[i] += g * w * std::pow(pr, p.alpha) * (pr - p.alpha * (1.0 - pr) * log_one_minus_sigmoid(xv[i]));
      }
    }
  });
}

Var sigmoid_focal_loss(Var logits, std::span<const double> labels, SigmoidFocalParams p) {
  if (labels.size() != logits.numel()) throw std::invalid_argument("sigmoid_focal_loss: label size mismatch");
  std::vector<double> y(labels.begin(), labels.end());
  const auto x = logits.value();
  double npos = 0.0;
  for (double v : y) npos += (v > 0.5);
  const double norm = std::max(1.0, npos);
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double pr = sigmoid(x[i]);
    if (y[i] > 0.5) {
      loss -= p.alpha * std::pow(1.0 - pr, p.gamma) * log_sigmoid(x[i]);
    } else {
      loss -= (1.0 - p.alpha) * std::pow(pr, p.gamma) * log_one_minus_sigmoid(x[i]);
    }
  }
  Tape& tape = *logits.tape();
  const int xi = logits.id();
  return tape.record({1}, {loss / norm}, {logits}, [=](Tape& tp, int o) {
    const double g = tp.grad_view(o)[0] / norm;
    const auto xv = tp.value(xi);
    auto gx = tp.grad(xi);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double pr = sigmoid(xv[i]);
      if (y[i] > 0.5) {
        gx[i] += g * p.alpha * std::pow(1.0 - pr, p.gamma) * (p.gamma * pr * log_sigmoid(xv[i]) - (1.0 - pr));
      } else {
        gx[i] += g * (1.0 - p.alpha) * std::pow(pr, p.gamma) *
                 (pr - p.gamma * (1.0 - pr) * log_one_minus_sigmoid(xv[i]));
      }
    }
  });
}

Var l1_loss(Var pred, std::span<const double> target) {
  if (target.size() != pred.numel()) throw std::invalid_argument("l1_loss: target size mismatch");
  if (target.empty()) throw std::invalid_argument("l1_loss: empty input");
  Tape& tape = *pred.tape();
  const Var t = tape.constant(pred.shape(), std::vector<double>(target.begin(), target.end()));
  return nn::scale(nn::abs_sum(nn::sub(pred, t)), 1.0 / static_cast<double>(target.size()));
}

Var softmax_cross_entropy(Var scores, int positive) {
  const std::size_t n = scores.numel();
  if (n == 0) throw std::invalid_argument("softmax_cross_entropy: no scores");
  if (positive < 0 || static_cast<std::size_t>(positive) >= n) {
    throw std::invalid_argument("softmax_cross_entropy: positive index out of range");
  }
  const auto s = scores.value();
  const double mx = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (double v : s) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  Tape& tape = *scores.tape();
  const int si = scores.id();
  return tape.record({1}, {lse - s[positive]}, {scores}, [=](Tape& tp, int o) {
    const double g = tp.grad_view(o)[0];
    const auto sv = tp.value(si);
    auto gs = tp.grad(si);
    for (std::size_t i = 0; i < n; ++i) {
      gs[i] += g * (std::exp(sv[i] - lse) - (static_cast<int>(i) == positive ? 1.0 : 0.0));
    }
  });
}

}  // namespace bevg
