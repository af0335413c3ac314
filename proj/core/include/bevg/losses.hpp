// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "bevg/nn/ops.hpp"

namespace bevg {

/// CenterNet radius for a box footprint of (height, width) cells.
double gaussian_radius(double height, double width, double min_overlap = 0.1);

/// Max-merges a Gaussian with sigma = (2r+1)/6 centred at integer cell
/// (cx, cy) into a row-major H x W heatmap. The centre cell is set to 1.
void draw_gaussian(std::span<double> heatmap, int height, int width, int cx, int cy, int radius);

struct FocalParams {
  double alpha = 2.0;
  double beta = 4.0;
};

/// Penalty-reduced focal loss on heatmap logits against a splatted target
/// (cells equal to 1 are positives), normalised by max(1, #positives).
nn::Var gaussian_focal_loss(nn::Var logits, std::span<const double> target, FocalParams p = {});

struct SigmoidFocalParams {
  double gamma = 2.0;
  double alpha = 0.25;
};

/// Binary focal loss on logits, normalised by max(1, #positives).
nn::Var sigmoid_focal_loss(nn::Var logits, std::span<const double> labels, SigmoidFocalParams p = {});

/// Mean absolute error between pred and a constant target of equal size.
nn::Var l1_loss(nn::Var pred, std::span<const double> target);

/// Softmax cross-entropy of a score vector against one positive index.
nn::Var softmax_cross_entropy(nn::Var scores, int positive);

}  // namespace bevg
