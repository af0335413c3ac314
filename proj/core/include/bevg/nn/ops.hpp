// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "bevg/nn/tape.hpp"

namespace bevg::nn {

// Matrices are row-major 2D tensors; feature maps are [C, H, W].

Var matmul(Var a, Var b);     // [m,k] x [k,n]
Var matmul_nt(Var a, Var b);  // [m,k] x [n,k]^T

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_row_bias(Var x, Var bias);      // [n,d] + [d]
Var add_channel_bias(Var x, Var bias);  // [C,H,W] + [C]

Var relu(Var x);
Var sigmoid(Var x);
Var exp(Var x);

Var softmax_rows(Var x);
Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);

Var transpose(Var x);
Var reshape(Var x, Shape shape);
Var concat_cols(std::span<const Var> parts);  // along dim 1 of [n,*]
Var concat_channels(std::span<const Var> parts);  // along dim 0 of [*,H,W]
Var slice_cols(Var x, int start, int len);
Var gather_rows(Var x, std::span<const int> rows);  // [n,d] -> [k,d]

/// Broadcast a [d] vector over an H x W grid -> [d,H,W].
Var tile_channels(Var v, int height, int width);

struct Conv2dGeometry {
  int stride = 1;
  int pad = 0;
};
/// x [Ci,H,W], w [Co,Ci,k,k], optional bias [Co].
Var conv2d(Var x, Var w, Var bias, Conv2dGeometry geom);
Var conv2d(Var x, Var w, Conv2dGeometry geom);

/// Nearest-neighbour 2x upsampling cropped to (height, width).
Var upsample2x(Var x, int height, int width);

Var sum(Var x);
Var mean(Var x);
/// Sum over all elements of |x|.
Var abs_sum(Var x);

}  // namespace bevg::nn
