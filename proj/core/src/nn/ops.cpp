// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bevg::nn {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const MatRM>;
using MMap = Eigen::Map<MatRM>;
using CVec = Eigen::Map<const Eigen::VectorXd>;
using MVec = Eigen::Map<Eigen::VectorXd>;

void require(bool ok, const char* op, const std::string& msg) {
  if (!ok) throw std::invalid_argument(std::string(op) + ": " + msg);
}

void require_2d(Var x, const char* op) {
  require(x.shape().size() == 2, op, "expected a 2D tensor, got " + shape_str(x.shape()));
}

void require_3d(Var x, const char* op) {
  require(x.shape().size() == 3, op, "expected a [C,H,W] tensor, got " + shape_str(x.shape()));
}

CMap cmat(Tape& t, int id, int rows, int cols) { return CMap(t.value(id).data(), rows, cols); }

template <typename F>
Var unary(Var x, F&& fwd, std::function<void(std::span<const double> in, std::span<const double> out,
                                             std::span<const double> g, std::span<double> gin)>
                              bwd) {
  Tape& t = *x.tape();
  const auto in = x.value();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  const int xi = x.id();
  return t.record(x.shape(), std::move(out), {x}, [xi, bwd](Tape& tp, int o) {
    bwd(tp.value(xi), tp.value(o), tp.grad_view(o), tp.grad(xi));
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul", "inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Tape& t = *a.tape();
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  MMap(out.data(), m, n).noalias() = cmat(t, a.id(), m, k) * cmat(t, b.id(), k, n);
  const int ai = a.id(), bi = b.id();
  return t.record({m, n}, std::move(out), {a, b}, [=](Tape& tp, int o) {
    const CMap g(tp.grad_view(o).data(), m, n);
    if (tp.requires_grad(ai)) MMap(tp.grad(ai).data(), m, k).noalias() += g * cmat(tp, bi, k, n).transpose();
    if (tp.requires_grad(bi)) MMap(tp.grad(bi).data(), k, n).noalias() += cmat(tp, ai, m, k).transpose() * g;
  });
}

Var matmul_nt(Var a, Var b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
  require(b.dim(1) == k, "matmul_nt", "inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  Tape& t = *a.tape();
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  MMap(out.data(), m, n).noalias() = cmat(t, a.id(), m, k) * cmat(t, b.id(), n, k).transpose();
  const int ai = a.id(), bi = b.id();
  return t.record({m, n}, std::move(out), {a, b}, [=](Tape& tp, int o) {
    const CMap g(tp.grad_view(o).data(), m, n);
    if (tp.requires_grad(ai)) MMap(tp.grad(ai).data(), m, k).noalias() += g * cmat(tp, bi, n, k);
    if (tp.requires_grad(bi)) MMap(tp.grad(bi).data(), n, k).noalias() += g.transpose() * cmat(tp, ai, m, k);
  });
}

namespace {

template <typename Fwd>
Var binary_same(Var a, Var b, const char* op, Fwd fwd, double sign_b, bool product) {
  require(a.shape() == b.shape(), op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tape& t = *a.tape();
  const auto va = a.value();
  const auto vb = b.value();
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = fwd(va[i], vb[i]);
  const int ai = a.id(), bi = b.id();
  return t.record(a.shape(), std::move(out), {a, b}, [=](Tape& tp, int o) {
    const auto g = tp.grad_view(o);
    if (tp.requires_grad(ai)) {
      auto ga = tp.grad(ai);
      if (product) {
        const auto vb2 = tp.value(bi);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb2[i];
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
    }
    if (tp.requires_grad(bi)) {
      auto gb = tp.grad(bi);
      if (product) {
        const auto va2 = tp.value(ai);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va2[i];
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign_b * g[i];
      }
    }
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary_same(a, b, "add", [](double x, double y) { return x + y; }, 1.0, false);
}
Var sub(Var a, Var b) {
  return binary_same(a, b, "sub", [](double x, double y) { return x - y; }, -1.0, false);
}
Var mul(Var a, Var b) {
  return binary_same(a, b, "mul", [](double x, double y) { return x * y; }, 1.0, true);
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; },
               [s](auto, auto, auto g, auto gin) {
                 for (std::size_t i = 0; i < g.size(); ++i) gin[i] += s * g[i];
               });
}

Var add_row_bias(Var x, Var bias) {
  require_2d(x, "add_row_bias");
  const int n = x.dim(0), d = x.dim(1);
  require(bias.numel() == static_cast<std::size_t>(d), "add_row_bias", "bias width mismatch");
  Tape& t = *x.tape();
  std::vector<double> out(x.value().begin(), x.value().end());
  const auto b = bias.value();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(i) * d + j] += b[j];
  }
  const int xi = x.id(), bi = bias.id();
  return t.record(x.shape(), std::move(out), {x, bias}, [=](Tape& tp, int o) {
    const auto g = tp.grad_view(o);
    if (tp.requires_grad(xi)) {
      auto gx = tp.grad(xi);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (tp.requires_grad(bi)) {
      auto gb = tp.grad(bi);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) gb[j] += g[static_cast<std::size_t>(i) * d + j];
      }
    }
  });
}

Var add_channel_bias(Var x, Var bias) {
  require_3d(x, "add_channel_bias");
  const int c = x.dim(0);
  const std::size_t hw = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  require(bias.numel() == static_cast<std::size_t>(c), "add_channel_bias", "bias width mismatch");
  Tape& t = *x.tape();
  std::vector<double> out(x.value().begin(), x.value().end());
  const auto b = bias.value();
  for (int ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < hw; ++p) out[ch * hw + p] += b[ch];
  }
  const int xi = x.id(), bi = bias.id();
  return t.record(x.shape(), std::move(out), {x, bias}, [=](Tape& tp, int o) {
    const auto g = tp.grad_view(o);
    if (tp.requires_grad(xi)) {
      auto gx = tp.grad(xi);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (tp.requires_grad(bi)) {
      auto gb = tp.grad(bi);
      for (int ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (std::size_t p = 0; p < hw; ++p) s += g[ch * hw + p];
        gb[ch] += s;
      }
    }
  });
}

Var relu(Var x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](auto in, auto, auto g, auto gin) {
                 for (std::size_t i = 0; i < g.size(); ++i) {
                   if (in[i] > 0.0) gin[i] += g[i];
                 }
               });
}

Var sigmoid(Var x) {
  return unary(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
               [](auto, auto out, auto g, auto gin) {
                 for (std::size_t i = 0; i < g.size(); ++i) gin[i] += g[i] * out[i] * (1.0 - out[i]);
               });
}

Var exp(Var x) {
  return unary(x, [](double v) { return std::exp(v); },
               [](auto, auto out, auto g, auto gin) {
                 for (std::size_t i = 0; i < g.size(); ++i) gin[i] += g[i] * out[i];
               });
}

Var softmax_rows(Var x) {
  require_2d(x, "softmax_rows");
  const int n = x.dim(0), d = x.dim(1);
  Tape& t = *x.tape();
  const auto in = x.value();
  std::vector<double> out(in.size());
  for (int i = 0; i < n; ++i) {
    const double* row = in.data() + static_cast<std::size_t>(i) * d;
    double* o = out.data() + static_cast<std::size_t>(i) * d;
    const double mx = *std::max_element(row, row + d);
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      o[j] = std::exp(row[j] - mx);
      s += o[j];
    }
    for (int j = 0; j < d; ++j) o[j] /= s;
  }
  const int xi = x.id();
  return t.record(x.shape(), std::move(out), {x}, [=](Tape& tp, int o) {
    const auto y = tp.value(o);
    const auto g = tp.grad_view(o);
    auto gx = tp.grad(xi);
    for (int i = 0; i < n; ++i) {
      const std::size_t off = static_cast<std::size_t>(i) * d;
      double dot = 0.0;
      for (int j = 0; j < d; ++j) dot += g[off + j] * y[off + j];
      for (int j = 0; j < d; ++j) gx[off + j] += y[off + j] * (g[off + j] - dot);
    }
  });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  require_2d(x, "layer_norm_rows");
  const int n = x.dim(0), d = x.dim(1);
  require(gamma.numel() == static_cast<std::size_t>(d) && beta.numel() == static_cast<std::size_t>(d),
          "layer_norm_rows", "affine width mismatch");
  Tape& t = *x.tape();
  const auto in = x.value();
  const auto ga = gamma.value();
  const auto be = beta.value();
  std::vector<double> out(in.size());
  auto xhat = std::make_shared<std::vector<double>>(in.size());
  auto inv_std = std::make_shared<std::vector<double>>(n);
  for (int i = 0; i < n; ++i) {
    const std::size_t off = static_cast<std::size_t>(i) * d;
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += in[off + j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (in[off + j] - mu) * (in[off + j] - mu);
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (int j = 0; j < d; ++j) {
      (*xhat)[off + j] = (in[off + j] - mu) * is;
      out[off + j] = (*xhat)[off + j] * ga[j] + be[j];
    }
  }
  const int xi = x.id(), gi = gamma.id(), bi = beta.id();
  return t.record(x.shape(), std::move(out), {x, gamma, beta}, [=](Tape& tp, int o) {
    const auto g = tp.grad_view(o);
    const auto gam = tp.value(gi);
    if (tp.requires_grad(gi)) {
      auto gg = tp.grad(gi);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) gg[j] += g[static_cast<std::size_t>(i) * d + j] * (*xhat)[static_cast<std::size_t>(i) * d + j];
      }
    }
    if (tp.requires_grad(bi)) {
      auto gb = tp.grad(bi);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) gb[j] += g[static_cast<std::size_t>(i) * d + j];
      }
    }
    if (tp.requires_grad(xi)) {
      auto gx = tp.grad(xi);
      for (int i = 0; i < n; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * d;
        double s1 = 0.0, s2 = 0.0;
        for (int j = 0; j < d; ++j) {
          const double dxh = g[off + j] * gam[j];
          s1 += dxh;
          s2 += dxh * (*xhat)[off + j];
        }
        const double is = (*inv_std)[i];
        for (int j = 0; j < d; ++j) {
          const double dxh = g[off + j] * gam[j];
          gx[off + j] += is * (dxh - s1 / d - (*xhat)[off + j] * s2 / d);
        }
      }
    }
  });
}

Var transpose(Var x) {
  require_2d(x, "transpose");
  const int m = x.dim(0), n = x.dim(1);
  Tape& t = *x.tape();
  std::vector<double> out(x.numel());
  MMap(out.data(), n, m) = cmat(t, x.id(), m, n).transpose();
  const int xi = x.id();
  return t.record({n, m}, std::move(out), {x}, [=](Tape& tp, int o) {
    MMap(tp.grad(xi).data(), m, n) += CMap(tp.grad_view(o).data(), n, m).transpose();
  });
}

Var reshape(Var x, Shape shape) {
  require(numel(shape) == x.numel(), "reshape", "element count mismatch " + shape_str(x.shape()) + " -> " + shape_str(shape));
  Tape& t = *x.tape();
  std::vector<double> out(x.value().begin(), x.value().end());
  const int xi = x.id();
  return t.record(std::move(shape), std::move(out), {x}, [=](Tape& tp, int o) {
    const auto g = tp.grad_view(o);
    auto gx = tp.grad(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const int n = parts[0].dim(0);
  int total = 0;
  std::vector<int> widths, ids;
  for (const Var& p : parts) {
    require_2d(p, "concat_cols");
    require(p.dim(0) == n, "concat_cols", "row count mismatch");
    widths.push_back(p.dim(1));
    ids.push_back(p.id());
    total += p.dim(1);
  }
  Tape& t = *parts[0].tape();
  std::vector<double> out(static_cast<std::size_t>(n) * total);
  int off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto v = parts[k].value();
    for (int i = 0; i < n; ++i) {
      std::copy_n(v.data() + static_cast<std::size_t>(i) * widths[k], widths[k],
                  out.data() + static_cast<std::size_t>(i) * total + off);
    }
    off += widths[k];
  }
  return t.record({n, total}, std::move(out), parts, [=](Tape& tp, int o) {
    const auto g = tp.grad_view(o);
    int c0 = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.requires_grad(ids[k])) {
        auto gk = tp.grad(ids[k]);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < widths[k]; ++j) {
            gk[static_cast<std::size_t>(i) * widths[k] + j] += g[static_cast<std::size_t>(i) * total + c0 + j];
          }
        }
      }
      c0 += widths[k];
    }
  });
}

Var concat_channels(std::span<const Var> parts) {
  require(!parts.empty(), "concat_channels", "no inputs");
  const int h = parts[0].dim(1), w = parts[0].dim(2);
  int total = 0;
  std::vector<int> ids;
  std::vector<std::size_t> sizes;
  for (const Var& p : parts) {
    require_3d(p, "concat_channels");
    require(p.dim(1) == h && p.dim(2) == w, "concat_channels", "spatial size mismatch");
    total += p.dim(0);
    ids.push_back(p.id());
    sizes.push_back(p.numel());
  }
  Tape& t = *parts[0].tape();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(total) * h * w);
  for (const Var& p : parts) out.insert(out.end(), p.value().begin(), p.value().end());
  return t.record({total, h, w}, std::move(out), parts, [=](Tape& tp, int o) {
    const auto g = tp.grad_view(o);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.requires_grad(ids[k])) {
        auto gk = tp.grad(ids[k]);
        for (std::size_t i = 0; i < sizes[k]; ++i) gk[i] += g[off + i];
      }
      off += sizes[k];
    }
  });
}

Var slice_cols(Var x, int start, int len) {
  require_2d(x, "slice_cols");
  const int n = x.dim(0), d = x.dim(1);
  require(start >= 0 && len >= 0 && start + len <= d, "slice_cols", "range out of bounds");
  Tape& t = *x.tape();
  std::vector<double> out(static_cast<std::size_t>(n) * len);
  const auto v = x.value();
  for (int i = 0; i < n; ++i) {
    std::copy_n(v.data() + static_cast<std::size_t>(i) * d + start, len, out.data() + static_cast<std::size_t>(i) * len);
  }
  const int xi = x.id();
  return t.record({n, len}, std::move(out), {x}, [=](Tape& tp, int o) {
    const auto g = tp.grad_view(o);
    auto gx = tp.grad(xi);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < len; ++j) gx[static_cast<std::size_t>(i) * d + start + j] += g[static_cast<std::size_t>(i) * len + j];
    }
  });
}

Var gather_rows(Var x, std::span<const int> rows) {
  require_2d(x, "gather_rows");
  const int n = x.dim(0), d = x.dim(1);
  std::vector<int> idx(rows.begin(), rows.end());
  for (int r : idx) require(r >= 0 && r < n, "gather_rows", "row index out of range");
  Tape& t = *x.tape();
  const int k = static_cast<int>(idx.size());
  std::vector<double> out(static_cast<std::size_t>(k) * d);
  const auto v = x.value();
  for (int i = 0; i < k; ++i) {
    std::copy_n(v.data() + static_cast<std::size_t>(idx[i]) * d, d, out.data() + static_cast<std::size_t>(i) * d);
  }
  const int xi = x.id();
  return t.record({k, d}, std::move(out), {x}, [=](Tape& tp, int o) {
    const auto g = tp.grad_view(o);
    auto gx = tp.grad(xi);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < d; ++j) gx[static_cast<std::size_t>(idx[i]) * d + j] += g[static_cast<std::size_t>(i) * d + j];
    }
  });
}

Var tile_channels(Var v, int height, int width) {
  const int d = static_cast<int>(v.numel());
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  Tape& t = *v.tape();
  std::vector<double> out(d * hw);
  const auto vv = v.value();
  for (int c = 0; c < d; ++c) std::fill_n(out.data() + c * hw, hw, vv[c]);
  const int vi = v.id();
  return t.record({d, height, width}, std::move(out), {v}, [=](Tape& tp, int o) {
    const auto g = tp.grad_view(o);
    auto gv = tp.grad(vi);
    for (int c = 0; c < d; ++c) {
      double s = 0.0;
      for (std::size_t p = 0; p < hw; ++p) s += g[c * hw + p];
      gv[c] += s;
    }
  });
}

namespace {

void im2col(const double* x, int ci, int h, int w, int k, int stride, int pad, int ho, int wo, double* cols) {
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < ci; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          double* dst = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill_n(dst, wo, 0.0);
            continue;
          }
          const double* src = x + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* cols, int ci, int h, int w, int k, int stride, int pad, int ho, int wo, double* x) {
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < ci; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          double* dst = x + (static_cast<std::size_t>(c) * h + iy) * w;
          const double* src = row + static_cast<std::size_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Var x, Var w, Var bias, Conv2dGeometry geom) {
  require_3d(x, "conv2d");
  require(w.shape().size() == 4, "conv2d", "weight must be [Co,Ci,k,k]");
  const int ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int co = w.dim(0), k = w.dim(2);
  require(w.dim(1) == ci, "conv2d", "input channels " + std::to_string(ci) + " vs weight " + shape_str(w.shape()));
  require(w.dim(3) == k, "conv2d", "kernel must be square");
  const int s = geom.stride, p = geom.pad;
  require(s >= 1 && p >= 0, "conv2d", "bad stride/padding");
  const int ho = (h + 2 * p - k) / s + 1;
  const int wo = (wd + 2 * p - k) / s + 1;
  require(ho > 0 && wo > 0, "conv2d", "output would be empty");
  const bool has_bias = bias.valid();
  if (has_bias) require(bias.numel() == static_cast<std::size_t>(co), "conv2d", "bias width mismatch");

  Tape& t = *x.tape();
  const int kk = ci * k * k;
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  const bool one_by_one = (k == 1 && s == 1 && p == 0);
  auto cols = std::make_shared<std::vector<double>>();
  const double* colp = x.value().data();
  if (!one_by_one) {
    cols->resize(static_cast<std::size_t>(kk) * plane);
    im2col(x.value().data(), ci, h, wd, k, s, p, ho, wo, cols->data());
    colp = cols->data();
  }
  std::vector<double> out(static_cast<std::size_t>(co) * plane);
  MMap(out.data(), co, static_cast<Eigen::Index>(plane)).noalias() =
      cmat(t, w.id(), co, kk) * CMap(colp, kk, static_cast<Eigen::Index>(plane));
  if (has_bias) {
    const auto b = bias.value();
    for (int c = 0; c < co; ++c) {
      double* o = out.data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) o[i] += b[c];
    }
  }
  const int xi = x.id(), wi = w.id(), bi = has_bias ? bias.id() : -1;
  std::vector<Var> inputs{x, w};
  if (has_bias) inputs.push_back(bias);
  return t.record({co, ho, wo}, std::move(out), inputs, [=](Tape& tp, int o) {
    const CMap g(tp.grad_view(o).data(), co, static_cast<Eigen::Index>(plane));
    const double* cp = one_by_one ? tp.value(xi).data() : cols->data();
    if (tp.requires_grad(wi)) {
      MMap(tp.grad(wi).data(), co, kk).noalias() += g * CMap(cp, kk, static_cast<Eigen::Index>(plane)).transpose();
    }
    if (bi >= 0 && tp.requires_grad(bi)) {
      auto gb = tp.grad(bi);
      for (int c = 0; c < co; ++c) gb[c] += g.row(c).sum();
    }
    if (tp.requires_grad(xi)) {
      if (one_by_one) {
        MMap(tp.grad(xi).data(), kk, static_cast<Eigen::Index>(plane)).noalias() += cmat(tp, wi, co, kk).transpose() * g;
      } else {
        std::vector<double> dcols(static_cast<std::size_t>(kk) * plane);
        MMap(dcols.data(), kk, static_cast<Eigen::Index>(plane)).noalias() = cmat(tp, wi, co, kk).transpose() * g;
        col2im(dcols.data(), ci, h, wd, k, s, p, ho, wo, tp.grad(xi).data());
      }
    }
  });
}

Var conv2d(Var x, Var w, Conv2dGeometry geom) { return conv2d(x, w, Var{}, geom); }

Var upsample2x(Var x, int height, int width) {
  require_3d(x, "upsample2x");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  require(height <= 2 * h && width <= 2 * w && height > 0 && width > 0, "upsample2x", "target larger than 2x input");
  Tape& t = *x.tape();
  const auto v = x.value();
  std::vector<double> out(static_cast<std::size_t>(c) * height * width);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < height; ++y) {
      for (int xx = 0; xx < width; ++xx) {
        out[(static_cast<std::size_t>(ch) * height + y) * width + xx] = v[(static_cast<std::size_t>(ch) * h + y / 2) * w + xx / 2];
      }
    }
  }
  const int xi = x.id();
  return t.record({c, height, width}, std::move(out), {x}, [=](Tape& tp, int o) {
    const auto g = tp.grad_view(o);
    auto gx = tp.grad(xi);
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < height; ++y) {
        for (int xx = 0; xx < width; ++xx) {
          gx[(static_cast<std::size_t>(ch) * h + y / 2) * w + xx / 2] += g[(static_cast<std::size_t>(ch) * height + y) * width + xx];
        }
      }
    }
  });
}

Var sum(Var x) {
  Tape& t = *x.tape();
  double s = 0.0;
  for (double v : x.value()) s += v;
  const int xi = x.id();
  return t.record({1}, {s}, {x}, [=](Tape& tp, int o) {
    const double g = tp.grad_view(o)[0];
    for (double& gx : tp.grad(xi)) gx += g;
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Var abs_sum(Var x) {
  Tape& t = *x.tape();
  double s = 0.0;
  for (double v : x.value()) s += std::abs(v);
  const int xi = x.id();
  return t.record({1}, {s}, {x}, [=](Tape& tp, int o) {
    const double g = tp.grad_view(o)[0];
    const auto v = tp.value(xi);
    auto gx = tp.grad(xi);
    for (std::size_t i = 0; i < v.size(); ++i) gx[i] += g * ((v[i] > 0.0) - (v[i] < 0.0));
  });
}

}  // namespace bevg::nn
