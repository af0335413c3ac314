// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "bevg/geometry.hpp"
#include "bevg/nn/tape.hpp"
#include "bevg/random.hpp"

namespace bevg::testing {

inline std::filesystem::path data_dir() { return BEVG_TEST_DATA_DIR; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("bevg_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Builds a scalar from input leaves on a fresh tape.
using ScalarFn = std::function<nn::Var(nn::Tape&, const std::vector<nn::Var>&)>;

/// Largest relative error between the tape gradient and central differences
/// with respect to every input element.
inline double max_grad_error(const ScalarFn& f, std::vector<std::vector<double>> inputs,
                             const std::vector<nn::Shape>& shapes, double h = 1e-6) {
  auto evaluate = [&](bool with_grad, std::vector<std::vector<double>>* grads) {
    nn::Tape t;
    std::vector<nn::Var> leaves;
    for (std::size_t i = 0; i < inputs.size(); ++i) leaves.push_back(t.input(shapes[i], inputs[i], true));
    nn::Var out = f(t, leaves);
    if (with_grad) {
      t.backward(out);
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        const auto g = leaves[i].grad();
        (*grads)[i].assign(inputs[i].size(), 0.0);
        std::copy(g.begin(), g.end(), (*grads)[i].begin());
      }
    }
    return out.item();
  };
  std::vector<std::vector<double>> analytic(inputs.size());
  evaluate(true, &analytic);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t k = 0; k < inputs[i].size(); ++k) {
      const double keep = inputs[i][k];
      inputs[i][k] = keep + h;
      const double up = evaluate(false, nullptr);
      inputs[i][k] = keep - h;
      const double down = evaluate(false, nullptr);
      inputs[i][k] = keep;
      worst = std::max(worst, relative_error(analytic[i][k], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

/// Independent point-in-oriented-rectangle test for oracles.
inline bool inside_footprint(const Box3D& b, double px, double py) {
  const double dx = px - b.x, dy = py - b.y;
  const double c = std::cos(b.alpha), s = std::sin(b.alpha);
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return std::abs(u) <= 0.5 * b.l && std::abs(v) <= 0.5 * b.w;
}

/// Monte-Carlo IoU over the joint axis-aligned bounding region.
inline double monte_carlo_iou(const Box3D& a, const Box3D& b, bool three_d, int samples, Rng& rng) {
  auto radius = [](const Box3D& x) { return 0.5 * std::hypot(x.l, x.w); };
  const double x0 = std::min(a.x - radius(a), b.x - radius(b)), x1 = std::max(a.x + radius(a), b.x + radius(b));
  const double y0 = std::min(a.y - radius(a), b.y - radius(b)), y1 = std::max(a.y + radius(a), b.y + radius(b));
  const double z0 = std::min(a.z - 0.5 * a.h, b.z - 0.5 * b.h), z1 = std::max(a.z + 0.5 * a.h, b.z + 0.5 * b.h);
  long in_a = 0, in_b = 0, in_both = 0;
  for (int i = 0; i < samples; ++i) {
    const double px = rng.uniform(x0, x1), py = rng.uniform(y0, y1);
    bool ia = inside_footprint(a, px, py), ib = inside_footprint(b, px, py);
    if (three_d) {
      const double pz = rng.uniform(z0, z1);
      ia = ia && std::abs(pz - a.z) <= 0.5 * a.h;
      ib = ib && std::abs(pz - b.z) <= 0.5 * b.h;
    }
    in_a += ia;
    in_b += ib;
    in_both += ia && ib;
  }
  const long uni = in_a + in_b - in_both;
  return uni == 0 ? 0.0 : static_cast<double>(in_both) / static_cast<double>(uni);
}

/// Random box pair with a mix of overlapping, nested and disjoint layouts.
inline std::pair<Box3D, Box3D> random_box_pair(Rng& rng) {
  auto box_near = [&](double cx, double cy, double spread) {
    return Box3D(cx + rng.uniform(-spread, spread), cy + rng.uniform(-spread, spread), rng.uniform(-1.0, 1.0),
                 rng.uniform(0.4, 6.0), rng.uniform(0.4, 3.0), rng.uniform(0.5, 3.0), rng.uniform(-3.14, 3.14));
  };
  const double cx = rng.uniform(-40.0, 40.0), cy = rng.uniform(-40.0, 40.0);
  Box3D a = box_near(cx, cy, 0.0);
  Box3D b = box_near(cx, cy, rng.bernoulli(0.15) ? 8.0 : 2.0);
  return {a, b};
}

}  // namespace bevg::testing
