// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/bev_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bevg/hungarian.hpp"
#include "bevg/losses.hpp"

namespace bevg {

using nn::Tape;
using nn::Var;

// ---------------------------------------------------------------------------
// Grid

int GridSpec::width() const { return static_cast<int>(std::ceil((hi.x - lo.x) / cell - 1e-9)); }
int GridSpec::height() const { return static_cast<int>(std::ceil((hi.y - lo.y) / cell - 1e-9)); }

std::optional<std::array<int, 2>> GridSpec::cell_of(double x, double y) const {
  if (!(x >= lo.x && x < hi.x && y >= lo.y && y < hi.y)) return std::nullopt;
  const int col = std::min(static_cast<int>(std::floor((x - lo.x) / cell)), width() - 1);
  const int row = std::min(static_cast<int>(std::floor((y - lo.y) / cell)), height() - 1);
  return std::array<int, 2>{col, row};
}

void GridSpec::validate() const {
  if (!(cell > 0.0)) throw std::invalid_argument("grid: cell size must be positive");
  if (!(hi.x > lo.x && hi.y > lo.y && hi.z > lo.z)) throw std::invalid_argument("grid: hi must exceed lo");
  if (z_bins < 1) throw std::invalid_argument("grid: z_bins must be >= 1");
}

int voxel_input_channels(const GridSpec& grid) { return grid.z_bins * kVoxelChannels + kColumnChannels; }

std::vector<double> voxelize(const PointCloudFrame& frame, const GridSpec& grid) {
  grid.validate();
  const int w = grid.width(), h = grid.height(), nz = grid.z_bins;
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  const int cin = voxel_input_channels(grid);
  std::vector<double> out(cin * plane, 0.0);
  std::vector<int> vcount(static_cast<std::size_t>(nz) * plane, 0);
  std::vector<int> ccount(plane, 0);
  const double zsize = (grid.hi.z - grid.lo.z) / nz;
  const double xs = std::max(std::abs(grid.lo.x), std::abs(grid.hi.x));
  const double ys = std::max(std::abs(grid.lo.y), std::abs(grid.hi.y));
  const int col_base = nz * kVoxelChannels;

  for (const LidarPoint& p : frame.points) {
    const double px = p.x, py = p.y, pz = p.z;
    const auto c = grid.cell_of(px, py);
    if (!c || !(pz >= grid.lo.z && pz < grid.hi.z)) continue;
    const int bin = std::min(static_cast<int>((pz - grid.lo.z) / zsize), nz - 1);
    const std::size_t cell = static_cast<std::size_t>((*c)[1]) * w + (*c)[0];
    const std::size_t vbase = static_cast<std::size_t>(bin) * kVoxelChannels;
    out[(vbase + 1) * plane + cell] += (px - grid.center_x((*c)[0])) / grid.cell;
    out[(vbase + 2) * plane + cell] += (py - grid.center_y((*c)[1])) / grid.cell;
    out[(vbase + 3) * plane + cell] += (pz - (grid.lo.z + (bin + 0.5) * zsize)) / zsize;
    out[(vbase + 4) * plane + cell] += p.intensity;
    ++vcount[bin * plane + cell];
    out[(col_base + 0) * plane + cell] += px / xs;
    out[(col_base + 1) * plane + cell] += py / ys;
    ++ccount[cell];
  }
  for (int bin = 0; bin < nz; ++bin) {
    const std::size_t vbase = static_cast<std::size_t>(bin) * kVoxelChannels;
    for (std::size_t cell = 0; cell < plane; ++cell) {
      const int n = vcount[bin * plane + cell];
      if (n == 0) continue;
      out[vbase * plane + cell] = 1.0;
      for (int f = 1; f < kVoxelChannels; ++f) out[(vbase + f) * plane + cell] /= n;
    }
  }
  for (std::size_t cell = 0; cell < plane; ++cell) {
    const int n = ccount[cell];
    if (n == 0) continue;
    out[(col_base + 0) * plane + cell] /= n;
    out[(col_base + 1) * plane + cell] /= n;
    out[(col_base + 2) * plane + cell] = std::log1p(static_cast<double>(n)) / 4.0;
  }
  return out;
}

std::vector<int> occupancy_plane(const PointCloudFrame& frame, const GridSpec& grid) {
  grid.validate();
  std::vector<int> occ(static_cast<std::size_t>(grid.width()) * grid.height(), 0);
  for (const LidarPoint& p : frame.points) {
    const auto c = grid.cell_of(p.x, p.y);
    if (!c || !(p.z >= grid.lo.z && p.z < grid.hi.z)) continue;
    occ[static_cast<std::size_t>((*c)[1]) * grid.width() + (*c)[0]] = 1;
  }
  return occ;
}

// ---------------------------------------------------------------------------
// Config

void ModelConfig::validate() const {
  grid.validate();
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("model config: " + msg);
  };
  need(bev_channels > 0 && model_dim > 0 && ffn_dim > 0 && text_dim > 0 && image_channels > 0, "widths must be positive");
  need(heads > 0 && model_dim % heads == 0, "model_dim must be divisible by heads");
  need(model_dim % 4 == 0, "model_dim must be a multiple of 4");
  need(num_proposals >= 1, "num_proposals must be >= 1");
  need(num_proposals <= grid.width() * grid.height(), "num_proposals exceeds the number of BEV cells");
  need(image_width > 0 && image_height > 0, "image size must be positive");
  need(!lift_heights.empty(), "lift_heights must not be empty");
  need(heatmap_min_radius >= 0, "heatmap_min_radius must be >= 0");
}

nlohmann::json to_json(const GridSpec& g) {
  return {{"lo", {g.lo.x, g.lo.y, g.lo.z}}, {"hi", {g.hi.x, g.hi.y, g.hi.z}}, {"cell", g.cell}, {"z_bins", g.z_bins}};
}

GridSpec grid_from_json(const nlohmann::json& j) {
  GridSpec g;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "lo") {
      g.lo = {it->at(0).get<double>(), it->at(1).get<double>(), it->at(2).get<double>()};
    } else if (k == "hi") {
      g.hi = {it->at(0).get<double>(), it->at(1).get<double>(), it->at(2).get<double>()};
    } else if (k == "cell") {
      g.cell = it->get<double>();
    } else if (k == "z_bins") {
      g.z_bins = it->get<int>();
    } else {
      throw std::invalid_argument("grid config: unknown key '" + k + "'");
    }
  }
  return g;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"grid", to_json(c.grid)},
          {"bev_channels", c.bev_channels},
          {"model_dim", c.model_dim},
          {"heads", c.heads},
          {"ffn_dim", c.ffn_dim},
          {"num_proposals", c.num_proposals},
          {"text_dim", c.text_dim},
          {"image_channels", c.image_channels},
          {"image_width", c.image_width},
          {"image_height", c.image_height},
          {"lift_heights", c.lift_heights},
          {"use_images", c.use_images},
          {"use_encoder", c.use_encoder},
          {"use_spca", c.use_spca},
          {"use_seca", c.use_seca},
          {"heatmap_min_overlap", c.heatmap_min_overlap},
          {"heatmap_min_radius", c.heatmap_min_radius},
          {"w_heatmap", c.w_heatmap},
          {"w_cls", c.w_cls},
          {"w_reg", c.w_reg},
          {"cost_cls", c.cost_cls},
          {"cost_box", c.cost_box},
          {"heatmap_bias", c.heatmap_bias},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = *it;
    if (k == "grid") c.grid = grid_from_json(v);
    else if (k == "bev_channels") c.bev_channels = v.get<int>();
    else if (k == "model_dim") c.model_dim = v.get<int>();
    else if (k == "heads") c.heads = v.get<int>();
    else if (k == "ffn_dim") c.ffn_dim = v.get<int>();
    else if (k == "num_proposals") c.num_proposals = v.get<int>();
    else if (k == "text_dim") c.text_dim = v.get<int>();
    else if (k == "image_channels") c.image_channels = v.get<int>();
    else if (k == "image_width") c.image_width = v.get<int>();
    else if (k == "image_height") c.image_height = v.get<int>();
    else if (k == "lift_heights") c.lift_heights = v.get<std::vector<double>>();
    else if (k == "use_images") c.use_images = v.get<bool>();
    else if (k == "use_encoder") c.use_encoder = v.get<bool>();
    else if (k == "use_spca") c.use_spca = v.get<bool>();
    else if (k == "use_seca") c.use_seca = v.get<bool>();
    else if (k == "heatmap_min_overlap") c.heatmap_min_overlap = v.get<double>();
    else if (k == "heatmap_min_radius") c.heatmap_min_radius = v.get<int>();
    else if (k == "w_heatmap") c.w_heatmap = v.get<double>();
    else if (k == "w_cls") c.w_cls = v.get<double>();
    else if (k == "w_reg") c.w_reg = v.get<double>();
    else if (k == "cost_cls") c.cost_cls = v.get<double>();
    else if (k == "cost_box") c.cost_box = v.get<double>();
    else if (k == "heatmap_bias") c.heatmap_bias = v.get<double>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else throw std::invalid_argument("model config: unknown key '" + k + "'");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Box encoding

std::array<double, kBoxCode> encode_box(const Box3D& box, int col, int row, const GridSpec& grid) {
  return {(box.x - grid.lo.x) / grid.cell - (col + 0.5),
          (box.y - grid.lo.y) / grid.cell - (row + 0.5),
          box.z,
          std::log(box.l),
          std::log(box.w),
          std::log(box.h),
          std::sin(box.alpha),
          std::cos(box.alpha)};
}

Box3D decode_box(std::span<const double> code, int col, int row, const GridSpec& grid) {
  if (code.size() < static_cast<std::size_t>(kBoxCode)) throw std::invalid_argument("decode_box: short code");
  auto dim = [](double v) { return std::exp(std::clamp(v, -6.0, 6.0)); };
  return Box3D((col + 0.5 + code[0]) * grid.cell + grid.lo.x, (row + 0.5 + code[1]) * grid.cell + grid.lo.y, code[2],
               dim(code[3]), dim(code[4]), dim(code[5]), std::atan2(code[6], code[7]));
}

// ---------------------------------------------------------------------------
// Scene inputs

LiftTable build_lift_table(const CameraRig& cams, const GridSpec& grid, double ground_z,
                           std::span<const double> heights, int feat_width, int feat_height) {
  LiftTable t;
  t.feat_width = feat_width;
  t.feat_height = feat_height;
  const int w = grid.width(), h = grid.height();
  t.offsets.reserve(static_cast<std::size_t>(w) * h + 1);
  t.offsets.push_back(0);
  const std::int32_t fplane = feat_width * feat_height;
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      for (double dz : heights) {
        const Vec3 p{grid.center_x(col), grid.center_y(row), ground_z + dz};
        for (std::size_t k = 0; k < cams.size(); ++k) {
          const auto hit = cams[k].project(p);
          if (!hit || !cams[k].in_image(*hit)) continue;
          const int fx = std::clamp(static_cast<int>(hit->u * feat_width / cams[k].width), 0, feat_width - 1);
          const int fy = std::clamp(static_cast<int>(hit->v * feat_height / cams[k].height), 0, feat_height - 1);
          t.entries.push_back(static_cast<std::int32_t>(k) * fplane + fy * feat_width + fx);
        }
      }
      t.offsets.push_back(t.entries.size());
    }
  }
  return t;
}

std::vector<double> image_tensor(const Raster& image, int width, int height) {
  if (image.empty()) throw std::invalid_argument("image_tensor: empty image");
  const int sw = image.width(), sh = image.height();
  const auto bytes = image.bytes();
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  std::vector<double> out(3 * plane, 0.0);
  for (int ty = 0; ty < height; ++ty) {
    const int y0 = ty * sh / height;
    const int y1 = std::max(y0 + 1, (ty + 1) * sh / height);
    for (int tx = 0; tx < width; ++tx) {
      const int x0 = tx * sw / width;
      const int x1 = std::max(x0 + 1, (tx + 1) * sw / width);
      double acc[3] = {0.0, 0.0, 0.0};
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const std::size_t o = (static_cast<std::size_t>(y) * sw + x) * 3;
          for (int c = 0; c < 3; ++c) acc[c] += bytes[o + c];
        }
      }
      const double n = static_cast<double>((y1 - y0) * (x1 - x0)) * 255.0;
      for (int c = 0; c < 3; ++c) out[c * plane + static_cast<std::size_t>(ty) * width + tx] = acc[c] / n;
    }
  }
  return out;
}

SceneInput prepare_scene(const PointCloudFrame& cloud, const ModelConfig& cfg) {
  SceneInput s;
  s.voxels = voxelize(cloud, cfg.grid);
  return s;
}

SceneInput prepare_scene(const PointCloudFrame& cloud, std::span<const Raster> images, const CameraRig& cams,
                         double ground_z, const ModelConfig& cfg) {
  if (images.size() != kNumCameras) throw std::invalid_argument("prepare_scene: expected 6 images");
  SceneInput s = prepare_scene(cloud, cfg);
  s.images.reserve(kNumCameras * 3 * static_cast<std::size_t>(cfg.image_width) * cfg.image_height);
  for (const Raster& r : images) {
    const auto t = image_tensor(r, cfg.image_width, cfg.image_height);
    s.images.insert(s.images.end(), t.begin(), t.end());
  }
  s.lift = std::make_shared<LiftTable>(
      build_lift_table(cams, cfg.grid, ground_z, cfg.lift_heights, cfg.image_width, cfg.image_height));
  return s;
}

// ---------------------------------------------------------------------------
// Proposal selection

std::vector<int> select_top_cells(std::span<const double> scores, int height, int width, int k) {
  const int n = height * width;
  if (scores.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("select_top_cells: size mismatch");
  if (k < 1 || k > n) throw std::invalid_argument("select_top_cells: K must be in [1, H*W]");
  std::vector<double> kept(n, 0.0);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double v = scores[static_cast<std::size_t>(r) * width + c];
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if ((dr == 0 && dc == 0) || rr < 0 || cc < 0 || rr >= height || cc >= width) continue;
          if (scores[static_cast<std::size_t>(rr) * width + cc] > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) kept[static_cast<std::size_t>(r) * width + c] = v;
    }
  }
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    if (kept[a] != kept[b]) return kept[a] > kept[b];
    return a < b;
  });
  idx.resize(k);
  return idx;
}

std::vector<double> positional_encoding(std::span<const int> cells, int width, int dim) {
  if (dim % 4 != 0) throw std::invalid_argument("positional_encoding: dim must be a multiple of 4");
  const int nf = dim / 4;
  std::vector<double> omega(nf);
  const double longest = 2.0 * width;
  const double shortest = 4.0;
  for (int i = 0; i < nf; ++i) {
    const double f = nf == 1 ? 0.0 : static_cast<double>(i) / (nf - 1);
    const double period = longest * std::pow(shortest / longest, f);
    omega[i] = 2.0 * kPi / period;
  }
  std::vector<double> out(cells.size() * static_cast<std::size_t>(dim));
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const double x = cells[r] % width + 0.5;
    const double y = cells[r] / width + 0.5;
    double* o = out.data() + r * dim;
    for (int i = 0; i < nf; ++i) {
      o[i] = std::sin(omega[i] * x);
      o[nf + i] = std::cos(omega[i] * x);
      o[2 * nf + i] = std::sin(omega[i] * y);
      o[3 * nf + i] = std::cos(omega[i] * y);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model

namespace {

// Mean of image-feature pixels over each cell's lift entries.
Var lift_to_bev(Var feats, const LiftTable& table, int channels, int height, int width) {
  Tape& t = *feats.tape();
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  const std::size_t fplane = static_cast<std::size_t>(table.feat_width) * table.feat_height;
  if (table.offsets.size() != plane + 1) throw std::invalid_argument("lift: table does not match the grid");
  if (feats.numel() != kNumCameras * channels * fplane) throw std::invalid_argument("lift: feature size mismatch");
  const auto f = feats.value();
  std::vector<double> out(channels * plane, 0.0);
  auto src = [&](std::int32_t e, int c) {
    const std::size_t cam = static_cast<std::size_t>(e) / fplane;
    const std::size_t pix = static_cast<std::size_t>(e) % fplane;
    return (cam * channels + c) * fplane + pix;
  };
  for (std::size_t cell = 0; cell < plane; ++cell) {
    const std::size_t b = table.offsets[cell], e = table.offsets[cell + 1];
    if (b == e) continue;
    const double inv = 1.0 / static_cast<double>(e - b);
    for (int c = 0; c < channels; ++c) {
      double s = 0.0;
      for (std::size_t i = b; i < e; ++i) s += f[src(table.entries[i], c)];
      out[c * plane + cell] = s * inv;
    }
  }
  const int fi = feats.id();
  const LiftTable* tp = &table;
  return t.record({channels, height, width}, std::move(out), {feats}, [=](Tape& tape, int o) {
    const auto g = tape.grad_view(o);
    auto gf = tape.grad(fi);
    for (std::size_t cell = 0; cell < plane; ++cell) {
      const std::size_t b = tp->offsets[cell], e = tp->offsets[cell + 1];
      if (b == e) continue;
      const double inv = 1.0 / static_cast<double>(e - b);
      for (int c = 0; c < channels; ++c) {
        const double gc = g[c * plane + cell] * inv;
        for (std::size_t i = b; i < e; ++i) {
          const std::size_t cam = static_cast<std::size_t>(tp->entries[i]) / fplane;
          const std::size_t pix = static_cast<std::size_t>(tp->entries[i]) % fplane;
          gf[(cam * channels + c) * fplane + pix] += gc;
        }
      }
    }
  });
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

BevGroundingModel::BevGroundingModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  build();
}

void BevGroundingModel::build() {
  Rng rng(cfg_.seed);
  const int c = cfg_.bev_channels, d = cfg_.model_dim, ci = cfg_.image_channels;
  auto& ps = params_;
  pt_conv1_ = nn::Conv2d::create(ps, rng, "points.conv1", voxel_input_channels(cfg_.grid), c, 3, 1, false);
  pt_conv2_ = nn::Conv2d::create(ps, rng, "points.conv2", c, c, 3, 1, false);

  img_conv1_ = nn::Conv2d::create(ps, rng, "image.conv1", 3, ci, 3, 1, false);
  img_conv2_ = nn::Conv2d::create(ps, rng, "image.conv2", ci, ci, 3, 1, false);
  img_fuse_ = nn::Conv2d::create(ps, rng, "image.fuse", ci, c, 1, 1, false, 0.0, /*zero_init=*/true);

  reduce_ = nn::Conv2d::create(ps, rng, "encoder.reduce", c + cfg_.text_dim, c, 1);
  down1_ = nn::Conv2d::create(ps, rng, "encoder.down1", c, c, 3, 2);
  down2_ = nn::Conv2d::create(ps, rng, "encoder.down2", c, c, 3, 2);
  lat0_ = nn::Conv2d::create(ps, rng, "encoder.lat0", c, c, 1);
  lat1_ = nn::Conv2d::create(ps, rng, "encoder.lat1", c, c, 1);
  lat2_ = nn::Conv2d::create(ps, rng, "encoder.lat2", c, c, 1);
  smooth_ = nn::Conv2d::create(ps, rng, "encoder.smooth", c, c, 3);

  heat_conv_ = nn::Conv2d::create(ps, rng, "heatmap.conv", c, c, 3);
  heat_out_ = nn::Conv2d::create(ps, rng, "heatmap.out", c, 1, 1, 1, true, cfg_.heatmap_bias);

  pro_in_ = nn::Linear::create(ps, rng, "decoder.proposal_in", c, d);
  bev_in_ = nn::Linear::create(ps, rng, "decoder.bev_in", c, d);
  word_in_ = nn::Linear::create(ps, rng, "decoder.word_in", cfg_.text_dim, d);
  sa1_ = nn::AttentionBlock::create(ps, rng, "decoder.sa1", d, cfg_.heads, cfg_.ffn_dim);
  spca_ = nn::AttentionBlock::create(ps, rng, "decoder.spca", d, cfg_.heads, cfg_.ffn_dim);
  sa2_ = nn::AttentionBlock::create(ps, rng, "decoder.sa2", d, cfg_.heads, cfg_.ffn_dim);
  seca_ = nn::AttentionBlock::create(ps, rng, "decoder.seca", d, cfg_.heads, cfg_.ffn_dim);
  head_ = nn::Mlp::create(ps, rng, "head", d, d, kHeadOut);

  const int n = cfg_.grid.width() * cfg_.grid.height();
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  bev_pos_ = positional_encoding(all, cfg_.grid.width(), d);
}

Var BevGroundingModel::encode_points(Tape& t, const SceneInput& scene) const {
  const int h = cfg_.grid.height(), w = cfg_.grid.width();
  const int cin = voxel_input_channels(cfg_.grid);
  if (scene.voxels.size() != static_cast<std::size_t>(cin) * h * w) {
    throw std::invalid_argument("encode_points: voxel grid does not match the model grid");
  }
  const Var x = t.constant({cin, h, w}, scene.voxels);
  return nn::relu(pt_conv2_(t, params_mut(), nn::relu(pt_conv1_(t, params_mut(), x))));
}

Var BevGroundingModel::encode_images(Tape& t, const SceneInput& scene) const {
  if (!scene.lift) throw std::invalid_argument("encode_images: camera calibration (lift table) missing");
  const int fw = cfg_.image_width, fh = cfg_.image_height;
  const std::size_t per = 3 * static_cast<std::size_t>(fw) * fh;
  if (scene.images.size() != kNumCameras * per) throw std::invalid_argument("encode_images: expected 6 images");
  if (scene.lift->feat_width != fw || scene.lift->feat_height != fh) {
    throw std::invalid_argument("encode_images: lift table built for another image size");
  }
  std::vector<Var> views;
  for (std::size_t k = 0; k < kNumCameras; ++k) {
    const Var img = t.constant({3, fh, fw}, std::vector<double>(scene.images.begin() + k * per,
                                                                scene.images.begin() + (k + 1) * per));
    views.push_back(nn::relu(img_conv2_(t, params_mut(), nn::relu(img_conv1_(t, params_mut(), img)))));
  }
  const Var stacked = nn::concat_channels(views);
  return lift_to_bev(stacked, *scene.lift, cfg_.image_channels, cfg_.grid.height(), cfg_.grid.width());
}

Var BevGroundingModel::fuse(Tape& t, Var points, const SceneInput& scene) const {
  if (!cfg_.use_images) return points;
  return nn::add(points, img_fuse_(t, params_mut(), encode_images(t, scene)));
}

Var BevGroundingModel::trimodal_encode(Tape& t, Var fused, std::span<const double> sentence) const {
  if (!cfg_.use_encoder) return fused;
  if (sentence.size() != static_cast<std::size_t>(cfg_.text_dim)) {
    throw std::invalid_argument("trimodal_encode: sentence width " + std::to_string(sentence.size()) +
                                " does not match text_dim " + std::to_string(cfg_.text_dim));
  }
  const int h = fused.dim(1), w = fused.dim(2);
  if (h != cfg_.grid.height() || w != cfg_.grid.width()) throw std::invalid_argument("trimodal_encode: spatial mismatch");
  auto& ps = params_mut();
  const Var sen = t.constant({cfg_.text_dim}, std::vector<double>(sentence.begin(), sentence.end()));
  const Var tiled = nn::tile_channels(sen, h, w);
  const std::array<Var, 2> parts{fused, tiled};
  const Var c0 = nn::relu(reduce_(t, ps, nn::concat_channels(parts)));
  const Var c1 = nn::relu(down1_(t, ps, c0));
  const Var c2 = nn::relu(down2_(t, ps, c1));
  const Var p2 = lat2_(t, ps, c2);
  const Var p1 = nn::add(lat1_(t, ps, c1), nn::upsample2x(p2, c1.dim(1), c1.dim(2)));
  const Var p0 = nn::add(lat0_(t, ps, c0), nn::upsample2x(p1, h, w));
  return nn::relu(smooth_(t, ps, p0));
}

Var BevGroundingModel::heatmap_logits(Tape& t, Var bev) const {
  auto& ps = params_mut();
  const Var h = heat_out_(t, ps, nn::relu(heat_conv_(t, ps, bev)));
  return nn::reshape(h, {cfg_.grid.height() * cfg_.grid.width()});
}

Var BevGroundingModel::proposal_features(Tape& t, Var bev, std::span<const int> cells) const {
  const int c = bev.dim(0);
  const int n = bev.dim(1) * bev.dim(2);
  const Var rows = nn::transpose(nn::reshape(bev, {c, n}));
  const Var gathered = nn::gather_rows(rows, cells);
  const Var pos = t.constant({static_cast<int>(cells.size()), cfg_.model_dim},
                             positional_encoding(cells, cfg_.grid.width(), cfg_.model_dim));
  return nn::add(pro_in_(t, params_mut(), gathered), pos);
}

Var BevGroundingModel::decode(Tape& t, Var proposals, Var bev, const TextEmbeddings& text, ForwardResult* record) const {
  auto& ps = params_mut();
  const bool keep = record != nullptr;
  auto note = [&](const char* name, nn::AttentionOutput& a) {
    if (keep) record->attention.emplace_back(name, std::move(a.weights));
    return a.out;
  };
  Var x = proposals;
  {
    auto a = sa1_(t, ps, x, Var{}, x, Var{}, keep);
    x = note("sa1", a);
  }
  if (cfg_.use_spca) {
    const int c = bev.dim(0);
    const int n = bev.dim(1) * bev.dim(2);
    const Var kv = bev_in_(t, ps, nn::transpose(nn::reshape(bev, {c, n})));
    const Var kpos = t.constant({n, cfg_.model_dim}, bev_pos_);
    auto a = spca_(t, ps, x, Var{}, kv, kpos, keep);
    x = note("spca", a);
  }
  {
    auto a = sa2_(t, ps, x, Var{}, x, Var{}, keep);
    x = note("sa2", a);
  }
  if (cfg_.use_seca) {
    if (text.dim != cfg_.text_dim) throw std::invalid_argument("decode: word embedding width mismatch");
    const int len = static_cast<int>(text.length());
    const Var words = word_in_(t, ps, t.constant({len, text.dim}, text.word));
    auto a = seca_(t, ps, x, Var{}, words, Var{}, keep);
    x = note("seca", a);
  }
  return x;
}

ForwardResult BevGroundingModel::forward(Tape& t, const SceneInput& scene, const TextEmbeddings& text,
                                         bool keep_attention) const {
  return forward_with_cells(t, scene, text, {}, keep_attention);
}

ForwardResult BevGroundingModel::forward_with_cells(Tape& t, const SceneInput& scene, const TextEmbeddings& text,
                                                    std::vector<int> cells, bool keep_attention) const {
  if (text.dim != cfg_.text_dim) {
    throw std::invalid_argument("model: text width " + std::to_string(text.dim) + " does not match text_dim " +
                                std::to_string(cfg_.text_dim));
  }
  ForwardResult fr;
  const Var pts = encode_points(t, scene);
  const Var fused = fuse(t, pts, scene);
  fr.bev = trimodal_encode(t, fused, text.sentence);
  fr.heat_logits = heatmap_logits(t, fr.bev);
  if (cells.empty()) {
    const auto logits = fr.heat_logits.value();
    std::vector<double> heat(logits.size());
    for (std::size_t i = 0; i < heat.size(); ++i) heat[i] = sigmoid(logits[i]);
    cells = select_top_cells(heat, cfg_.grid.height(), cfg_.grid.width(), cfg_.num_proposals);
  }
  fr.cells = std::move(cells);
  const Var pro = proposal_features(t, fr.bev, fr.cells);
  fr.proposals = decode(t, pro, fr.bev, text, keep_attention ? &fr : nullptr);
  fr.head = head_(t, params_mut(), fr.proposals);
  return fr;
}

std::vector<double> BevGroundingModel::heatmap_target(const Box3D& target) const {
  const GridSpec& g = cfg_.grid;
  std::vector<double> heat(static_cast<std::size_t>(g.width()) * g.height(), 0.0);
  const auto c = g.cell_of(target.x, target.y);
  if (!c) return heat;
  const double r = gaussian_radius(target.l / g.cell, target.w / g.cell, cfg_.heatmap_min_overlap);
  const int radius = std::max(cfg_.heatmap_min_radius, static_cast<int>(r));
  draw_gaussian(heat, g.height(), g.width(), (*c)[0], (*c)[1], radius);
  return heat;
}

LossTerms BevGroundingModel::loss(const ForwardResult& fr, const Box3D& target) const {
  const int k = static_cast<int>(fr.cells.size());
  if (k == 0) throw std::invalid_argument("loss: no proposals");
  const GridSpec& g = cfg_.grid;
  const int w = g.width();
  const auto head = fr.head.value();

  CostMatrix cost{k, 1, std::vector<double>(k)};
  std::vector<std::array<double, kBoxCode>> codes(k);
  for (int i = 0; i < k; ++i) {
    codes[i] = encode_box(target, fr.cells[i] % w, fr.cells[i] / w, g);
    double l1 = 0.0;
    for (int j = 0; j < kBoxCode; ++j) l1 += std::abs(head[static_cast<std::size_t>(i) * kHeadOut + j] - codes[i][j]);
    const double p = sigmoid(head[static_cast<std::size_t>(i) * kHeadOut + kBoxCode]);
    cost(i, 0) = cfg_.cost_cls * (1.0 - p) + cfg_.cost_box * l1;
  }
  const int m = hungarian_match(cost).row_of_col[0];

  LossTerms out;
  out.matched = m;
  const auto target_heat = heatmap_target(target);
  const Var l_heat = gaussian_focal_loss(fr.heat_logits, target_heat);
  std::vector<double> labels(k, 0.0);
  labels[m] = 1.0;
  const Var l_cls = sigmoid_focal_loss(nn::slice_cols(fr.head, kBoxCode, 1), labels);
  const std::array<int, 1> rows{m};
  const Var l_reg = l1_loss(nn::gather_rows(nn::slice_cols(fr.head, 0, kBoxCode), rows), codes[m]);
  out.heatmap = l_heat.item();
  out.cls = l_cls.item();
  out.reg = l_reg.item();
  out.total = nn::add(nn::add(nn::scale(l_heat, cfg_.w_heatmap), nn::scale(l_cls, cfg_.w_cls)),
                      nn::scale(l_reg, cfg_.w_reg));
  return out;
}

std::vector<Detection> BevGroundingModel::decode_all(const ForwardResult& fr) const {
  const int w = cfg_.grid.width();
  const auto head = fr.head.value();
  std::vector<Detection> out;
  for (std::size_t i = 0; i < fr.cells.size(); ++i) {
    const std::span<const double> row(head.data() + i * kHeadOut, kHeadOut);
    Detection d;
    d.cell = fr.cells[i];
    d.box = decode_box(row, d.cell % w, d.cell / w, cfg_.grid);
    d.confidence = sigmoid(row[kBoxCode]);
    out.push_back(d);
  }
  return out;
}

Detection BevGroundingModel::predict(const SceneInput& scene, const TextEmbeddings& text) const {
  Tape t;
  t.set_grad_enabled(false);
  const ForwardResult fr = forward(t, scene, text);
  const auto dets = decode_all(fr);
  std::size_t best = 0;
  for (std::size_t i = 1; i < dets.size(); ++i) {
    if (dets[i].confidence > dets[best].confidence) best = i;
  }
  return dets[best];
}

}  // namespace bevg
