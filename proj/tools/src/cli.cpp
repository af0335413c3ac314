// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/cli/cli.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "bevg/annotate.hpp"
#include "bevg/baseline.hpp"
#include "bevg/bev_train.hpp"
#include "bevg/detector.hpp"
#include "bevg/evalkit.hpp"
#include "bevg/textenc.hpp"

namespace bevg::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string output_dir = ".";
  int verbosity = 0;

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : fs::path(output_dir) / path;
  }
};

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("not a number list: " + csv);
    }
  }
  if (out.empty()) throw UsageError("empty number list");
  return out;
}

nlohmann::json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return nlohmann::json::parse(in);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

// ---------------------------------------------------------------------------

struct PreprocessArgs {
  std::string input;
  std::string output = "samples.jsonl";
  std::string lidar_root;
  int min_points = 1;
  double test_fraction = 0.0;
};

int cmd_preprocess(const Globals& g, const PreprocessArgs& a, std::ostream& out) {
  std::ifstream in(g.resolve(a.input));
  if (!in) throw std::runtime_error("cannot read " + g.resolve(a.input).string());
  PreprocessOptions opts;
  opts.min_points = a.min_points;
  PointCloudLoader loader;
  if (!a.lidar_root.empty()) loader = directory_loader(g.resolve(a.lidar_root));
  const auto res = preprocess_jsonl(in, opts, loader);
  const auto dst = g.resolve(a.output);
  if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
  write_samples(dst, res.samples);
  std::vector<nlohmann::json> rejected;
  for (const auto& d : res.rejected) {
    rejected.push_back({{"record_index", d.record_index}, {"sample_id", d.sample_id}, {"reason", d.reason}});
  }
  write_jsonl(fs::path(dst).replace_filename("rejected.jsonl"), rejected);
  if (a.test_fraction > 0.0) {
    const auto split = make_split(res.samples, a.test_fraction, g.seed);
    write_text(fs::path(dst).replace_filename("split.json"), to_json(split).dump(2) + "\n");
  }
  out << "kept " << res.samples.size() << " rejected " << res.rejected.size() << " malformed " << res.malformed
      << '\n';
  for (const auto& [reason, n] : res.dropped_by_reason) out << "  " << reason << ": " << n << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out_dir = "corpus";
  int scenes = 100;
  int prompts_per_scene = 3;
  int min_objects = 4;
  int max_objects = 10;
  bool no_images = false;
  double test_fraction = 0.2;
  bool proposals = false;
};

int cmd_synth(const Globals& g, const SynthArgs& a, std::ostream& out) {
  SynthOptions so;
  so.seed = g.seed;
  so.n_scenes = a.scenes;
  so.prompts_per_scene = a.prompts_per_scene;
  so.min_objects = a.min_objects;
  so.max_objects = a.max_objects;
  so.write_images = !a.no_images;
  const auto corpus = synth_corpus(so);
  for (const auto& w : corpus.warnings) spdlog::warn("{}", w);
  const auto root = g.resolve(a.out_dir);
  write_corpus(corpus, root, !a.no_images);
  std::vector<fs::path> files{root / "samples.jsonl", root / "scenes.jsonl"};
  const auto samples = corpus.all_samples();
  if (a.test_fraction > 0.0) {
    const auto split = make_split(samples, a.test_fraction, g.seed);
    write_text(root / "split.json", to_json(split).dump(2) + "\n");
    files.push_back(root / "split.json");
    // Per-subset sample files so eval can take the test subset as --gt.
    const std::set<std::string> test_ids(split.test.begin(), split.test.end());
    std::vector<GroundingSample> train_part, test_part;
    for (const auto& s : samples) (test_ids.count(s.sample_id) ? test_part : train_part).push_back(s);
    write_samples(root / "train_samples.jsonl", train_part);
    write_samples(root / "test_samples.jsonl", test_part);
  }
  if (a.proposals) {
    NoisyDetectorOptions d;
    d.seed = g.seed;
    std::vector<ProposalFrame> frames;
    for (const auto& sc : corpus.scenes) frames.push_back(detect_scene(sc.scene, d));
    write_proposals(root / "proposals.jsonl", frames);
    files.push_back(root / "proposals.jsonl");
  }
  for (const auto& sc : corpus.scenes) files.push_back(root / sc.scene.lidar_ref);
  out << "scenes " << corpus.scenes.size() << " samples " << samples.size() << " skipped " << corpus.warnings.size()
      << '\n';
  out << "checksum " << checksum_files(files) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct AnnotateArgs {
  std::string corpus = "corpus";
  std::string out_dir = "annotation";
  double rate = 0.2;
  bool mock = false;
  std::string captioner_url;
  std::string paraphraser_url;
  double timeout = 60.0;
  int max_retries = 3;
  double backoff = 0.5;
  int max_in_flight = 4;
  double mock_failure_rate = 0.0;
};

int cmd_annotate(const Globals& g, const AnnotateArgs& a, std::ostream& out) {
  const auto root = g.resolve(a.corpus);
  AnnotationJob job;
  job.frames = load_annotation_frames(root);
  job.sampling_rate = a.rate;
  job.seed = g.seed;
  MockOptions mo{g.seed, a.mock_failure_rate};
  FMClientConfig cc;
  cc.timeout_s = a.timeout;
  cc.max_retries = a.max_retries;
  cc.backoff_initial_s = a.backoff;
  std::unique_ptr<FMClient> captioner, paraphraser;
  try {
    cc.endpoint = a.captioner_url;
    captioner = make_client(ClientKind::captioner, cc, a.mock, mo);
    cc.endpoint = a.paraphraser_url;
    paraphraser = make_client(ClientKind::paraphraser, cc, a.mock, mo);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  AnnotateOptions opts;
  opts.retry.max_retries = a.max_retries;
  opts.retry.backoff_initial_s = a.mock ? 0.0 : a.backoff;
  opts.max_in_flight = a.max_in_flight;
  const auto res = run_annotation(job, *captioner, *paraphraser, directory_image_loader(root), opts);
  write_annotation(res, g.resolve(a.out_dir));
  out << "sampled " << res.sampled << " filtered " << res.filtered << " failed " << res.failures.size()
      << " emitted " << res.samples.size() << '\n';
  if (res.samples.empty() && !res.failures.empty()) {
    throw RemoteExhausted("every annotation request failed; see failures.jsonl");
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  std::string samples = "corpus/samples.jsonl";
  bool json = false;
};

int cmd_stats(const Globals& g, const StatsArgs& a, std::ostream& out) {
  const auto samples = read_samples(g.resolve(a.samples));
  const auto stats = corpus_stats(samples);
  out << (a.json ? to_json(stats).dump(2) + "\n" : format_stats(stats));
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainBaselineArgs {
  std::string corpus = "corpus";
  std::string proposals;
  std::string subset = "train";
  std::string out = "matcher.bin";
  int epochs = 20;
  int batch = 4;
  double lr = 0.01;
  double momentum = 0.9;
  int text_dim = 64;
};

std::map<std::string, ProposalFrame> load_proposal_map(const fs::path& path) {
  std::map<std::string, ProposalFrame> out;
  for (auto& f : read_proposals(path)) {
    const std::string id = f.frame_id;
    out.emplace(id, std::move(f));
  }
  return out;
}

int cmd_train_baseline(const Globals& g, const TrainBaselineArgs& a, std::ostream& out) {
  const Corpus corpus(g.resolve(a.corpus));
  const auto proposals =
      load_proposal_map(a.proposals.empty() ? corpus.root() / "proposals.jsonl" : g.resolve(a.proposals));
  EncoderSpec es{"hash-test", a.text_dim, g.seed, {}, false};
  const auto enc = make_encoder(es);
  std::vector<MatchExample> examples;
  std::size_t skipped = 0;
  for (const auto& s : corpus.subset(a.subset)) {
    const auto it = proposals.find(s.scene_id);
    if (it == proposals.end() || it->second.proposals.empty()) {
      ++skipped;
      continue;
    }
    const auto pos = positive_proposal(it->second.proposals, s.referred);
    if (!pos) {
      ++skipped;
      continue;
    }
    examples.push_back(make_match_example(it->second.proposals, enc->encode(s.prompt), *pos));
  }
  if (examples.empty()) throw std::runtime_error("no training example has a positive proposal");
  MatchHead head(a.text_dim, static_cast<int>(examples.front().features.size() / examples.front().n), 256, 128,
                 g.seed);
  MatcherConfig mc;
  mc.epochs = a.epochs;
  mc.batch_size = a.batch;
  mc.lr = a.lr;
  mc.momentum = a.momentum;
  mc.seed = g.seed;
  const auto rep = train_matcher(head, examples, mc, skipped);
  for (std::size_t e = 0; e < rep.epoch_loss.size(); ++e) {
    spdlog::info("epoch {} loss {:.4f} acc {:.4f}", e + 1, rep.epoch_loss[e], rep.epoch_accuracy[e]);
  }
  save_match_head(g.resolve(a.out), head, es);
  out << "examples " << examples.size() << " skipped " << rep.skipped << " final_loss " << rep.epoch_loss.back()
      << " train_selection_acc " << rep.epoch_accuracy.back() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainBevArgs {
  std::string corpus = "corpus";
  std::string subset = "train";
  std::string model_config;
  std::string out = "bevgrounding.ckpt";
  std::string resume;
  bool lidar_only = false;
  int epochs1 = 20;
  int epochs2 = 6;
  int batch = 4;
  long max_steps1 = 0;
  long max_steps2 = 0;
  double lr1 = 1e-3;
  double lr2 = 1e-4;
  long checkpoint_every = 0;
  int text_dim = 64;
};

TrainSet build_train_set(const Corpus& corpus, const std::vector<GroundingSample>& samples, const ModelConfig& cfg,
                         const TextEncoder& enc, bool with_images) {
  TrainSet ts;
  std::map<std::string, std::size_t> scene_index;
  for (const auto& s : samples) {
    auto it = scene_index.find(s.scene_id);
    if (it == scene_index.end()) {
      ts.scenes.push_back(corpus.scene_input(s.scene_id, cfg, with_images));
      it = scene_index.emplace(s.scene_id, ts.scenes.size() - 1).first;
    }
    ts.items.push_back({s.sample_id, it->second, enc.encode(s.prompt), s.referred});
  }
  return ts;
}

int cmd_train_bev(const Globals& g, const TrainBevArgs& a, std::ostream& out) {
  const Corpus corpus(g.resolve(a.corpus));
  std::unique_ptr<BevGroundingModel> model;
  std::optional<LoadedCheckpoint> resumed;
  EncoderSpec es{"hash-test", a.text_dim, g.seed, {}, false};
  if (!a.resume.empty()) {
    resumed = load_checkpoint(g.resolve(a.resume));
    model = std::move(resumed->model);
    es = resumed->meta.encoder;
  } else {
    ModelConfig cfg;
    if (!a.model_config.empty()) cfg = model_config_from_json(read_json_file(g.resolve(a.model_config)));
    cfg.text_dim = a.text_dim;
    cfg.seed = g.seed;
    cfg.validate();
    model = std::make_unique<BevGroundingModel>(cfg);
  }
  const auto enc = make_encoder(es);
  TrainConfig tc;
  if (resumed && resumed->meta.train) {
    tc = *resumed->meta.train;
  } else {
    tc.batch_size = a.batch;
    tc.stage1_epochs = a.epochs1;
    tc.stage2_epochs = a.epochs2;
    tc.max_steps_stage1 = a.max_steps1;
    tc.max_steps_stage2 = a.max_steps2;
    tc.lr_stage1 = a.lr1;
    tc.lr_stage2 = a.lr2;
    tc.lidar_only = a.lidar_only;
    tc.seed = g.seed;
  }
  const auto samples = corpus.subset(a.subset);
  if (samples.empty()) throw std::runtime_error("no training samples in subset " + a.subset);
  const auto data = build_train_set(corpus, samples, model->config(), *enc, !tc.lidar_only);
  Trainer trainer(*model, data, tc);
  if (resumed) restore_trainer(trainer, *resumed);
  const auto dst = g.resolve(a.out);
  StepLog last;
  trainer.run([&](const StepLog& l) {
    last = l;
    if (l.global_step % 50 == 0) {
      spdlog::info("step {} stage {} epoch {} loss {:.4f} (heat {:.4f} cls {:.4f} reg {:.4f})", l.global_step,
                   l.stage, l.epoch, l.loss, l.heatmap, l.cls, l.reg);
    }
    if (a.checkpoint_every > 0 && l.global_step % a.checkpoint_every == 0) save_checkpoint(dst, *model, es, &trainer);
  });
  save_checkpoint(dst, *model, es, &trainer);
  out << "steps " << trainer.state().global_step << " final_loss " << last.loss << " checkpoint " << dst.string()
      << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string method = "bevgrounding";
  std::string corpus = "corpus";
  std::string subset = "test";
  std::string checkpoint;
  std::string proposals;
  std::string out = "predictions.jsonl";
  int trials = 1;
};

int cmd_predict(const Globals& g, const PredictArgs& a, std::ostream& out) {
  const Corpus corpus(g.resolve(a.corpus));
  const auto samples = corpus.subset(a.subset);
  std::vector<std::vector<PredictionRow>> runs;
  if (a.method == "bevgrounding") {
    if (a.checkpoint.empty()) throw UsageError("--checkpoint is required for bevgrounding");
    const auto ck = load_checkpoint(g.resolve(a.checkpoint));
    const auto enc = make_encoder(ck.meta.encoder);
    const auto& cfg = ck.model->config();
    std::map<std::string, SceneInput> cache;
    runs.emplace_back();
    for (const auto& s : samples) {
      auto it = cache.find(s.scene_id);
      if (it == cache.end()) {
        cache.clear();  // samples are grouped by scene; keep one resident
        it = cache.emplace(s.scene_id, corpus.scene_input(s.scene_id, cfg, cfg.use_images)).first;
      }
      const auto det = ck.model->predict(it->second, enc->encode(s.prompt));
      runs.back().push_back({s.sample_id, det.box, det.confidence});
    }
  } else {
    const auto proposals =
        load_proposal_map(a.proposals.empty() ? corpus.root() / "proposals.jsonl" : g.resolve(a.proposals));
    auto frame_of = [&](const GroundingSample& s) -> const std::vector<Proposal>& {
      const auto it = proposals.find(s.scene_id);
      if (it == proposals.end()) throw IntegrityError("no proposals for scene " + s.scene_id);
      return it->second.proposals;
    };
    if (a.method == "baseline") {
      if (a.checkpoint.empty()) throw UsageError("--checkpoint is required for baseline");
      const auto m = load_match_head(g.resolve(a.checkpoint));
      const auto enc = make_encoder(m.encoder);
      runs.emplace_back();
      for (const auto& s : samples) {
        const auto& props = frame_of(s);
        const auto scores = match_scores(props, enc->encode(s.prompt), *m.head);
        const auto k = argmax_index(scores);
        runs.back().push_back({s.sample_id, props[k].box, scores[k]});
      }
    } else {
      const auto mode = parse_reference_mode(a.method);
      if (!mode) throw UsageError("unknown method " + a.method);
      for (int t = 0; t < a.trials; ++t) {
        Rng rng(mix64(g.seed + static_cast<std::uint64_t>(t)));
        runs.emplace_back();
        for (const auto& s : samples) {
          runs.back().push_back({s.sample_id, reference_select(*mode, s.scene_boxes, frame_of(s), rng), 1.0});
        }
      }
    }
  }
  const auto dst = g.resolve(a.out);
  if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
  for (std::size_t t = 0; t < runs.size(); ++t) {
    fs::path p = dst;
    if (runs.size() > 1) p.replace_filename(dst.stem().string() + ".trial" + std::to_string(t) + dst.extension().string());
    write_predictions(p, runs[t]);
    out << "wrote " << runs[t].size() << " predictions to " << p.string() << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> pred;
  std::string gt;
  std::string iou = "both";
  std::string thresholds = "0.25,0.5";
  bool json = false;
};

int cmd_eval(const Globals& g, const EvalArgs& a, std::ostream& out) {
  std::vector<IouKind> kinds;
  if (a.iou == "both") {
    kinds = {IouKind::bev, IouKind::iou3d};
  } else if (const auto k = parse_iou_kind(a.iou)) {
    kinds = {*k};
  } else {
    throw UsageError("--iou must be bev, 3d or both");
  }
  const auto thresholds = parse_doubles(a.thresholds);
  const auto gt = read_samples(g.resolve(a.gt));
  std::vector<EvalReport> reports;
  for (const auto& p : a.pred) {
    const auto preds = read_predictions(g.resolve(p));
    const auto records = join_predictions(preds, gt);
    reports.push_back(report(records, kinds, thresholds));
  }
  const auto rep = reports.size() == 1 ? reports.front() : mean_report(reports);
  if (a.json) {
    auto j = to_json(rep);
    j["trials"] = reports.size();
    out << j.dump(2) << '\n';
  } else {
    if (reports.size() > 1) out << "mean over " << reports.size() << " trials\n";
    out << format_report(rep);
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct VizArgs {
  std::string corpus = "corpus";
  std::string samples;
  std::vector<std::string> pred;
  std::string ids;
  int limit = 10;
  std::string out_dir = "viz";
  int size = 640;
  double half_range = 54.0;
};

int cmd_viz(const Globals& g, const VizArgs& a, std::ostream& out) {
  const Corpus corpus(g.resolve(a.corpus));
  const auto samples = a.samples.empty() ? corpus.samples() : read_samples(g.resolve(a.samples));
  if (a.pred.size() > 2) throw UsageError("viz draws at most two prediction files");
  std::vector<std::map<std::string, Box3D>> preds;
  for (const auto& p : a.pred) {
    auto& m = preds.emplace_back();
    for (const auto& row : read_predictions(g.resolve(p))) m[row.sample_id] = row.box;
  }
  std::set<std::string> wanted;
  if (!a.ids.empty()) {
    std::stringstream ss(a.ids);
    for (std::string id; std::getline(ss, id, ',');) wanted.insert(id);
  }
  const auto dir = g.resolve(a.out_dir);
  fs::create_directories(dir);
  int written = 0;
  for (const auto& s : samples) {
    if (!wanted.empty() ? !wanted.count(s.sample_id) : written >= a.limit) continue;
    const auto cloud = read_point_cloud(corpus.root() / corpus.scene(s.scene_id).lidar_ref);
    std::vector<Box3D> boxes;
    for (const auto& m : preds) {
      if (const auto it = m.find(s.sample_id); it != m.end()) boxes.push_back(it->second);
    }
    write_png(dir / (s.sample_id + ".png"), render_bev(cloud, s.referred, boxes, a.half_range, a.size));
    ++written;
  }
  out << "wrote " << written << " images to " << dir.string() << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"bevg: language-conditioned 3D grounding toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML file with per-subcommand sections");
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every stochastic component")->capture_default_str();
  app.add_option("-o,--output-dir", g.output_dir, "Directory all relative paths resolve against")->capture_default_str();
  app.add_flag("-v,--verbose", g.verbosity, "More logging (repeatable)");

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Filter raw annotation JSONL into grounding samples");
  c_pre->add_option("--input", pre.input, "Raw annotation JSONL")->required();
  c_pre->add_option("--output", pre.output, "Output samples JSONL")->capture_default_str();
  c_pre->add_option("--lidar-root", pre.lidar_root, "Directory for lidar_ref when point counts are absent");
  c_pre->add_option("--min-points", pre.min_points, "Minimum lidar points in the referred box")->capture_default_str();
  c_pre->add_option("--test-fraction", pre.test_fraction, "Write split.json with this scene-level test share");

  SynthArgs syn;
  auto* c_syn = app.add_subcommand("synth", "Generate a synthetic corpus");
  c_syn->add_option("--out", syn.out_dir, "Corpus directory")->capture_default_str();
  c_syn->add_option("--scenes", syn.scenes)->capture_default_str()->check(CLI::PositiveNumber);
  c_syn->add_option("--prompts-per-scene", syn.prompts_per_scene)->capture_default_str()->check(CLI::PositiveNumber);
  c_syn->add_option("--min-objects", syn.min_objects)->capture_default_str();
  c_syn->add_option("--max-objects", syn.max_objects)->capture_default_str();
  c_syn->add_flag("--no-images", syn.no_images, "Skip camera PNGs");
  c_syn->add_option("--test-fraction", syn.test_fraction, "Scene-level test share for split.json (0: none)")
      ->capture_default_str();
  c_syn->add_flag("--proposals", syn.proposals, "Also write noisy detector proposals");

  AnnotateArgs ann;
  auto* c_ann = app.add_subcommand("annotate", "Caption and paraphrase sampled frames");
  c_ann->add_option("--corpus", ann.corpus)->capture_default_str();
  c_ann->add_option("--out", ann.out_dir)->capture_default_str();
  c_ann->add_option("--rate", ann.rate, "Sampling rate in (0, 1]")->capture_default_str();
  c_ann->add_flag("--mock", ann.mock, "Use the offline mock clients");
  c_ann->add_option("--captioner-url", ann.captioner_url, "Defaults to $BEVG_CAPTIONER_URL");
  c_ann->add_option("--paraphraser-url", ann.paraphraser_url, "Defaults to $BEVG_PARAPHRASER_URL");
  c_ann->add_option("--timeout", ann.timeout, "Seconds per request")->capture_default_str();
  c_ann->add_option("--max-retries", ann.max_retries)->capture_default_str();
  c_ann->add_option("--backoff", ann.backoff, "Initial retry delay in seconds")->capture_default_str();
  c_ann->add_option("--max-in-flight", ann.max_in_flight)->capture_default_str()->check(CLI::PositiveNumber);
  c_ann->add_option("--mock-failure-rate", ann.mock_failure_rate, "Injected transport failures (mock only)");

  TrainBaselineArgs tb;
  auto* c_tb = app.add_subcommand("train-baseline", "Train the proposal matcher");
  c_tb->add_option("--corpus", tb.corpus)->capture_default_str();
  c_tb->add_option("--proposals", tb.proposals, "Defaults to <corpus>/proposals.jsonl");
  c_tb->add_option("--subset", tb.subset)->capture_default_str();
  c_tb->add_option("--out", tb.out)->capture_default_str();
  c_tb->add_option("--epochs", tb.epochs)->capture_default_str();
  c_tb->add_option("--batch", tb.batch)->capture_default_str();
  c_tb->add_option("--lr", tb.lr)->capture_default_str();
  c_tb->add_option("--momentum", tb.momentum)->capture_default_str();
  c_tb->add_option("--text-dim", tb.text_dim)->capture_default_str();

  TrainBevArgs tv;
  auto* c_tv = app.add_subcommand("train-bevgrounding", "Train the BEV grounding model");
  c_tv->add_option("--corpus", tv.corpus)->capture_default_str();
  c_tv->add_option("--subset", tv.subset)->capture_default_str();
  c_tv->add_option("--model-config", tv.model_config, "JSON model configuration");
  c_tv->add_option("--out", tv.out)->capture_default_str();
  c_tv->add_option("--resume", tv.resume, "Continue from a checkpoint");
  c_tv->add_flag("--lidar-only", tv.lidar_only, "Point cloud only (the -L variant)");
  c_tv->add_option("--epochs-stage1", tv.epochs1)->capture_default_str();
  c_tv->add_option("--epochs-stage2", tv.epochs2)->capture_default_str();
  c_tv->add_option("--batch", tv.batch)->capture_default_str();
  c_tv->add_option("--max-steps-stage1", tv.max_steps1, "0: no cap")->capture_default_str();
  c_tv->add_option("--max-steps-stage2", tv.max_steps2, "0: no cap")->capture_default_str();
  c_tv->add_option("--lr-stage1", tv.lr1)->capture_default_str();
  c_tv->add_option("--lr-stage2", tv.lr2)->capture_default_str();
  c_tv->add_option("--checkpoint-every", tv.checkpoint_every, "Steps between checkpoints (0: end only)");
  c_tv->add_option("--text-dim", tv.text_dim)->capture_default_str();

  PredictArgs pr;
  auto* c_pr = app.add_subcommand("predict", "Write one predicted box per sample");
  c_pr->add_option("--method", pr.method)
      ->check(CLI::IsMember({"bevgrounding", "baseline", "gt-rand", "pred-rand", "pred-best"}))
      ->capture_default_str();
  c_pr->add_option("--corpus", pr.corpus)->capture_default_str();
  c_pr->add_option("--subset", pr.subset)->capture_default_str();
  c_pr->add_option("--checkpoint", pr.checkpoint);
  c_pr->add_option("--proposals", pr.proposals, "Defaults to <corpus>/proposals.jsonl");
  c_pr->add_option("--out", pr.out)->capture_default_str();
  c_pr->add_option("--trials", pr.trials, "Repeats for the random methods")->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Accuracy at IoU thresholds");
  c_ev->add_option("--pred", ev.pred, "Prediction JSONL; several files are averaged as trials")->required();
  c_ev->add_option("--gt", ev.gt, "Ground-truth samples JSONL")->required();
  c_ev->add_option("--iou", ev.iou, "bev, 3d or both")->capture_default_str();
  c_ev->add_option("--thresholds", ev.thresholds)->capture_default_str();
  c_ev->add_flag("--json", ev.json);

  StatsArgs st;
  auto* c_st = app.add_subcommand("stats", "Corpus statistics");
  c_st->add_option("--samples", st.samples)->capture_default_str();
  c_st->add_flag("--json", st.json);

  VizArgs vz;
  auto* c_vz = app.add_subcommand("viz", "Render BEV images with ground truth and predictions");
  c_vz->add_option("--corpus", vz.corpus)->capture_default_str();
  c_vz->add_option("--samples", vz.samples, "Defaults to the corpus samples");
  c_vz->add_option("--pred", vz.pred, "Up to two prediction files (blue, green)");
  c_vz->add_option("--ids", vz.ids, "Comma-separated sample ids");
  c_vz->add_option("--limit", vz.limit)->capture_default_str();
  c_vz->add_option("--out", vz.out_dir)->capture_default_str();
  c_vz->add_option("--size", vz.size)->capture_default_str();
  c_vz->add_option("--half-range", vz.half_range)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  spdlog::set_level(g.verbosity >= 2 ? spdlog::level::debug
                    : g.verbosity == 1 ? spdlog::level::info
                                       : spdlog::level::warn);
  try {
    fs::create_directories(g.output_dir);
    if (*c_pre) return cmd_preprocess(g, pre, out);
    if (*c_syn) return cmd_synth(g, syn, out);
    if (*c_ann) return cmd_annotate(g, ann, out);
    if (*c_tb) return cmd_train_baseline(g, tb, out);
    if (*c_tv) return cmd_train_bev(g, tv, out);
    if (*c_pr) return cmd_predict(g, pr, out);
    if (*c_ev) return cmd_eval(g, ev, out);
    if (*c_st) return cmd_stats(g, st, out);
    if (*c_vz) return cmd_viz(g, vz, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const RemoteExhausted& e) {
    err << "remote clients exhausted: " << e.what() << '\n';
    return kRemoteExhausted;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace bevg::cli
