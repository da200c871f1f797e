// vrc: synthetic data, bag sampling, training, inference and evaluation for
// few-shot visual relationship co-localization.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vrc/checkpoint.hpp"
#include "vrc/errors.hpp"
#include "vrc/metrics.hpp"
#include "vrc/pipeline.hpp"
#include "vrc/records.hpp"
#include "vrc/similarity.hpp"
#include "vrc/synthgen.hpp"
#include "vrc/trainer.hpp"

namespace {

using nlohmann::json;

enum Exit : int {
  kOk = 0,
  kError = 1,
  kUsage = 2,
  kValidation = 3,
  kParse = 4,
  kVersion = 5,
  kConfig = 6,
  kDegenerate = 7,
  kLeak = 8,
  kNumeric = 9,
  kCapExceeded = 10,
  kMetric = 11,
  kGradCheckFailed = 12,
};

std::string shortest(double x) { return json(x).dump(); }

struct SynthArgs {
  vrc::SynthConfig cfg;
  std::string out;
};

struct BagsArgs {
  std::string manifest, out, split = "test";
  vrc::BagSpec spec;
};

struct ModelArgs {
  std::string embedding = "translation";
  std::size_t embed_dim = 64;
  bool shared = false;
  std::uint64_t seed = 0;

  vrc::ModelConfig config() const {
    return {vrc::parse_embedding_kind(embedding), embed_dim, shared, seed};
  }
};

struct PretrainArgs {
  std::string manifest, out, init;
  ModelArgs model;
  vrc::PretrainConfig cfg;
};

struct TrainArgs {
  std::string manifest, bags, checkpoint, out, log;
  ModelArgs model;
  vrc::TrainConfig cfg;
  bool fine_tune = false;
};

struct InferArgs {
  std::string manifest, bags, checkpoint, out, mode = "free", scorer = "relation";
  vrc::InferOptions opts;
};

struct EvalArgs {
  std::string predictions, manifest, bags, out;
};

struct GradArgs {
  std::uint64_t seed = 0;
  std::size_t seeds = 1;
  std::vector<std::size_t> dims{4, 16, 64};
  double tolerance = 1e-4;
  std::string out, sabotage;
  double sabotage_scale = 1e-2;
};

void add_model_flags(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--embedding", m.embedding, "translation | concat")
      ->check(CLI::IsMember({"translation", "concat"}))
      ->capture_default_str();
  cmd->add_option("--embed-dim", m.embed_dim, "Relationship embedding width")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_flag("--shared-projection", m.shared, "One projection for subject and object");
  cmd->add_option("--seed", m.seed, "Initialization and sampling seed")->capture_default_str();
}

vrc::Checkpoint initial_model(const vrc::DatasetManifest& manifest, const std::string& path,
                              const ModelArgs& model) {
  if (!path.empty()) return vrc::load_checkpoint(path);
  return vrc::initialize_model(manifest, model.config());
}

int run_synth(const SynthArgs& a) {
  const auto manifest = vrc::generate(a.cfg);
  vrc::save_manifest(manifest, a.out);
  const auto sep = vrc::separability_report(manifest);
  std::printf("wrote %zu images, %zu predicates to %s\n", manifest.images.size(),
              manifest.predicates.size(), a.out.c_str());
  std::printf("separability: within %.4f  across %.4f\n", sep.within, sep.across);
  return kOk;
}

int run_bags(BagsArgs a) {
  const auto manifest = vrc::load_manifest(a.manifest);
  a.spec.split = vrc::parse_split(a.split);
  vrc::BagList list;
  list.spec = a.spec;
  list.bags = vrc::make_bags(manifest, a.spec);
  list.metadata["manifest.seed"] =
      manifest.metadata.count("seed") ? manifest.metadata.at("seed") : "";
  vrc::save_bags(list, a.out);
  std::printf("wrote %zu %s bags of size %zu to %s\n", list.bags.size(), a.split.c_str(),
              a.spec.bag_size, a.out.c_str());
  return kOk;
}

int run_pretrain(const PretrainArgs& a) {
  const auto manifest = vrc::load_manifest(a.manifest);
  auto ck = initial_model(manifest, a.init, a.model);
  ck = vrc::pretrain(manifest, std::move(ck), a.cfg);
  vrc::save_checkpoint(ck, a.out);
  if (!ck.pretrain_loss_history.empty()) {
    std::printf("pretrained %lld steps, final batch loss %.6f\n",
                static_cast<long long>(ck.pretrain_steps), ck.pretrain_loss_history.back());
  }
  return kOk;
}

int run_train(TrainArgs a) {
  const auto manifest = vrc::load_manifest(a.manifest);
  const auto bags = vrc::load_bags(a.bags);
  auto ck = initial_model(manifest, a.checkpoint, a.model);
  a.cfg.freeze_embedder = !a.fine_tune;
  std::ofstream log;
  if (!a.log.empty()) {
    // Appending keeps one log across resumed runs.
    log.open(a.log, std::ios::app);
    if (!log) throw vrc::ConfigError("cannot open log '" + a.log + "'");
  }
  auto on_episode = [&](const vrc::EpisodeLog& e) {
    if (!log.is_open()) return;
    json line = {{"episode", e.episode}, {"loss", e.loss}, {"skipped", e.skipped},
                 {"wall_seconds", e.wall_seconds}};
    log << line.dump() << '\n';
  };
  ck = vrc::train(manifest, bags.bags, std::move(ck), a.cfg, on_episode);
  ck.config["train.bags.seed"] = std::to_string(bags.spec.seed);
  vrc::save_checkpoint(ck, a.out);
  std::printf("trained to episode %lld (%lld skipped)", static_cast<long long>(ck.episodes_done),
              static_cast<long long>(ck.episodes_skipped));
  if (!ck.loss_history.empty()) std::printf(", final loss %.6f", ck.loss_history.back());
  std::printf("\n");
  return kOk;
}

int run_infer(InferArgs a) {
  const auto manifest = vrc::load_manifest(a.manifest);
  const auto bags = vrc::load_bags(a.bags);
  const auto ck = vrc::load_checkpoint(a.checkpoint);
  a.opts.mode = vrc::parse_infer_mode(a.mode);
  a.opts.inference.scorer = vrc::parse_scorer_kind(a.scorer);
  const auto predictions = vrc::infer_bags(manifest, bags, ck, a.opts);
  vrc::save_predictions(predictions, a.out);
  std::size_t skipped = 0;
  for (const auto& b : predictions.bags) skipped += b.skipped ? 1 : 0;
  std::printf("inferred %zu bags (%zu skipped) in %s mode\n", predictions.bags.size(), skipped,
              a.mode.c_str());
  return kOk;
}

int run_eval(const EvalArgs& a) {
  const auto manifest = vrc::load_manifest(a.manifest);
  const auto bags = vrc::load_bags(a.bags);
  const auto predictions = vrc::load_predictions(a.predictions);
  const auto report = vrc::evaluate(predictions, manifest, bags);
  if (!a.out.empty()) vrc::save_report(report, a.out);
  std::fputs(vrc::summary_table(report, &manifest).c_str(), stdout);
  return kOk;
}

int run_gradcheck(const GradArgs& a) {
  json runs = json::array();
  double worst = 0.0;
  for (std::size_t k = 0; k < a.seeds; ++k) {
    for (const auto d : a.dims) {
      vrc::GradCheckConfig cfg;
      cfg.seed = a.seed + k;
      cfg.embed_dim = d;
      cfg.sabotage_group = a.sabotage;
      cfg.sabotage_scale = a.sabotage.empty() ? 0.0 : a.sabotage_scale;
      const auto report = vrc::grad_check(cfg);
      json groups = json::object();
      for (const auto& e : report.entries) {
        groups[e.group] = {{"size", e.size}, {"max_rel_error", e.max_rel_error}};
      }
      runs.push_back({{"seed", cfg.seed}, {"embed_dim", d}, {"worst", report.worst()},
                      {"groups", std::move(groups)}});
      worst = std::max(worst, report.worst());
      std::printf("seed %llu  d_r %3zu  worst rel error %.3e\n",
                  static_cast<unsigned long long>(cfg.seed), d, report.worst());
    }
  }
  const bool passed = worst < a.tolerance;
  if (!a.out.empty()) {
    json doc = {{"format", "vrc-gradcheck"}, {"schema_version", 1},
                {"seed", a.seed}, {"seeds", a.seeds},
                {"tolerance", a.tolerance}, {"step", vrc::GradCheckConfig{}.step},
                {"sabotage", a.sabotage}, {"worst", worst},
                {"passed", passed}, {"runs", std::move(runs)}};
    vrc::write_file_atomic(a.out, doc.dump(1) + "\n");
  }
  std::printf("%s: worst relative error %.3e (tolerance %s)\n", passed ? "PASS" : "FAIL", worst,
              shortest(a.tolerance).c_str());
  return passed ? kOk : kGradCheckFailed;
}

int exit_code(const vrc::Error& e) {
  if (dynamic_cast<const vrc::ValidationError*>(&e)) return kValidation;
  if (dynamic_cast<const vrc::ParseError*>(&e)) return kParse;
  if (dynamic_cast<const vrc::VersionError*>(&e)) return kVersion;
  if (dynamic_cast<const vrc::ConfigError*>(&e)) return kConfig;
  if (dynamic_cast<const vrc::DegenerateImageError*>(&e)) return kDegenerate;
  if (dynamic_cast<const vrc::LeakError*>(&e)) return kLeak;
  if (dynamic_cast<const vrc::NumericError*>(&e)) return kNumeric;
  if (dynamic_cast<const vrc::CapExceededError*>(&e)) return kCapExceeded;
  if (dynamic_cast<const vrc::MetricError*>(&e)) return kMetric;
  return kError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot visual relationship co-localization"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with defaults; [section] per subcommand");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic dataset manifest");
  c_synth->add_option("--out", synth.out, "Manifest path")->required();
  c_synth->add_option("--train-predicates", synth.cfg.train_predicates)
      ->check(CLI::PositiveNumber)->capture_default_str();
  c_synth->add_option("--test-predicates", synth.cfg.test_predicates)
      ->check(CLI::PositiveNumber)->capture_default_str();
  c_synth->add_option("--images", synth.cfg.images)->capture_default_str();
  c_synth->add_option("--regions", synth.cfg.regions_per_image, "Regions per image")
      ->check(CLI::Range(2, 100000))->capture_default_str();
  c_synth->add_option("--appearance-dim", synth.cfg.appearance_dim)
      ->check(CLI::PositiveNumber)->capture_default_str();
  c_synth->add_option("--class-dim", synth.cfg.class_dim)
      ->check(CLI::PositiveNumber)->capture_default_str();
  c_synth->add_option("--mu", synth.cfg.mu, "Predicate vector norm")
      ->check(CLI::PositiveNumber)->capture_default_str();
  c_synth->add_option("--sigma", synth.cfg.sigma, "Noise vector norm")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  c_synth->add_option("--orientation", synth.cfg.orientation,
                      "Share of predicate vectors along a common axis")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_synth->add_option("--annotations", synth.cfg.annotations_per_image, "Per image")
      ->check(CLI::PositiveNumber)->capture_default_str();
  c_synth->add_flag("--hard", synth.cfg.hard_mode, "Add distractor pairs");
  c_synth->add_option("--distractors", synth.cfg.distractors_per_image)->capture_default_str();
  c_synth->add_option("--seed", synth.cfg.seed)->capture_default_str();

  BagsArgs bags;
  auto* c_bags = app.add_subcommand("bags", "Sample bags of images sharing a predicate");
  c_bags->add_option("--manifest", bags.manifest)->required()->check(CLI::ExistingFile);
  c_bags->add_option("--out", bags.out)->required();
  c_bags->add_option("--split", bags.split)->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();
  c_bags->add_option("--bag-size", bags.spec.bag_size)->check(CLI::Range(2, 1000))
      ->capture_default_str();
  c_bags->add_option("--count", bags.spec.count)->capture_default_str();
  c_bags->add_option("--seed", bags.spec.seed)->capture_default_str();

  PretrainArgs pre;
  auto* c_pre = app.add_subcommand("pretrain", "Pretrain the translation embedder");
  c_pre->add_option("--manifest", pre.manifest)->required()->check(CLI::ExistingFile);
  c_pre->add_option("--out", pre.out, "Checkpoint path")->required();
  c_pre->add_option("--init", pre.init, "Continue from this checkpoint")
      ->check(CLI::ExistingFile);
  add_model_flags(c_pre, pre.model);
  c_pre->add_option("--steps", pre.cfg.steps)->capture_default_str();
  c_pre->add_option("--batch-size", pre.cfg.batch_size)->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_pre->add_option("--lr", pre.cfg.adam.learning_rate)->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Episodic training of the relation network");
  c_train->add_option("--manifest", train.manifest)->required()->check(CLI::ExistingFile);
  c_train->add_option("--bags", train.bags, "Training bag file")->required()
      ->check(CLI::ExistingFile);
  c_train->add_option("--checkpoint", train.checkpoint,
                      "Start (or resume) from this checkpoint; fresh model if omitted")
      ->check(CLI::ExistingFile);
  c_train->add_option("--out", train.out, "Checkpoint path")->required();
  c_train->add_option("--log", train.log, "Append per-episode JSON lines here");
  add_model_flags(c_train, train.model);
  c_train->add_option("--episodes", train.cfg.episodes, "Total episodes (including resumed)")
      ->capture_default_str();
  c_train->add_option("--negative-ratio", train.cfg.negative_ratio)
      ->check(CLI::Range(1.0, 1e9))->capture_default_str();
  c_train->add_option("--background", train.cfg.background_per_image,
                      "Unannotated region pairs per image used as negatives")
      ->capture_default_str();
  c_train->add_option("--hard-negatives", train.cfg.hard_negative_share,
                      "Share of the negative budget taken by the highest-scoring negatives")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_train->add_option("--lr", train.cfg.adam.learning_rate)->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c_train->add_flag("--fine-tune", train.fine_tune, "Also update the embedder projections");

  InferArgs infer;
  auto* c_infer = app.add_subcommand("infer", "Co-localize the common relationship per bag");
  c_infer->add_option("--manifest", infer.manifest)->required()->check(CLI::ExistingFile);
  c_infer->add_option("--bags", infer.bags)->required()->check(CLI::ExistingFile);
  c_infer->add_option("--checkpoint", infer.checkpoint)->required()->check(CLI::ExistingFile);
  c_infer->add_option("--out", infer.out, "Predictions path")->required();
  c_infer->add_option("--mode", infer.mode)
      ->check(CLI::IsMember({"free", "subject_fixed", "one_annotated"}))->capture_default_str();
  c_infer->add_option("--scorer", infer.scorer)
      ->check(CLI::IsMember({"relation", "relation-raw", "cosine"}))->capture_default_str();
  c_infer->add_option("--restarts", infer.opts.inference.restarts)->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_infer->add_option("--pool-size", infer.opts.inference.pool_size,
                      "Labels kept per image; 0 keeps all")->capture_default_str();
  c_infer->add_option("--pool-sample", infer.opts.inference.pool_sample)
      ->check(CLI::PositiveNumber)->capture_default_str();
  c_infer->add_option("--seed", infer.opts.inference.seed)->capture_default_str();
  c_infer->add_flag("--exact", infer.opts.exact, "Brute-force search (free mode)");
  c_infer->add_option("--cap", infer.opts.brute_force_cap, "Brute-force labeling cap")
      ->capture_default_str();
  c_infer->add_option("--workers", infer.opts.workers, "Bags processed in parallel")
      ->envname("VRC_WORKERS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "VR-CorLoc and Bag-CorLoc of a predictions file");
  c_eval->add_option("--predictions", eval.predictions)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--manifest", eval.manifest)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--bags", eval.bags)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--out", eval.out, "Report path");

  GradArgs grad;
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  c_grad->add_option("--seed", grad.seed, "First seed")->capture_default_str();
  c_grad->add_option("--seeds", grad.seeds, "Number of consecutive seeds")
      ->check(CLI::PositiveNumber)->capture_default_str();
  c_grad->add_option("--dims", grad.dims, "Embedding widths")->delimiter(',')
      ->check(CLI::PositiveNumber)->capture_default_str();
  c_grad->add_option("--tolerance", grad.tolerance)->capture_default_str();
  c_grad->add_option("--out", grad.out, "JSON report path");
  c_grad->add_option("--sabotage", grad.sabotage, "Corrupt this group's analytic gradient");
  c_grad->add_option("--sabotage-scale", grad.sabotage_scale)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*c_synth) return run_synth(synth);
    if (*c_bags) return run_bags(bags);
    if (*c_pre) return run_pretrain(pre);
    if (*c_train) return run_train(train);
    if (*c_infer) return run_infer(infer);
    if (*c_eval) return run_eval(eval);
    if (*c_grad) return run_gradcheck(grad);
  } catch (const vrc::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kError;
  }
  return kUsage;
}
