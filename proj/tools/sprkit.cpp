#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <optional>

#include "commands.hpp"
#include "sprkit/bench/studies.hpp"
#include "sprkit/core/error.hpp"
#include "sprkit/core/io.hpp"
#include "sprkit/core/seed.hpp"

namespace fs = std::filesystem;
using namespace sprkit;

namespace {

enum Exit { kOk = 0, kUsage = 2, kNumeric = 3, kCorrupt = 4 };

// ---- shared flags ------------------------------------------------------------

struct ModelFlags {
  model::SprModelConfig spr;
  std::size_t mlp_blocks = 4;
  int sectors = 8;
  std::optional<std::uint64_t> seed;  // defaults to the dataset's master seed
};

void add_model_flags(CLI::App* app, ModelFlags& f) {
  app->add_option("--d-model", f.spr.d_model, "Feature and hidden width")->capture_default_str();
  app->add_option("--local-blocks", f.spr.n_local_blocks, "Residual MLP blocks in the local branch")->capture_default_str();
  app->add_option("--mamba-blocks", f.spr.n_mamba_blocks, "Mamba blocks in the global branch")->capture_default_str();
  app->add_option("--hidden-mult", f.spr.hidden_mult, "MLP and Mamba expansion factor")->capture_default_str();
  app->add_option("--states", f.spr.n_states, "SSM state size per channel")->capture_default_str();
  app->add_option("--alpha", f.spr.alpha, "Translation loss weight")->capture_default_str();
  app->add_option("--beta", f.spr.beta, "Rotation loss weight")->capture_default_str();
  app->add_option("--mlp-blocks", f.mlp_blocks, "Residual blocks of the APR and RPR networks")->capture_default_str();
  app->add_option("--sectors", f.sectors, "Panorama sectors seen by the feature extractor")->capture_default_str();
  app->add_option("--seed", f.seed, "Master seed for model init and batching [default: dataset seed]");
}

void add_train_flags(CLI::App* app, model::TrainConfig& t) {
  app->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
  app->add_option("--warmup-epochs", t.warmup_epochs, "Linear warmup epochs, at most epochs-1 unless given")
      ->capture_default_str();
  app->add_option("--lr", t.lr, "Peak learning rate")->capture_default_str();
  app->add_option("--weight-decay", t.weight_decay, "AdamW weight decay")->capture_default_str();
  app->add_option("--batch-size", t.batch_size, "Items per optimizer step")->capture_default_str();
  app->add_option("--window", t.window, "Training window length in frames")->capture_default_str();
}

bench::ModelSpec make_spec(const ModelFlags& f, bench::Paradigm p, const sim::DatasetManifest& manifest) {
  bench::ModelSpec spec;
  spec.paradigm = p;
  spec.spr = f.spr;
  spec.mlp_blocks = f.mlp_blocks;
  spec.sectors = f.sectors;
  spec.master_seed = f.seed.value_or(manifest.config.master_seed);
  spec.dataset_hash = manifest.config_hash;
  return spec;
}

// Short runs keep the default warmup from swallowing every epoch.
void settle_warmup(CLI::App* app, model::TrainConfig& t) {
  if (app->count("--warmup-epochs") == 0) t.warmup_epochs = std::clamp(t.warmup_epochs, 0, std::max(0, t.epochs - 1));
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ContractError(fmt::format("bad {} list '{}'", what, text));
    }
  }
  if (out.empty()) throw ContractError(fmt::format("empty {} list", what));
  return out;
}

std::string seed_note(std::uint64_t seed, std::uint64_t hash) {
  return fmt::format("master_seed={},config_hash={:016x}", seed, hash);
}

void print_study(const std::vector<bench::StudyRow>& rows) {
  fmt::print("{:<9} {:<5} {:<12} {:<7} {:<9} {:>9} {:>9}  {}\n", "study", "model", "variant", "train", "eval", "TE[m]",
             "RE[deg]", "flag");
  for (const auto& r : rows)
    fmt::print("{:<9} {:<5} {:<12} {:<7} {:<9} {:>9.3f} {:>9.2f}  {}\n", r.study, r.paradigm, r.variant,
               r.train_setting, r.eval_setting, r.te_m, r.re_deg, r.flag);
}

fs::path beside(const fs::path& file, const std::string& ext) {
  fs::path out = file;
  return out.replace_extension(ext);
}

// ---- gen -----------------------------------------------------------------------

struct GenArgs {
  fs::path root;
  sim::DatasetConfig config;
  std::string height_weights = "1,1,2";
};

int run_gen(GenArgs& a) {
  const auto w = parse_list(a.height_weights, "height weight");
  if (w.size() != 3) throw ContractError("--height-weights needs three values for 0.1, 0.5 and 1.7 m");
  a.config.height_weights = {w[0], w[1], w[2]};
  a.config.validate();
  const sim::DatasetManifest m = sim::build_dataset(a.config, a.root);
  std::map<std::string, int> scenes, trajs;
  std::map<double, int> heights;
  for (const auto& s : m.scenes) ++scenes[s.split];
  for (const auto& t : m.trajectories) {
    ++trajs[t.split];
    ++heights[t.height_m];
  }
  fmt::print("dataset {} ({})\n", a.root.string(), seed_note(a.config.master_seed, m.config_hash));
  fmt::print("scenes: {} train, {} unseen\n", scenes["train"], scenes["unseen"]);
  fmt::print("trajectories: {} train, {} seen-test, {} unseen\n", trajs["train"], trajs["seen-test"], trajs["unseen"]);
  const auto& w8 = a.config.height_weights;
  const double total = w8[0] + w8[1] + w8[2];
  fmt::print("height histogram (configured {}:{}:{}):\n", w8[0], w8[1], w8[2]);
  for (std::size_t k = 0; k < sim::kSensorHeights.size(); ++k) {
    const int n = heights[sim::kSensorHeights[k]];
    fmt::print("  {:.1f} m  {:4d}  {:5.1f}% (expected {:4.1f}%)  {}\n", sim::kSensorHeights[k], n,
               100.0 * n / static_cast<double>(m.trajectories.size()), 100.0 * w8[k] / total,
               std::string(static_cast<std::size_t>(n) / 2, '#'));
  }
  return kOk;
}

// ---- train ---------------------------------------------------------------------

struct TrainArgs {
  fs::path data, out, metrics;
  std::string paradigm = "spr";
  std::string variant = "full";
  ModelFlags model;
  model::TrainConfig train;
  bool quiet = false;
};

int run_train(TrainArgs& a, bool variant_given) {
  const bench::Paradigm p = bench::parse_paradigm(a.paradigm);
  a.model.spr.variant = model::parse_variant(a.variant);
  if (variant_given && p != bench::Paradigm::SPR) throw ContractError("--variant applies to --paradigm spr only");
  a.train.validate();
  const auto data = bench::BenchData::load(a.data, a.model.spr.d_model, a.model.sectors);
  bench::TrainedModel m(make_spec(a.model, p, data.manifest));
  if (!a.quiet)
    fmt::print("training {} on {} trajectories ({} epochs)\n", bench::paradigm_label(p), data.train.size(), a.train.epochs);
  const auto history = bench::train_model(m, data.train, data.seen, a.train, [&](const model::EpochMetrics& e) {
    if (!a.quiet)
      fmt::print("epoch {:3d}  loss {:.4f}  val TE {:.3f} m  RE {:.2f} deg\n", e.epoch, e.train_loss, e.val_te_median,
                 e.val_re_median);
    std::fflush(stdout);
  });
  if (!a.out.parent_path().empty()) ensure_directory(a.out.parent_path());
  m.save(a.out);
  std::string csv = "epoch,train_loss,val_te_median,val_re_median\n";
  for (const auto& e : history)
    csv += fmt::format("{},{:.6f},{:.6f},{:.6f}\n", e.epoch, e.train_loss, e.val_te_median, e.val_re_median);
  csv += "# " + seed_note(m.spec().master_seed, m.spec().hash()) + "\n";
  const fs::path metrics = a.metrics.empty() ? beside(a.out, ".metrics.csv") : a.metrics;
  write_text(metrics, csv);
  if (!a.quiet) fmt::print("wrote {} and {}\n", a.out.string(), metrics.string());
  return kOk;
}

// ---- eval ----------------------------------------------------------------------

struct EvalArgs {
  fs::path data, checkpoint, out = "report.csv";
  std::string split = "all";
  std::string paradigm = "spr";
  std::size_t window = 5;
  bool oracle = false;
  ModelFlags model;
};

int run_eval(EvalArgs& a) {
  std::unique_ptr<bench::TrainedModel> m;
  if (!a.checkpoint.empty()) {
    m = bench::TrainedModel::load(a.checkpoint);
  } else if (!a.oracle) {
    throw ContractError("--checkpoint is required unless --oracle is given");
  }
  const std::size_t d = m ? m->spec().spr.d_model : a.model.spr.d_model;
  const int sectors = m ? m->spec().sectors : a.model.sectors;
  const auto data = bench::BenchData::load(a.data, d, sectors);
  if (!m) m = std::make_unique<bench::TrainedModel>(make_spec(a.model, bench::parse_paradigm(a.paradigm), data.manifest));
  if (m->spec().dataset_hash != data.manifest.config_hash)
    fmt::print(stderr, "warning: checkpoint was trained on dataset {:016x}, evaluating on {:016x}\n",
               m->spec().dataset_hash, data.manifest.config_hash);

  std::vector<std::string> splits;
  if (a.split == "all") splits = {sim::kSplitSeenTest, sim::kSplitUnseen};
  else splits = {a.split};
  bench::QueryProtocol protocol;
  protocol.window = a.window;
  protocol.oracle = a.oracle;
  std::vector<bench::ReportRow> rows;
  for (const auto& s : splits) {
    auto part = bench::evaluate(*m, data, s, protocol);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  if (!a.out.parent_path().empty()) ensure_directory(a.out.parent_path());
  bench::write_report(a.out, rows);
  fmt::print("{:<5} {:<12} {:<10} {:>14} {:>14} {:>12} {:>12}\n", "model", "variant", "split", "med TE[m]",
             "med RE[deg]", "mean TE[m]", "mean RE[deg]");
  for (const auto& s : splits) {
    const std::string split = s == "seen" ? sim::kSplitSeenTest : s;
    const bench::ReportRow *med = nullptr, *mean = nullptr;
    for (const auto& r : rows) {
      if (r.split != split || r.scene != "all") continue;
      (r.stat == "median" ? med : mean) = &r;
    }
    fmt::print("{:<5} {:<12} {:<10} {:>14.3f} {:>14.2f} {:>12.3f} {:>12.2f}\n", med->paradigm, med->variant, split,
               med->te_m, med->re_deg, mean->te_m, mean->re_deg);
  }
  fmt::print("wrote {}\n", a.out.string());
  return kOk;
}

// ---- study ---------------------------------------------------------------------

struct StudyArgs {
  fs::path data, out, vo, spr, checkpoint;
  std::string lengths = "5,10,15,20";
  std::string fovs = "90,180,270,360";
  int per_scene = 10;
  double law_sigma = 0.05;
  int law_rollouts = 1000;
  bool no_svg = false;
  int jobs = 1;
  ModelFlags model;
  model::TrainConfig train;
};

void write_outputs(const StudyArgs& a, const fs::path& fallback, const std::vector<bench::StudyRow>& rows) {
  const fs::path out = a.out.empty() ? fallback : a.out;
  if (!out.parent_path().empty()) ensure_directory(out.parent_path());
  bench::write_study(out, rows);
  print_study(rows);
  fmt::print("wrote {}\n", out.string());
}

void write_svg(const StudyArgs& a, const fs::path& fallback, const std::string& svg) {
  if (a.no_svg) return;
  const fs::path out = beside(a.out.empty() ? fallback : a.out, ".svg");
  write_text(out, svg);
  fmt::print("wrote {}\n", out.string());
}

int run_drift(StudyArgs& a) {
  std::vector<int> lengths;
  for (double v : parse_list(a.lengths, "length")) {
    if (v != std::floor(v) || v < 2 || v > 20) throw ContractError("lengths must be integers in 2..20");
    lengths.push_back(static_cast<int>(v));
  }
  const auto vo = bench::TrainedModel::load(a.vo);
  const auto spr = bench::TrainedModel::load(a.spr);
  if (vo->paradigm() != bench::Paradigm::VO || spr->paradigm() != bench::Paradigm::SPR)
    throw ContractError("--vo needs a VO checkpoint and --spr an SPR checkpoint");
  if (vo->spec().spr.d_model != spr->spec().spr.d_model || vo->spec().sectors != spr->spec().sectors)
    throw ContractError("VO and SPR checkpoints use different feature extractors");
  const auto data = bench::BenchData::load(a.data, spr->spec().spr.d_model, spr->spec().sectors);
  const auto trajs = bench::drift_trajectories(data, a.per_scene, *std::max_element(lengths.begin(), lengths.end()));
  const auto rows = bench::drift_study(*vo, *spr, trajs, lengths);
  write_outputs(a, "drift.csv", rows);

  const auto law = bench::drift_law(lengths, a.law_sigma, a.law_rollouts, derive_seed(spr->spec().master_seed, 0xD81F7));
  fmt::print("Monte-Carlo VO drift (sigma {} m, {} rollouts): TE", a.law_sigma, a.law_rollouts);
  for (std::size_t k = 0; k < lengths.size(); ++k) fmt::print(" q={}:{:.4f}", lengths[k], law.mean_te[k]);
  fmt::print("\n  log-log exponent {:.3f}, monotone {}, exact-step chain residual {:.1e}\n", law.exponent,
             law.monotone ? "yes" : "no", law.composition_residual);

  std::vector<bench::Series> series(2);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto& s = series[k % 2];
    s.name = rows[k].paradigm;
    s.x.push_back(lengths[k / 2]);
    s.y.push_back(rows[k].te_m);
  }
  write_svg(a, "drift.csv",
            bench::svg_line_chart("TE vs sequence length (unseen scenes)", "sequence length", "average median TE [m]",
                                  series, seed_note(spr->spec().master_seed, spr->spec().hash())));
  return kOk;
}

int run_fov(StudyArgs& a) {
  const auto fovs = parse_list(a.fovs, "FoV");
  const auto m = bench::TrainedModel::load(a.checkpoint);
  const auto data = bench::BenchData::load(a.data, m->spec().spr.d_model, m->spec().sectors);
  const auto rows = bench::fov_study(*m, data, fovs);
  write_outputs(a, "fov.csv", rows);
  bench::Series s{rows.front().paradigm, fovs, {}};
  for (const auto& r : rows) s.y.push_back(r.te_m);
  write_svg(a, "fov.csv",
            bench::svg_line_chart("TE vs field of view (unseen scenes)", "FoV [deg]", "average median TE [m]", {s},
                                  seed_note(m->spec().master_seed, m->spec().hash())));
  return kOk;
}

int run_trained_study(StudyArgs& a, bool height) {
  const auto data = bench::BenchData::load(a.data, a.model.spr.d_model, a.model.sectors);
  const auto spec = make_spec(a.model, bench::Paradigm::SPR, data.manifest);
  auto log = [](const std::string& line) {
    fmt::print("{}\n", line);
    std::fflush(stdout);
  };
  const auto rows = height ? bench::height_study(data, spec, a.train, log, a.jobs)
                           : bench::ablation_study(data, spec, a.train, log, a.jobs);
  write_outputs(a, height ? "height.csv" : "ablation.csv", rows);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene-agnostic pose regression toolkit: synthetic panoramic data, paradigm training and studies.",
               "sprkit"};
  app.set_config("--config", "", "Read flags from a key=value file (# comments); command-line flags win");
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic panoramic dataset");
  gen_cmd->add_option("--root", gen.root, "Dataset directory to create")->required();
  gen_cmd->add_option("--seed", gen.config.master_seed, "Master seed")->capture_default_str();
  gen_cmd->add_option("--scenes", gen.config.scenes, "Scenes in total")->capture_default_str();
  gen_cmd->add_option("--unseen-scenes", gen.config.unseen_scenes, "Scenes held out entirely")->capture_default_str();
  gen_cmd->add_option("--traj-per-scene", gen.config.traj_per_scene, "Trajectories per scene")->capture_default_str();
  gen_cmd->add_option("--seen-test-fraction", gen.config.seen_test_fraction,
                      "Fraction of each training scene's trajectories held out")
      ->capture_default_str();
  gen_cmd->add_option("--pano-height", gen.config.pano_height, "Panorama rows (width is twice this)")->capture_default_str();
  gen_cmd->add_option("--min-length", gen.config.min_length_m, "Shortest trajectory in metres")->capture_default_str();
  gen_cmd->add_option("--max-length", gen.config.max_length_m, "Longest trajectory in metres")->capture_default_str();
  gen_cmd->add_option("--min-points", gen.config.min_points, "Fewest frames per trajectory")->capture_default_str();
  gen_cmd->add_option("--max-points", gen.config.max_points, "Most frames per trajectory")->capture_default_str();
  gen_cmd->add_option("--height-weights", gen.height_weights, "Sampling weights of the 0.1,0.5,1.7 m sensor heights")
      ->capture_default_str();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one paradigm on the train split");
  train_cmd->add_option("--data", train.data, "Dataset root")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint file to write")->required();
  train_cmd->add_option("--metrics", train.metrics, "Per-epoch metrics CSV [default: <out>.metrics.csv]");
  train_cmd->add_option("--paradigm", train.paradigm, "apr, rpr, vo or spr")
      ->check(CLI::IsMember({"apr", "rpr", "vo", "spr"}))
      ->capture_default_str();
  auto* variant_opt = train_cmd->add_option("--variant", train.variant, "SPR variant: full, no-aux, global-only or no-global")
                          ->check(CLI::IsMember({"full", "no-aux", "global-only", "no-global"}))
                          ->capture_default_str();
  add_model_flags(train_cmd, train.model);
  add_train_flags(train_cmd, train.train);
  train_cmd->add_flag("--quiet", train.quiet, "Only report errors");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the seen-test and unseen splits");
  eval_cmd->add_option("--data", eval.data, "Dataset root")->required();
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint to evaluate");
  eval_cmd->add_option("--out", eval.out, "Report CSV to write")->capture_default_str();
  eval_cmd->add_option("--split", eval.split, "seen-test, unseen or all")
      ->check(CLI::IsMember({"seen-test", "unseen", "all"}))
      ->capture_default_str();
  eval_cmd->add_option("--window", eval.window, "Frames per sequence query")->capture_default_str();
  eval_cmd->add_flag("--oracle", eval.oracle, "Pass ground truth through instead of predicting");
  eval_cmd->add_option("--paradigm", eval.paradigm, "Paradigm of an --oracle run without a checkpoint")
      ->check(CLI::IsMember({"apr", "rpr", "vo", "spr"}))
      ->capture_default_str();

  StudyArgs study;
  auto* study_cmd = app.add_subcommand("study", "Run a study and write its CSV (and SVG)");
  study_cmd->require_subcommand(1);
  auto* drift_cmd = study_cmd->add_subcommand("drift", "VO vs SPR error over sequence lengths on unseen scenes");
  drift_cmd->add_option("--data", study.data, "Dataset root")->required();
  drift_cmd->add_option("--vo", study.vo, "VO checkpoint")->required();
  drift_cmd->add_option("--spr", study.spr, "SPR checkpoint")->required();
  drift_cmd->add_option("--lengths", study.lengths, "Comma-separated sequence lengths")->capture_default_str();
  drift_cmd->add_option("--per-scene", study.per_scene, "Fresh trajectories per unseen scene")->capture_default_str();
  drift_cmd->add_option("--law-sigma", study.law_sigma, "Step noise of the Monte-Carlo drift check")->capture_default_str();
  drift_cmd->add_option("--law-rollouts", study.law_rollouts, "Rollouts of the Monte-Carlo drift check")->capture_default_str();
  drift_cmd->add_option("--out", study.out, "Study CSV [default: drift.csv]");
  drift_cmd->add_flag("--no-svg", study.no_svg, "Skip the SVG plot");

  auto* fov_cmd = study_cmd->add_subcommand("fov", "Error under cropped fields of view on unseen scenes");
  fov_cmd->add_option("--data", study.data, "Dataset root")->required();
  fov_cmd->add_option("--checkpoint", study.checkpoint, "Checkpoint to evaluate")->required();
  fov_cmd->add_option("--fovs", study.fovs, "Comma-separated horizontal FoVs in degrees")->capture_default_str();
  fov_cmd->add_option("--out", study.out, "Study CSV [default: fov.csv]");
  fov_cmd->add_flag("--no-svg", study.no_svg, "Skip the SVG plot");

  auto* height_cmd = study_cmd->add_subcommand("height", "Train per sensor height and cross-evaluate");
  auto* ablation_cmd = study_cmd->add_subcommand("ablation", "Train and compare the four SPR variants");
  for (auto* cmd : {height_cmd, ablation_cmd}) {
    cmd->add_option("--data", study.data, "Dataset root")->required();
    add_model_flags(cmd, study.model);
    add_train_flags(cmd, study.train);
    cmd->add_option("--jobs", study.jobs, "Models trained concurrently")->capture_default_str();
    cmd->add_option("--out", study.out, cmd == height_cmd ? "Study CSV [default: height.csv]"
                                                          : "Study CSV [default: ablation.csv]");
  }

  fs::path inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Dump a dataset, manifest, poses.csv, obs.bin, checkpoint or CSV");
  inspect_cmd->add_option("path", inspect_path, "File or dataset root")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  for (auto* cmd : {train_cmd, height_cmd, ablation_cmd})
    if (*cmd) settle_warmup(cmd, cmd == train_cmd ? train.train : study.train);

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(train, variant_opt->count() > 0);
    if (*eval_cmd) return run_eval(eval);
    if (*drift_cmd) return run_drift(study);
    if (*fov_cmd) return run_fov(study);
    if (*height_cmd) return run_trained_study(study, true);
    if (*ablation_cmd) return run_trained_study(study, false);
    if (*inspect_cmd) {
      cli::inspect(inspect_path);
      return kOk;
    }
  } catch (const NumericDomainError& e) {
    fmt::print(stderr, "numeric failure: {}\n", e.what());
    return kNumeric;
  } catch (const CorruptDataError& e) {
    fmt::print(stderr, "corrupt data: {}\n", e.what());
    return kCorrupt;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUsage;
  }
  return kUsage;
}
