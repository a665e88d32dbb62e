#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "flairsyn/config.hpp"
#include "flairsyn/manifest.hpp"
#include "flairsyn/metrics.hpp"
#include "flairsyn/pairs_folds.hpp"
#include "flairsyn/phantom.hpp"
#include "flairsyn/trainer.hpp"
#include "flairsyn/volume_io.hpp"

namespace fs = std::filesystem;
using namespace flairsyn;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string preset;
  std::string out;
  uint64_t seed = 0;
  bool seed_set = false;
};

config::RunConfig effective_config(const GlobalArgs& g) {
  config::RunConfig cfg;
  if (!g.preset.empty()) config::apply_preset(cfg, g.preset);
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw std::runtime_error("cannot open config " + g.config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("config " + g.config_path + " is not valid JSON: " + std::string(e.what()));
    }
    config::merge_json(cfg, j);
  }
  if (g.seed_set) cfg.train.seed = g.seed;
  if (!g.out.empty()) cfg.out_dir = g.out;
  return cfg;
}

bool is_volume_file(const fs::path& p) {
  const std::string name = p.filename().string();
  return data::has_suffix(name, ".nii") || data::has_suffix(name, ".nii.gz") ||
         data::has_suffix(name, ".rawvol");
}

std::string volume_id(const fs::path& p) {
  std::string name = p.filename().string();
  for (const char* suffix : {".nii.gz", ".nii", ".rawvol"}) {
    const std::string s(suffix);
    if (data::has_suffix(name, s)) return name.substr(0, name.size() - s.size());
  }
  return name;
}

std::map<std::string, fs::path> volumes_in_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && is_volume_file(entry.path())) out[volume_id(entry.path())] = entry.path();
  return out;
}

/// Mid-axial (z = Z/2) slices, scaled per panel, side by side in one PGM.
void write_preview(const std::string& path, const std::vector<const data::Volume*>& panels) {
  if (panels.empty()) throw std::invalid_argument("preview needs at least one volume");
  const auto shape = panels[0]->shape;
  for (const auto* v : panels)
    if (v->shape != shape) throw std::invalid_argument("preview volumes disagree on shape");
  const int64_t gap = 2;
  const int64_t width = shape[0] * static_cast<int64_t>(panels.size()) + gap * (static_cast<int64_t>(panels.size()) - 1);
  const int64_t height = shape[1];
  const int64_t z = shape[2] / 2;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write preview " + path);
  out << "P5\n" << width << " " << height << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(width));
  for (int64_t y = 0; y < height; ++y) {
    int64_t col = 0;
    for (size_t p = 0; p < panels.size(); ++p) {
      const auto& v = *panels[p];
      double lo = v.voxels[0], hi = v.voxels[0];
      for (double x : v.voxels) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
      const double span = hi > lo ? hi - lo : 1.0;
      for (int64_t x = 0; x < shape[0]; ++x)
        row[static_cast<size_t>(col + x)] =
            static_cast<unsigned char>(std::clamp((v.at(x, y, z) - lo) / span * 255.0, 0.0, 255.0));
      col += shape[0];
      if (p + 1 < panels.size())
        for (int64_t gpx = 0; gpx < gap; ++gpx) row[static_cast<size_t>(col++)] = 255;
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

data::FoldSplit make_split(const config::RunConfig& cfg, const std::vector<data::StudyRecord>& records) {
  if (!cfg.data.fold_override.empty()) return data::load_fold_override(cfg.data.fold_override, cfg.data.folds);
  return data::assign_folds(data::summarize_participants(records), cfg.data.folds, cfg.train.seed);
}

nlohmann::json model_meta(const config::RunConfig& cfg) {
  return {{"levels", cfg.model.levels},
          {"base_channels", cfg.model.base_channels},
          {"n_classes", cfg.model.n_classes},
          {"gan_mode", nn::gan_mode_name(cfg.train.gan_mode)},
          {"crop_shape", cfg.data.crop_shape}};
}

// ---- phantom ----------------------------------------------------------

struct PhantomArgs {
  std::string preset = "desk";
  int64_t side = 32;
  std::vector<std::string> profiles;  // "NxT"
  bool growth_only = false;
  double noise = 0.02;
};

int cmd_phantom(const GlobalArgs& g, const PhantomArgs& a) {
  phantom::PhantomConfig cfg;
  cfg.side = a.side;
  cfg.noise_amplitude = a.noise;
  cfg.seed = g.seed_set ? g.seed : 1;
  if (a.preset == "desk") {
    cfg.profile = {{4, 4}};
  } else if (a.preset == "isbi-shape") {
    cfg.profile = {{14, 4}, {4, 5}, {1, 6}};
  } else {
    throw std::invalid_argument("unknown phantom preset '" + a.preset + "' (valid: desk, isbi-shape)");
  }
  if (!a.profiles.empty()) {
    cfg.profile.clear();
    for (const auto& spec : a.profiles) {
      const auto x = spec.find('x');
      if (x == std::string::npos)
        throw std::invalid_argument("bad --profile '" + spec + "', expected <participants>x<timepoints>");
      cfg.profile.push_back({std::stoi(spec.substr(0, x)), std::stoi(spec.substr(x + 1))});
    }
  }
  if (a.growth_only) cfg.kind_weights = {1.0, 0.0, 0.0};
  if (g.out.empty()) throw std::invalid_argument("phantom needs --out <dir>");

  const std::string manifest = phantom::generate_cohort(cfg, g.out);
  const auto records = data::load_manifest(manifest);
  const auto pairs = data::build_sample_pairs(records);

  nlohmann::json eff;
  eff["preset"] = a.preset;
  eff["side"] = cfg.side;
  eff["noise_amplitude"] = cfg.noise_amplitude;
  eff["seed"] = cfg.seed;
  eff["kind_weights"] = cfg.kind_weights;
  eff["profile"] = nlohmann::json::array();
  for (const auto& e : cfg.profile) eff["profile"].push_back({e.participants, e.timepoints});
  std::ofstream(fs::path(g.out) / "phantom_config.json") << eff.dump(2) << "\n";

  std::cout << "wrote " << records.size() << " study records (" << pairs.size() << " sample pairs) to "
            << manifest << "\n";
  return 0;
}

// ---- train ------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string arch;
  int fold = -1;
  bool fold_set = false;
  int64_t max_steps = -1;
  int epochs_const = -1;
  int epochs_decay = -1;
};

void apply_train_overrides(config::RunConfig& cfg, const TrainArgs& a) {
  if (!a.manifest.empty()) cfg.data.manifest = a.manifest;
  if (!a.arch.empty()) cfg.model.arch = a.arch;
  if (a.max_steps >= 0) cfg.train.max_steps = a.max_steps;
  if (a.epochs_const > 0) cfg.train.epochs_const = a.epochs_const;
  if (a.epochs_decay >= 0) cfg.train.epochs_decay = a.epochs_decay;
}

int cmd_train(const GlobalArgs& g, const TrainArgs& a) {
  config::RunConfig cfg = effective_config(g);
  apply_train_overrides(cfg, a);
  cfg.validate();
  if (cfg.data.manifest.empty()) throw std::invalid_argument("train needs a manifest (--manifest or config)");

  const auto records = data::load_manifest(cfg.data.manifest);
  const auto pairs = data::build_sample_pairs(records);
  if (pairs.empty()) throw std::runtime_error("no usable sample pairs in " + cfg.data.manifest);

  std::vector<data::Sample> train_set, val_set;
  if (a.fold_set) {
    const auto split = make_split(cfg, records);
    if (a.fold < 0 || a.fold >= split.k)
      throw std::invalid_argument("--fold out of range, split has " + std::to_string(split.k) + " folds");
    for (const auto& p : pairs) {
      auto it = split.assignment.find(p.source.participant_id);
      if (it == split.assignment.end())
        throw std::runtime_error("participant " + p.source.participant_id + " has no fold assignment");
      (it->second == a.fold ? val_set : train_set).push_back(data::load_sample(p, cfg.data.crop_shape));
    }
    if (train_set.empty() || val_set.empty()) throw std::runtime_error("fold split left an empty partition");
  } else {
    for (const auto& p : pairs) train_set.push_back(data::load_sample(p, cfg.data.crop_shape));
    val_set = train_set;
  }

  const train::TrainConfig tc = cfg.resolved_train();
  train::ModelBundle mb = train::build_bundle(tc, cfg.generator_config(), cfg.discriminator_config());

  fs::create_directories(cfg.out_dir);
  config::save_config(cfg, (fs::path(cfg.out_dir) / "effective_config.json").string());

  train::FitOptions opts;
  opts.out_dir = cfg.out_dir;
  opts.run_name = cfg.model.arch + (a.fold_set ? "_fold" + std::to_string(a.fold) : "");
  opts.fold_index = a.fold_set ? a.fold : -1;
  opts.extra_meta = model_meta(cfg);
  opts.on_epoch = [](const train::EpochRecord& r) {
    std::cout << "epoch " << r.epoch << " val_l1 " << metrics::format_metric(r.val_l1) << "\n";
  };

  const train::FitResult res = train::fit(mb, train_set, val_set, tc, cfg.data.patch_shape, opts);
  std::cout << "initial val_l1 " << metrics::format_metric(res.initial_val_l1) << ", best "
            << metrics::format_metric(res.best_val_l1) << " at epoch " << res.best_epoch << "\n"
            << "checkpoints under " << cfg.out_dir << " (" << opts.run_name << "_best / "
            << opts.run_name << "_final)\n";
  return 0;
}

// ---- predict ----------------------------------------------------------

struct PredictArgs {
  std::string checkpoint;
  std::string mprage, t2, pd, flair;
  int days = 0;
  std::string out_path;
  std::string preview;
  std::string target;
};

int cmd_predict(const PredictArgs& a) {
  if (a.days <= 0) throw std::invalid_argument("--days must be a positive day count");

  std::string g_path = a.checkpoint;
  if (!data::has_suffix(g_path, ".g.ckpt")) g_path += ".g.ckpt";
  const nn::CheckpointContents ckpt = nn::load_checkpoint(g_path);

  nn::GeneratorConfig gcfg;
  gcfg.levels = ckpt.meta.value("levels", 4);
  gcfg.base_channels = ckpt.meta.value("base_channels", 16);
  const auto patch = ckpt.meta.at("patch_shape");
  const std::array<int64_t, 3> patch_shape{patch[0].get<int64_t>(), patch[1].get<int64_t>(),
                                           patch[2].get<int64_t>()};
  const auto full = ckpt.meta.at("full_shape");
  const std::array<int64_t, 3> crop_shape{full[0].get<int64_t>(), full[1].get<int64_t>(),
                                          full[2].get<int64_t>()};
  gcfg.patch_side = patch_shape[0];

  Rng init_rng(1);
  nn::Generator g(gcfg, init_rng);
  nn::ParamRegistry reg;
  g.collect("g", reg);
  nn::restore_params(ckpt, reg);

  const std::array<data::Volume, 4> sources{data::load_volume(a.mprage), data::load_volume(a.t2),
                                            data::load_volume(a.pd), data::load_volume(a.flair)};
  const data::Volume pred = train::predict_volume(g, sources, a.days, crop_shape, patch_shape);
  data::save_volume(pred, a.out_path);
  std::cout << "wrote " << a.out_path << " (shape " << pred.shape[0] << "x" << pred.shape[1] << "x"
            << pred.shape[2] << ", days " << a.days << ")\n";

  if (!a.preview.empty()) {
    const data::Volume source_flair = data::center_crop(sources[3], pred.shape);
    std::vector<const data::Volume*> panels{&source_flair, &pred};
    data::Volume target;
    if (!a.target.empty()) {
      target = data::center_crop(data::load_volume(a.target), pred.shape);
      panels.push_back(&target);
    }
    write_preview(a.preview, panels);
    std::cout << "wrote preview " << a.preview << "\n";
  }
  return 0;
}

// ---- evaluate ---------------------------------------------------------

struct EvaluateArgs {
  std::string pred_dir;
  std::string ref_dir;
  std::string csv = "metrics.csv";
};

int cmd_evaluate(const EvaluateArgs& a) {
  const auto pred = volumes_in_dir(a.pred_dir);
  const auto ref = volumes_in_dir(a.ref_dir);

  std::vector<std::string> missing;
  for (const auto& [id, _] : pred)
    if (!ref.count(id)) missing.push_back(id + " (missing in " + a.ref_dir + ")");
  for (const auto& [id, _] : ref)
    if (!pred.count(id)) missing.push_back(id + " (missing in " + a.pred_dir + ")");
  if (!missing.empty()) {
    std::string msg = "mismatched volume sets:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw std::runtime_error(msg);
  }
  if (pred.empty()) throw std::runtime_error("no volume files found in " + a.pred_dir);

  std::vector<metrics::MetricReport> rows;
  for (const auto& [id, path] : pred)
    rows.push_back(metrics::evaluate_pair(data::load_volume(path.string()),
                                          data::load_volume(ref.at(id).string()), id));
  metrics::write_metric_csv(a.csv, rows);

  double psnr_sum = 0, nmse_sum = 0, ssim_sum = 0;
  for (const auto& r : rows) {
    psnr_sum += r.psnr_db;
    nmse_sum += r.nmse;
    ssim_sum += r.ssim;
  }
  const double n = static_cast<double>(rows.size());
  std::cout << rows.size() << " volumes: mean psnr " << metrics::format_metric(psnr_sum / n) << " dB, nmse "
            << metrics::format_metric(nmse_sum / n) << ", ssim " << metrics::format_metric(ssim_sum / n)
            << "\nwrote " << a.csv << "\n";
  return 0;
}

// ---- crossval ---------------------------------------------------------

int cmd_crossval(const GlobalArgs& g, const TrainArgs& a) {
  config::RunConfig cfg = effective_config(g);
  apply_train_overrides(cfg, a);
  cfg.validate();
  if (cfg.data.manifest.empty()) throw std::invalid_argument("crossval needs a manifest (--manifest or config)");

  const auto records = data::load_manifest(cfg.data.manifest);
  const auto split = make_split(cfg, records);

  fs::create_directories(cfg.out_dir);
  config::save_config(cfg, (fs::path(cfg.out_dir) / "effective_config.json").string());

  train::CrossvalOptions opts;
  opts.crop_shape = cfg.data.crop_shape;
  opts.patch_shape = cfg.data.patch_shape;
  opts.out_dir = cfg.out_dir;
  opts.extra_meta = model_meta(cfg);
  opts.on_epoch = [](int fold, const train::EpochRecord& r) {
    std::cout << "fold " << fold << " epoch " << r.epoch << " val_l1 " << metrics::format_metric(r.val_l1)
              << "\n";
  };

  const train::CrossvalResult res =
      train::run_crossval(records, split, cfg.resolved_train(), cfg.generator_config(),
                          cfg.discriminator_config(), opts);

  auto print_row = [](const train::FoldReport& r) {
    const std::string name = r.fold < 0 ? "pooled" : "fold " + std::to_string(r.fold);
    std::cout << name << ": n=" << r.n_samples << " psnr " << metrics::format_metric(r.psnr_mean) << " +- "
              << metrics::format_metric(r.psnr_sd) << " | nmse " << metrics::format_metric(r.nmse_mean)
              << " +- " << metrics::format_metric(r.nmse_sd) << " | ssim "
              << metrics::format_metric(r.ssim_mean) << " +- " << metrics::format_metric(r.ssim_sd) << "\n";
  };
  for (const auto& r : res.folds) print_row(r);
  print_row(res.pooled);
  std::cout << "reports under " << cfg.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporally adjustable synthesis of future FLAIR brain volumes"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_option("--preset", g.preset, "configuration preset (desk_scale, paper_scale)");
  app.add_option("--out", g.out, "output directory");
  auto* seed_opt = app.add_option("--seed", g.seed, "root RNG seed");

  PhantomArgs pa;
  auto* sub_phantom = app.add_subcommand("phantom", "generate a synthetic longitudinal cohort");
  sub_phantom->fallthrough();
  sub_phantom->add_option("--preset", pa.preset, "cohort shape (desk, isbi-shape)");
  sub_phantom->add_option("--side", pa.side, "volume side length in voxels");
  sub_phantom->add_option("--profile", pa.profiles, "cohort profile <participants>x<timepoints>, repeatable");
  sub_phantom->add_flag("--growth-only", pa.growth_only, "restrict lesions to the growth kind");
  sub_phantom->add_option("--noise", pa.noise, "noise amplitude");

  TrainArgs ta;
  auto* sub_train = app.add_subcommand("train", "train one model");
  sub_train->fallthrough();
  sub_train->add_option("--manifest", ta.manifest, "study manifest CSV");
  sub_train->add_option("--arch", ta.arch, "unet, gt_gan, dt_gan or acgan");
  auto* fold_opt = sub_train->add_option("--fold", ta.fold, "held-out fold index");
  sub_train->add_option("--max-steps", ta.max_steps, "stop after this many optimizer steps");
  sub_train->add_option("--epochs-const", ta.epochs_const, "constant-lr epochs");
  sub_train->add_option("--epochs-decay", ta.epochs_decay, "decaying-lr epochs");

  PredictArgs pra;
  auto* sub_predict = app.add_subcommand("predict", "synthesize a future FLAIR volume");
  sub_predict->fallthrough();
  sub_predict->add_option("--checkpoint", pra.checkpoint, "generator checkpoint stem or .g.ckpt path")
      ->required();
  sub_predict->add_option("--mprage", pra.mprage, "source MPRAGE volume")->required();
  sub_predict->add_option("--t2", pra.t2, "source T2 volume")->required();
  sub_predict->add_option("--pd", pra.pd, "source PD volume")->required();
  sub_predict->add_option("--flair", pra.flair, "source FLAIR volume")->required();
  sub_predict->add_option("--days", pra.days, "days into the future")->required();
  sub_predict->add_option("--out-volume", pra.out_path, "output volume path")->required();
  sub_predict->add_option("--preview", pra.preview, "mid-axial slice preview PGM path");
  sub_predict->add_option("--target", pra.target, "reference volume for the preview");

  EvaluateArgs ea;
  auto* sub_evaluate = app.add_subcommand("evaluate", "score predicted against reference volumes");
  sub_evaluate->fallthrough();
  sub_evaluate->add_option("--pred", ea.pred_dir, "directory of predicted volumes")->required();
  sub_evaluate->add_option("--ref", ea.ref_dir, "directory of reference volumes")->required();
  sub_evaluate->add_option("--csv", ea.csv, "output CSV path");

  TrainArgs ca;
  auto* sub_crossval = app.add_subcommand("crossval", "k-fold cross-validation");
  sub_crossval->fallthrough();
  sub_crossval->add_option("--manifest", ca.manifest, "study manifest CSV");
  sub_crossval->add_option("--arch", ca.arch, "unet, gt_gan, dt_gan or acgan");
  sub_crossval->add_option("--max-steps", ca.max_steps, "per-fold optimizer step cap");
  sub_crossval->add_option("--epochs-const", ca.epochs_const, "constant-lr epochs");
  sub_crossval->add_option("--epochs-decay", ca.epochs_decay, "decaying-lr epochs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  g.seed_set = seed_opt->count() > 0;
  ta.fold_set = fold_opt->count() > 0;

  try {
    if (sub_phantom->parsed()) return cmd_phantom(g, pa);
    if (sub_train->parsed()) return cmd_train(g, ta);
    if (sub_predict->parsed()) return cmd_predict(pra);
    if (sub_evaluate->parsed()) return cmd_evaluate(ea);
    if (sub_crossval->parsed()) return cmd_crossval(g, ca);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
