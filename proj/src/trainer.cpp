#include "flairsyn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "flairsyn/augment.hpp"
#include "flairsyn/rng.hpp"
#include "flairsyn/time_conditioning.hpp"

namespace fs = std::filesystem;

namespace flairsyn::train {

using data::Sample;
using data::Volume;
using nn::make_leaf;
using nn::Tensor;

namespace {
// Seed-stream tags so per-epoch shuffling, augmentation and model init draw
// from disjoint deterministic streams.
constexpr uint64_t kSeedInit = 0x11;
constexpr uint64_t kSeedShuffle = 0x22;
constexpr uint64_t kSeedAugment = 0x33;
}  // namespace

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::unet: return "unet";
    case Arch::gt_gan: return "gt_gan";
    case Arch::dt_gan: return "dt_gan";
    case Arch::acgan: return "acgan";
  }
  throw std::logic_error("unknown arch");
}

Arch arch_from_name(const std::string& name) {
  if (name == "unet") return Arch::unet;
  if (name == "gt_gan") return Arch::gt_gan;
  if (name == "dt_gan") return Arch::dt_gan;
  if (name == "acgan") return Arch::acgan;
  throw std::invalid_argument("unknown arch '" + name + "' (valid: unet, gt_gan, dt_gan, acgan)");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs_const < 1 || epochs_decay < 0) throw std::invalid_argument("epoch counts out of range");
  if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
    throw std::invalid_argument("Adam betas must lie in (0, 1)");
  if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be >= 0");
  if (arch == Arch::acgan && n_classes < 2) throw std::invalid_argument("acgan needs n_classes >= 2");
  loss_weights.validate();
}

double lr_at_epoch(int epoch, double base_lr, const TrainConfig& cfg) {
  if (epoch < 1 || epoch > cfg.total_epochs())
    throw std::out_of_range("epoch " + std::to_string(epoch) + " outside 1.." +
                            std::to_string(cfg.total_epochs()));
  if (epoch <= cfg.epochs_const) return base_lr;
  const double frac = static_cast<double>(epoch - cfg.epochs_const) / static_cast<double>(cfg.epochs_decay);
  return base_lr * (1.0 - frac);
}

nn::ParamRegistry ModelBundle::generator_params() {
  nn::ParamRegistry reg;
  generator.collect("g", reg);
  return reg;
}

nn::ParamRegistry ModelBundle::discriminator_params() {
  nn::ParamRegistry reg;
  if (has_discriminator()) discriminator.collect("d", reg);
  return reg;
}

void ModelBundle::train(bool training) {
  generator.train(training);
  if (has_discriminator()) discriminator.train(training);
}

ModelBundle build_bundle(const TrainConfig& cfg, const nn::GeneratorConfig& g_cfg,
                         nn::DiscriminatorConfig d_cfg) {
  cfg.validate();
  ModelBundle mb;
  mb.arch = cfg.arch;
  Rng g_rng(derive_seed(cfg.seed, kSeedInit));
  mb.generator = nn::Generator(g_cfg, g_rng);
  if (cfg.arch == Arch::unet) return mb;

  d_cfg.patch_side = g_cfg.patch_side;
  d_cfg.in_channels = g_cfg.in_channels + g_cfg.out_channels;
  switch (cfg.arch) {
    case Arch::gt_gan: d_cfg.variant = nn::DiscVariant::plain; break;
    case Arch::dt_gan: d_cfg.variant = nn::DiscVariant::time_conditioned; break;
    case Arch::acgan:
      d_cfg.variant = nn::DiscVariant::acgan;
      d_cfg.n_classes = cfg.n_classes;
      break;
    case Arch::unet: break;
  }
  Rng d_rng(derive_seed(cfg.seed, kSeedInit + 1));
  mb.discriminator = nn::Discriminator(d_cfg, d_rng);
  return mb;
}

PatchBatch assemble_patch_batch(const std::vector<const Sample*>& samples,
                                const std::vector<int64_t>& patch_indices, const data::PatchLayout& layout,
                                int n_classes) {
  if (samples.empty() || samples.size() != patch_indices.size())
    throw std::invalid_argument("assemble_patch_batch: sample/patch index count mismatch");
  const auto [PX, PY, PZ] = layout.patch_shape;
  const int64_t N = static_cast<int64_t>(samples.size());
  const int64_t vox = PX * PY * PZ;

  PatchBatch batch;
  batch.sources = Tensor({N, 4, PZ, PY, PX});
  batch.targets = Tensor({N, 1, PZ, PY, PX});
  for (int64_t n = 0; n < N; ++n) {
    const Sample& s = *samples[static_cast<size_t>(n)];
    const auto off = layout.offset_at(patch_indices[static_cast<size_t>(n)]);
    for (int64_t m = 0; m < 4; ++m) {
      const Volume p = data::crop_at(s.sources[static_cast<size_t>(m)], off, layout.patch_shape);
      std::copy(p.voxels.begin(), p.voxels.end(), batch.sources.data() + (n * 4 + m) * vox);
    }
    const Volume tp = data::crop_at(s.target, off, layout.patch_shape);
    std::copy(tp.voxels.begin(), tp.voxels.end(), batch.targets.data() + n * vox);
    batch.t_years.push_back(nn::normalize_time_lag(s.time_lag_days).years);
    batch.class_labels.push_back(s.class_label ? *s.class_label
                                               : nn::class_from_time_lag(s.time_lag_days, n_classes).index);
  }
  return batch;
}

namespace {

void check_finite(double v, const std::string& component, const std::string& context) {
  if (!std::isfinite(v))
    throw std::runtime_error((context.empty() ? std::string() : context + ": ") + "non-finite " + component +
                             " (" + std::to_string(v) + ")");
}

}  // namespace

StepMetrics train_step(ModelBundle& mb, nn::Adam& opt_g, nn::Adam* opt_d, const PatchBatch& batch,
                       const TrainConfig& cfg, const std::string& context) {
  StepMetrics metrics;
  const Var src = make_leaf(batch.sources);
  const Var tgt = make_leaf(batch.targets);

  if (cfg.arch == Arch::unet) {
    const Var pred = mb.generator.forward(src, batch.t_years);
    const Var loss = nn::l1_term(pred, tgt);
    check_finite(loss->value[0], "g_l1", context);
    opt_g.zero_grad();
    nn::backward(loss);
    opt_g.step();
    metrics.values["g_l1"] = loss->value[0];
    metrics.values["g_loss"] = loss->value[0];
    return metrics;
  }

  if (!opt_d) throw std::invalid_argument("adversarial training needs a discriminator optimizer");
  const std::optional<std::vector<double>> d_time =
      cfg.arch == Arch::dt_gan ? std::optional<std::vector<double>>(batch.t_years) : std::nullopt;

  const Var fake = mb.generator.forward(src, batch.t_years);

  // Discriminator update against the real pair and the detached fake.
  nn::DiscOutput real_out = mb.discriminator.forward(src, tgt, d_time);
  nn::DiscOutput fake_out = mb.discriminator.forward(src, nn::detach(fake), d_time);
  nn::DiscriminatorLossParts d_parts =
      cfg.arch == Arch::acgan
          ? nn::acgan_discriminator_loss(real_out.scores, fake_out.scores, real_out.class_posterior,
                                         fake_out.class_posterior, batch.class_labels, cfg.loss_weights)
          : nn::gan_discriminator_loss(real_out.scores, fake_out.scores, cfg.loss_weights);
  check_finite(d_parts.total->value[0], "d_loss", context);
  opt_d->zero_grad();
  nn::backward(d_parts.total);
  opt_d->step();

  // Generator update through the (frozen) refreshed discriminator.
  const auto d_vars = mb.discriminator_params().vars();
  nn::set_requires_grad(d_vars, false);
  nn::DiscOutput adv_out = mb.discriminator.forward(src, fake, d_time);
  nn::GeneratorLossParts g_parts =
      cfg.arch == Arch::acgan
          ? nn::acgan_generator_loss(adv_out.scores, adv_out.class_posterior, batch.class_labels, fake, tgt,
                                     cfg.loss_weights, cfg.gan_mode)
          : nn::gan_generator_loss(adv_out.scores, fake, tgt, cfg.loss_weights, cfg.gan_mode);
  check_finite(g_parts.total->value[0], "g_loss", context);
  opt_g.zero_grad();
  nn::backward(g_parts.total);
  opt_g.step();
  nn::set_requires_grad(d_vars, true);

  metrics.values["d_loss"] = d_parts.total->value[0];
  metrics.values["g_adv"] = g_parts.adversarial;
  metrics.values["g_l1"] = g_parts.l1;
  metrics.values["g_loss"] = g_parts.total->value[0];
  if (cfg.arch == Arch::acgan) {
    metrics.values["d_cls_real"] = d_parts.cls_real;
    metrics.values["d_cls_fake"] = d_parts.cls_fake;
    metrics.values["g_cls"] = g_parts.classification;
  }
  return metrics;
}

namespace {

double mean_abs_diff(const Volume& a, const Volume& b) {
  if (a.shape != b.shape) throw std::invalid_argument("validation volumes disagree on shape");
  double acc = 0.0;
  for (size_t i = 0; i < a.voxels.size(); ++i) acc += std::abs(a.voxels[i] - b.voxels[i]);
  return acc / static_cast<double>(a.voxels.size());
}

double validation_l1(nn::Generator& g, const std::vector<Sample>& val_samples,
                     std::array<int64_t, 3> patch_shape) {
  if (val_samples.empty()) throw std::invalid_argument("empty validation split");
  double acc = 0.0;
  for (const auto& s : val_samples) acc += mean_abs_diff(predict_from_sample(g, s, patch_shape), s.target);
  return acc / static_cast<double>(val_samples.size());
}

nlohmann::json epoch_json(const EpochRecord& rec) {
  nlohmann::json j;
  j["epoch"] = rec.epoch;
  j["lr_g"] = rec.lr_g;
  j["lr_d"] = rec.lr_d;
  j["steps"] = rec.steps;
  j["val_l1"] = rec.val_l1;
  for (const auto& [k, v] : rec.train_means) j["train"][k] = v;
  return j;
}

void save_bundle(ModelBundle& mb, nn::Adam& opt_g, nn::Adam* opt_d, const std::string& stem,
                 const nlohmann::json& meta) {
  auto g_reg = mb.generator_params();
  nn::save_checkpoint(stem + ".g.ckpt", g_reg, &opt_g, meta);
  if (mb.has_discriminator() && opt_d) {
    auto d_reg = mb.discriminator_params();
    nn::save_checkpoint(stem + ".d.ckpt", d_reg, opt_d, meta);
  }
}

}  // namespace

FitResult fit(ModelBundle& mb, const std::vector<Sample>& train_samples,
              const std::vector<Sample>& val_samples, const TrainConfig& cfg,
              std::array<int64_t, 3> patch_shape, const FitOptions& opts) {
  cfg.validate();
  if (train_samples.empty()) throw std::invalid_argument("empty training split");
  if (val_samples.empty()) throw std::invalid_argument("empty validation split");
  const auto full_shape = train_samples[0].target.shape;
  for (const auto& s : train_samples)
    if (s.target.shape != full_shape) throw std::invalid_argument("training samples disagree on shape");
  const data::PatchLayout layout = data::plan_patch_layout(full_shape, patch_shape);

  nn::Adam opt_g(mb.generator_params().vars(), cfg.lr_g, cfg.beta1, cfg.beta2, cfg.weight_decay);
  std::optional<nn::Adam> opt_d;
  if (mb.has_discriminator())
    opt_d.emplace(mb.discriminator_params().vars(), cfg.lr_d, cfg.beta1, cfg.beta2, cfg.weight_decay);

  std::ofstream log_file;
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    log_file.open(fs::path(opts.out_dir) / (opts.run_name + "_log.jsonl"));
    if (!log_file) throw std::runtime_error("cannot open training log in " + opts.out_dir);
  }

  nlohmann::json meta;
  meta["arch"] = arch_name(cfg.arch);
  meta["seed"] = cfg.seed;
  meta["fold"] = opts.fold_index;
  meta["patch_shape"] = {patch_shape[0], patch_shape[1], patch_shape[2]};
  meta["full_shape"] = {full_shape[0], full_shape[1], full_shape[2]};
  meta["train_samples"] = train_samples.size();
  meta["patches_per_sample"] = layout.patch_count();
  if (opts.extra_meta.is_object()) meta.update(opts.extra_meta);

  FitResult result;
  mb.train(false);
  result.initial_val_l1 = validation_l1(mb.generator, val_samples, patch_shape);
  result.best_val_l1 = result.initial_val_l1;

  bool step_cap_hit = false;
  for (int epoch = 1; epoch <= cfg.total_epochs() && !step_cap_hit; ++epoch) {
    const double lr_g = lr_at_epoch(epoch, cfg.lr_g, cfg);
    const double lr_d = lr_at_epoch(epoch, cfg.lr_d, cfg);
    opt_g.set_lr(lr_g);
    if (opt_d) opt_d->set_lr(lr_d);

    const std::vector<Sample>* epoch_samples = &train_samples;
    std::vector<Sample> augmented;
    if (cfg.augment) {
      augmented.reserve(train_samples.size());
      for (size_t i = 0; i < train_samples.size(); ++i) {
        Rng aug_rng(derive_seed(cfg.seed, kSeedAugment, static_cast<uint64_t>(epoch), i));
        augmented.push_back(data::augment_sample(train_samples[i], aug_rng));
      }
      epoch_samples = &augmented;
    }

    std::vector<std::pair<size_t, int64_t>> order;
    for (size_t si = 0; si < epoch_samples->size(); ++si)
      for (int64_t pi = 0; pi < layout.patch_count(); ++pi) order.emplace_back(si, pi);
    Rng shuffle_rng(derive_seed(cfg.seed, kSeedShuffle, static_cast<uint64_t>(epoch), 0));
    shuffle_rng.shuffle(order.begin(), order.end());

    mb.train(true);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr_g = lr_g;
    rec.lr_d = lr_d;
    std::map<std::string, double> sums;
    for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(cfg.batch_size)) {
      if (cfg.max_steps > 0 && result.total_steps >= cfg.max_steps) {
        step_cap_hit = true;
        break;
      }
      const size_t end = std::min(order.size(), pos + static_cast<size_t>(cfg.batch_size));
      std::vector<const Sample*> batch_samples;
      std::vector<int64_t> batch_patches;
      for (size_t i = pos; i < end; ++i) {
        batch_samples.push_back(&(*epoch_samples)[order[i].first]);
        batch_patches.push_back(order[i].second);
      }
      const PatchBatch batch = assemble_patch_batch(batch_samples, batch_patches, layout, cfg.n_classes);
      const std::string context =
          "epoch " + std::to_string(epoch) + " batch " + std::to_string(pos / cfg.batch_size);
      const StepMetrics sm = train_step(mb, opt_g, opt_d ? &*opt_d : nullptr, batch, cfg, context);
      for (const auto& [k, v] : sm.values) sums[k] += v;
      ++rec.steps;
      ++result.total_steps;
    }

    if (rec.steps > 0)
      for (const auto& [k, v] : sums) rec.train_means[k] = v / static_cast<double>(rec.steps);

    mb.train(false);
    rec.val_l1 = validation_l1(mb.generator, val_samples, patch_shape);
    result.log.push_back(rec);
    if (log_file) log_file << epoch_json(rec).dump() << "\n" << std::flush;
    if (opts.on_epoch) opts.on_epoch(rec);

    if (rec.val_l1 < result.best_val_l1 || result.best_epoch == 0) {
      result.best_val_l1 = rec.val_l1;
      result.best_epoch = epoch;
      if (!opts.out_dir.empty()) {
        meta["epoch"] = epoch;
        meta["val_l1"] = rec.val_l1;
        save_bundle(mb, opt_g, opt_d ? &*opt_d : nullptr,
                    (fs::path(opts.out_dir) / (opts.run_name + "_best")).string(), meta);
      }
    }
  }

  if (!opts.out_dir.empty()) {
    meta["epoch"] = result.log.empty() ? 0 : result.log.back().epoch;
    meta["val_l1"] = result.log.empty() ? result.initial_val_l1 : result.log.back().val_l1;
    save_bundle(mb, opt_g, opt_d ? &*opt_d : nullptr,
                (fs::path(opts.out_dir) / (opts.run_name + "_final")).string(), meta);
  }
  return result;
}

data::Volume predict_with(const PatchPredictor& forward, const Sample& sample,
                          std::array<int64_t, 3> patch_shape) {
  const Volume& ref = sample.sources[0];
  const data::PatchLayout layout = data::plan_patch_layout(ref.shape, patch_shape);
  const double t_years = nn::normalize_time_lag(sample.time_lag_days).years;
  const auto [PX, PY, PZ] = layout.patch_shape;
  const int64_t vox = PX * PY * PZ;

  std::vector<Volume> predicted;
  for (int64_t pi = 0; pi < layout.patch_count(); ++pi) {
    const auto off = layout.offset_at(pi);
    Tensor source({1, 4, PZ, PY, PX});
    for (int64_t m = 0; m < 4; ++m) {
      const Volume p = data::crop_at(sample.sources[static_cast<size_t>(m)], off, layout.patch_shape);
      std::copy(p.voxels.begin(), p.voxels.end(), source.data() + m * vox);
    }
    const Tensor pred = forward(source, t_years);
    if (pred.numel() != vox)
      throw std::runtime_error("patch predictor returned " + std::to_string(pred.numel()) +
                               " voxels, expected " + std::to_string(vox));
    Volume pv(layout.patch_shape, ref.spacing_mm);
    std::copy_n(pred.data(), vox, pv.voxels.data());
    pv.refresh_intensity_range();
    predicted.push_back(std::move(pv));
  }
  Volume out = data::aggregate_patches(predicted, layout);
  out.spacing_mm = ref.spacing_mm;
  return out;
}

data::Volume predict_from_sample(nn::Generator& g, const Sample& sample,
                                 std::array<int64_t, 3> patch_shape) {
  nn::NoGradGuard guard;
  g.train(false);
  return predict_with(
      [&g](const Tensor& source, double t_years) {
        return g.forward(make_leaf(source), std::vector<double>{t_years})->value;
      },
      sample, patch_shape);
}

namespace {

struct RunningStats {
  std::vector<double> values;
  void add(double v) { values.push_back(v); }
  double mean() const {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  }
  double sd() const {  // sample standard deviation
    if (values.size() < 2) return 0.0;
    const double m = mean();
    double acc = 0.0;
    for (double v : values) acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(values.size() - 1));
  }
};

FoldReport summarize_fold(int fold, const std::vector<SampleResult>& samples) {
  FoldReport rep;
  rep.fold = fold;
  RunningStats psnr, nmse, ssim;
  for (const auto& s : samples) {
    if (fold >= 0 && s.fold != fold) continue;
    psnr.add(s.report.psnr_db);
    nmse.add(s.report.nmse);
    ssim.add(s.report.ssim);
  }
  rep.n_samples = static_cast<int>(psnr.values.size());
  rep.psnr_mean = psnr.mean();
  rep.psnr_sd = psnr.sd();
  rep.nmse_mean = nmse.mean();
  rep.nmse_sd = nmse.sd();
  rep.ssim_mean = ssim.mean();
  rep.ssim_sd = ssim.sd();
  return rep;
}

void write_crossval_outputs(const CrossvalResult& result, const std::string& out_dir) {
  using metrics::format_metric;
  fs::create_directories(out_dir);

  auto row_name = [](const FoldReport& r) {
    return r.fold < 0 ? std::string("pooled") : std::to_string(r.fold);
  };

  std::ofstream csv(fs::path(out_dir) / "crossval_report.csv");
  csv << "fold,n_samples,psnr_mean,psnr_sd,nmse_mean,nmse_sd,ssim_mean,ssim_sd\n";
  auto emit = [&](const FoldReport& r) {
    csv << row_name(r) << ',' << r.n_samples << ',' << format_metric(r.psnr_mean) << ','
        << format_metric(r.psnr_sd) << ',' << format_metric(r.nmse_mean) << ',' << format_metric(r.nmse_sd)
        << ',' << format_metric(r.ssim_mean) << ',' << format_metric(r.ssim_sd) << '\n';
  };
  for (const auto& r : result.folds) emit(r);
  emit(result.pooled);
  csv.close();

  nlohmann::json j;
  auto fold_json = [&](const FoldReport& r) {
    return nlohmann::json{{"fold", r.fold},         {"n_samples", r.n_samples}, {"psnr_mean", r.psnr_mean},
                          {"psnr_sd", r.psnr_sd},   {"nmse_mean", r.nmse_mean}, {"nmse_sd", r.nmse_sd},
                          {"ssim_mean", r.ssim_mean}, {"ssim_sd", r.ssim_sd}};
  };
  j["folds"] = nlohmann::json::array();
  for (const auto& r : result.folds) j["folds"].push_back(fold_json(r));
  j["pooled"] = fold_json(result.pooled);
  std::ofstream js(fs::path(out_dir) / "crossval_report.json");
  js << j.dump(2) << "\n";
  js.close();

  std::ofstream sc(fs::path(out_dir) / "crossval_samples.csv");
  sc << "fold,volume_id,psnr_db,nmse,ssim\n";
  for (const auto& s : result.samples)
    sc << s.fold << ',' << s.report.volume_id << ',' << format_metric(s.report.psnr_db) << ','
       << format_metric(s.report.nmse) << ',' << format_metric(s.report.ssim) << '\n';
}

}  // namespace

CrossvalResult run_crossval(const std::vector<data::StudyRecord>& records, const data::FoldSplit& split,
                            const TrainConfig& cfg, const nn::GeneratorConfig& g_cfg,
                            const nn::DiscriminatorConfig& d_cfg, const CrossvalOptions& opts) {
  cfg.validate();
  split.validate();

  const auto pairs = data::build_sample_pairs(records);
  if (pairs.empty()) throw std::runtime_error("crossval: no usable sample pairs in the manifest");
  for (const auto& p : pairs)
    if (!split.assignment.count(p.source.participant_id))
      throw std::runtime_error("crossval: participant " + p.source.participant_id +
                               " has no fold assignment");

  // Everything is loaded once; folds then partition by participant.
  std::vector<data::Sample> samples;
  std::vector<int> sample_folds;
  samples.reserve(pairs.size());
  for (const auto& p : pairs) {
    samples.push_back(data::load_sample(p, opts.crop_shape));
    sample_folds.push_back(split.assignment.at(p.source.participant_id));
  }

  CrossvalResult result;
  for (int fold = 0; fold < split.k; ++fold) {
    try {
      std::vector<data::Sample> train_set, val_set;
      for (size_t i = 0; i < samples.size(); ++i)
        (sample_folds[i] == fold ? val_set : train_set).push_back(samples[i]);
      if (train_set.empty() || val_set.empty())
        throw std::runtime_error("empty train or validation split");

      TrainConfig fold_cfg = cfg;
      fold_cfg.seed = derive_seed(cfg.seed, 0x66, static_cast<uint64_t>(fold));
      ModelBundle mb = build_bundle(fold_cfg, g_cfg, d_cfg);

      FitOptions fit_opts;
      fit_opts.out_dir = opts.out_dir;
      fit_opts.run_name = "fold" + std::to_string(fold);
      fit_opts.fold_index = fold;
      fit_opts.extra_meta = opts.extra_meta;
      if (opts.on_epoch)
        fit_opts.on_epoch = [&opts, fold](const EpochRecord& e) { opts.on_epoch(fold, e); };
      fit(mb, train_set, val_set, fold_cfg, opts.patch_shape, fit_opts);

      for (const auto& s : val_set) {
        const Volume pred = predict_from_sample(mb.generator, s, opts.patch_shape);
        SampleResult sr;
        sr.fold = fold;
        sr.report = metrics::evaluate_pair(pred, s.target, s.id);
        result.samples.push_back(std::move(sr));
      }
      result.folds.push_back(summarize_fold(fold, result.samples));
    } catch (const std::exception& e) {
      throw std::runtime_error("fold " + std::to_string(fold) + ": " + e.what());
    }
  }
  result.pooled = summarize_fold(-1, result.samples);

  if (!opts.out_dir.empty()) write_crossval_outputs(result, opts.out_dir);
  return result;
}

data::Volume predict_volume(nn::Generator& g, const std::array<Volume, 4>& sources, int time_lag_days,
                            std::array<int64_t, 3> crop_shape, std::array<int64_t, 3> patch_shape,
                            const std::optional<std::array<int64_t, 3>>& crop_start) {
  Sample s;
  for (size_t m = 0; m < sources.size(); ++m) {
    Volume v = sources[m];
    std::array<int64_t, 3> target = crop_shape;
    for (int a = 0; a < 3; ++a)
      if (target[a] == 0) target[a] = v.shape[a];
    v = crop_start ? data::crop_at(v, *crop_start, target) : data::center_crop(v, target);
    s.sources[m] = data::normalize_to_signed_unit(v);
  }
  nn::normalize_time_lag(time_lag_days);  // rejects non-positive lags
  s.time_lag_days = time_lag_days;
  return predict_with(
      [&g](const Tensor& source, double t_years) {
        nn::NoGradGuard guard;
        g.train(false);
        return g.forward(make_leaf(source), std::vector<double>{t_years})->value;
      },
      s, patch_shape);
}

}  // namespace flairsyn::train
