#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flairsyn/checkpoint.hpp"
#include "flairsyn/metrics.hpp"
#include "flairsyn/models.hpp"
#include "flairsyn/objectives.hpp"
#include "flairsyn/optim.hpp"
#include "flairsyn/pairs_folds.hpp"
#include "flairsyn/patches.hpp"

namespace flairsyn::train {

using nn::Var;

enum class Arch { unet, gt_gan, dt_gan, acgan };

std::string arch_name(Arch a);
Arch arch_from_name(const std::string& name);

struct TrainConfig {
  Arch arch = Arch::gt_gan;
  int batch_size = 3;
  int epochs_const = 150;
  int epochs_decay = 50;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double weight_decay = 7e-8;
  uint64_t seed = 1;
  nn::LossWeights loss_weights;
  nn::GanMode gan_mode = nn::GanMode::non_saturating;
  int n_classes = 3;      // acgan label range in whole years
  int64_t max_steps = 0;  // 0 = no cap; smoke runs stop early
  bool augment = false;

  void validate() const;
  int total_epochs() const { return epochs_const + epochs_decay; }
};

// Constant for epochs_const epochs, then linearly decaying to exactly 0 at
// the final epoch. Epochs are 1-based.
double lr_at_epoch(int epoch, double base_lr, const TrainConfig& cfg);

struct ModelBundle {
  Arch arch = Arch::gt_gan;
  nn::Generator generator;
  nn::Discriminator discriminator;  // untouched for unet

  bool has_discriminator() const { return arch != Arch::unet; }
  nn::ParamRegistry generator_params();
  nn::ParamRegistry discriminator_params();
  void train(bool training);
};

/// Instantiates G (and the arch-appropriate D variant) with seeded init.
ModelBundle build_bundle(const TrainConfig& cfg, const nn::GeneratorConfig& g_cfg,
                         nn::DiscriminatorConfig d_cfg);

struct StepMetrics {
  std::map<std::string, double> values;
};

struct PatchBatch {
  nn::Tensor sources;  // [N, 4, P, P, P]
  nn::Tensor targets;  // [N, 1, P, P, P]
  std::vector<double> t_years;
  std::vector<int> class_labels;
  int64_t size() const { return sources.dim(0); }
};

PatchBatch assemble_patch_batch(const std::vector<const data::Sample*>& samples,
                                const std::vector<int64_t>& patch_indices, const data::PatchLayout& layout,
                                int n_classes);

/// One D update (real pair + detached fake) followed by one G update for the
/// adversarial archs; a single L1 update for unet. Throws on non-finite loss,
/// prefixing `context` to the diagnostic.
StepMetrics train_step(ModelBundle& mb, nn::Adam& opt_g, nn::Adam* opt_d, const PatchBatch& batch,
                       const TrainConfig& cfg, const std::string& context = "");

struct EpochRecord {
  int epoch = 0;
  double lr_g = 0.0;
  double lr_d = 0.0;
  int64_t steps = 0;
  std::map<std::string, double> train_means;
  double val_l1 = 0.0;
};

struct FitResult {
  std::vector<EpochRecord> log;
  double initial_val_l1 = 0.0;
  double best_val_l1 = 0.0;
  int best_epoch = 0;
  int64_t total_steps = 0;
};

struct FitOptions {
  std::string out_dir;         // empty: no checkpoints/logs written
  std::string run_name = "run";
  int fold_index = -1;
  nlohmann::json extra_meta;   // merged into the checkpoint sidecar
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Full training loop: per epoch every training sample contributes each of
/// its patches once, in a seed-derived shuffled order, batched by batch_size.
FitResult fit(ModelBundle& mb, const std::vector<data::Sample>& train_samples,
              const std::vector<data::Sample>& val_samples, const TrainConfig& cfg,
              std::array<int64_t, 3> patch_shape, const FitOptions& opts = {});

/// Patchwise generator inference over an already cropped and normalized
/// sample; patches are predicted one at a time and averaged back together.
data::Volume predict_from_sample(nn::Generator& g, const data::Sample& sample,
                                 std::array<int64_t, 3> patch_shape);

/// crop -> normalize -> patch -> generate -> aggregate, for raw volumes.
data::Volume predict_volume(nn::Generator& g, const std::array<data::Volume, 4>& sources,
                            int time_lag_days, std::array<int64_t, 3> crop_shape,
                            std::array<int64_t, 3> patch_shape,
                            const std::optional<std::array<int64_t, 3>>& crop_start = std::nullopt);

/// Plumbing-level variant: `forward` maps ([1,4,P,P,P] source, t_years) to a
/// [1,1,P,P,P] prediction.
using PatchPredictor = std::function<nn::Tensor(const nn::Tensor&, double)>;
data::Volume predict_with(const PatchPredictor& forward, const data::Sample& sample,
                          std::array<int64_t, 3> patch_shape);

struct FoldReport {
  int fold = 0;  // -1 marks the pooled row
  int n_samples = 0;
  double psnr_mean = 0.0, psnr_sd = 0.0;
  double nmse_mean = 0.0, nmse_sd = 0.0;
  double ssim_mean = 0.0, ssim_sd = 0.0;
};

struct SampleResult {
  int fold = 0;
  metrics::MetricReport report;
};

struct CrossvalResult {
  std::vector<FoldReport> folds;
  FoldReport pooled;
  std::vector<SampleResult> samples;
};

struct CrossvalOptions {
  std::array<int64_t, 3> crop_shape{0, 0, 0};
  std::array<int64_t, 3> patch_shape{};
  std::string out_dir;  // empty: nothing is written
  nlohmann::json extra_meta;
  std::function<void(int fold, const EpochRecord&)> on_epoch;
};

/// Trains one model per fold on the out-of-fold participants and evaluates on
/// the held-out ones. Writes crossval_report.{csv,json} (one row per fold plus
/// a pooled row) and crossval_samples.csv under out_dir.
CrossvalResult run_crossval(const std::vector<data::StudyRecord>& records, const data::FoldSplit& split,
                            const TrainConfig& cfg, const nn::GeneratorConfig& g_cfg,
                            const nn::DiscriminatorConfig& d_cfg, const CrossvalOptions& opts);

}  // namespace flairsyn::train
