#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "json.hpp"

#include "flairsyn/models.hpp"
#include "flairsyn/trainer.hpp"

namespace flairsyn::config {

struct DataBlock {
  std::string manifest;
  std::array<int64_t, 3> crop_shape{0, 0, 0};  // 0 keeps the full axis
  std::array<int64_t, 3> patch_shape{24, 24, 24};
  int folds = 5;
  std::string fold_override;  // JSON file, optional
};

struct ModelBlock {
  std::string arch = "gt_gan";
  int levels = 4;
  int64_t base_channels = 16;
  int disc_stride2_blocks = 3;
  int disc_stride1_blocks = 2;
  int n_classes = 3;
};

struct EvalBlock {
  std::string metrics_csv = "metrics.csv";
  double lesion_threshold = 0.35;
};

struct RunConfig {
  std::string preset;  // "", "desk_scale" or "paper_scale"
  DataBlock data;
  ModelBlock model;
  train::TrainConfig train;
  EvalBlock eval;
  std::string out_dir = "out";
  // The generator lr depends on the arch unless the config pins it.
  bool lr_g_explicit = false;

  void validate() const;

  train::TrainConfig resolved_train() const;  // arch/classes/lr folded in
  nn::GeneratorConfig generator_config() const;
  nn::DiscriminatorConfig discriminator_config() const;
};

/// Overwrites the preset-controlled fields; everything else keeps its value.
void apply_preset(RunConfig& cfg, const std::string& preset);

/// Applies only the keys present in `j` on top of `cfg`. A "preset" key is
/// applied first so explicit keys in the same document win over it.
void merge_json(RunConfig& cfg, const nlohmann::json& j);

RunConfig load_config(const std::string& path);

nlohmann::json dump_json(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::string& path);

}  // namespace flairsyn::config
