#include "flairsyn/config.hpp"

#include <fstream>
#include <stdexcept>

namespace flairsyn::config {

namespace {

std::array<int64_t, 3> shape_from_json(const nlohmann::json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3)
    throw std::invalid_argument("config: " + key + " must be an array of 3 integers");
  return {j[0].get<int64_t>(), j[1].get<int64_t>(), j[2].get<int64_t>()};
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  if (!preset.empty() && preset != "desk_scale" && preset != "paper_scale")
    throw std::invalid_argument("config: unknown preset '" + preset +
                                "' (valid: desk_scale, paper_scale)");
  if (data.patch_shape[0] != data.patch_shape[1] || data.patch_shape[1] != data.patch_shape[2])
    throw std::invalid_argument("config: patch_shape must be cubic");
  if (data.patch_shape[0] < 4) throw std::invalid_argument("config: patch side must be >= 4");
  if (data.folds < 2) throw std::invalid_argument("config: folds must be >= 2");
  for (int a = 0; a < 3; ++a)
    if (data.crop_shape[a] < 0) throw std::invalid_argument("config: crop_shape entries must be >= 0");
  train::arch_from_name(model.arch);  // throws with the valid list
  resolved_train().validate();
  resolution_ladder(generator_config());
}

train::TrainConfig RunConfig::resolved_train() const {
  train::TrainConfig t = train;
  t.arch = train::arch_from_name(model.arch);
  t.n_classes = model.n_classes;
  if (!lr_g_explicit) t.lr_g = t.arch == train::Arch::unet ? 7e-5 : 2e-4;
  return t;
}

nn::GeneratorConfig RunConfig::generator_config() const {
  nn::GeneratorConfig g;
  g.levels = model.levels;
  g.base_channels = model.base_channels;
  g.patch_side = data.patch_shape[0];
  return g;
}

nn::DiscriminatorConfig RunConfig::discriminator_config() const {
  nn::DiscriminatorConfig d;
  d.base_channels = model.base_channels;
  d.stride2_blocks = model.disc_stride2_blocks;
  d.stride1_blocks = model.disc_stride1_blocks;
  d.n_classes = model.n_classes;
  d.patch_side = data.patch_shape[0];
  return d;
}

void apply_preset(RunConfig& cfg, const std::string& preset) {
  if (preset == "desk_scale") {
    cfg.data.crop_shape = {0, 0, 0};
    cfg.data.patch_shape = {24, 24, 24};
    cfg.model.levels = 4;
    cfg.model.base_channels = 16;
    cfg.train.batch_size = 3;
    cfg.train.epochs_const = 20;
    cfg.train.epochs_decay = 10;
    cfg.train.augment = false;
  } else if (preset == "paper_scale") {
    cfg.data.crop_shape = {150, 190, 150};
    cfg.data.patch_shape = {128, 128, 128};
    cfg.model.levels = 6;
    cfg.model.base_channels = 32;
    cfg.train.batch_size = 3;
    cfg.train.epochs_const = 150;
    cfg.train.epochs_decay = 50;
    cfg.train.augment = true;
  } else {
    throw std::invalid_argument("config: unknown preset '" + preset +
                                "' (valid: desk_scale, paper_scale)");
  }
  // Shared published values; both presets keep them.
  cfg.train.loss_weights.lambda_l1 = 300.0;
  cfg.train.loss_weights.real_label = 0.9;
  cfg.train.loss_weights.fake_label = 0.0;
  cfg.train.loss_weights.lambda_cls = 1.0;
  cfg.train.beta1 = 0.5;
  cfg.train.beta2 = 0.999;
  cfg.train.weight_decay = 7e-8;
  cfg.train.lr_d = 2e-4;
  cfg.lr_g_explicit = false;
  cfg.preset = preset;
}

void merge_json(RunConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
  if (j.contains("preset")) {
    const auto p = j.at("preset").get<std::string>();
    if (!p.empty()) apply_preset(cfg, p);
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    maybe(d, "manifest", cfg.data.manifest);
    if (d.contains("crop_shape")) cfg.data.crop_shape = shape_from_json(d.at("crop_shape"), "data.crop_shape");
    if (d.contains("patch_shape"))
      cfg.data.patch_shape = shape_from_json(d.at("patch_shape"), "data.patch_shape");
    maybe(d, "folds", cfg.data.folds);
    maybe(d, "fold_override", cfg.data.fold_override);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    maybe(m, "arch", cfg.model.arch);
    maybe(m, "levels", cfg.model.levels);
    maybe(m, "base_channels", cfg.model.base_channels);
    maybe(m, "disc_stride2_blocks", cfg.model.disc_stride2_blocks);
    maybe(m, "disc_stride1_blocks", cfg.model.disc_stride1_blocks);
    maybe(m, "n_classes", cfg.model.n_classes);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    maybe(t, "batch_size", cfg.train.batch_size);
    maybe(t, "epochs_const", cfg.train.epochs_const);
    maybe(t, "epochs_decay", cfg.train.epochs_decay);
    if (t.contains("lr_g")) {
      cfg.train.lr_g = t.at("lr_g").get<double>();
      cfg.lr_g_explicit = true;
    }
    maybe(t, "lr_d", cfg.train.lr_d);
    maybe(t, "beta1", cfg.train.beta1);
    maybe(t, "beta2", cfg.train.beta2);
    maybe(t, "weight_decay", cfg.train.weight_decay);
    maybe(t, "seed", cfg.train.seed);
    maybe(t, "lambda_l1", cfg.train.loss_weights.lambda_l1);
    maybe(t, "real_label", cfg.train.loss_weights.real_label);
    maybe(t, "fake_label", cfg.train.loss_weights.fake_label);
    maybe(t, "lambda_cls", cfg.train.loss_weights.lambda_cls);
    if (t.contains("gan_mode")) cfg.train.gan_mode = nn::gan_mode_from_name(t.at("gan_mode").get<std::string>());
    maybe(t, "max_steps", cfg.train.max_steps);
    maybe(t, "augment", cfg.train.augment);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    maybe(e, "metrics_csv", cfg.eval.metrics_csv);
    maybe(e, "lesion_threshold", cfg.eval.lesion_threshold);
  }
  maybe(j, "out_dir", cfg.out_dir);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config: " + path + " is not valid JSON: " + e.what());
  }
  RunConfig cfg;
  merge_json(cfg, j);
  return cfg;
}

nlohmann::json dump_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["preset"] = cfg.preset;
  j["data"] = {{"manifest", cfg.data.manifest},
               {"crop_shape", cfg.data.crop_shape},
               {"patch_shape", cfg.data.patch_shape},
               {"folds", cfg.data.folds},
               {"fold_override", cfg.data.fold_override}};
  j["model"] = {{"arch", cfg.model.arch},
                {"levels", cfg.model.levels},
                {"base_channels", cfg.model.base_channels},
                {"disc_stride2_blocks", cfg.model.disc_stride2_blocks},
                {"disc_stride1_blocks", cfg.model.disc_stride1_blocks},
                {"n_classes", cfg.model.n_classes}};
  const train::TrainConfig t = cfg.resolved_train();
  j["train"] = {{"batch_size", t.batch_size},
                {"epochs_const", t.epochs_const},
                {"epochs_decay", t.epochs_decay},
                {"lr_g", t.lr_g},
                {"lr_d", t.lr_d},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"weight_decay", t.weight_decay},
                {"seed", t.seed},
                {"lambda_l1", t.loss_weights.lambda_l1},
                {"real_label", t.loss_weights.real_label},
                {"fake_label", t.loss_weights.fake_label},
                {"lambda_cls", t.loss_weights.lambda_cls},
                {"gan_mode", nn::gan_mode_name(t.gan_mode)},
                {"max_steps", t.max_steps},
                {"augment", t.augment}};
  j["eval"] = {{"metrics_csv", cfg.eval.metrics_csv}, {"lesion_threshold", cfg.eval.lesion_threshold}};
  j["out_dir"] = cfg.out_dir;
  return j;
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << dump_json(cfg).dump(2) << "\n";
}

}  // namespace flairsyn::config
