#pragma once

#include <string>
#include <vector>

#include "flairsyn/autodiff.hpp"

namespace flairsyn::nn {

struct LossWeights {
  double lambda_l1 = 300.0;
  double real_label = 0.9;  // one-sided smoothing
  double fake_label = 0.0;
  double lambda_cls = 1.0;

  void validate() const;
};

enum class GanMode { literal, non_saturating };

GanMode gan_mode_from_name(const std::string& name);
std::string gan_mode_name(GanMode mode);

/// Mean absolute voxel difference over batch and voxels.
Var l1_term(const Var& pred, const Var& target);

struct GeneratorLossParts {
  Var total;
  double adversarial = 0.0;
  double l1 = 0.0;
  double classification = 0.0;
};

struct DiscriminatorLossParts {
  Var total;
  double real_bce = 0.0;
  double fake_bce = 0.0;
  double cls_real = 0.0;
  double cls_fake = 0.0;
};

/// literal: mean log(1 - fake_scores) + lambda_l1 * l1
/// non_saturating: mean -log(fake_scores) + lambda_l1 * l1
GeneratorLossParts gan_generator_loss(const Var& fake_scores, const Var& pred, const Var& target,
                                      const LossWeights& w, GanMode mode = GanMode::non_saturating);

/// BCE(real_scores, real_label) + BCE(fake_scores, fake_label), grid/batch means.
DiscriminatorLossParts gan_discriminator_loss(const Var& real_scores, const Var& fake_scores,
                                              const LossWeights& w);

/// Adds lambda_cls * (CE(real posterior, label) + CE(fake posterior, label)).
DiscriminatorLossParts acgan_discriminator_loss(const Var& real_scores, const Var& fake_scores,
                                                const Var& real_posteriors, const Var& fake_posteriors,
                                                const std::vector<int>& labels, const LossWeights& w);

/// Adds lambda_cls * CE(fake posterior, label) to the generator loss.
GeneratorLossParts acgan_generator_loss(const Var& fake_scores, const Var& fake_posteriors,
                                        const std::vector<int>& labels, const Var& pred, const Var& target,
                                        const LossWeights& w, GanMode mode = GanMode::non_saturating);

}  // namespace flairsyn::nn
