#include "flairsyn/objectives.hpp"

#include <stdexcept>

#include "flairsyn/nn_ops.hpp"

namespace flairsyn::nn {

void LossWeights::validate() const {
  if (lambda_l1 < 0.0) throw std::invalid_argument("lambda_l1 must be >= 0");
  if (!(real_label > 0.5 && real_label <= 1.0))
    throw std::invalid_argument("real_label must lie in (0.5, 1]");
  if (!(fake_label >= 0.0 && fake_label < 0.5))
    throw std::invalid_argument("fake_label must lie in [0, 0.5)");
  if (lambda_cls < 0.0) throw std::invalid_argument("lambda_cls must be >= 0");
}

GanMode gan_mode_from_name(const std::string& name) {
  if (name == "literal") return GanMode::literal;
  if (name == "non_saturating") return GanMode::non_saturating;
  throw std::invalid_argument("unknown adversarial mode '" + name + "'");
}

std::string gan_mode_name(GanMode mode) {
  return mode == GanMode::literal ? "literal" : "non_saturating";
}

Var l1_term(const Var& pred, const Var& target) { return l1_distance(pred, target); }

GeneratorLossParts gan_generator_loss(const Var& fake_scores, const Var& pred, const Var& target,
                                      const LossWeights& w, GanMode mode) {
  w.validate();
  GeneratorLossParts parts;
  Var adv = mode == GanMode::literal ? mean_log_one_minus(fake_scores) : mean_neg_log(fake_scores);
  Var l1 = l1_term(pred, target);
  parts.adversarial = adv->value[0];
  parts.l1 = l1->value[0];
  parts.total = add(adv, scale(l1, w.lambda_l1));
  return parts;
}

DiscriminatorLossParts gan_discriminator_loss(const Var& real_scores, const Var& fake_scores,
                                              const LossWeights& w) {
  w.validate();
  DiscriminatorLossParts parts;
  Var real = bce_against_constant(real_scores, w.real_label);
  Var fake = bce_against_constant(fake_scores, w.fake_label);
  parts.real_bce = real->value[0];
  parts.fake_bce = fake->value[0];
  parts.total = add(real, fake);
  return parts;
}

DiscriminatorLossParts acgan_discriminator_loss(const Var& real_scores, const Var& fake_scores,
                                                const Var& real_posteriors, const Var& fake_posteriors,
                                                const std::vector<int>& labels, const LossWeights& w) {
  DiscriminatorLossParts parts = gan_discriminator_loss(real_scores, fake_scores, w);
  Var cls_real = cross_entropy_from_probs(real_posteriors, labels);
  Var cls_fake = cross_entropy_from_probs(fake_posteriors, labels);
  parts.cls_real = cls_real->value[0];
  parts.cls_fake = cls_fake->value[0];
  parts.total = add(parts.total, scale(add(cls_real, cls_fake), w.lambda_cls));
  return parts;
}

GeneratorLossParts acgan_generator_loss(const Var& fake_scores, const Var& fake_posteriors,
                                        const std::vector<int>& labels, const Var& pred, const Var& target,
                                        const LossWeights& w, GanMode mode) {
  GeneratorLossParts parts = gan_generator_loss(fake_scores, pred, target, w, mode);
  Var cls = cross_entropy_from_probs(fake_posteriors, labels);
  parts.classification = cls->value[0];
  parts.total = add(parts.total, scale(cls, w.lambda_cls));
  return parts;
}

}  // namespace flairsyn::nn
