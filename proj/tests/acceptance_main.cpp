// Acceptance checks, one per line: property-based gates covering the patch
// pipeline, cohort pairing, metric and loss oracles, the differentiable time
// pathway, the lr schedule, a small end-to-end training run with temporal
// sensitivity, discriminator variant contracts, and determinism.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "flairsyn/config.hpp"
#include "flairsyn/manifest.hpp"
#include "flairsyn/metrics.hpp"
#include "flairsyn/models.hpp"
#include "flairsyn/nn_ops.hpp"
#include "flairsyn/objectives.hpp"
#include "flairsyn/pairs_folds.hpp"
#include "flairsyn/patches.hpp"
#include "flairsyn/phantom.hpp"
#include "flairsyn/rng.hpp"
#include "flairsyn/trainer.hpp"
#include "flairsyn/volume_io.hpp"

namespace fs = std::filesystem;
using namespace flairsyn;
using data::Volume;
using nn::make_leaf;
using nn::Tensor;
using nn::Var;

namespace {

fs::path g_tmp;

void expect(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

void expect_near(double got, double want, double tol, const std::string& what) {
  if (!(std::abs(got - want) <= tol)) {
    std::ostringstream ss;
    ss << what << ": got " << got << ", want " << want << " within " << tol;
    throw std::runtime_error(ss.str());
  }
}

Volume random_volume(std::array<int64_t, 3> shape, Rng& rng, double lo, double hi) {
  Volume v(shape);
  for (auto& x : v.voxels) x = rng.uniform(lo, hi);
  v.refresh_intensity_range();
  return v;
}

Tensor random_tensor(std::vector<int64_t> shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

double fd_rel_error(const Var& p, const std::function<double()>& loss_fn, const Tensor& analytic,
                    const std::vector<int64_t>& indices, double h) {
  double worst = 0.0;
  for (int64_t i : indices) {
    const double orig = p->value[i];
    p->value[i] = orig + h;
    const double up = loss_fn();
    p->value[i] = orig - h;
    const double dn = loss_fn();
    p->value[i] = orig;
    const double fd = (up - dn) / (2.0 * h);
    const double an = analytic[i];
    worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}));
  }
  return worst;
}

std::vector<int64_t> spread_indices(int64_t numel, int64_t count) {
  std::vector<int64_t> out;
  const int64_t step = std::max<int64_t>(1, numel / count);
  for (int64_t i = 0; i < numel; i += step) out.push_back(i);
  return out;
}

// ---- criterion 1: patch extract/aggregate round-trip -----------------------

void criterion_patches() {
  Rng rng(101);
  auto round_trip = [](const Volume& v, std::array<int64_t, 3> patch) {
    const auto layout = data::plan_patch_layout(v.shape, patch);
    const auto patches = data::extract_patches(v, layout);
    const Volume back = data::aggregate_patches(patches, layout);
    expect(back.shape == v.shape, "aggregated shape mismatch");
    double worst = 0.0;
    for (size_t i = 0; i < v.voxels.size(); ++i) worst = std::max(worst, std::abs(back.voxels[i] - v.voxels[i]));
    expect(worst <= 1e-6, "round-trip error " + std::to_string(worst));
  };

  for (int i = 0; i < 99; ++i) {
    std::array<int64_t, 3> shape{}, patch{};
    for (int a = 0; a < 3; ++a) {
      shape[a] = rng.uniform_int(4, 24);
      patch[a] = rng.uniform_int(2, shape[a]);
    }
    round_trip(random_volume(shape, rng, -1.0, 1.0), patch);
  }
  round_trip(random_volume({150, 190, 150}, rng, -1.0, 1.0), {128, 128, 128});
}

// ---- criterion 2: cohort pairing count --------------------------------------

void criterion_pairing() {
  phantom::PhantomConfig pc;
  pc.profile = {{14, 4}, {4, 5}, {1, 6}};
  pc.side = 16;
  pc.kind_weights = {0.0, 1.0, 0.0};  // shrinking lesions never outgrow the brain
  pc.seed = 2;

  const auto manifest = phantom::generate_cohort(pc, (g_tmp / "pairing").string());
  const auto records = data::load_manifest(manifest);
  // 14*4 + 4*5 + 1*6 sessions; the published count of 81 does not add up to
  // the stated 139 pairs, the profile itself does.
  expect(records.size() == 82,
         "expected 82 study records (14*4 + 4*5 + 1*6), got " + std::to_string(records.size()));
  const auto pairs = data::build_sample_pairs(records);
  expect(pairs.size() == 139, "expected 139 sample pairs, got " + std::to_string(pairs.size()));
}

// ---- criterion 3: metric oracles --------------------------------------------

double direct_psnr(const Volume& p, const Volume& r) {
  double mse = 0.0;
  for (size_t i = 0; i < p.voxels.size(); ++i) {
    const double d = p.voxels[i] - r.voxels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(p.voxels.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double direct_nmse(const Volume& p, const Volume& r) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < p.voxels.size(); ++i) {
    const double d = p.voxels[i] - r.voxels[i];
    num += d * d;
    den += r.voxels[i] * r.voxels[i];
  }
  return num / den;
}

// Brute-force SSIM: explicit 3D Gaussian window at every valid position.
double direct_ssim(const Volume& p, const Volume& r) {
  const int w = metrics::kSsimWindow;
  std::vector<double> g(static_cast<size_t>(w));
  double gsum = 0.0;
  for (int i = 0; i < w; ++i) {
    const double d = i - (w - 1) / 2.0;
    g[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * metrics::kSsimSigma * metrics::kSsimSigma));
    gsum += g[static_cast<size_t>(i)];
  }
  for (auto& x : g) x /= gsum;

  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  int64_t windows = 0;
  for (int64_t z0 = 0; z0 + w <= p.shape[2]; ++z0)
    for (int64_t y0 = 0; y0 + w <= p.shape[1]; ++y0)
      for (int64_t x0 = 0; x0 + w <= p.shape[0]; ++x0) {
        double mp = 0, mr = 0, pp = 0, rr = 0, pr = 0;
        for (int dz = 0; dz < w; ++dz)
          for (int dy = 0; dy < w; ++dy)
            for (int dx = 0; dx < w; ++dx) {
              const double wt = g[static_cast<size_t>(dx)] * g[static_cast<size_t>(dy)] * g[static_cast<size_t>(dz)];
              const double a = p.at(x0 + dx, y0 + dy, z0 + dz);
              const double b = r.at(x0 + dx, y0 + dy, z0 + dz);
              mp += wt * a;
              mr += wt * b;
              pp += wt * a * a;
              rr += wt * b * b;
              pr += wt * a * b;
            }
        const double vp = pp - mp * mp, vr = rr - mr * mr, cov = pr - mp * mr;
        total += ((2 * mp * mr + c1) * (2 * cov + c2)) / ((mp * mp + mr * mr + c1) * (vp + vr + c2));
        ++windows;
      }
  return total / static_cast<double>(windows);
}

void criterion_metrics() {
  Rng rng(303);
  for (int i = 0; i < 50; ++i) {
    const Volume a = random_volume({16, 16, 16}, rng, 0.0, 1.0);
    const Volume b = random_volume({16, 16, 16}, rng, 0.0, 1.0);
    expect_near(metrics::psnr(a, b), direct_psnr(a, b), 1e-6, "psnr vs direct formula");
    expect_near(metrics::nmse(a, b), direct_nmse(a, b), 1e-6, "nmse vs direct formula");
    expect_near(metrics::ssim(a, b), direct_ssim(a, b), 1e-6, "ssim vs direct formula");
  }

  const Volume a = random_volume({16, 16, 16}, rng, 0.0, 0.9);
  expect(std::isinf(metrics::psnr(a, a)), "identical volumes must give infinite psnr");
  expect(metrics::nmse(a, a) == 0.0, "identical volumes must give zero nmse");
  expect_near(metrics::ssim(a, a), 1.0, 1e-12, "identical volumes ssim");

  Volume shifted = a;
  for (auto& v : shifted.voxels) v += 0.1;  // mse 0.01 -> 20 dB
  expect_near(metrics::psnr(shifted, a), 20.0, 1e-9, "constant 0.1 offset psnr");

  Volume zero(a.shape);
  expect(metrics::nmse(zero, a) == 1.0, "zero prediction must give nmse exactly 1");
}

// ---- criterion 4: loss oracles ----------------------------------------------

void criterion_losses() {
  nn::LossWeights w;  // lambda_l1 300, labels 0.9/0.0, lambda_cls 1
  auto scores = make_leaf(Tensor({2, 1, 1, 1, 1}, {0.5, 0.8}));
  auto pred = make_leaf(Tensor({1, 1, 1, 4}, {0.0, 0.5, 1.0, -0.5}));
  auto target = make_leaf(Tensor({1, 1, 1, 4}, {0.1, 0.2, 0.9, 0.5}));
  const double l1 = (0.1 + 0.3 + 0.1 + 1.0) / 4.0;

  const auto lit = nn::gan_generator_loss(scores, pred, target, w, nn::GanMode::literal);
  expect_near(lit.adversarial, (std::log(0.5) + std::log(0.2)) / 2.0, 1e-10, "literal adversarial");
  expect_near(lit.l1, l1, 1e-10, "generator l1 part");
  expect_near(lit.total->value[0], lit.adversarial + 300.0 * l1, 1e-10, "literal total");

  const auto ns = nn::gan_generator_loss(scores, pred, target, w, nn::GanMode::non_saturating);
  expect_near(ns.adversarial, (-std::log(0.5) - std::log(0.8)) / 2.0, 1e-10, "non-saturating adversarial");
  expect_near(ns.total->value[0], ns.adversarial + 300.0 * l1, 1e-10, "non-saturating total");

  auto real_s = make_leaf(Tensor({2}, {0.8, 0.7}));
  auto fake_s = make_leaf(Tensor({1}, {0.3}));
  const auto d = nn::gan_discriminator_loss(real_s, fake_s, w);
  const double real_bce =
      -(0.9 * std::log(0.8) + 0.1 * std::log(0.2) + 0.9 * std::log(0.7) + 0.1 * std::log(0.3)) / 2.0;
  const double fake_bce = -std::log(0.7);
  expect_near(d.real_bce, real_bce, 1e-10, "real bce with smoothed target");
  expect_near(d.fake_bce, fake_bce, 1e-10, "fake bce");
  expect_near(d.total->value[0], real_bce + fake_bce, 1e-10, "discriminator total");

  auto real_post = make_leaf(Tensor({2, 3}, {0.2, 0.7, 0.1, 0.1, 0.1, 0.8}));
  auto fake_post = make_leaf(Tensor({2, 3}, {0.5, 0.3, 0.2, 0.3, 0.3, 0.4}));
  const std::vector<int> labels{1, 2};
  const auto ad = nn::acgan_discriminator_loss(real_s, fake_s, real_post, fake_post, labels, w);
  const double cls_real = (-std::log(0.7) - std::log(0.8)) / 2.0;
  const double cls_fake = (-std::log(0.3) - std::log(0.4)) / 2.0;
  expect_near(ad.cls_real, cls_real, 1e-10, "real classification term");
  expect_near(ad.cls_fake, cls_fake, 1e-10, "fake classification term");
  expect_near(ad.total->value[0], real_bce + fake_bce + cls_real + cls_fake, 1e-10, "acgan d total");

  const auto ag = nn::acgan_generator_loss(scores, fake_post, labels, pred, target, w,
                                           nn::GanMode::non_saturating);
  expect_near(ag.total->value[0], ns.adversarial + 300.0 * l1 + cls_fake, 1e-10, "acgan g total");

  // analytic gradients vs central differences through a toy G and D
  Rng rng(17);
  auto x = make_leaf(random_tensor({1, 2, 4, 4, 4}, rng, -1.0, 1.0));
  auto gw = make_leaf(random_tensor({1, 2, 3, 3, 3}, rng, -0.5, 0.5), true);
  auto gb = make_leaf(random_tensor({1}, rng, -0.1, 0.1), true);
  auto dw = make_leaf(random_tensor({1, 1, 4, 4, 4}, rng, -0.5, 0.5), true);
  auto db = make_leaf(random_tensor({1}, rng, -0.1, 0.1), true);
  auto tgt = make_leaf(random_tensor({1, 1, 4, 4, 4}, rng, -1.0, 1.0));

  for (auto mode : {nn::GanMode::literal, nn::GanMode::non_saturating}) {
    auto g_loss = [&]() {
      auto pred_t = nn::tanh_op(nn::conv3d(x, gw, gb, 1, 1));
      auto sc = nn::sigmoid(nn::conv3d(pred_t, dw, db, 2, 1));
      return nn::gan_generator_loss(sc, pred_t, tgt, w, mode).total;
    };
    for (auto& p : {gw, gb, dw, db}) p->zero_grad();
    nn::backward(g_loss());
    auto value_of = [&]() { return g_loss()->value[0]; };
    const std::string name = nn::gan_mode_name(mode);
    expect(fd_rel_error(gw, value_of, gw->grad, spread_indices(gw->value.numel(), 8), 1e-6) < 1e-6,
           name + " generator-loss gradient w.r.t. conv weight off");
    expect(fd_rel_error(gb, value_of, gb->grad, {0}, 1e-6) < 1e-6,
           name + " generator-loss gradient w.r.t. conv bias off");
  }

  auto real_in = make_leaf(random_tensor({1, 1, 4, 4, 4}, rng, -1.0, 1.0));
  auto fake_in = make_leaf(random_tensor({1, 1, 4, 4, 4}, rng, -1.0, 1.0));
  auto d_loss = [&]() {
    auto rs = nn::sigmoid(nn::conv3d(real_in, dw, db, 2, 1));
    auto fs2 = nn::sigmoid(nn::conv3d(fake_in, dw, db, 2, 1));
    return nn::gan_discriminator_loss(rs, fs2, w).total;
  };
  for (auto& p : {dw, db}) p->zero_grad();
  nn::backward(d_loss());
  auto d_value = [&]() { return d_loss()->value[0]; };
  expect(fd_rel_error(dw, d_value, dw->grad, spread_indices(dw->value.numel(), 8), 1e-6) < 1e-6,
         "discriminator-loss gradient w.r.t. weight off");
  expect(fd_rel_error(db, d_value, db->grad, {0}, 1e-6) < 1e-6,
         "discriminator-loss gradient w.r.t. bias off");
}

// ---- criterion 5: gradient through the time pathway -------------------------

void criterion_time_gradient() {
  nn::GeneratorConfig gc;
  gc.levels = 2;
  gc.base_channels = 2;
  gc.patch_side = 8;
  Rng init(5);
  nn::Generator g(gc, init);
  g.train(false);

  Rng rng(23);
  auto x = make_leaf(random_tensor({1, 4, 8, 8, 8}, rng, -1.0, 1.0));
  auto target = make_leaf(random_tensor({1, 1, 8, 8, 8}, rng, -1.0, 1.0));

  auto t = make_leaf(Tensor({1}, {1.5}), true);
  auto loss = nn::l1_term(g.forward(x, std::vector<Var>{t}), target);
  nn::backward(loss);
  const double analytic = t->grad[0];

  const double h = 1e-3;
  auto eval_at = [&](double years) {
    nn::NoGradGuard guard;
    return nn::l1_term(g.forward(x, std::vector<double>{years}), target)->value[0];
  };
  const double fd = (eval_at(1.5 + h) - eval_at(1.5 - h)) / (2.0 * h);

  const double rel = std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-12});
  expect(std::abs(analytic) > 0.0, "loss reported a zero derivative in the time lag");
  expect(rel < 1e-4, "time-lag gradient off: analytic " + std::to_string(analytic) + " vs fd " +
                         std::to_string(fd));
}

// ---- criterion 6: learning-rate schedule ------------------------------------

void criterion_schedule() {
  train::TrainConfig cfg;  // 150 + 50
  expect(train::lr_at_epoch(1, 2e-4, cfg) == 2e-4, "epoch 1 must be exactly 2e-4");
  expect(train::lr_at_epoch(175, 2e-4, cfg) == 1e-4, "epoch 175 must be exactly 1e-4");
  expect(train::lr_at_epoch(200, 2e-4, cfg) == 0.0, "epoch 200 must be exactly 0");
}

// ---- criterion 7: training smoke + temporal sensitivity ---------------------

void criterion_training() {
  phantom::PhantomConfig pc;
  pc.profile = {{15, 4}};
  pc.side = 32;
  pc.min_lesions = 1;
  pc.max_lesions = 1;
  pc.interval_jitter_days = 0;  // lags land exactly on whole years
  pc.kind_weights = {1.0, 0.0, 0.0};
  pc.seed = 7;

  const auto manifest = phantom::generate_cohort(pc, (g_tmp / "training").string());
  const auto records = data::load_manifest(manifest);
  const auto pairs = data::build_sample_pairs(records);

  std::vector<data::Sample> train_set, val_set;  // P11..P15 held out
  for (const auto& p : pairs) {
    auto s = data::load_sample(p, {0, 0, 0});
    (p.source.participant_id >= "P11" ? val_set : train_set).push_back(std::move(s));
  }
  expect(train_set.size() == 60 && val_set.size() == 30, "unexpected split sizes");

  nn::GeneratorConfig gc;
  gc.levels = 3;
  gc.base_channels = 16;
  gc.patch_side = 16;
  nn::DiscriminatorConfig dc;
  dc.base_channels = 16;
  dc.stride2_blocks = 2;
  dc.stride1_blocks = 1;

  std::map<train::Arch, train::ModelBundle> kept;
  for (auto arch : {train::Arch::unet, train::Arch::gt_gan, train::Arch::dt_gan, train::Arch::acgan}) {
    train::TrainConfig tc;
    tc.arch = arch;
    tc.batch_size = 3;
    tc.epochs_const = 2;
    tc.epochs_decay = 0;
    tc.lr_g = 2e-4;
    tc.lr_d = 2e-4;
    tc.max_steps = 200;
    tc.seed = 11;

    auto mb = train::build_bundle(tc, gc, dc);
    const auto res = train::fit(mb, train_set, val_set, tc, {16, 16, 16});
    std::cerr << "  [7] " << train::arch_name(arch) << ": val L1 " << res.initial_val_l1 << " -> "
              << res.best_val_l1 << " in " << res.total_steps << " steps\n";
    expect(res.total_steps == 200, "step cap not respected");
    expect(res.best_val_l1 <= 0.8 * res.initial_val_l1,
           train::arch_name(arch) + " validation L1 dropped less than 20%");
    if (arch == train::Arch::gt_gan || arch == train::Arch::acgan) kept.emplace(arch, std::move(mb));
  }

  // queried a year vs three years out, the lesion must come out larger
  const auto mask = phantom::brain_mask(pc);
  for (auto& [arch, mb] : kept) {
    int grew = 0;
    for (int pi = 11; pi <= 15; ++pi) {
      char pid[8];
      std::snprintf(pid, sizeof(pid), "P%02d", pi);
      const data::StudyRecord* baseline = nullptr;
      for (const auto& r : records)
        if (r.participant_id == pid && r.timepoint_index == 1) baseline = &r;
      expect(baseline != nullptr, "baseline record missing");
      std::array<Volume, 4> sources;
      for (size_t m = 0; m < 4; ++m) sources[m] = data::load_volume(baseline->path(data::kModalities[m]));

      const Volume at1 = train::predict_volume(mb.generator, sources, 365, {0, 0, 0}, {16, 16, 16});
      const Volume at3 = train::predict_volume(mb.generator, sources, 1095, {0, 0, 0}, {16, 16, 16});
      const int64_t v1 = phantom::lesion_volume(at1, 0.35, mask);
      const int64_t v3 = phantom::lesion_volume(at3, 0.35, mask);
      std::cerr << "  [7] " << train::arch_name(arch) << " " << pid << ": lesion " << v1 << " @1y, " << v3
                << " @3y\n";
      if (v3 > v1) ++grew;
    }
    expect(grew >= 4, train::arch_name(arch) + ": lesion grew for only " + std::to_string(grew) +
                          "/5 held-out participants");
  }
}

// ---- criterion 8: discriminator variant contracts ---------------------------

void criterion_variants() {
  nn::DiscriminatorConfig dc;
  dc.base_channels = 2;
  dc.stride2_blocks = 2;
  dc.stride1_blocks = 1;
  dc.patch_side = 8;

  Rng rng(31);
  auto src = make_leaf(random_tensor({2, 4, 8, 8, 8}, rng, -1.0, 1.0));
  auto cand = make_leaf(random_tensor({2, 1, 8, 8, 8}, rng, -1.0, 1.0));
  const std::vector<double> lags{1.0, 2.0};

  Rng r1(7);
  nn::Discriminator plain(dc, r1);
  plain.forward(src, cand);
  try {
    plain.forward(src, cand, lags);
    expect(false, "plain variant accepted a time lag");
  } catch (const std::invalid_argument&) {
  }

  auto tc = dc;
  tc.variant = nn::DiscVariant::time_conditioned;
  Rng r2(7);
  nn::Discriminator timed(tc, r2);
  timed.forward(src, cand, lags);
  try {
    timed.forward(src, cand);
    expect(false, "time-conditioned variant ran without a lag");
  } catch (const std::invalid_argument&) {
  }

  auto ac = dc;
  ac.variant = nn::DiscVariant::acgan;
  ac.n_classes = 3;
  Rng r3(7);
  nn::Discriminator acgan(ac, r3);
  const auto out = acgan.forward(src, cand);
  expect(out.class_posterior != nullptr, "acgan produced no class posterior");
  expect(out.class_posterior->value.dim(0) == 2 && out.class_posterior->value.dim(1) == 3,
         "acgan posterior shape off");
  for (int64_t n = 0; n < 2; ++n) {
    double row = 0.0;
    for (int64_t c = 0; c < 3; ++c) row += out.class_posterior->value[n * 3 + c];
    expect_near(row, 1.0, 1e-6, "acgan posterior row sum");
  }
  try {
    acgan.forward(src, cand, lags);
    expect(false, "acgan variant accepted a time lag");
  } catch (const std::invalid_argument&) {
  }

  nn::DiscriminatorConfig paper;  // 128^3, 3 stride-2 + 2 stride-1 blocks
  expect(nn::score_grid_side(paper) == 14, "score grid side at 128^3 must be 14");
}

// ---- criterion 9: determinism -----------------------------------------------

void criterion_determinism() {
  phantom::PhantomConfig pc;
  pc.profile = {{2, 2}};
  pc.side = 24;
  pc.brain_semi_axes = {9.0, 9.0, 9.0};
  pc.min_lesions = 1;
  pc.max_lesions = 1;
  pc.interval_jitter_days = 0;
  pc.seed = 5;

  const auto manifest = phantom::generate_cohort(pc, (g_tmp / "determinism").string());
  const auto records = data::load_manifest(manifest);
  std::vector<data::Sample> samples;
  for (const auto& p : data::build_sample_pairs(records)) samples.push_back(data::load_sample(p, {0, 0, 0}));

  config::RunConfig rc;
  config::apply_preset(rc, "desk_scale");
  rc.model.arch = "gt_gan";
  train::TrainConfig tc = rc.resolved_train();
  tc.epochs_const = 2;
  tc.epochs_decay = 1;
  tc.seed = 31;

  auto run = [&](const std::string& name) {
    auto mb = train::build_bundle(tc, rc.generator_config(), rc.discriminator_config());
    train::FitOptions opts;
    opts.out_dir = (g_tmp / "determinism" / name).string();
    opts.run_name = "det";
    auto res = train::fit(mb, samples, samples, tc, rc.data.patch_shape, opts);
    return std::make_pair(std::move(mb), std::move(res));
  };

  auto [mb1, res1] = run("a");
  auto [mb2, res2] = run("b");

  expect(res1.log.size() == 3 && res2.log.size() == 3, "expected three epochs per run");
  expect(res1.initial_val_l1 == res2.initial_val_l1, "initial validation L1 differs between runs");
  for (size_t e = 0; e < res1.log.size(); ++e) {
    const auto& x = res1.log[e];
    const auto& y = res2.log[e];
    expect(x.epoch == y.epoch && x.lr_g == y.lr_g && x.lr_d == y.lr_d && x.steps == y.steps,
           "epoch bookkeeping differs between runs");
    expect(x.val_l1 == y.val_l1, "validation L1 differs at epoch " + std::to_string(x.epoch));
    expect(x.train_means == y.train_means, "training metrics differ at epoch " + std::to_string(x.epoch));
  }
  std::ifstream la(g_tmp / "determinism/a/det_log.jsonl"), lb(g_tmp / "determinism/b/det_log.jsonl");
  std::stringstream sa, sb;
  sa << la.rdbuf();
  sb << lb.rdbuf();
  expect(!sa.str().empty() && sa.str() == sb.str(), "training logs differ on disk");

  // checkpoint restore reproduces the forward pass bit for bit
  auto ckpt = nn::load_checkpoint((g_tmp / "determinism/a/det_final.g.ckpt").string());
  auto other = tc;
  other.seed = 99;
  auto mb3 = train::build_bundle(other, rc.generator_config(), rc.discriminator_config());
  auto reg = mb3.generator_params();
  nn::restore_params(ckpt, reg);

  mb1.train(false);
  mb3.train(false);
  Rng rng(61);
  nn::NoGradGuard guard;
  auto x = make_leaf(random_tensor({1, 4, 24, 24, 24}, rng, -1.0, 1.0));
  const auto y1 = mb1.generator.forward(x, std::vector<double>{2.0});
  const auto y3 = mb3.generator.forward(x, std::vector<double>{2.0});
  for (int64_t i = 0; i < y1->value.numel(); ++i)
    expect(y1->value[i] == y3->value[i], "restored forward output differs at voxel " + std::to_string(i));
}

int run_criterion(int n, const std::function<void()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body();
    const double secs =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count() /
        1000.0;
    std::printf("criterion %d: PASS (%.1fs)\n", n, secs);
    std::fflush(stdout);
    return 0;
  } catch (const std::exception& e) {
    std::printf("criterion %d: FAIL (%s)\n", n, e.what());
    std::fflush(stdout);
    return 1;
  }
}

}  // namespace

int main() {
  g_tmp = fs::absolute("acceptance_tmp");
  std::error_code ec;
  fs::remove_all(g_tmp, ec);
  fs::create_directories(g_tmp);

  int failures = 0;
  failures += run_criterion(1, criterion_patches);
  failures += run_criterion(2, criterion_pairing);
  failures += run_criterion(3, criterion_metrics);
  failures += run_criterion(4, criterion_losses);
  failures += run_criterion(5, criterion_time_gradient);
  failures += run_criterion(6, criterion_schedule);
  failures += run_criterion(7, criterion_training);
  failures += run_criterion(8, criterion_variants);
  failures += run_criterion(9, criterion_determinism);
  return failures == 0 ? 0 : 1;
}
