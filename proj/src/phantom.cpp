#include "flairsyn/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "flairsyn/rng.hpp"
#include "flairsyn/volume_io.hpp"

namespace flairsyn::phantom {

namespace {

constexpr uint64_t kTagParticipant = 0x44;
constexpr uint64_t kTagNoise = 0x55;

// Soft sphere edge so the thresholded radius tracks the analytic one.
constexpr double kEdgeWidth = 0.5;

double smooth_step(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string participant_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "P%02d", index + 1);
  return buf;
}

double brain_rho2(const PhantomConfig& cfg, double x, double y, double z) {
  const double cx = (static_cast<double>(cfg.side) - 1.0) / 2.0;
  const double dx = (x - cx) / cfg.brain_semi_axes[0];
  const double dy = (y - cx) / cfg.brain_semi_axes[1];
  const double dz = (z - cx) / cfg.brain_semi_axes[2];
  return dx * dx + dy * dy + dz * dz;
}

LesionKind draw_kind(Rng& rng, const std::array<double, 3>& w) {
  const double total = w[0] + w[1] + w[2];
  if (total <= 0.0) throw std::invalid_argument("phantom: lesion kind weights sum to zero");
  const double u = rng.uniform(0.0, total);
  if (u < w[0]) return LesionKind::growth;
  if (u < w[0] + w[1]) return LesionKind::remission;
  return LesionKind::atrophy;
}

}  // namespace

std::string lesion_kind_name(LesionKind k) {
  switch (k) {
    case LesionKind::growth: return "growth";
    case LesionKind::remission: return "remission";
    case LesionKind::atrophy: return "atrophy";
  }
  throw std::invalid_argument("unknown lesion kind");
}

double LesionSpec::radius_at(double years) const { return std::max(0.0, r0 + rate * years); }

int PhantomConfig::total_participants() const {
  int n = 0;
  for (const auto& e : profile) n += e.participants;
  return n;
}

std::array<std::array<double, 2>, 4> modality_affines() {
  return {{{1.00, 0.05}, {0.70, 0.10}, {0.85, 0.08}, {0.90, 0.05}}};
}

std::vector<ParticipantTruth> cohort_truth(const PhantomConfig& cfg) {
  if (cfg.side < 8) throw std::invalid_argument("phantom: side must be at least 8");
  if (cfg.min_lesions < 1 || cfg.max_lesions < cfg.min_lesions)
    throw std::invalid_argument("phantom: bad lesion count range");
  if (cfg.noise_amplitude < 0.0) throw std::invalid_argument("phantom: negative noise amplitude");
  for (const auto& e : cfg.profile)
    if (e.participants < 0 || e.timepoints < 2)
      throw std::invalid_argument("phantom: each profile entry needs >= 2 timepoints");

  const double semi_min = std::min({cfg.brain_semi_axes[0], cfg.brain_semi_axes[1], cfg.brain_semi_axes[2]});
  const double center_mid = (static_cast<double>(cfg.side) - 1.0) / 2.0;

  std::vector<ParticipantTruth> cohort;
  int index = 0;
  for (const auto& entry : cfg.profile) {
    for (int p = 0; p < entry.participants; ++p, ++index) {
      Rng rng(derive_seed(cfg.seed, kTagParticipant, static_cast<uint64_t>(index)));
      ParticipantTruth truth;
      truth.participant_id = participant_name(index);

      truth.days.push_back(0);
      for (int t = 1; t < entry.timepoints; ++t) {
        const int jitter = static_cast<int>(
            rng.uniform_int(-cfg.interval_jitter_days, cfg.interval_jitter_days));
        truth.days.push_back(truth.days.back() + cfg.interval_days + jitter);
      }
      const double horizon_years = truth.days.back() / 365.0;

      const int n_lesions = static_cast<int>(rng.uniform_int(cfg.min_lesions, cfg.max_lesions));
      for (int l = 0; l < n_lesions; ++l) {
        LesionSpec spec;
        spec.kind = draw_kind(rng, cfg.kind_weights);
        spec.r0 = rng.uniform(2.5, 3.5);
        switch (spec.kind) {
          case LesionKind::growth: spec.rate = rng.uniform(1.2, 1.8); break;
          case LesionKind::remission: spec.rate = rng.uniform(-1.0, -0.5); break;
          case LesionKind::atrophy: spec.rate = rng.uniform(-0.35, -0.15); break;
        }
        for (int axis = 0; axis < 3; ++axis) spec.center[axis] = center_mid + rng.uniform(-2.0, 2.0);
        const double r_max = std::max(spec.radius_at(0.0), spec.radius_at(horizon_years));
        if (r_max + 2.0 + 1.0 > semi_min)
          throw std::runtime_error("phantom: lesion overflow, trajectory leaves the brain for " +
                                   truth.participant_id);
        truth.lesions.push_back(spec);
      }
      cohort.push_back(std::move(truth));
    }
  }
  return cohort;
}

data::Volume render_modality(const PhantomConfig& cfg, const ParticipantTruth& truth, int participant_index,
                             int timepoint_index, int modality_index) {
  if (modality_index < 0 || modality_index >= 4) throw std::invalid_argument("phantom: modality index out of range");
  if (timepoint_index < 0 || timepoint_index >= static_cast<int>(truth.days.size()))
    throw std::invalid_argument("phantom: timepoint index out of range");

  const double years = truth.days[static_cast<size_t>(timepoint_index)] / 365.0;
  const auto affine = modality_affines()[static_cast<size_t>(modality_index)];

  data::Volume v({cfg.side, cfg.side, cfg.side});
  Rng noise(derive_seed(cfg.seed, kTagNoise,
                                static_cast<uint64_t>(participant_index) * 1000 +
                                    static_cast<uint64_t>(timepoint_index),
                                static_cast<uint64_t>(modality_index)));

  for (int64_t z = 0; z < cfg.side; ++z)
    for (int64_t y = 0; y < cfg.side; ++y)
      for (int64_t x = 0; x < cfg.side; ++x) {
        const double rho2 = brain_rho2(cfg, static_cast<double>(x), static_cast<double>(y),
                                       static_cast<double>(z));
        double anatomy = 0.0;
        if (rho2 <= 1.0) anatomy = 0.4 + 0.2 * (1.0 - rho2);

        double lesion = 0.0;
        if (rho2 <= 1.0) {
          for (const auto& spec : truth.lesions) {
            const double r = spec.radius_at(years);
            if (r <= 0.0) continue;
            const double dx = static_cast<double>(x) - spec.center[0];
            const double dy = static_cast<double>(y) - spec.center[1];
            const double dz = static_cast<double>(z) - spec.center[2];
            const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
            lesion += spec.intensity_per_modality[static_cast<size_t>(modality_index)] *
                      smooth_step((r - d) / kEdgeWidth);
          }
        }

        v.at(x, y, z) = affine[0] * anatomy + affine[1] + lesion +
                        noise.uniform(-cfg.noise_amplitude, cfg.noise_amplitude);
      }
  v.refresh_intensity_range();
  return v;
}

std::string generate_cohort(const PhantomConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir))
    throw std::runtime_error("phantom: cannot create output directory " + out_dir);

  const auto cohort = cohort_truth(cfg);
  std::vector<data::StudyRecord> records;
  nlohmann::json truth_json = nlohmann::json::array();

  for (size_t p = 0; p < cohort.size(); ++p) {
    const auto& truth = cohort[p];
    nlohmann::json part;
    part["participant_id"] = truth.participant_id;
    part["days"] = truth.days;
    part["lesions"] = nlohmann::json::array();
    for (const auto& spec : truth.lesions) {
      part["lesions"].push_back({{"center", spec.center},
                                 {"r0", spec.r0},
                                 {"rate", spec.rate},
                                 {"kind", lesion_kind_name(spec.kind)},
                                 {"intensity_per_modality", spec.intensity_per_modality}});
    }
    truth_json.push_back(part);

    for (size_t t = 0; t < truth.days.size(); ++t) {
      data::StudyRecord rec;
      rec.participant_id = truth.participant_id;
      rec.timepoint_index = static_cast<int>(t) + 1;
      rec.days_from_baseline = truth.days[t];
      for (int m = 0; m < 4; ++m) {
        const std::string name =
            truth.participant_id + "_tp" + std::to_string(t + 1) + "_" + data::kModalities[static_cast<size_t>(m)] +
            ".nii.gz";
        const auto vol = render_modality(cfg, truth, static_cast<int>(p), static_cast<int>(t), m);
        data::save_volume(vol, (fs::path(out_dir) / name).string(), data::VoxelDType::float64);
        rec.modality_paths[data::kModalities[static_cast<size_t>(m)]] = name;
      }
      records.push_back(std::move(rec));
    }
  }

  const std::string manifest_path = (fs::path(out_dir) / "manifest.csv").string();
  data::save_manifest(records, manifest_path);

  std::ofstream truth_out(fs::path(out_dir) / "phantom_truth.json");
  truth_out << truth_json.dump(2) << "\n";
  return manifest_path;
}

data::Volume brain_mask(const PhantomConfig& cfg) {
  data::Volume mask({cfg.side, cfg.side, cfg.side});
  for (int64_t z = 0; z < cfg.side; ++z)
    for (int64_t y = 0; y < cfg.side; ++y)
      for (int64_t x = 0; x < cfg.side; ++x)
        mask.at(x, y, z) = brain_rho2(cfg, static_cast<double>(x), static_cast<double>(y),
                                      static_cast<double>(z)) <= 1.0
                               ? 1.0
                               : 0.0;
  mask.refresh_intensity_range();
  return mask;
}

int64_t lesion_volume(const data::Volume& v, double threshold, const data::Volume& mask) {
  if (v.shape != mask.shape) throw std::invalid_argument("lesion_volume: mask shape mismatch");
  int64_t count = 0;
  for (size_t i = 0; i < v.voxels.size(); ++i)
    if (mask.voxels[i] > 0.5 && v.voxels[i] > threshold) ++count;
  return count;
}

}  // namespace flairsyn::phantom
