#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "flairsyn/manifest.hpp"
#include "flairsyn/volume.hpp"

namespace flairsyn::phantom {

enum class LesionKind { growth, remission, atrophy };

std::string lesion_kind_name(LesionKind k);

struct LesionSpec {
  std::array<double, 3> center{};        // voxel coordinates
  double r0 = 3.0;                       // radius at baseline, voxels
  double rate = 1.5;                     // radius change, voxels per year
  LesionKind kind = LesionKind::growth;
  std::array<double, 4> intensity_per_modality{-0.15, 0.25, 0.20, 0.45};  // MPRAGE, T2, PD, FLAIR

  double radius_at(double years) const;  // max(0, r0 + rate * years)
};

struct ProfileEntry {
  int participants = 0;
  int timepoints = 0;
};

struct PhantomConfig {
  std::vector<ProfileEntry> profile{{4, 4}};
  int64_t side = 32;
  std::array<double, 3> brain_semi_axes{13.0, 13.0, 13.0};
  double noise_amplitude = 0.02;
  int min_lesions = 1;
  int max_lesions = 2;
  int interval_days = 365;
  int interval_jitter_days = 30;
  std::array<double, 3> kind_weights{0.6, 0.25, 0.15};  // growth, remission, atrophy
  uint64_t seed = 1;

  int total_participants() const;
};

// The fixed per-modality affine applied to the anatomy map (scale, offset).
std::array<std::array<double, 2>, 4> modality_affines();

struct ParticipantTruth {
  std::string participant_id;
  std::vector<int> days;  // per timepoint, from baseline
  std::vector<LesionSpec> lesions;
};

/// Renders one modality volume for one participant at a day offset. Pure in
/// (cfg, truth, day, modality); the noise stream is derived from cfg.seed,
/// the participant and the timepoint so regeneration is bit-exact.
data::Volume render_modality(const PhantomConfig& cfg, const ParticipantTruth& truth, int participant_index,
                             int timepoint_index, int modality_index);

/// Writes all volumes plus manifest.csv and phantom_truth.json; returns the
/// manifest path.
std::string generate_cohort(const PhantomConfig& cfg, const std::string& out_dir);

/// Deterministic per-participant trajectories (same ones generate_cohort
/// renders), without touching the filesystem.
std::vector<ParticipantTruth> cohort_truth(const PhantomConfig& cfg);

/// 1 inside the brain ellipsoid, 0 outside.
data::Volume brain_mask(const PhantomConfig& cfg);

/// Voxels above threshold inside the mask.
int64_t lesion_volume(const data::Volume& v, double threshold, const data::Volume& mask);

}  // namespace flairsyn::phantom
