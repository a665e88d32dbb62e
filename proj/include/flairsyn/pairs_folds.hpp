#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flairsyn/manifest.hpp"
#include "flairsyn/volume.hpp"

namespace flairsyn::data {

// An ordered (earlier -> later) pair of sessions from one participant.
struct SamplePair {
  StudyRecord source;
  StudyRecord target;
  int time_lag_days = 0;
};

// A fully loaded training/evaluation sample: the 4 source modalities
// (MPRAGE, T2, PD, FLAIR order), the later FLAIR, and the lag between them.
struct Sample {
  std::string id;              // e.g. "P01_tp1_to_tp3"
  std::string participant_id;
  std::array<Volume, 4> sources;
  Volume target;
  int time_lag_days = 0;
  std::optional<int> class_label;
};

std::string pair_id(const SamplePair& pair);

// All n(n-1)/2 forward-in-time pairs per participant. Participants with a
// single session contribute nothing; a note lands in `warnings` if given.
std::vector<SamplePair> build_sample_pairs(const std::vector<StudyRecord>& records,
                                           std::vector<std::string>* warnings = nullptr);

struct FoldSplit {
  std::map<std::string, int> assignment;  // participant_id -> fold in 0..k-1
  int k = 5;

  std::vector<std::string> participants_in_fold(int fold) const;
  void validate() const;
};

struct ParticipantSummary {
  std::string participant_id;
  int timepoint_count = 0;
};

std::vector<ParticipantSummary> summarize_participants(const std::vector<StudyRecord>& records);

// Greedy balanced assignment: participants go to the fold with the smallest
// running timepoint total. Deterministic under seed.
FoldSplit assign_folds(const std::vector<ParticipantSummary>& participants, int k, uint64_t seed);

// JSON override: {"P01": 0, "P02": 1, ...}. k is inferred as max fold + 1
// unless given; every fold in 0..k-1 must be non-empty.
FoldSplit load_fold_override(const std::string& json_path, int k = 0);

// Loads, crops and normalizes all five volumes of a pair. A crop axis of 0
// keeps the full extent on that axis. crop_start, when given, overrides the
// centered window.
Sample load_sample(const SamplePair& pair, const std::array<int64_t, 3>& crop_shape,
                   const std::optional<std::array<int64_t, 3>>& crop_start = std::nullopt);

}  // namespace flairsyn::data
