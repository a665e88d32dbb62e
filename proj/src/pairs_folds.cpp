#include "flairsyn/pairs_folds.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "flairsyn/rng.hpp"
#include "flairsyn/volume_io.hpp"
#include "json.hpp"

namespace flairsyn::data {

std::vector<SamplePair> build_sample_pairs(const std::vector<StudyRecord>& records,
                                           std::vector<std::string>* warnings) {
  std::vector<SamplePair> pairs;
  size_t i = 0;
  while (i < records.size()) {
    size_t j = i;
    while (j < records.size() && records[j].participant_id == records[i].participant_id) ++j;
    const size_t n = j - i;
    if (n < 2 && warnings)
      warnings->push_back("participant " + records[i].participant_id +
                          " has a single timepoint and contributes no samples");
    for (size_t a = i; a < j; ++a)
      for (size_t b = a + 1; b < j; ++b) {
        SamplePair p;
        p.source = records[a];
        p.target = records[b];
        p.time_lag_days = records[b].days_from_baseline - records[a].days_from_baseline;
        pairs.push_back(std::move(p));
      }
    i = j;
  }
  return pairs;
}

std::vector<std::string> FoldSplit::participants_in_fold(int fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : assignment)
    if (f == fold) out.push_back(id);
  return out;
}

void FoldSplit::validate() const {
  if (k < 2) throw std::runtime_error("fold count must be at least 2");
  std::vector<int> counts(static_cast<size_t>(k), 0);
  for (const auto& [id, f] : assignment) {
    if (f < 0 || f >= k)
      throw std::runtime_error("participant " + id + " assigned to fold " + std::to_string(f) +
                               " outside 0.." + std::to_string(k - 1));
    ++counts[static_cast<size_t>(f)];
  }
  for (int f = 0; f < k; ++f)
    if (counts[static_cast<size_t>(f)] == 0)
      throw std::runtime_error("fold " + std::to_string(f) + " is empty");
}

std::vector<ParticipantSummary> summarize_participants(const std::vector<StudyRecord>& records) {
  std::vector<ParticipantSummary> out;
  for (const auto& r : records) {
    if (out.empty() || out.back().participant_id != r.participant_id)
      out.push_back({r.participant_id, 0});
    ++out.back().timepoint_count;
  }
  return out;
}

FoldSplit assign_folds(const std::vector<ParticipantSummary>& participants, int k, uint64_t seed) {
  if (k < 2) throw std::runtime_error("fold count must be at least 2");
  if (static_cast<int>(participants.size()) < k)
    throw std::runtime_error("need at least " + std::to_string(k) + " participants for " +
                             std::to_string(k) + " folds, got " + std::to_string(participants.size()));

  std::vector<size_t> order(participants.size());
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return participants[a].timepoint_count > participants[b].timepoint_count;
  });

  FoldSplit split;
  split.k = k;
  std::vector<int> fold_timepoints(static_cast<size_t>(k), 0);
  std::vector<int> fold_members(static_cast<size_t>(k), 0);
  for (size_t idx : order) {
    int best = 0;
    for (int f = 1; f < k; ++f) {
      const size_t fu = static_cast<size_t>(f), bu = static_cast<size_t>(best);
      if (fold_timepoints[fu] < fold_timepoints[bu] ||
          (fold_timepoints[fu] == fold_timepoints[bu] && fold_members[fu] < fold_members[bu]))
        best = f;
    }
    split.assignment[participants[idx].participant_id] = best;
    fold_timepoints[static_cast<size_t>(best)] += participants[idx].timepoint_count;
    fold_members[static_cast<size_t>(best)] += 1;
  }
  split.validate();
  return split;
}

FoldSplit load_fold_override(const std::string& json_path, int k) {
  std::ifstream f(json_path);
  if (!f) throw std::runtime_error("cannot open fold override " + json_path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("fold override " + json_path + ": " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("fold override " + json_path + ": expected a JSON object");

  FoldSplit split;
  int max_fold = -1;
  for (const auto& [id, val] : j.items()) {
    if (!val.is_number_integer())
      throw std::runtime_error("fold override " + json_path + ": fold for " + id + " must be an integer");
    const int fold = val.get<int>();
    if (fold < 0)
      throw std::runtime_error("fold override " + json_path + ": negative fold for " + id);
    split.assignment[id] = fold;
    max_fold = std::max(max_fold, fold);
  }
  split.k = k > 0 ? k : max_fold + 1;
  split.validate();
  return split;
}

std::string pair_id(const SamplePair& pair) {
  return pair.source.participant_id + "_tp" + std::to_string(pair.source.timepoint_index) + "_to_tp" +
         std::to_string(pair.target.timepoint_index);
}

Sample load_sample(const SamplePair& pair, const std::array<int64_t, 3>& crop_shape,
                   const std::optional<std::array<int64_t, 3>>& crop_start) {
  auto prepare = [&](const std::string& path) {
    Volume v = load_volume(path);
    std::array<int64_t, 3> target = crop_shape;
    for (int a = 0; a < 3; ++a)
      if (target[a] == 0) target[a] = v.shape[a];
    if (crop_start)
      v = crop_at(v, *crop_start, target);
    else
      v = center_crop(v, target);
    return normalize_to_signed_unit(v);
  };

  Sample s;
  s.id = pair_id(pair);
  s.participant_id = pair.source.participant_id;
  for (size_t m = 0; m < kModalities.size(); ++m) s.sources[m] = prepare(pair.source.path(kModalities[m]));
  s.target = prepare(pair.target.path("FLAIR"));
  s.time_lag_days = pair.time_lag_days;

  for (const auto& v : s.sources) {
    if (v.shape != s.target.shape)
      throw std::runtime_error("sample volumes disagree on shape for participant " +
                               pair.source.participant_id);
    if (v.spacing_mm != s.target.spacing_mm)
      throw std::runtime_error("sample volumes disagree on spacing for participant " +
                               pair.source.participant_id);
  }
  if (s.time_lag_days <= 0)
    throw std::runtime_error("sample for participant " + pair.source.participant_id +
                             " has non-positive time lag");
  return s;
}

}  // namespace flairsyn::data
