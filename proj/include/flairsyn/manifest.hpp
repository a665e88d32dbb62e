#pragma once

#include <map>
#include <string>
#include <vector>

namespace flairsyn::data {

inline const std::vector<std::string> kModalities = {"MPRAGE", "T2", "PD", "FLAIR"};

// One scanning session of one participant.
struct StudyRecord {
  std::string participant_id;
  int timepoint_index = 0;      // 1-based within participant
  int days_from_baseline = 0;   // 0 at the first session
  std::map<std::string, std::string> modality_paths;

  const std::string& path(const std::string& modality) const;
};

// Reads a manifest CSV with header
//   participant_id,timepoint_index,days_from_baseline,mprage_path,t2_path,pd_path,flair_path
// Relative volume paths are resolved against the manifest's directory.
// Records come back grouped by participant and sorted by timepoint_index.
std::vector<StudyRecord> load_manifest(const std::string& path);

void save_manifest(const std::vector<StudyRecord>& records, const std::string& path);

}  // namespace flairsyn::data
