#include "flairsyn/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace flairsyn::data {

namespace {

const std::string kHeader =
    "participant_id,timepoint_index,days_from_baseline,mprage_path,t2_path,pd_path,flair_path";

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

int parse_int_field(const std::string& s, const std::string& what, int row) {
  size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty())
    throw std::runtime_error("manifest row " + std::to_string(row) + ": malformed " + what + " '" + s + "'");
  return v;
}

std::string resolve_against(const fs::path& dir, const std::string& p) {
  fs::path q(p);
  if (q.is_absolute()) return q.lexically_normal().string();
  return (dir / q).lexically_normal().string();
}

}  // namespace

const std::string& StudyRecord::path(const std::string& modality) const {
  auto it = modality_paths.find(modality);
  if (it == modality_paths.end())
    throw std::runtime_error("record " + participant_id + " tp" + std::to_string(timepoint_index) +
                             ": missing modality " + modality);
  return it->second;
}

std::vector<StudyRecord> load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest " + path);
  const fs::path dir = fs::path(path).parent_path();

  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("manifest " + path + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader)
    throw std::runtime_error("manifest " + path + ": unexpected header '" + line + "'");

  std::vector<StudyRecord> records;
  std::set<std::pair<std::string, int>> seen;
  int row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_row(line);
    if (fields.size() != 7)
      throw std::runtime_error("manifest row " + std::to_string(row) + ": expected 7 fields, got " +
                               std::to_string(fields.size()));
    StudyRecord r;
    r.participant_id = fields[0];
    if (r.participant_id.empty())
      throw std::runtime_error("manifest row " + std::to_string(row) + ": empty participant_id");
    r.timepoint_index = parse_int_field(fields[1], "timepoint_index", row);
    r.days_from_baseline = parse_int_field(fields[2], "days_from_baseline", row);
    if (r.timepoint_index < 1)
      throw std::runtime_error("manifest row " + std::to_string(row) + ": timepoint_index must be >= 1");
    if (r.days_from_baseline < 0)
      throw std::runtime_error("manifest row " + std::to_string(row) + ": negative days_from_baseline");
    for (size_t m = 0; m < kModalities.size(); ++m) {
      if (fields[3 + m].empty())
        throw std::runtime_error("manifest row " + std::to_string(row) + ": empty " + kModalities[m] + " path");
      r.modality_paths[kModalities[m]] = resolve_against(dir, fields[3 + m]);
    }
    if (!seen.insert({r.participant_id, r.timepoint_index}).second)
      throw std::runtime_error("manifest row " + std::to_string(row) + ": duplicate (participant, timepoint) (" +
                               r.participant_id + ", " + std::to_string(r.timepoint_index) + ")");
    records.push_back(std::move(r));
  }

  std::stable_sort(records.begin(), records.end(), [](const StudyRecord& a, const StudyRecord& b) {
    if (a.participant_id != b.participant_id) return a.participant_id < b.participant_id;
    return a.timepoint_index < b.timepoint_index;
  });

  for (size_t i = 1; i < records.size(); ++i) {
    const auto& prev = records[i - 1];
    const auto& cur = records[i];
    if (prev.participant_id == cur.participant_id && cur.days_from_baseline <= prev.days_from_baseline)
      throw std::runtime_error("participant " + cur.participant_id + " timepoint " +
                               std::to_string(cur.timepoint_index) + ": non-increasing days_from_baseline (" +
                               std::to_string(prev.days_from_baseline) + " -> " +
                               std::to_string(cur.days_from_baseline) + ")");
  }
  return records;
}

void save_manifest(const std::vector<StudyRecord>& records, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << kHeader << "\n";
  for (const auto& r : records) {
    f << r.participant_id << "," << r.timepoint_index << "," << r.days_from_baseline;
    for (const auto& m : kModalities) f << "," << r.path(m);
    f << "\n";
  }
  if (!f) throw std::runtime_error("write failure in " + path);
}

}  // namespace flairsyn::data
