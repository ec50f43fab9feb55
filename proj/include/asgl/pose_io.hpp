#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "asgl/pose.hpp"

namespace asgl {

enum class Split { train, query, gallery };

const char* split_name(Split s);
Split parse_split(const std::string& name);  // data error on unknown names

// Keypoint sequences, one JSON object per line:
//   {"tracklet_id": ..., "person_id": ..., "clothing_id": ...,
//    "camera_id": ..., "frame_size": [h, w], "frames": [[[x,y,z] * 33], ...]}
// Malformed records raise ingest errors naming the line; non-finite
// coordinates additionally name the frame.
std::vector<RawPoseSequence> read_keypoints_jsonl(const std::string& path);
void write_keypoints_jsonl(const std::string& path,
                           const std::vector<RawPoseSequence>& sequences);

// Manifest: {"tracklet_id": ..., "split": "train"|"query"|"gallery"}.
std::map<std::string, Split> read_manifest_jsonl(const std::string& path);
void write_manifest_jsonl(
    const std::string& path,
    const std::vector<std::pair<std::string, Split>>& entries);

// Appearance sidecar: {"tracklet_id": ..., "appearance": [floats]}.
// All vectors must share one dimension.
std::map<std::string, std::vector<double>> read_appearance_jsonl(
    const std::string& path);
void write_appearance_jsonl(
    const std::string& path,
    const std::vector<std::pair<std::string, std::vector<double>>>& entries);

// Binary store of processed tracklets: a JSON directory followed by raw
// little-endian doubles. Writing the same tracklets yields the same bytes.
void write_clip_store(const std::string& path,
                      const std::vector<ProcessedTracklet>& tracklets);
std::vector<ProcessedTracklet> read_clip_store(const std::string& path);
bool is_clip_store(const std::string& path);

// Everything training and evaluation need, assembled from the files above.
// The manifest decides membership: every manifest entry must have keypoints
// (data error otherwise); keypoint records missing from the manifest are
// counted in skipped_records and otherwise ignored.
struct ClipDataset {
  std::vector<ProcessedTracklet> tracklets;
  std::vector<Split> splits;  // parallel to tracklets
  std::map<std::string, std::vector<double>> appearance;
  std::size_t appearance_dim = 0;
  std::size_t skipped_records = 0;

  std::vector<std::size_t> split_indices(Split s) const;
  // Person ids of the train split, sorted; index = class label.
  std::vector<std::string> train_person_ids() const;
};

// keypoints_path may point at a keypoints JSONL or a processed clip store.
// appearance_path may be empty; with it set, every tracklet in the manifest
// must have an appearance vector.
ClipDataset load_dataset(const std::string& keypoints_path,
                         const std::string& manifest_path,
                         const std::string& appearance_path);

}  // namespace asgl
