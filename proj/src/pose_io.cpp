#include "asgl/pose_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "asgl/error.hpp"

namespace asgl {

using nlohmann::json;

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::query: return "query";
    case Split::gallery: return "gallery";
  }
  return "unknown";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "query") return Split::query;
  if (name == "gallery") return Split::gallery;
  raise(ErrorCode::data, "unknown split \"" + name +
                             "\"; expected train, query, or gallery");
}

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::file, "cannot open " + path + " for reading");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::file, "cannot open " + path + " for writing");
  return out;
}

[[noreturn]] void line_error(const std::string& path, std::size_t line,
                             const std::string& what) {
  raise(ErrorCode::ingest,
        path + " line " + std::to_string(line) + ": " + what);
}

json parse_line(const std::string& path, std::size_t line,
                const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) line_error(path, line, "invalid JSON");
  if (!j.is_object()) line_error(path, line, "not a JSON object");
  return j;
}

std::string get_string(const std::string& path, std::size_t line,
                       const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    line_error(path, line, std::string("missing string field \"") + key +
                               "\"");
  }
  return j[key].get<std::string>();
}

std::string get_id(const std::string& path, std::size_t line, const json& j,
                   const char* key) {
  std::string v = get_string(path, line, j, key);
  if (v.empty()) {
    line_error(path, line, std::string("field \"") + key + "\" is empty");
  }
  return v;
}

// Iterates non-empty lines of a JSONL file.
template <typename Fn>
void for_each_record(const std::string& path, Fn&& fn) {
  auto in = open_input(path);
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty() ||
        text.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    fn(line, parse_line(path, line, text));
  }
}

}  // namespace

std::vector<RawPoseSequence> read_keypoints_jsonl(const std::string& path) {
  std::vector<RawPoseSequence> out;
  for_each_record(path, [&](std::size_t line, const json& j) {
    RawPoseSequence seq;
    seq.tracklet_id = get_id(path, line, j, "tracklet_id");
    seq.person_id = get_id(path, line, j, "person_id");
    seq.clothing_id = get_id(path, line, j, "clothing_id");
    seq.camera_id = get_id(path, line, j, "camera_id");
    if (!j.contains("frame_size") || !j["frame_size"].is_array() ||
        j["frame_size"].size() != 2 || !j["frame_size"][0].is_number() ||
        !j["frame_size"][1].is_number()) {
      line_error(path, line, "frame_size must be [height, width]");
    }
    seq.frame_h = j["frame_size"][0].get<double>();
    seq.frame_w = j["frame_size"][1].get<double>();
    if (!(seq.frame_h > 0.0) || !(seq.frame_w > 0.0)) {
      line_error(path, line, "frame_size entries must be positive");
    }
    if (!j.contains("frames") || !j["frames"].is_array() ||
        j["frames"].empty()) {
      line_error(path, line, "frames must be a non-empty array");
    }
    const auto& frames = j["frames"];
    seq.points.reserve(frames.size() * kRawKeypoints);
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const auto& frame = frames[f];
      if (!frame.is_array() || frame.size() != kRawKeypoints) {
        line_error(path, line,
                   "frame " + std::to_string(f) + " has " +
                       std::to_string(frame.is_array() ? frame.size() : 0) +
                       " keypoints, expected " +
                       std::to_string(kRawKeypoints));
      }
      for (std::size_t k = 0; k < kRawKeypoints; ++k) {
        const auto& kp = frame[k];
        if (!kp.is_array() || kp.size() != 3 || !kp[0].is_number() ||
            !kp[1].is_number() || !kp[2].is_number()) {
          line_error(path, line, "frame " + std::to_string(f) + " keypoint " +
                                     std::to_string(k) +
                                     " is not an [x, y, z] triple");
        }
        Vec3 v{kp[0].get<double>(), kp[1].get<double>(), kp[2].get<double>()};
        for (double c : v) {
          if (!std::isfinite(c)) {
            line_error(path, line, "non-finite coordinate in frame " +
                                       std::to_string(f));
          }
        }
        seq.points.push_back(v);
      }
    }
    out.push_back(std::move(seq));
  });
  return out;
}

void write_keypoints_jsonl(const std::string& path,
                           const std::vector<RawPoseSequence>& sequences) {
  auto out = open_output(path);
  for (const auto& seq : sequences) {
    json frames = json::array();
    const std::size_t n = seq.frames();
    for (std::size_t f = 0; f < n; ++f) {
      json frame = json::array();
      for (std::size_t k = 0; k < kRawKeypoints; ++k) {
        const Vec3& v = seq.point(f, k);
        frame.push_back(json::array({v[0], v[1], v[2]}));
      }
      frames.push_back(std::move(frame));
    }
    json j{{"tracklet_id", seq.tracklet_id},
           {"person_id", seq.person_id},
           {"clothing_id", seq.clothing_id},
           {"camera_id", seq.camera_id},
           {"frame_size", json::array({seq.frame_h, seq.frame_w})},
           {"frames", std::move(frames)}};
    out << j.dump() << "\n";
  }
  if (!out) raise(ErrorCode::file, "error while writing " + path);
}

std::map<std::string, Split> read_manifest_jsonl(const std::string& path) {
  std::map<std::string, Split> out;
  for_each_record(path, [&](std::size_t line, const json& j) {
    const std::string id = get_id(path, line, j, "tracklet_id");
    const std::string split = get_string(path, line, j, "split");
    if (out.count(id)) {
      raise(ErrorCode::data, path + " line " + std::to_string(line) +
                                 ": duplicate tracklet \"" + id + "\"");
    }
    out.emplace(id, parse_split(split));
  });
  return out;
}

void write_manifest_jsonl(
    const std::string& path,
    const std::vector<std::pair<std::string, Split>>& entries) {
  auto out = open_output(path);
  for (const auto& [id, split] : entries) {
    json j{{"tracklet_id", id}, {"split", split_name(split)}};
    out << j.dump() << "\n";
  }
  if (!out) raise(ErrorCode::file, "error while writing " + path);
}

std::map<std::string, std::vector<double>> read_appearance_jsonl(
    const std::string& path) {
  std::map<std::string, std::vector<double>> out;
  std::size_t dim = 0;
  for_each_record(path, [&](std::size_t line, const json& j) {
    const std::string id = get_id(path, line, j, "tracklet_id");
    if (!j.contains("appearance") || !j["appearance"].is_array() ||
        j["appearance"].empty()) {
      line_error(path, line, "appearance must be a non-empty array");
    }
    std::vector<double> vec;
    vec.reserve(j["appearance"].size());
    for (const auto& e : j["appearance"]) {
      if (!e.is_number()) {
        line_error(path, line, "appearance entries must be numbers");
      }
      const double v = e.get<double>();
      if (!std::isfinite(v)) {
        line_error(path, line, "non-finite appearance entry");
      }
      vec.push_back(v);
    }
    if (dim == 0) {
      dim = vec.size();
    } else if (vec.size() != dim) {
      raise(ErrorCode::data, path + " line " + std::to_string(line) +
                                 ": appearance dimension " +
                                 std::to_string(vec.size()) +
                                 " differs from earlier " +
                                 std::to_string(dim));
    }
    if (out.count(id)) {
      raise(ErrorCode::data, path + " line " + std::to_string(line) +
                                 ": duplicate tracklet \"" + id + "\"");
    }
    out.emplace(id, std::move(vec));
  });
  return out;
}

void write_appearance_jsonl(
    const std::string& path,
    const std::vector<std::pair<std::string, std::vector<double>>>& entries) {
  auto out = open_output(path);
  for (const auto& [id, vec] : entries) {
    json j{{"tracklet_id", id}, {"appearance", vec}};
    out << j.dump() << "\n";
  }
  if (!out) raise(ErrorCode::file, "error while writing " + path);
}

namespace {

constexpr char kStoreMagic[8] = {'A', 'S', 'G', 'L', 'C', 'L', 'P', '1'};

void put_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t get_u64(std::ifstream& in, const std::string& path) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) raise(ErrorCode::ingest, path + ": truncated store header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void write_clip_store(const std::string& path,
                      const std::vector<ProcessedTracklet>& tracklets) {
  json dir = json::array();
  for (const auto& t : tracklets) {
    dir.push_back(json{{"tracklet_id", t.tracklet_id},
                       {"person_id", t.person_id},
                       {"clothing_id", t.clothing_id},
                       {"camera_id", t.camera_id},
                       {"frames", t.frames}});
  }
  const std::string header = json{{"tracklets", std::move(dir)}}.dump();
  auto out = open_output(path);
  out.write(kStoreMagic, sizeof(kStoreMagic));
  put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& t : tracklets) {
    static_assert(sizeof(double) == 8);
    out.write(reinterpret_cast<const char*>(t.joints.data()),
              static_cast<std::streamsize>(t.joints.size() * sizeof(double)));
  }
  if (!out) raise(ErrorCode::file, "error while writing " + path);
}

bool is_clip_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[8];
  in.read(magic, 8);
  return in && std::memcmp(magic, kStoreMagic, 8) == 0;
}

std::vector<ProcessedTracklet> read_clip_store(const std::string& path) {
  auto in = open_input(path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kStoreMagic, 8) != 0) {
    raise(ErrorCode::ingest, path + ": not a clip store");
  }
  const std::uint64_t header_len = get_u64(in, path);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) raise(ErrorCode::ingest, path + ": truncated store header");
  json j = json::parse(header, nullptr, false);
  if (j.is_discarded() || !j.contains("tracklets") ||
      !j["tracklets"].is_array()) {
    raise(ErrorCode::ingest, path + ": malformed store header");
  }
  std::vector<ProcessedTracklet> out;
  for (const auto& e : j["tracklets"]) {
    ProcessedTracklet t;
    try {
      t.tracklet_id = e.at("tracklet_id").get<std::string>();
      t.person_id = e.at("person_id").get<std::string>();
      t.clothing_id = e.at("clothing_id").get<std::string>();
      t.camera_id = e.at("camera_id").get<std::string>();
      t.frames = e.at("frames").get<std::size_t>();
    } catch (const json::exception& ex) {
      raise(ErrorCode::ingest,
            path + ": malformed store header (" + ex.what() + ")");
    }
    if (t.frames == 0) {
      raise(ErrorCode::ingest, path + ": tracklet \"" + t.tracklet_id +
                                   "\" declares zero frames");
    }
    t.joints.resize(t.frames * kBodyJoints * 3);
    in.read(reinterpret_cast<char*>(t.joints.data()),
            static_cast<std::streamsize>(t.joints.size() * sizeof(double)));
    if (!in) raise(ErrorCode::ingest, path + ": truncated tracklet data");
    for (double v : t.joints) {
      if (!std::isfinite(v)) {
        raise(ErrorCode::ingest, path + ": non-finite value in tracklet \"" +
                                     t.tracklet_id + "\"");
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::size_t> ClipDataset::split_indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == s) out.push_back(i);
  }
  return out;
}

std::vector<std::string> ClipDataset::train_person_ids() const {
  std::set<std::string> ids;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == Split::train) ids.insert(tracklets[i].person_id);
  }
  return std::vector<std::string>(ids.begin(), ids.end());
}

ClipDataset load_dataset(const std::string& keypoints_path,
                         const std::string& manifest_path,
                         const std::string& appearance_path) {
  std::vector<ProcessedTracklet> processed;
  if (is_clip_store(keypoints_path)) {
    processed = read_clip_store(keypoints_path);
  } else {
    for (const auto& raw : read_keypoints_jsonl(keypoints_path)) {
      processed.push_back(process_sequence(raw));
    }
  }
  const auto manifest = read_manifest_jsonl(manifest_path);

  ClipDataset ds;
  std::set<std::string> seen;
  for (auto& t : processed) {
    const auto it = manifest.find(t.tracklet_id);
    if (it == manifest.end()) {
      ++ds.skipped_records;
      continue;
    }
    seen.insert(t.tracklet_id);
    ds.splits.push_back(it->second);
    ds.tracklets.push_back(std::move(t));
  }
  for (const auto& [id, split] : manifest) {
    (void)split;
    if (!seen.count(id)) {
      raise(ErrorCode::data,
            "manifest tracklet \"" + id + "\" has no keypoints");
    }
  }

  if (!appearance_path.empty()) {
    ds.appearance = read_appearance_jsonl(appearance_path);
    for (const auto& t : ds.tracklets) {
      const auto it = ds.appearance.find(t.tracklet_id);
      if (it == ds.appearance.end()) {
        raise(ErrorCode::data, "tracklet \"" + t.tracklet_id +
                                   "\" has no appearance vector");
      }
      ds.appearance_dim = it->second.size();
    }
  }
  return ds;
}

}  // namespace asgl
