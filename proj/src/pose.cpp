#include "asgl/pose.hpp"

#include <cmath>
#include <string>

#include "asgl/error.hpp"

namespace asgl {

const std::array<JointSource, kBodyJoints>& reduction_table() {
  static const std::array<JointSource, kBodyJoints> table = {{
      {kHead, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}},
      {kNeck, {11, 12}},
      {kLeftShoulder, {11}},
      {kRightShoulder, {12}},
      {kLeftElbow, {13}},
      {kRightElbow, {14}},
      {kLeftWrist, {17, 19, 21}},
      {kRightWrist, {18, 20, 22}},
      {kLeftHip, {23}},
      {kRightHip, {24}},
      {kLeftKnee, {25}},
      {kRightKnee, {26}},
      {kLeftAnkle, {27, 29, 31}},
      {kRightAnkle, {28, 30, 32}},
  }};
  return table;
}

Frame14 reduce_keypoints(const Vec3* raw33) {
  Frame14 out{};
  for (const auto& src : reduction_table()) {
    Vec3 acc{0.0, 0.0, 0.0};
    for (int idx : src.raw_indices) {
      for (std::size_t a = 0; a < 3; ++a) {
        acc[a] += raw33[idx][a];
      }
    }
    const double inv = 1.0 / static_cast<double>(src.raw_indices.size());
    for (std::size_t a = 0; a < 3; ++a) acc[a] *= inv;
    out[static_cast<std::size_t>(src.joint)] = acc;
  }
  return out;
}

Vec3 root_offset(const Frame14& frame) {
  Vec3 delta;
  for (std::size_t a = 0; a < 3; ++a) {
    delta[a] = -0.5 * (frame[kLeftHip][a] + frame[kRightHip][a]);
  }
  return delta;
}

Frame14 translate(const Frame14& frame, const Vec3& delta) {
  Frame14 out;
  for (std::size_t j = 0; j < kBodyJoints; ++j) {
    for (std::size_t a = 0; a < 3; ++a) {
      out[j][a] = frame[j][a] + delta[a];
    }
  }
  return out;
}

Frame14 normalize_unified_view(const Frame14& frame, double frame_h,
                               double frame_w) {
  if (!(frame_h > 0.0) || !(frame_w > 0.0)) {
    raise(ErrorCode::data, "normalize_unified_view: frame size " +
                               std::to_string(frame_h) + "x" +
                               std::to_string(frame_w) +
                               " must be positive");
  }
  Frame14 out;
  for (std::size_t j = 0; j < kBodyJoints; ++j) {
    out[j][0] = frame[j][0] / frame_h;
    out[j][1] = frame[j][1] / frame_w;
    out[j][2] = frame[j][2] / (frame_h * frame_w);
  }
  return out;
}

Frame14 process_frame(const Vec3* raw33, double frame_h, double frame_w) {
  Frame14 reduced = reduce_keypoints(raw33);
  Frame14 centered = translate(reduced, root_offset(reduced));
  Frame14 normalized = normalize_unified_view(centered, frame_h, frame_w);
  for (std::size_t j = 0; j < kBodyJoints; ++j) {
    for (std::size_t a = 0; a < 3; ++a) {
      if (!std::isfinite(normalized[j][a])) {
        raise(ErrorCode::numeric,
              "process_frame: non-finite coordinate at joint " +
                  std::string(joint_name(static_cast<int>(j))));
      }
    }
  }
  return normalized;
}

ProcessedTracklet process_sequence(const RawPoseSequence& raw) {
  if (raw.frames() == 0) {
    raise(ErrorCode::data,
          "process_sequence: tracklet " + raw.tracklet_id + " has no frames");
  }
  ProcessedTracklet out;
  out.tracklet_id = raw.tracklet_id;
  out.person_id = raw.person_id;
  out.clothing_id = raw.clothing_id;
  out.camera_id = raw.camera_id;
  out.frames = raw.frames();
  out.joints.reserve(out.frames * kBodyJoints * 3);
  for (std::size_t f = 0; f < out.frames; ++f) {
    const Frame14 frame =
        process_frame(&raw.points[f * kRawKeypoints], raw.frame_h, raw.frame_w);
    for (std::size_t j = 0; j < kBodyJoints; ++j) {
      for (std::size_t a = 0; a < 3; ++a) {
        out.joints.push_back(frame[j][a]);
      }
    }
  }
  return out;
}

std::vector<std::size_t> choose_clip_indices(std::size_t available,
                                             std::size_t clip_len,
                                             std::size_t stride, Rng* rng) {
  if (clip_len == 0 || stride == 0) {
    raise(ErrorCode::config, "choose_clip_indices: clip length " +
                                 std::to_string(clip_len) + " and stride " +
                                 std::to_string(stride) +
                                 " must be positive");
  }
  if (available == 0) {
    raise(ErrorCode::data, "choose_clip_indices: tracklet has no frames");
  }
  std::vector<std::size_t> indices(clip_len);
  if (available < clip_len) {
    // Too short even at stride 1: loop the frames.
    for (std::size_t i = 0; i < clip_len; ++i) indices[i] = i % available;
    return indices;
  }
  // Largest stride that still fits; span((clip_len-1)*s + 1) <= available.
  std::size_t s = stride;
  while (s > 1 && (clip_len - 1) * s + 1 > available) --s;
  const std::size_t span = (clip_len - 1) * s + 1;
  const std::size_t starts = available - span + 1;
  const std::size_t start = rng ? rng->index(starts) : (starts - 1) / 2;
  for (std::size_t i = 0; i < clip_len; ++i) indices[i] = start + i * s;
  return indices;
}

namespace {

KeypointClip clip_at(const ProcessedTracklet& tracklet,
                     const std::vector<std::size_t>& indices) {
  KeypointClip clip;
  clip.tracklet_id = tracklet.tracklet_id;
  clip.person_id = tracklet.person_id;
  clip.clothing_id = tracklet.clothing_id;
  clip.camera_id = tracklet.camera_id;
  clip.frames = indices.size();
  clip.joints.reserve(indices.size() * kBodyJoints * 3);
  for (std::size_t f : indices) {
    const double* frame = tracklet.joints.data() + f * kBodyJoints * 3;
    clip.joints.insert(clip.joints.end(), frame, frame + kBodyJoints * 3);
  }
  return clip;
}

}  // namespace

KeypointClip sample_clip(const ProcessedTracklet& tracklet,
                         std::size_t clip_len, std::size_t stride, Rng& rng) {
  return clip_at(tracklet,
                 choose_clip_indices(tracklet.frames, clip_len, stride, &rng));
}

KeypointClip center_clip(const ProcessedTracklet& tracklet,
                         std::size_t clip_len, std::size_t stride) {
  return clip_at(
      tracklet, choose_clip_indices(tracklet.frames, clip_len, stride, nullptr));
}

std::vector<double> clip_statistics(const KeypointClip& clip) {
  const std::size_t coords = kBodyJoints * 3;
  std::vector<double> stats(2 * coords, 0.0);
  const double inv = 1.0 / static_cast<double>(clip.frames);
  for (std::size_t c = 0; c < coords; ++c) {
    double mean = 0.0;
    for (std::size_t f = 0; f < clip.frames; ++f) {
      mean += clip.joints[f * coords + c];
    }
    mean *= inv;
    double var = 0.0;
    for (std::size_t f = 0; f < clip.frames; ++f) {
      const double d = clip.joints[f * coords + c] - mean;
      var += d * d;
    }
    stats[c] = mean;
    stats[coords + c] = std::sqrt(var * inv);
  }
  return stats;
}

}  // namespace asgl
