#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "asgl/graph.hpp"
#include "asgl/rng.hpp"

namespace asgl {

inline constexpr std::size_t kRawKeypoints = 33;

using Vec3 = std::array<double, 3>;
using Frame14 = std::array<Vec3, kBodyJoints>;

// An estimator output sequence: 33 keypoints per frame in image-ish
// coordinates, plus the labels retrieval cares about.
struct RawPoseSequence {
  std::string tracklet_id;
  std::string person_id;
  std::string clothing_id;
  std::string camera_id;
  double frame_h = 0.0;
  double frame_w = 0.0;
  std::vector<Vec3> points;  // frames * 33, frame-major

  std::size_t frames() const { return points.size() / kRawKeypoints; }
  const Vec3& point(std::size_t frame, std::size_t keypoint) const {
    return points[frame * kRawKeypoints + keypoint];
  }
};

// One source group per body joint; the joint is the mean of its raw
// keypoints, averaged in listed order. Raw wrist landmarks 15 and 16 are
// unused: the hand cluster stands in for the wrist region, and the neck is
// synthesized as the shoulder midpoint.
struct JointSource {
  int joint;
  std::vector<int> raw_indices;
};

const std::array<JointSource, kBodyJoints>& reduction_table();

Frame14 reduce_keypoints(const Vec3* raw33);

// Translation that moves the hip midpoint to the origin.
Vec3 root_offset(const Frame14& frame);

Frame14 translate(const Frame14& frame, const Vec3& delta);

// Divides x by the frame height, y by the width, z by their product.
Frame14 normalize_unified_view(const Frame14& frame, double frame_h,
                               double frame_w);

// reduce -> root-center -> normalize. Raises a numeric error if any output
// coordinate is not finite.
Frame14 process_frame(const Vec3* raw33, double frame_h, double frame_w);

// A whole tracklet, processed frame by frame.
struct ProcessedTracklet {
  std::string tracklet_id;
  std::string person_id;
  std::string clothing_id;
  std::string camera_id;
  std::size_t frames = 0;
  std::vector<double> joints;  // frames * 14 * 3

  double joint(std::size_t frame, std::size_t j, std::size_t axis) const {
    return joints[(frame * kBodyJoints + j) * 3 + axis];
  }
};

ProcessedTracklet process_sequence(const RawPoseSequence& raw);

// Fixed-length input to the model.
struct KeypointClip {
  std::string tracklet_id;
  std::string person_id;
  std::string clothing_id;
  std::string camera_id;
  std::size_t frames = 0;  // == clip length
  std::vector<double> joints;  // frames * 14 * 3
};

// Frame indices for a clip of clip_len frames sampled every stride frames.
// When the tracklet is too short for the stride, the stride shrinks to the
// largest one that fits; when it is shorter than the clip itself, frames
// loop. rng == nullptr picks the centered placement instead of a random one.
std::vector<std::size_t> choose_clip_indices(std::size_t available,
                                             std::size_t clip_len,
                                             std::size_t stride, Rng* rng);

KeypointClip sample_clip(const ProcessedTracklet& tracklet,
                         std::size_t clip_len, std::size_t stride, Rng& rng);

KeypointClip center_clip(const ProcessedTracklet& tracklet,
                         std::size_t clip_len, std::size_t stride);

// Per-joint mean and standard deviation over the clip's frames: 84 values.
// Input for the built-in appearance encoder.
std::vector<double> clip_statistics(const KeypointClip& clip);

}  // namespace asgl
