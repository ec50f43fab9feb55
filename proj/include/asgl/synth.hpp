#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "asgl/pose.hpp"
#include "asgl/pose_io.hpp"

namespace asgl {

// One synthetic walker. Limbs swing along the depth axis as
// amplitude * sin(frequency * frame + phase), arms opposing legs; the
// whole figure is stretched by `scale`. Two identities with different
// parameters trace different joint trajectories.
struct SynthIdentity {
  std::string person_id;
  double frequency = 0.3;  // radians per frame
  double phase = 0.0;
  double amplitude = 0.35;
  double scale = 1.0;  // limb-length multiplier
};

// `count` identities named p000, p001, ... with gait parameters spread
// evenly across their ranges, so every pair is distinguishable.
std::vector<SynthIdentity> default_identities(std::size_t count);

struct SynthSpec {
  std::vector<SynthIdentity> identities;
  std::size_t tracklets_per_identity = 4;
  std::size_t frames_per_tracklet = 32;
  std::size_t clothing_variants = 2;
  std::size_t appearance_dim = 8;  // 0 leaves the appearance sidecar empty
  double appearance_noise = 0.05;
  std::uint64_t seed = 0;
};

struct SynthOutput {
  std::vector<RawPoseSequence> sequences;  // identity-major, tracklet order
  std::vector<std::pair<std::string, Split>> manifest;
  std::vector<std::pair<std::string, std::vector<double>>> appearance;
};

// Generates raw 33-keypoint tracklets plus matching manifest and appearance
// entries. Tracklet r of an identity is named "<person_id>_t<r>", wears
// clothing "c<r mod clothing_variants>", is shot by camera "cam<r mod 2>",
// and starts its gait cycle r / tracklets_per_identity of a turn late; the
// manifest sends r == 0 to the query split, r == 1 and r == 2 to the
// gallery (covering both clothing variants, so every protocol keeps its
// true matches), and the rest to training. Appearance vectors are a per-(identity, clothing)
// prototype plus per-tracklet noise, so they identify a person only while
// the clothing matches.
//
// Every coordinate lands on a 2^-20 grid and each raw keypoint of a joint
// cluster carries the same value, so keypoint reduction returns the intended
// skeleton exactly. Duplicate person ids, empty or zero-sized dimensions,
// negative noise, and non-finite gait parameters raise config errors.
SynthOutput synthesize_gait(const SynthSpec& spec);

}  // namespace asgl
